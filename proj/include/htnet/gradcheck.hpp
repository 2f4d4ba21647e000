#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "htnet/model.hpp"

namespace htnet {

struct GradCheckReport {
    struct Group {
        std::string name;
        double max_rel_err = 0.0;
    };
    std::vector<Group> groups;
    double max_rel_err = 0.0;
    bool passed = false;
    double tolerance = 0.0;
};

// Compares reverse-mode gradients of the batch L2 loss against central finite
// differences, scalar by scalar, over every parameter group. The reference
// side only ever evaluates the forward pass. Inputs are synthetic and
// deterministic given seed.
GradCheckReport gradcheck_model(const ModelConfig& cfg, std::uint64_t seed, double step = 1e-5,
                                double tolerance = 1e-4);

}  // namespace htnet
