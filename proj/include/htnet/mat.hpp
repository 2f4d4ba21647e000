#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace htnet {

// Dense row-major matrix of doubles. Plain value type used by the pose,
// skeleton and metrics code; the autograd Tensor lives in tensor.hpp.
struct Mat {
    int rows = 0;
    int cols = 0;
    std::vector<double> v;

    Mat() = default;
    Mat(int r, int c, double fill = 0.0) : rows(r), cols(c), v(static_cast<size_t>(r) * c, fill) {}
    Mat(int r, int c, std::vector<double> data) : rows(r), cols(c), v(std::move(data)) {
        if (v.size() != static_cast<size_t>(r) * c)
            throw std::invalid_argument("Mat: data size " + std::to_string(v.size()) +
                                        " does not match " + std::to_string(r) + "x" + std::to_string(c));
    }

    double& operator()(int i, int j) { return v[static_cast<size_t>(i) * cols + j]; }
    double operator()(int i, int j) const { return v[static_cast<size_t>(i) * cols + j]; }

    bool same_shape(const Mat& o) const { return rows == o.rows && cols == o.cols; }
};

inline std::string shape_str(int r, int c) {
    return "(" + std::to_string(r) + "x" + std::to_string(c) + ")";
}

}  // namespace htnet
