#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "htnet/data.hpp"
#include "htnet/model.hpp"

namespace htnet {

struct TrainConfig {
    int epochs = 30;
    int batch_size = 512;
    double learning_rate = 1e-3;
    double lr_decay_per_epoch = 0.95;
    std::uint64_t seed = 0;
    bool shuffle = true;
    // when set, a checkpoint is written to <out_dir>/checkpoint.htnc at the
    // end (and per epoch when checkpoint_per_epoch is on)
    std::string out_dir;
    bool checkpoint_per_epoch = false;

    void validate() const;
};

TrainConfig train_config_from_json_text(const std::string& text);
std::string train_config_to_json_text(const TrainConfig& cfg);

struct StepRecord {
    int step = 0;
    int epoch = 0;
    double lr = 0.0;
    double loss = 0.0;
};

struct TrainResult {
    std::vector<StepRecord> trace;
};

// Adam with bias correction. State buffers are laid out in parameter
// registration order; values are re-quantized to f32 after each step so
// checkpoints stay exact.
class AdamOptimizer {
public:
    static constexpr double kBeta1 = 0.9;
    static constexpr double kBeta2 = 0.999;
    static constexpr double kEps = 1e-8;

    // applies one step from the accumulated gradients, then clears them
    void step(ModelParams& params, double lr);

private:
    std::vector<std::vector<double>> m_, v_;
    long t_ = 0;
};

// Mean over frames and joints of the squared Euclidean joint error.
double l2_loss(std::span<const Mat> pred, std::span<const Mat> gt);

// Same loss as a graph node over a batch of per-sample outputs (model units).
Tensor l2_loss_graph(std::span<const Tensor> pred, std::span<const Mat> gt);

// Adam loop over the dataset. Samples must carry normalized 2D inputs;
// 3D targets stay in millimeters and are scaled to model units internally.
// Deterministic given cfg.seed (which also drives shuffling). Aborts with a
// diagnostic naming the step if the loss goes non-finite.
TrainResult train(ModelParams& params, const SkeletonSpec& spec,
                  std::span<const PoseSample> data, const TrainConfig& cfg);

void write_loss_csv(const std::string& path, std::span<const StepRecord> trace);

}  // namespace htnet
