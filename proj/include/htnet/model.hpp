#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "htnet/skeleton.hpp"
#include "htnet/tensor.hpp"

namespace htnet {

// Wiring of the three per-mixer blocks: channel-split with carry residuals
// (progressive), channel-split without them (parallel), or all blocks
// stacked at full width (serial).
enum class Variant { progressive, parallel, serial };

std::string variant_name(Variant v);
Variant variant_from_name(const std::string& s);

struct ModelConfig {
    int channels = 240;    // C; must be divisible by 24
    int mixers = 3;        // stacked hierarchical mixers
    int heads = 8;         // attention heads
    int joint_count = 17;  // N
    int mlp_ratio = 6;     // hidden multiplier of every channel MLP
    Variant variant = Variant::progressive;
    // block toggles; a disabled block passes its slice through unchanged
    bool use_ljc = true;
    bool use_ipc = true;
    bool use_gbi = true;

    // width each block operates on: C/3 for split variants, C for serial
    int block_width() const { return variant == Variant::serial ? channels : channels / 3; }
    void validate() const;

    bool operator==(const ModelConfig&) const = default;
};

ModelConfig model_config_from_json_text(const std::string& text);
std::string model_config_to_json_text(const ModelConfig& cfg);

struct LayerNormParams {
    Tensor gamma, beta;
};

// fc -> GELU -> fc, biasless
struct MlpParams {
    Tensor w1, w2;
};

struct LjcParams {
    Tensor w1, w2;  // one weight matrix per GCN application
};

struct IpcParams {
    // limb convolutions as reshaped matmuls: kernel 2 over (2-,3-PDoF) rows
    // and kernel 3 over (1-,2-,3-PDoF) rows, stride = kernel, one output row
    // per limb
    Tensor conv1_w;  // (2w x w)
    Tensor conv2_w;  // (3w x w)
    LayerNormParams ln1, ln2;
    MlpParams mlp1, mlp2;
};

struct GbiParams {
    Tensor wq, bq, wk, bk, wv, bv, wo, bo;
    LayerNormParams ln;  // norm on the attention branch
};

struct MixerParams {
    std::optional<LjcParams> ljc;
    std::optional<IpcParams> ipc;
    std::optional<GbiParams> gbi;
    LayerNormParams mlp_ln;
    MlpParams mlp;
};

struct ModelParams {
    ModelConfig config;
    Tensor embed_w;  // 2 x C
    Tensor e_pos;    // N x C
    std::vector<MixerParams> mixers;
    Tensor head_w;  // C x 3
};

// Deterministic init: uniform fan-in scaling for weights, zeros for biases,
// ones/zeros for layer norms, small uniform for the positional matrix. All
// values are quantized to f32 so a checkpoint round-trip is exact.
ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed);

// Visits every learnable tensor in a fixed registration order. The order
// defines the init draw sequence, optimizer accumulation order and the
// checkpoint layout.
void for_each_param(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn);
void for_each_param(const ModelParams& p,
                    const std::function<void(const std::string&, const Tensor&)>& fn);

std::size_t param_count(const ModelParams& p);
// (label, count) per component: embed, pos_embed, ljc, ipc, gbi, mixer_mlp, head
std::vector<std::pair<std::string, std::size_t>> param_breakdown(const ModelParams& p);

// Per-head attention probabilities recorded during a forward pass,
// mixer-major then head-major.
struct ForwardTrace {
    std::vector<Mat> attention;
};

// X0 = pose2d * W_embed + E_pos; pose2d must be the normalized N x 2 input
Tensor embed(const ModelParams& p, const Mat& pose2d);

// y = x + A(gelu(A x W1)) W2 with A the normalized adjacency
Tensor ljc_forward(const LjcParams& p, const Tensor& x, const Tensor& adj);

// Part-level constraint: limb features from strided convolutions over the
// limb-gathered rows are written back onto the 2-/3-PDoF joints; all other
// rows pass through untouched. carry (the previous block's output) is added
// to x first when defined.
Tensor ipc_forward(const IpcParams& p, const Tensor& x, const Tensor& carry,
                   const SkeletonSpec& spec);

// Multi-head self-attention over all joints: y = x~ + LN(MSA(x~)), with the
// LN applied to the attention branch before the residual add.
Tensor gbi_forward(const GbiParams& p, const Tensor& x, const Tensor& carry, int heads,
                   ForwardTrace* trace = nullptr);

Tensor mixer_forward(const MixerParams& p, const ModelConfig& cfg, const Tensor& x,
                     const SkeletonSpec& spec, const Tensor& adj, ForwardTrace* trace = nullptr);

// Full forward on the graph, output in model units (meters). adj must be the
// normalized adjacency of spec as a constant tensor.
Tensor model_forward_graph(const ModelParams& p, const Mat& pose2d, const SkeletonSpec& spec,
                           const Tensor& adj, ForwardTrace* trace = nullptr);

// Convenience forward returning millimeters.
Mat model_forward(const ModelParams& p, const Mat& pose2d, const SkeletonSpec& spec,
                  ForwardTrace* trace = nullptr);

// poses are stored in millimeters; the regression head works in meters
constexpr double kOutputScaleMm = 1000.0;

// Versioned binary checkpoint (layout in docs/formats.md). load(save(p))
// reproduces p exactly.
void save_checkpoint(const std::string& path, const ModelParams& p);
ModelParams load_checkpoint(const std::string& path);

}  // namespace htnet
