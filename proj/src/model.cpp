#include "htnet/model.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>
#include <stdexcept>

#include <json.hpp>

#include "htnet/rng.hpp"

namespace htnet {

namespace {

constexpr char kMagic[4] = {'H', 'T', 'N', 'C'};
constexpr std::uint32_t kVersion = 1;

double quantize_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

Tensor uniform_weight(Rng& rng, int rows, int cols, double gain = 1.0) {
    const double bound = gain / std::sqrt(static_cast<double>(rows));
    std::vector<double> data(static_cast<size_t>(rows) * cols);
    for (double& v : data) v = quantize_f32(rng.uniform(-bound, bound));
    return Tensor::from({rows, cols}, std::move(data), true);
}

// residual branches start close to the identity so the stack trains from a
// shallow model outward; the head starts small so initial poses sit near the
// origin
constexpr double kBranchOutGain = 0.01;
constexpr double kHeadGain = 0.1;

LayerNormParams make_ln(int width) {
    return {Tensor::full({width}, 1.0, true), Tensor::zeros({width}, true)};
}

Tensor zero_bias(int width) { return Tensor::zeros({width}, true); }

Tensor mlp_apply(const MlpParams& p, const Tensor& x) {
    return matmul(gelu(matmul(x, p.w1)), p.w2);
}

// limb-major gather orders used by the part-level block
struct IpcIndices {
    std::vector<int> two_three;      // (2-,3-PDoF) per limb, 8 rows
    std::vector<int> one_two_three;  // (1-,2-,3-PDoF) per limb, 12 rows
    std::vector<int> three;          // 3-PDoF joint per limb, 4 rows
    std::vector<int> dup;            // {0,0,1,1,2,2,3,3}
};

IpcIndices ipc_indices(const SkeletonSpec& spec) {
    IpcIndices ix;
    for (std::size_t l = 0; l < spec.limbs().size(); ++l) {
        const Limb& limb = spec.limbs()[l];
        ix.two_three.push_back(limb.two);
        ix.two_three.push_back(limb.three);
        ix.one_two_three.push_back(limb.one);
        ix.one_two_three.push_back(limb.two);
        ix.one_two_three.push_back(limb.three);
        ix.three.push_back(limb.three);
        ix.dup.push_back(static_cast<int>(l));
        ix.dup.push_back(static_cast<int>(l));
    }
    return ix;
}

}  // namespace

std::string variant_name(Variant v) {
    switch (v) {
        case Variant::progressive: return "progressive";
        case Variant::parallel: return "parallel";
        case Variant::serial: return "serial";
    }
    return "?";
}

Variant variant_from_name(const std::string& s) {
    if (s == "progressive") return Variant::progressive;
    if (s == "parallel") return Variant::parallel;
    if (s == "serial") return Variant::serial;
    throw std::invalid_argument("unknown structure variant '" + s +
                                "' (expected progressive, parallel or serial)");
}

void ModelConfig::validate() const {
    if (channels <= 0 || channels % 24 != 0)
        throw std::invalid_argument("channels must be a positive multiple of 24, got " +
                                    std::to_string(channels));
    if (mixers < 0) throw std::invalid_argument("mixers must be >= 0");
    if (heads < 1) throw std::invalid_argument("heads must be >= 1");
    if (joint_count < 13)
        throw std::invalid_argument("joint_count must cover 4 limbs plus a root, got " +
                                    std::to_string(joint_count));
    if (mlp_ratio < 1) throw std::invalid_argument("mlp_ratio must be >= 1");
    if (block_width() % heads != 0)
        throw std::invalid_argument("block width " + std::to_string(block_width()) +
                                    " is not divisible by " + std::to_string(heads) + " heads");
}

ModelConfig model_config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("model config JSON is malformed: ") + e.what());
    }
    ModelConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "channels") cfg.channels = it->get<int>();
        else if (k == "mixers") cfg.mixers = it->get<int>();
        else if (k == "heads") cfg.heads = it->get<int>();
        else if (k == "joints") cfg.joint_count = it->get<int>();
        else if (k == "mlp_ratio") cfg.mlp_ratio = it->get<int>();
        else if (k == "variant") cfg.variant = variant_from_name(it->get<std::string>());
        else if (k == "blocks") {
            cfg.use_ljc = cfg.use_ipc = cfg.use_gbi = false;
            for (const auto& b : *it) {
                const std::string name = b.get<std::string>();
                if (name == "ljc") cfg.use_ljc = true;
                else if (name == "ipc") cfg.use_ipc = true;
                else if (name == "gbi") cfg.use_gbi = true;
                else throw std::invalid_argument("unknown block '" + name + "' in model config");
            }
        } else {
            throw std::invalid_argument("unknown model config key '" + k + "'");
        }
    }
    cfg.validate();
    return cfg;
}

std::string model_config_to_json_text(const ModelConfig& cfg) {
    nlohmann::json j;
    j["channels"] = cfg.channels;
    j["mixers"] = cfg.mixers;
    j["heads"] = cfg.heads;
    j["joints"] = cfg.joint_count;
    j["mlp_ratio"] = cfg.mlp_ratio;
    j["variant"] = variant_name(cfg.variant);
    auto blocks = nlohmann::json::array();
    if (cfg.use_ljc) blocks.push_back("ljc");
    if (cfg.use_ipc) blocks.push_back("ipc");
    if (cfg.use_gbi) blocks.push_back("gbi");
    j["blocks"] = blocks;
    return j.dump();
}

ModelParams init_params(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Rng rng(seed);
    const int c = cfg.channels;
    const int w = cfg.block_width();
    const int n = cfg.joint_count;

    ModelParams p;
    p.config = cfg;
    p.embed_w = uniform_weight(rng, 2, c);
    {
        std::vector<double> pos(static_cast<size_t>(n) * c);
        for (double& v : pos) v = quantize_f32(rng.uniform(-0.01, 0.01));
        p.e_pos = Tensor::from({n, c}, std::move(pos), true);
    }
    for (int m = 0; m < cfg.mixers; ++m) {
        MixerParams mp;
        if (cfg.use_ljc)
            mp.ljc = LjcParams{uniform_weight(rng, w, w), uniform_weight(rng, w, w, kBranchOutGain)};
        if (cfg.use_ipc) {
            IpcParams ip;
            ip.conv1_w = uniform_weight(rng, 2 * w, w);
            ip.conv2_w = uniform_weight(rng, 3 * w, w);
            ip.ln1 = make_ln(w);
            ip.mlp1 = {uniform_weight(rng, w, cfg.mlp_ratio * w),
                       uniform_weight(rng, cfg.mlp_ratio * w, w, kBranchOutGain)};
            ip.ln2 = make_ln(w);
            ip.mlp2 = {uniform_weight(rng, w, cfg.mlp_ratio * w),
                       uniform_weight(rng, cfg.mlp_ratio * w, w, kBranchOutGain)};
            mp.ipc = std::move(ip);
        }
        if (cfg.use_gbi) {
            GbiParams gp;
            gp.wq = uniform_weight(rng, w, w);
            gp.bq = zero_bias(w);
            gp.wk = uniform_weight(rng, w, w);
            gp.bk = zero_bias(w);
            gp.wv = uniform_weight(rng, w, w);
            gp.bv = zero_bias(w);
            gp.wo = uniform_weight(rng, w, w);
            gp.bo = zero_bias(w);
            gp.ln = make_ln(w);
            mp.gbi = std::move(gp);
        }
        mp.mlp_ln = make_ln(c);
        mp.mlp = {uniform_weight(rng, c, cfg.mlp_ratio * c),
                  uniform_weight(rng, cfg.mlp_ratio * c, c, kBranchOutGain)};
        p.mixers.push_back(std::move(mp));
    }
    p.head_w = uniform_weight(rng, c, 3, kHeadGain);
    return p;
}

namespace {

template <typename Params, typename Fn>
void walk_params(Params& p, const Fn& fn) {
    fn("embed.weight", p.embed_w);
    fn("pos_embed", p.e_pos);
    for (std::size_t m = 0; m < p.mixers.size(); ++m) {
        const std::string pre = "mixers." + std::to_string(m) + ".";
        auto& mp = p.mixers[m];
        if (mp.ljc) {
            fn(pre + "ljc.w1", mp.ljc->w1);
            fn(pre + "ljc.w2", mp.ljc->w2);
        }
        if (mp.ipc) {
            fn(pre + "ipc.conv1.weight", mp.ipc->conv1_w);
            fn(pre + "ipc.conv2.weight", mp.ipc->conv2_w);
            fn(pre + "ipc.ln1.gamma", mp.ipc->ln1.gamma);
            fn(pre + "ipc.ln1.beta", mp.ipc->ln1.beta);
            fn(pre + "ipc.mlp1.w1", mp.ipc->mlp1.w1);
            fn(pre + "ipc.mlp1.w2", mp.ipc->mlp1.w2);
            fn(pre + "ipc.ln2.gamma", mp.ipc->ln2.gamma);
            fn(pre + "ipc.ln2.beta", mp.ipc->ln2.beta);
            fn(pre + "ipc.mlp2.w1", mp.ipc->mlp2.w1);
            fn(pre + "ipc.mlp2.w2", mp.ipc->mlp2.w2);
        }
        if (mp.gbi) {
            fn(pre + "gbi.q.weight", mp.gbi->wq);
            fn(pre + "gbi.q.bias", mp.gbi->bq);
            fn(pre + "gbi.k.weight", mp.gbi->wk);
            fn(pre + "gbi.k.bias", mp.gbi->bk);
            fn(pre + "gbi.v.weight", mp.gbi->wv);
            fn(pre + "gbi.v.bias", mp.gbi->bv);
            fn(pre + "gbi.out.weight", mp.gbi->wo);
            fn(pre + "gbi.out.bias", mp.gbi->bo);
            fn(pre + "gbi.ln.gamma", mp.gbi->ln.gamma);
            fn(pre + "gbi.ln.beta", mp.gbi->ln.beta);
        }
        fn(pre + "mlp_ln.gamma", mp.mlp_ln.gamma);
        fn(pre + "mlp_ln.beta", mp.mlp_ln.beta);
        fn(pre + "mlp.w1", mp.mlp.w1);
        fn(pre + "mlp.w2", mp.mlp.w2);
    }
    fn("head.weight", p.head_w);
}

}  // namespace

void for_each_param(ModelParams& p, const std::function<void(const std::string&, Tensor&)>& fn) {
    walk_params(p, fn);
}

void for_each_param(const ModelParams& p,
                    const std::function<void(const std::string&, const Tensor&)>& fn) {
    walk_params(p, fn);
}

std::size_t param_count(const ModelParams& p) {
    std::size_t total = 0;
    for_each_param(p, [&](const std::string&, const Tensor& t) { total += t.size(); });
    return total;
}

std::vector<std::pair<std::string, std::size_t>> param_breakdown(const ModelParams& p) {
    std::vector<std::pair<std::string, std::size_t>> out = {
        {"embed", 0}, {"pos_embed", 0}, {"ljc", 0}, {"ipc", 0},
        {"gbi", 0},   {"mixer_mlp", 0}, {"head", 0}};
    auto bucket = [&](const std::string& label) -> std::size_t& {
        for (auto& [k, v] : out)
            if (k == label) return v;
        throw std::logic_error("no bucket " + label);
    };
    for_each_param(p, [&](const std::string& name, const Tensor& t) {
        if (name.starts_with("embed.")) bucket("embed") += t.size();
        else if (name == "pos_embed") bucket("pos_embed") += t.size();
        else if (name.find(".ljc.") != std::string::npos) bucket("ljc") += t.size();
        else if (name.find(".ipc.") != std::string::npos) bucket("ipc") += t.size();
        else if (name.find(".gbi.") != std::string::npos) bucket("gbi") += t.size();
        else if (name.starts_with("head.")) bucket("head") += t.size();
        else bucket("mixer_mlp") += t.size();
    });
    return out;
}

Tensor embed(const ModelParams& p, const Mat& pose2d) {
    const int n = p.config.joint_count;
    if (pose2d.rows != n || pose2d.cols != 2)
        throw std::invalid_argument("embed: pose is " + shape_str(pose2d.rows, pose2d.cols) +
                                    " but model expects " + shape_str(n, 2));
    return add(matmul(Tensor::from_mat(pose2d), p.embed_w), p.e_pos);
}

Tensor ljc_forward(const LjcParams& p, const Tensor& x, const Tensor& adj) {
    Tensor h = gelu(matmul(adj, matmul(x, p.w1)));
    return add(x, matmul(adj, matmul(h, p.w2)));
}

Tensor ipc_forward(const IpcParams& p, const Tensor& x, const Tensor& carry,
                   const SkeletonSpec& spec) {
    const Tensor xt = carry.defined() ? add(x, carry) : x;
    const int n = xt.dim(0);
    const int w = xt.dim(1);
    if (n != spec.joint_count())
        throw std::invalid_argument("ipc_forward: input has " + std::to_string(n) +
                                    " rows but skeleton has " + std::to_string(spec.joint_count()));
    const IpcIndices ix = ipc_indices(spec);

    Tensor f1 = gelu(matmul(reshape(gather_rows(xt, ix.two_three), {4, 2 * w}), p.conv1_w));
    f1 = add(f1, mlp_apply(p.mlp1, layer_norm(f1, p.ln1.gamma, p.ln1.beta)));
    Tensor f2 = gelu(matmul(reshape(gather_rows(xt, ix.one_two_three), {4, 3 * w}), p.conv2_w));
    f2 = add(f2, mlp_apply(p.mlp2, layer_norm(f2, p.ln2.gamma, p.ln2.beta)));

    // write limb features back: 3-PDoF joints collect both constraint terms,
    // 2-PDoF joints one, everything else passes through (zero fill)
    Tensor r1 = scatter_rows(f1, ix.three, n);
    Tensor r2 = scatter_rows(gather_rows(f2, ix.dup), ix.two_three, n);
    return add(add(xt, r1), r2);
}

Tensor gbi_forward(const GbiParams& p, const Tensor& x, const Tensor& carry, int heads,
                   ForwardTrace* trace) {
    const Tensor xt = carry.defined() ? add(x, carry) : x;
    const int w = xt.dim(1);
    if (heads < 1 || w % heads != 0)
        throw std::invalid_argument("gbi_forward: width " + std::to_string(w) +
                                    " not divisible by " + std::to_string(heads) + " heads");
    const int d = w / heads;

    Tensor q = add_row_bias(matmul(xt, p.wq), p.bq);
    Tensor k = add_row_bias(matmul(xt, p.wk), p.bk);
    Tensor v = add_row_bias(matmul(xt, p.wv), p.bv);

    const std::vector<int> widths(static_cast<size_t>(heads), d);
    auto qs = split_channels(q, widths);
    auto ks = split_channels(k, widths);
    auto vs = split_channels(v, widths);

    std::vector<Tensor> hs;
    for (int i = 0; i < heads; ++i) {
        Tensor logits = scale(matmul(qs[i], transpose(ks[i])), 1.0 / std::sqrt(static_cast<double>(d)));
        Tensor probs = softmax_rows(logits);
        if (trace) trace->attention.push_back(probs.to_mat());
        hs.push_back(matmul(probs, vs[i]));
    }
    Tensor msa = add_row_bias(matmul(concat_channels(hs), p.wo), p.bo);
    return add(xt, layer_norm(msa, p.ln.gamma, p.ln.beta));
}

Tensor mixer_forward(const MixerParams& p, const ModelConfig& cfg, const Tensor& x,
                     const SkeletonSpec& spec, const Tensor& adj, ForwardTrace* trace) {
    Tensor y;
    if (cfg.variant == Variant::serial) {
        y = x;
        if (p.ljc) y = ljc_forward(*p.ljc, y, adj);
        if (p.ipc) y = ipc_forward(*p.ipc, y, Tensor(), spec);
        if (p.gbi) y = gbi_forward(*p.gbi, y, Tensor(), cfg.heads, trace);
    } else {
        const int w = cfg.block_width();
        const std::vector<int> widths = {w, w, w};
        auto parts = split_channels(x, widths);
        const bool progressive = cfg.variant == Variant::progressive;

        Tensor carry;  // previous enabled block's output
        Tensor y_ljc = parts[0];
        if (p.ljc) carry = y_ljc = ljc_forward(*p.ljc, parts[0], adj);
        Tensor y_ipc = parts[1];
        if (p.ipc) carry = y_ipc = ipc_forward(*p.ipc, parts[1], progressive ? carry : Tensor(), spec);
        Tensor y_gbi = parts[2];
        if (p.gbi) y_gbi = gbi_forward(*p.gbi, parts[2], progressive ? carry : Tensor(), cfg.heads, trace);

        const std::vector<Tensor> ys = {y_ljc, y_ipc, y_gbi};
        y = concat_channels(ys);
    }
    return add(y, mlp_apply(p.mlp, layer_norm(y, p.mlp_ln.gamma, p.mlp_ln.beta)));
}

Tensor model_forward_graph(const ModelParams& p, const Mat& pose2d, const SkeletonSpec& spec,
                           const Tensor& adj, ForwardTrace* trace) {
    if (spec.joint_count() != p.config.joint_count)
        throw std::invalid_argument("model_forward: skeleton has " +
                                    std::to_string(spec.joint_count()) + " joints but model expects " +
                                    std::to_string(p.config.joint_count));
    Tensor x = embed(p, pose2d);
    for (const MixerParams& mp : p.mixers) x = mixer_forward(mp, p.config, x, spec, adj, trace);
    return matmul(x, p.head_w);
}

Mat model_forward(const ModelParams& p, const Mat& pose2d, const SkeletonSpec& spec,
                  ForwardTrace* trace) {
    const Tensor adj = Tensor::from_mat(normalized_adjacency(spec));
    Mat out = model_forward_graph(p, pose2d, spec, adj, trace).to_mat();
    for (double& v : out.v) v *= kOutputScaleMm;
    return out;
}

// --- checkpoint --------------------------------------------------------------

namespace {

void put_u32(std::ostream& os, std::uint32_t v) { os.write(reinterpret_cast<const char*>(&v), 4); }
void put_u64(std::ostream& os, std::uint64_t v) { os.write(reinterpret_cast<const char*>(&v), 8); }

std::uint32_t get_u32(std::istream& is, const std::string& what) {
    std::uint32_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 4))
        throw std::runtime_error("checkpoint truncated while reading " + what);
    return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& what) {
    std::uint64_t v = 0;
    if (!is.read(reinterpret_cast<char*>(&v), 8))
        throw std::runtime_error("checkpoint truncated while reading " + what);
    return v;
}

}  // namespace

void save_checkpoint(const std::string& path, const ModelParams& p) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write checkpoint: " + path);
    os.write(kMagic, 4);
    put_u32(os, kVersion);
    const std::string cfg = model_config_to_json_text(p.config);
    put_u32(os, static_cast<std::uint32_t>(cfg.size()));
    os.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));

    std::uint32_t count = 0;
    for_each_param(p, [&](const std::string&, const Tensor&) { ++count; });
    put_u32(os, count);
    for_each_param(p, [&](const std::string& name, const Tensor& t) {
        put_u32(os, static_cast<std::uint32_t>(name.size()));
        os.write(name.data(), static_cast<std::streamsize>(name.size()));
        put_u32(os, static_cast<std::uint32_t>(t.rank()));
        for (int i = 0; i < t.rank(); ++i) put_u64(os, static_cast<std::uint64_t>(t.dim(i)));
        for (double v : t.values()) {
            const float f = static_cast<float>(v);
            os.write(reinterpret_cast<const char*>(&f), 4);
        }
    });
    if (!os) throw std::runtime_error("write failed for checkpoint: " + path);
}

ModelParams load_checkpoint(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open checkpoint: " + path);
    char magic[4] = {};
    if (!is.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw std::runtime_error("not a checkpoint file (bad magic): " + path);
    const std::uint32_t version = get_u32(is, "version");
    if (version != kVersion)
        throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
    const std::uint32_t cfg_len = get_u32(is, "config length");
    std::string cfg_text(cfg_len, '\0');
    if (!is.read(cfg_text.data(), cfg_len))
        throw std::runtime_error("checkpoint truncated while reading config");
    const ModelConfig cfg = model_config_from_json_text(cfg_text);

    // allocate the full structure, then fill tensors by name
    ModelParams p = init_params(cfg, 0);
    std::map<std::string, Tensor*> registry;
    for_each_param(p, [&](const std::string& name, Tensor& t) { registry[name] = &t; });

    const std::uint32_t count = get_u32(is, "tensor count");
    if (count != registry.size())
        throw std::runtime_error("checkpoint has " + std::to_string(count) + " tensors but config implies " +
                                 std::to_string(registry.size()));
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t name_len = get_u32(is, "tensor name length");
        std::string name(name_len, '\0');
        if (!is.read(name.data(), name_len))
            throw std::runtime_error("checkpoint truncated while reading tensor name");
        auto it = registry.find(name);
        if (it == registry.end())
            throw std::runtime_error("checkpoint contains unknown tensor '" + name + "'");
        Tensor& t = *it->second;
        const std::uint32_t rank = get_u32(is, "rank of " + name);
        if (rank != static_cast<std::uint32_t>(t.rank()))
            throw std::runtime_error("tensor '" + name + "' has rank " + std::to_string(rank) +
                                     " but config implies " + std::to_string(t.rank()));
        for (std::uint32_t r = 0; r < rank; ++r) {
            const std::uint64_t dim = get_u64(is, "dims of " + name);
            if (dim != static_cast<std::uint64_t>(t.dim(static_cast<int>(r))))
                throw std::runtime_error("tensor '" + name + "' has unexpected shape in checkpoint");
        }
        auto vals = t.values_mut();
        for (std::size_t k = 0; k < vals.size(); ++k) {
            float f = 0;
            if (!is.read(reinterpret_cast<char*>(&f), 4))
                throw std::runtime_error("checkpoint truncated while reading '" + name + "'");
            vals[k] = static_cast<double>(f);
        }
        registry.erase(it);
    }
    if (!registry.empty())
        throw std::runtime_error("checkpoint is missing tensor '" + registry.begin()->first + "'");
    return p;
}

}  // namespace htnet
