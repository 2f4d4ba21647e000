#include "htnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <stdexcept>

#include <json.hpp>

#include "htnet/rng.hpp"

namespace htnet {

void TrainConfig::validate() const {
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(lr_decay_per_epoch > 0.0) || lr_decay_per_epoch > 1.0)
        throw std::invalid_argument("lr_decay_per_epoch must be in (0, 1]");
}

TrainConfig train_config_from_json_text(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw std::invalid_argument(std::string("train config JSON is malformed: ") + e.what());
    }
    TrainConfig cfg;
    for (auto it = j.begin(); it != j.end(); ++it) {
        const std::string& k = it.key();
        if (k == "epochs") cfg.epochs = it->get<int>();
        else if (k == "batch_size") cfg.batch_size = it->get<int>();
        else if (k == "learning_rate") cfg.learning_rate = it->get<double>();
        else if (k == "lr_decay_per_epoch") cfg.lr_decay_per_epoch = it->get<double>();
        else if (k == "seed") cfg.seed = it->get<std::uint64_t>();
        else if (k == "shuffle") cfg.shuffle = it->get<bool>();
        else if (k == "checkpoint_per_epoch") cfg.checkpoint_per_epoch = it->get<bool>();
        else throw std::invalid_argument("unknown train config key '" + k + "'");
    }
    cfg.validate();
    return cfg;
}

std::string train_config_to_json_text(const TrainConfig& cfg) {
    nlohmann::json j;
    j["epochs"] = cfg.epochs;
    j["batch_size"] = cfg.batch_size;
    j["learning_rate"] = cfg.learning_rate;
    j["lr_decay_per_epoch"] = cfg.lr_decay_per_epoch;
    j["seed"] = cfg.seed;
    j["shuffle"] = cfg.shuffle;
    j["checkpoint_per_epoch"] = cfg.checkpoint_per_epoch;
    return j.dump();
}

double l2_loss(std::span<const Mat> pred, std::span<const Mat> gt) {
    if (pred.size() != gt.size())
        throw std::invalid_argument("l2_loss: " + std::to_string(pred.size()) + " frames vs " +
                                    std::to_string(gt.size()));
    double sum = 0.0;
    std::size_t joints = 0;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        if (!pred[f].same_shape(gt[f]) || pred[f].cols != 3)
            throw std::invalid_argument("l2_loss: frame " + std::to_string(f) + " shapes " +
                                        shape_str(pred[f].rows, pred[f].cols) + " vs " +
                                        shape_str(gt[f].rows, gt[f].cols));
        for (int i = 0; i < pred[f].rows; ++i)
            for (int c = 0; c < 3; ++c) {
                const double d = pred[f](i, c) - gt[f](i, c);
                sum += d * d;
            }
        joints += static_cast<std::size_t>(pred[f].rows);
    }
    return joints ? sum / static_cast<double>(joints) : 0.0;
}

Tensor l2_loss_graph(std::span<const Tensor> pred, std::span<const Mat> gt) {
    if (pred.empty() || pred.size() != gt.size())
        throw std::invalid_argument("l2_loss_graph: " + std::to_string(pred.size()) + " frames vs " +
                                    std::to_string(gt.size()));
    Tensor acc;
    for (std::size_t f = 0; f < pred.size(); ++f) {
        Tensor ms = mean_sq(sub(pred[f], Tensor::from_mat(gt[f])));
        acc = acc.defined() ? add(acc, ms) : ms;
    }
    // mean_sq averages over N*3 entries; per-joint squared distance sums 3
    return scale(acc, 3.0 / static_cast<double>(pred.size()));
}

void AdamOptimizer::step(ModelParams& params, double lr) {
    if (m_.empty()) {
        for_each_param(params, [&](const std::string&, Tensor& t) {
            m_.emplace_back(t.size(), 0.0);
            v_.emplace_back(t.size(), 0.0);
        });
    }
    ++t_;
    const double bc1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
    std::size_t k = 0;
    for_each_param(params, [&](const std::string&, Tensor& t) {
        auto vals = t.values_mut();
        auto g = t.grad();
        auto& m = m_[k];
        auto& v = v_[k];
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double gi = g.empty() ? 0.0 : g[i];
            m[i] = kBeta1 * m[i] + (1.0 - kBeta1) * gi;
            v[i] = kBeta2 * v[i] + (1.0 - kBeta2) * gi * gi;
            const double mhat = m[i] / bc1;
            const double vhat = v[i] / bc2;
            const double step = lr * mhat / (std::sqrt(vhat) + kEps);
            // keep parameters exactly f32-representable for checkpoint round-trips
            vals[i] = static_cast<double>(static_cast<float>(vals[i] - step));
        }
        t.zero_grad();
        ++k;
    });
}

TrainResult train(ModelParams& params, const SkeletonSpec& spec, std::span<const PoseSample> data,
                  const TrainConfig& cfg) {
    cfg.validate();
    if (data.empty()) throw std::invalid_argument("train: dataset is empty");
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data[i].p2d.rows != spec.joint_count() || data[i].p3d.rows != spec.joint_count())
            throw std::invalid_argument("train: sample " + std::to_string(i) + " has " +
                                        std::to_string(data[i].p2d.rows) + " joints but skeleton has " +
                                        std::to_string(spec.joint_count()));

    const Tensor adj = Tensor::from_mat(normalized_adjacency(spec));
    // targets in model units (meters)
    std::vector<Mat> targets;
    targets.reserve(data.size());
    for (const PoseSample& s : data) {
        Mat t = s.p3d;
        for (double& v : t.v) v /= kOutputScaleMm;
        targets.push_back(std::move(t));
    }

    if (!cfg.out_dir.empty()) std::filesystem::create_directories(cfg.out_dir);

    Rng rng(cfg.seed);
    AdamOptimizer adam;
    TrainResult result;
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), 0);

    int step = 0;
    double lr = cfg.learning_rate;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        if (cfg.shuffle) rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<size_t>(cfg.batch_size)) {
            const std::size_t stop = std::min(order.size(), start + static_cast<size_t>(cfg.batch_size));
            std::vector<Tensor> outs;
            std::vector<Mat> gts;
            for (std::size_t i = start; i < stop; ++i) {
                outs.push_back(model_forward_graph(params, data[order[i]].p2d, spec, adj));
                gts.push_back(targets[order[i]]);
            }
            Tensor loss = l2_loss_graph(outs, gts);
            const double loss_v = loss.item();
            if (!std::isfinite(loss_v))
                throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                                         " (epoch " + std::to_string(epoch) + ")");
            backward(loss);
            adam.step(params, lr);
            result.trace.push_back({step, epoch, lr, loss_v});
            ++step;
        }
        lr *= cfg.lr_decay_per_epoch;
        if (!cfg.out_dir.empty() && cfg.checkpoint_per_epoch)
            save_checkpoint((std::filesystem::path(cfg.out_dir) /
                             ("checkpoint_epoch" + std::to_string(epoch) + ".htnc")).string(),
                            params);
    }
    if (!cfg.out_dir.empty())
        save_checkpoint((std::filesystem::path(cfg.out_dir) / "checkpoint.htnc").string(), params);
    return result;
}

void write_loss_csv(const std::string& path, std::span<const StepRecord> trace) {
    std::FILE* f = std::fopen(path.c_str(), "wb");
    if (!f) throw std::runtime_error("cannot write loss csv: " + path);
    std::fputs("step,epoch,lr,loss\n", f);
    for (const StepRecord& r : trace)
        std::fprintf(f, "%d,%d,%.17g,%.17g\n", r.step, r.epoch, r.lr, r.loss);
    std::fclose(f);
}

}  // namespace htnet
