// Batch front end: train / eval / predict / synth / inspect / gradcheck.
// stdout carries machine-readable JSON, stderr carries human logs.
// Exit codes: 0 success, 1 runtime failure, 2 usage or config error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "htnet/data.hpp"
#include "htnet/gradcheck.hpp"
#include "htnet/metrics.hpp"
#include "htnet/model.hpp"
#include "htnet/skeleton.hpp"
#include "htnet/train.hpp"

namespace {

using htnet::Mat;

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RunSetup {
    htnet::ModelConfig model;
    htnet::TrainConfig train;
    std::string skeleton_file;  // empty = built-in h36m17
};

RunSetup load_run_setup(const std::string& config_path) {
    RunSetup setup;
    if (config_path.empty()) return setup;
    std::ifstream in(config_path);
    if (!in) throw UsageError("cannot open config file: " + config_path);
    std::stringstream ss;
    ss << in.rdbuf();
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(ss.str());
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config JSON is malformed: " + std::string(e.what()));
    }
    try {
        for (auto it = j.begin(); it != j.end(); ++it) {
            const std::string& k = it.key();
            if (k == "model") setup.model = htnet::model_config_from_json_text(it->dump());
            else if (k == "train") setup.train = htnet::train_config_from_json_text(it->dump());
            else if (k == "skeleton_file") setup.skeleton_file = it->get<std::string>();
            else throw UsageError("unknown config key '" + k + "'");
        }
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return setup;
}

htnet::SkeletonSpec load_spec(const RunSetup& setup) {
    if (setup.skeleton_file.empty()) return htnet::build_h36m17();
    return htnet::load_skeleton(setup.skeleton_file);
}

htnet::SkeletonSpec spec_for_poseset(const htnet::PoseSet& set, const std::string& skeleton_file) {
    if (!skeleton_file.empty()) return htnet::load_skeleton(skeleton_file);
    if (set.skeleton == "h36m17") return htnet::build_h36m17();
    throw UsageError("dataset uses skeleton '" + set.skeleton +
                     "'; pass --skeleton with its JSON definition");
}

std::vector<htnet::PoseSample> normalized_samples(const htnet::PoseSet& set) {
    std::vector<htnet::PoseSample> out;
    out.reserve(set.frames.size());
    for (const htnet::PoseSample& s : set.frames)
        out.push_back({htnet::normalize_2d(s.p2d, set.image_width, set.image_height), s.p3d});
    return out;
}

void check_joint_count(const htnet::PoseSet& set, const htnet::ModelConfig& cfg) {
    if (set.frames.empty()) throw std::runtime_error("dataset has no frames");
    const int n = set.frames[0].p2d.rows;
    if (n != cfg.joint_count)
        throw std::runtime_error("dataset frames have " + std::to_string(n) +
                                 " joints but the model expects " + std::to_string(cfg.joint_count));
}

int cmd_train(const std::string& config_path, const std::string& data_path,
              const std::string& out_dir, const std::optional<int>& epochs,
              const std::optional<int>& batch_size, const std::optional<double>& lr,
              const std::optional<double>& lr_decay, const std::optional<std::uint64_t>& seed) {
    RunSetup setup = load_run_setup(config_path);
    if (epochs) setup.train.epochs = *epochs;
    if (batch_size) setup.train.batch_size = *batch_size;
    if (lr) setup.train.learning_rate = *lr;
    if (lr_decay) setup.train.lr_decay_per_epoch = *lr_decay;
    if (seed) setup.train.seed = *seed;
    try {
        setup.train.validate();
        setup.model.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const htnet::SkeletonSpec spec = load_spec(setup);
    setup.model.joint_count = spec.joint_count();
    const htnet::PoseSet set = htnet::load_poseset(data_path);
    check_joint_count(set, setup.model);
    const auto samples = normalized_samples(set);

    htnet::ModelParams params = htnet::init_params(setup.model, setup.train.seed);
    setup.train.out_dir = out_dir;
    std::cerr << "training: " << samples.size() << " samples, " << setup.train.epochs
              << " epochs, batch " << setup.train.batch_size << ", lr " << setup.train.learning_rate
              << ", seed " << setup.train.seed << "\n";
    const htnet::TrainResult result = htnet::train(params, spec, samples, setup.train);

    const std::string csv_path = (std::filesystem::path(out_dir) / "loss.csv").string();
    htnet::write_loss_csv(csv_path, result.trace);
    const std::string ckpt_path = (std::filesystem::path(out_dir) / "checkpoint.htnc").string();

    nlohmann::json out;
    out["checkpoint"] = ckpt_path;
    out["loss_csv"] = csv_path;
    out["steps"] = result.trace.size();
    out["final_loss"] = result.trace.empty() ? 0.0 : result.trace.back().loss;
    std::cout << out.dump(2) << "\n";
    std::cerr << "done: " << result.trace.size() << " steps, final loss "
              << (result.trace.empty() ? 0.0 : result.trace.back().loss) << "\n";
    return 0;
}

std::vector<Mat> predict_all(const htnet::ModelParams& params, const htnet::SkeletonSpec& spec,
                             const htnet::PoseSet& set) {
    std::vector<Mat> preds;
    preds.reserve(set.frames.size());
    for (const htnet::PoseSample& s : set.frames)
        preds.push_back(htnet::model_forward(
            params, htnet::normalize_2d(s.p2d, set.image_width, set.image_height), spec));
    return preds;
}

int cmd_eval(const std::string& ckpt_path, const std::string& data_path,
             const std::string& skeleton_file) {
    const htnet::ModelParams params = htnet::load_checkpoint(ckpt_path);
    const htnet::PoseSet set = htnet::load_poseset(data_path);
    const htnet::SkeletonSpec spec = spec_for_poseset(set, skeleton_file);
    check_joint_count(set, params.config);
    if (spec.joint_count() != params.config.joint_count)
        throw std::runtime_error("skeleton has " + std::to_string(spec.joint_count()) +
                                 " joints but the model expects " +
                                 std::to_string(params.config.joint_count));

    const std::vector<Mat> preds = predict_all(params, spec, set);
    std::vector<Mat> gt;
    gt.reserve(set.frames.size());
    for (const htnet::PoseSample& s : set.frames) gt.push_back(s.p3d);

    const htnet::MetricsReport report = htnet::evaluate_poses(preds, gt, spec);
    std::cout << report.to_json_text() << "\n";
    std::cerr << "mpjpe " << report.mpjpe << " mm, p-mpjpe " << report.p_mpjpe << " mm, pck "
              << report.pck << "%, auc " << report.auc << "%\n";
    return 0;
}

int cmd_predict(const std::string& ckpt_path, const std::string& data_path,
                const std::string& out_path, const std::string& skeleton_file) {
    const htnet::ModelParams params = htnet::load_checkpoint(ckpt_path);
    htnet::PoseSet set = htnet::load_poseset(data_path);
    const htnet::SkeletonSpec spec = spec_for_poseset(set, skeleton_file);
    check_joint_count(set, params.config);
    const std::vector<Mat> preds = predict_all(params, spec, set);
    for (std::size_t f = 0; f < set.frames.size(); ++f) set.frames[f].p3d = preds[f];
    htnet::save_poseset(out_path, set);

    nlohmann::json out;
    out["out"] = out_path;
    out["frames"] = set.frames.size();
    std::cout << out.dump(2) << "\n";
    std::cerr << "wrote " << set.frames.size() << " predicted frames to " << out_path << "\n";
    return 0;
}

int cmd_synth(int n, std::uint64_t seed, double noise_mm, const std::string& out_path) {
    const htnet::PoseSet set = htnet::synth_generate(n, seed, noise_mm);
    htnet::save_poseset(out_path, set);
    nlohmann::json out;
    out["out"] = out_path;
    out["frames"] = set.frames.size();
    out["seed"] = seed;
    out["noise_mm"] = noise_mm;
    std::cout << out.dump(2) << "\n";
    std::cerr << "wrote " << set.frames.size() << " synthetic frames to " << out_path << "\n";
    return 0;
}

int cmd_inspect(const std::string& config_path, const std::optional<int>& channels,
                const std::optional<int>& mixers, const std::optional<std::string>& variant,
                const std::optional<std::string>& blocks) {
    RunSetup setup = load_run_setup(config_path);
    if (channels) setup.model.channels = *channels;
    if (mixers) setup.model.mixers = *mixers;
    try {
        if (variant) setup.model.variant = htnet::variant_from_name(*variant);
        if (blocks) {
            setup.model.use_ljc = blocks->find("ljc") != std::string::npos;
            setup.model.use_ipc = blocks->find("ipc") != std::string::npos;
            setup.model.use_gbi = blocks->find("gbi") != std::string::npos;
        }
        setup.model.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }

    const htnet::ModelParams params = htnet::init_params(setup.model, 0);
    const auto breakdown = htnet::param_breakdown(params);
    const std::size_t total = htnet::param_count(params);

    nlohmann::json out;
    out["config"] = nlohmann::json::parse(htnet::model_config_to_json_text(setup.model));
    out["total"] = total;
    nlohmann::json jb;
    for (const auto& [label, count] : breakdown) jb[label] = count;
    out["breakdown"] = jb;
    std::cout << out.dump(2) << "\n";

    std::fprintf(stderr, "%-12s %12s\n", "block", "params");
    for (const auto& [label, count] : breakdown)
        std::fprintf(stderr, "%-12s %12zu\n", label.c_str(), count);
    std::fprintf(stderr, "%-12s %12zu\n", "total", total);
    return 0;
}

int cmd_gradcheck(std::uint64_t seed, int channels, int mixers, double step, double tol) {
    htnet::ModelConfig cfg;
    cfg.channels = channels;
    cfg.mixers = mixers;
    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    std::cerr << "gradcheck: C=" << channels << " M=" << mixers << " seed=" << seed << "\n";
    const htnet::GradCheckReport report = htnet::gradcheck_model(cfg, seed, step, tol);

    nlohmann::json out;
    out["passed"] = report.passed;
    out["max_rel_err"] = report.max_rel_err;
    out["tolerance"] = report.tolerance;
    auto groups = nlohmann::json::array();
    for (const auto& g : report.groups)
        groups.push_back({{"name", g.name}, {"max_rel_err", g.max_rel_err}});
    out["groups"] = groups;
    std::cout << out.dump(2) << "\n";
    std::cerr << (report.passed ? "PASS" : "FAIL") << ": max relative error " << report.max_rel_err
              << " (tolerance " << report.tolerance << ")\n";
    return report.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"hierarchical 2D-to-3D pose lifting"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, ckpt_path, skeleton_file;
    std::optional<int> epochs, batch_size, channels, mixers;
    std::optional<double> lr, lr_decay;
    std::optional<std::uint64_t> seed_opt;
    std::optional<std::string> variant, blocks;
    int synth_n = 64;
    std::uint64_t seed = 0;
    double noise_mm = 0.0, gc_step = 1e-5, gc_tol = 1e-4;
    int gc_channels = 24, gc_mixers = 1;
    int exit_code = 0;

    auto* train = app.add_subcommand("train", "train a model and write checkpoint + loss trace");
    train->add_option("--config", config_path, "run config JSON");
    train->add_option("--data", data_path, "PoseSet JSON")->required();
    train->add_option("--out", out_path, "output directory")->required();
    train->add_option("--epochs", epochs);
    train->add_option("--batch-size", batch_size);
    train->add_option("--lr", lr);
    train->add_option("--lr-decay", lr_decay);
    train->add_option("--seed", seed_opt);
    train->callback([&] {
        exit_code = cmd_train(config_path, data_path, out_path, epochs, batch_size, lr, lr_decay,
                              seed_opt);
    });

    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint, metrics JSON to stdout");
    eval->add_option("--ckpt", ckpt_path)->required();
    eval->add_option("--data", data_path)->required();
    eval->add_option("--skeleton", skeleton_file, "skeleton JSON for non-default datasets");
    eval->callback([&] { exit_code = cmd_eval(ckpt_path, data_path, skeleton_file); });

    auto* predict = app.add_subcommand("predict", "write a PoseSet with predicted 3D joints");
    predict->add_option("--ckpt", ckpt_path)->required();
    predict->add_option("--data", data_path)->required();
    predict->add_option("--out", out_path)->required();
    predict->add_option("--skeleton", skeleton_file);
    predict->callback([&] { exit_code = cmd_predict(ckpt_path, data_path, out_path, skeleton_file); });

    auto* synth = app.add_subcommand("synth", "generate a synthetic PoseSet");
    synth->add_option("--n", synth_n)->required();
    synth->add_option("--seed", seed);
    synth->add_option("--noise-mm", noise_mm);
    synth->add_option("--out", out_path)->required();
    synth->callback([&] { exit_code = cmd_synth(synth_n, seed, noise_mm, out_path); });

    auto* inspect = app.add_subcommand("inspect", "parameter count and per-block breakdown");
    inspect->add_option("--config", config_path);
    inspect->add_option("--channels", channels);
    inspect->add_option("--mixers", mixers);
    inspect->add_option("--variant", variant, "progressive | parallel | serial");
    inspect->add_option("--blocks", blocks, "comma list from ljc,ipc,gbi");
    inspect->callback([&] { exit_code = cmd_inspect(config_path, channels, mixers, variant, blocks); });

    auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient check");
    gradcheck->add_option("--seed", seed);
    gradcheck->add_option("--channels", gc_channels);
    gradcheck->add_option("--mixers", gc_mixers);
    gradcheck->add_option("--step", gc_step);
    gradcheck->add_option("--tol", gc_tol);
    gradcheck->callback([&] { exit_code = cmd_gradcheck(seed, gc_channels, gc_mixers, gc_step, gc_tol); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return exit_code;
}
