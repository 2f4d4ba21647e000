#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "htnet/data.hpp"
#include "htnet/gradcheck.hpp"
#include "htnet/metrics.hpp"
#include "htnet/model.hpp"
#include "htnet/skeleton.hpp"
#include "htnet/train.hpp"

namespace py = pybind11;
using htnet::Mat;

namespace {

Mat mat_from_array(const py::array_t<double, py::array::c_style | py::array::forcecast>& a,
                   int cols, const char* what) {
    if (a.ndim() != 2 || a.shape(1) != cols)
        throw std::invalid_argument(std::string(what) + ": expected an (N, " + std::to_string(cols) +
                                    ") array");
    Mat m(static_cast<int>(a.shape(0)), cols);
    const auto r = a.unchecked<2>();
    for (py::ssize_t i = 0; i < a.shape(0); ++i)
        for (int j = 0; j < cols; ++j) m(static_cast<int>(i), j) = r(i, j);
    return m;
}

std::vector<Mat> frames_from_array(
    const py::array_t<double, py::array::c_style | py::array::forcecast>& a, const char* what) {
    if (a.ndim() != 3 || a.shape(2) != 3)
        throw std::invalid_argument(std::string(what) + ": expected an (F, N, 3) array");
    const auto r = a.unchecked<3>();
    std::vector<Mat> out;
    for (py::ssize_t f = 0; f < a.shape(0); ++f) {
        Mat m(static_cast<int>(a.shape(1)), 3);
        for (py::ssize_t i = 0; i < a.shape(1); ++i)
            for (int j = 0; j < 3; ++j) m(static_cast<int>(i), j) = r(f, i, j);
        out.push_back(std::move(m));
    }
    return out;
}

py::array_t<double> array_from_mat(const Mat& m) {
    py::array_t<double> a({m.rows, m.cols});
    auto w = a.mutable_unchecked<2>();
    for (int i = 0; i < m.rows; ++i)
        for (int j = 0; j < m.cols; ++j) w(i, j) = m(i, j);
    return a;
}

py::dict report_to_dict(const htnet::MetricsReport& r) {
    py::dict d;
    d["mpjpe"] = r.mpjpe;
    d["p_mpjpe"] = r.p_mpjpe;
    d["pck"] = r.pck;
    d["auc"] = r.auc;
    py::dict pdof;
    for (int c = 0; c < 4; ++c) pdof[py::int_(c)] = r.per_pdof_mpjpe[static_cast<size_t>(c)];
    d["per_pdof_mpjpe"] = pdof;
    d["per_joint_mpjpe"] = r.per_joint_mpjpe;
    return d;
}

htnet::ModelConfig make_config(int channels, int mixers, int heads, int joints, int mlp_ratio,
                               const std::string& variant, const std::vector<std::string>& blocks) {
    htnet::ModelConfig cfg;
    cfg.channels = channels;
    cfg.mixers = mixers;
    cfg.heads = heads;
    cfg.joint_count = joints;
    cfg.mlp_ratio = mlp_ratio;
    cfg.variant = htnet::variant_from_name(variant);
    cfg.use_ljc = cfg.use_ipc = cfg.use_gbi = false;
    for (const std::string& b : blocks) {
        if (b == "ljc") cfg.use_ljc = true;
        else if (b == "ipc") cfg.use_ipc = true;
        else if (b == "gbi") cfg.use_gbi = true;
        else throw std::invalid_argument("unknown block '" + b + "'");
    }
    cfg.validate();
    return cfg;
}

}  // namespace

PYBIND11_MODULE(_htnet, m) {
    m.doc() = "hierarchical 2D-to-3D pose lifting core";

    py::class_<htnet::SkeletonSpec>(m, "SkeletonSpec")
        .def_property_readonly("name", &htnet::SkeletonSpec::name)
        .def_property_readonly("joint_count", &htnet::SkeletonSpec::joint_count)
        .def_property_readonly("joint_names", &htnet::SkeletonSpec::joint_names)
        .def_property_readonly("parents", &htnet::SkeletonSpec::parent)
        .def_property_readonly("pdof", &htnet::SkeletonSpec::pdof)
        .def_property_readonly("root_index", &htnet::SkeletonSpec::root_index)
        .def_property_readonly("limbs", [](const htnet::SkeletonSpec& s) {
            std::vector<std::tuple<int, int, int>> out;
            for (const htnet::Limb& l : s.limbs()) out.emplace_back(l.one, l.two, l.three);
            return out;
        });

    m.def("h36m17", &htnet::build_h36m17, "standard 17-joint skeleton");
    m.def("load_skeleton", &htnet::load_skeleton, py::arg("path"));
    m.def("normalized_adjacency",
          [](const htnet::SkeletonSpec& s) { return array_from_mat(htnet::normalized_adjacency(s)); });
    m.def("replacement_masks", [](const htnet::SkeletonSpec& s) {
        const auto masks = htnet::replacement_masks(s);
        return py::make_tuple(masks.mask1, masks.mask2, masks.limb_of);
    });

    py::class_<htnet::ModelConfig>(m, "ModelConfig")
        .def(py::init(&make_config), py::arg("channels") = 240, py::arg("mixers") = 3,
             py::arg("heads") = 8, py::arg("joints") = 17, py::arg("mlp_ratio") = 6,
             py::arg("variant") = "progressive",
             py::arg("blocks") = std::vector<std::string>{"ljc", "ipc", "gbi"})
        .def_readonly("channels", &htnet::ModelConfig::channels)
        .def_readonly("mixers", &htnet::ModelConfig::mixers)
        .def_readonly("heads", &htnet::ModelConfig::heads)
        .def_readonly("joints", &htnet::ModelConfig::joint_count)
        .def_readonly("mlp_ratio", &htnet::ModelConfig::mlp_ratio);

    py::class_<htnet::ModelParams>(m, "ModelParams")
        .def_readonly("config", &htnet::ModelParams::config)
        .def_property_readonly("count", &htnet::param_count);

    m.def("init_params", &htnet::init_params, py::arg("config"), py::arg("seed"));
    m.def("param_count", &htnet::param_count);
    m.def("save_checkpoint", &htnet::save_checkpoint, py::arg("path"), py::arg("params"));
    m.def("load_checkpoint", &htnet::load_checkpoint, py::arg("path"));

    m.def(
        "model_forward",
        [](const htnet::ModelParams& p, const py::array_t<double>& pose2d,
           const htnet::SkeletonSpec& spec) {
            return array_from_mat(htnet::model_forward(
                p, mat_from_array(pose2d, 2, "model_forward"), spec));
        },
        py::arg("params"), py::arg("pose2d_normalized"), py::arg("skeleton"),
        "lift one normalized (N, 2) pose to millimeters");

    m.def(
        "normalize_2d",
        [](const py::array_t<double>& p2d, int width, int height) {
            return array_from_mat(
                htnet::normalize_2d(mat_from_array(p2d, 2, "normalize_2d"), width, height));
        },
        py::arg("p2d"), py::arg("image_width"), py::arg("image_height"));

    m.def(
        "synth_generate",
        [](int n, std::uint64_t seed, double noise_mm) {
            const htnet::PoseSet set = htnet::synth_generate(n, seed, noise_mm);
            py::array_t<double> p2d({static_cast<int>(set.frames.size()), 17, 2});
            py::array_t<double> p3d({static_cast<int>(set.frames.size()), 17, 3});
            auto w2 = p2d.mutable_unchecked<3>();
            auto w3 = p3d.mutable_unchecked<3>();
            for (std::size_t f = 0; f < set.frames.size(); ++f)
                for (int j = 0; j < 17; ++j) {
                    w2(f, j, 0) = set.frames[f].p2d(j, 0);
                    w2(f, j, 1) = set.frames[f].p2d(j, 1);
                    for (int c = 0; c < 3; ++c) w3(f, j, c) = set.frames[f].p3d(j, c);
                }
            py::dict d;
            d["p2d"] = p2d;
            d["p3d"] = p3d;
            d["image_size"] = py::make_tuple(set.image_width, set.image_height);
            return d;
        },
        py::arg("n"), py::arg("seed"), py::arg("noise_mm") = 0.0);

    m.def("load_poseset", [](const std::string& path) {
        const htnet::PoseSet set = htnet::load_poseset(path);
        py::list frames;
        for (const auto& f : set.frames)
            frames.append(py::make_tuple(array_from_mat(f.p2d), array_from_mat(f.p3d)));
        py::dict d;
        d["skeleton"] = set.skeleton;
        d["image_size"] = py::make_tuple(set.image_width, set.image_height);
        d["frames"] = frames;
        return d;
    });

    m.def(
        "mpjpe",
        [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
            return htnet::mpjpe(frames_from_array(pred, "mpjpe"), frames_from_array(gt, "mpjpe"));
        },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "p_mpjpe",
        [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
            return htnet::p_mpjpe(frames_from_array(pred, "p_mpjpe"),
                                  frames_from_array(gt, "p_mpjpe"));
        },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "pck",
        [](const py::array_t<double>& pred, const py::array_t<double>& gt, double threshold) {
            return htnet::pck(frames_from_array(pred, "pck"), frames_from_array(gt, "pck"),
                              threshold);
        },
        py::arg("pred"), py::arg("gt"), py::arg("threshold_mm") = 150.0);
    m.def(
        "auc",
        [](const py::array_t<double>& pred, const py::array_t<double>& gt) {
            return htnet::auc(frames_from_array(pred, "auc"), frames_from_array(gt, "auc"));
        },
        py::arg("pred"), py::arg("gt"));
    m.def(
        "metrics_report",
        [](const py::array_t<double>& pred, const py::array_t<double>& gt,
           const htnet::SkeletonSpec& spec) {
            return report_to_dict(htnet::evaluate_poses(frames_from_array(pred, "metrics_report"),
                                                        frames_from_array(gt, "metrics_report"),
                                                        spec));
        },
        py::arg("pred"), py::arg("gt"), py::arg("skeleton"));

    py::class_<htnet::TrainConfig>(m, "TrainConfig")
        .def(py::init([](int epochs, int batch_size, double learning_rate, double lr_decay,
                         std::uint64_t seed, bool shuffle) {
                 htnet::TrainConfig cfg;
                 cfg.epochs = epochs;
                 cfg.batch_size = batch_size;
                 cfg.learning_rate = learning_rate;
                 cfg.lr_decay_per_epoch = lr_decay;
                 cfg.seed = seed;
                 cfg.shuffle = shuffle;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("epochs") = 30, py::arg("batch_size") = 512, py::arg("learning_rate") = 1e-3,
             py::arg("lr_decay_per_epoch") = 0.95, py::arg("seed") = 0, py::arg("shuffle") = true);

    m.def(
        "train",
        [](htnet::ModelParams& params, const htnet::SkeletonSpec& spec,
           const py::array_t<double>& p2d_norm, const py::array_t<double>& p3d_mm,
           const htnet::TrainConfig& cfg) {
            if (p2d_norm.ndim() != 3 || p2d_norm.shape(2) != 2)
                throw std::invalid_argument("train: p2d must be (F, N, 2)");
            const auto r2 = p2d_norm.unchecked<3>();
            const auto gts = frames_from_array(p3d_mm, "train");
            std::vector<htnet::PoseSample> samples;
            for (py::ssize_t f = 0; f < p2d_norm.shape(0); ++f) {
                Mat p2(static_cast<int>(p2d_norm.shape(1)), 2);
                for (py::ssize_t i = 0; i < p2d_norm.shape(1); ++i) {
                    p2(static_cast<int>(i), 0) = r2(f, i, 0);
                    p2(static_cast<int>(i), 1) = r2(f, i, 1);
                }
                samples.push_back({std::move(p2), gts[static_cast<size_t>(f)]});
            }
            const htnet::TrainResult result = htnet::train(params, spec, samples, cfg);
            py::array_t<double> trace({static_cast<int>(result.trace.size()), 4});
            auto w = trace.mutable_unchecked<2>();
            for (std::size_t i = 0; i < result.trace.size(); ++i) {
                w(i, 0) = result.trace[i].step;
                w(i, 1) = result.trace[i].epoch;
                w(i, 2) = result.trace[i].lr;
                w(i, 3) = result.trace[i].loss;
            }
            return trace;
        },
        py::arg("params"), py::arg("skeleton"), py::arg("p2d_normalized"), py::arg("p3d_mm"),
        py::arg("config"), "returns the (steps, 4) trace of step/epoch/lr/loss");

    m.def(
        "gradcheck",
        [](int channels, int mixers, std::uint64_t seed) {
            htnet::ModelConfig cfg;
            cfg.channels = channels;
            cfg.mixers = mixers;
            const htnet::GradCheckReport r = htnet::gradcheck_model(cfg, seed);
            py::dict d;
            d["passed"] = r.passed;
            d["max_rel_err"] = r.max_rel_err;
            return d;
        },
        py::arg("channels") = 24, py::arg("mixers") = 1, py::arg("seed") = 0);
}
