#include "htnet/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "htnet/rng.hpp"
#include "htnet/train.hpp"

namespace htnet {

namespace {

// relative error with a floor so near-zero gradients compare sanely
double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

}  // namespace

GradCheckReport gradcheck_model(const ModelConfig& cfg, std::uint64_t seed, double step,
                                double tolerance) {
    const SkeletonSpec spec = build_h36m17();
    if (cfg.joint_count != spec.joint_count())
        throw std::invalid_argument("gradcheck_model: config expects " +
                                    std::to_string(cfg.joint_count) + " joints");
    ModelParams params = init_params(cfg, seed);
    const Tensor adj = Tensor::from_mat(normalized_adjacency(spec));

    // two random samples so the batch path is exercised
    Rng rng(seed + 1);
    std::vector<Mat> inputs, targets;
    for (int s = 0; s < 2; ++s) {
        Mat in(spec.joint_count(), 2);
        for (double& v : in.v) v = rng.uniform(-1.0, 1.0);
        Mat tgt(spec.joint_count(), 3);
        for (double& v : tgt.v) v = 0.2 * rng.gaussian();
        inputs.push_back(std::move(in));
        targets.push_back(std::move(tgt));
    }

    auto loss_value = [&]() {
        std::vector<Tensor> outs;
        for (const Mat& in : inputs) outs.push_back(model_forward_graph(params, in, spec, adj));
        return l2_loss_graph(outs, targets).item();
    };

    // analytic gradients
    {
        std::vector<Tensor> outs;
        for (const Mat& in : inputs) outs.push_back(model_forward_graph(params, in, spec, adj));
        Tensor loss = l2_loss_graph(outs, targets);
        for_each_param(params, [](const std::string&, Tensor& t) { t.zero_grad(); });
        backward(loss);
    }

    GradCheckReport report;
    report.tolerance = tolerance;
    for_each_param(params, [&](const std::string& name, Tensor& t) {
        GradCheckReport::Group group{name, 0.0};
        auto vals = t.values_mut();
        auto analytic = t.grad();
        for (std::size_t i = 0; i < vals.size(); ++i) {
            const double saved = vals[i];
            vals[i] = saved + step;
            const double up = loss_value();
            vals[i] = saved - step;
            const double down = loss_value();
            vals[i] = saved;
            const double fd = (up - down) / (2.0 * step);
            group.max_rel_err = std::max(group.max_rel_err, rel_err(analytic[i], fd));
        }
        report.max_rel_err = std::max(report.max_rel_err, group.max_rel_err);
        report.groups.push_back(std::move(group));
    });
    report.passed = report.max_rel_err < tolerance;
    return report;
}

}  // namespace htnet
