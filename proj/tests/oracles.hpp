// Test-side reference implementations, independent of the autograd path:
// finite differences only ever call forward evaluations, and the scalar
// helpers reimplement the math with plain loops.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "htnet/mat.hpp"
#include "htnet/rng.hpp"
#include "htnet/tensor.hpp"

namespace oracles {

// Central finite differences of a rebuildable scalar computation w.r.t. one
// leaf tensor.
inline std::vector<double> fd_gradient(const std::function<double()>& eval, htnet::Tensor leaf,
                                       double step = 1e-5) {
    auto vals = leaf.values_mut();
    std::vector<double> g(vals.size());
    for (std::size_t i = 0; i < vals.size(); ++i) {
        const double saved = vals[i];
        vals[i] = saved + step;
        const double up = eval();
        vals[i] = saved - step;
        const double down = eval();
        vals[i] = saved;
        g[i] = (up - down) / (2.0 * step);
    }
    return g;
}

inline double rel_err(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-3});
}

inline double max_rel_err(std::span<const double> a, std::span<const double> b) {
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, rel_err(a[i], b[i]));
    return worst;
}

inline htnet::Tensor random_tensor(htnet::Rng& rng, htnet::Shape shape, bool requires_grad,
                                   double lo = -1.0, double hi = 1.0) {
    std::size_t n = 1;
    for (int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform(lo, hi);
    return htnet::Tensor::from(std::move(shape), std::move(data), requires_grad);
}

inline htnet::Mat random_mat(htnet::Rng& rng, int rows, int cols, double lo = -1.0,
                             double hi = 1.0) {
    htnet::Mat m(rows, cols);
    for (double& v : m.v) v = rng.uniform(lo, hi);
    return m;
}

inline double gelu_scalar(double x) { return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0))); }

// largest |eigenvalue| of a symmetric matrix by power iteration
inline double spectral_radius(const htnet::Mat& m, int iters = 500) {
    std::vector<double> v(static_cast<size_t>(m.rows), 1.0);
    double lambda = 0.0;
    for (int it = 0; it < iters; ++it) {
        std::vector<double> w(v.size(), 0.0);
        for (int i = 0; i < m.rows; ++i)
            for (int j = 0; j < m.cols; ++j) w[static_cast<size_t>(i)] += m(i, j) * v[static_cast<size_t>(j)];
        double norm = 0.0;
        for (double x : w) norm += x * x;
        norm = std::sqrt(norm);
        if (norm == 0.0) return 0.0;
        for (double& x : w) x /= norm;
        lambda = norm;
        v = std::move(w);
    }
    return lambda;
}

}  // namespace oracles
