#include "htnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

namespace htnet {

namespace {

std::atomic<std::uint64_t> next_id{1};

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("tensor shape has negative dim " + shape_str(s));
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

void check_rank2(const Tensor& t, const char* op) {
    if (t.rank() != 2)
        throw std::invalid_argument(std::string(op) + ": expected rank-2 tensor, got " + shape_str(t.shape()));
}

[[noreturn]] void shape_error(const char* op, const Shape& a, const Shape& b) {
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " + shape_str(b));
}

constexpr double kInvSqrt2 = 0.7071067811865475244;
constexpr double kInvSqrt2Pi = 0.3989422804014326779;

}  // namespace

std::string shape_str(const Shape& s) {
    std::string out = "(";
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (i) out += "x";
        out += std::to_string(s[i]);
    }
    return out + ")";
}

Tensor make_op(Shape shape, std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backprop) {
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->value.resize(shape_numel(n->shape));
    n->id = next_id.fetch_add(1, std::memory_order_relaxed);
    for (auto& p : parents) {
        n->requires_grad = n->requires_grad || p.requires_grad();
        n->parents.push_back(p.n_);
    }
    if (n->requires_grad) n->backprop = std::move(backprop);
    return Tensor(std::move(n));
}

Tensor Tensor::zeros(Shape shape, bool requires_grad) {
    return full(std::move(shape), 0.0, requires_grad);
}

Tensor Tensor::full(Shape shape, double fill, bool requires_grad) {
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->value.assign(shape_numel(n->shape), fill);
    n->requires_grad = requires_grad;
    n->id = next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(n));
}

Tensor Tensor::from(Shape shape, std::vector<double> data, bool requires_grad) {
    if (shape_numel(shape) != data.size())
        throw std::invalid_argument("tensor data size " + std::to_string(data.size()) +
                                    " does not match shape " + shape_str(shape));
    auto n = std::make_shared<detail::TensorNode>();
    n->shape = std::move(shape);
    n->value = std::move(data);
    n->requires_grad = requires_grad;
    n->id = next_id.fetch_add(1, std::memory_order_relaxed);
    return Tensor(std::move(n));
}

Tensor Tensor::from_mat(const Mat& m, bool requires_grad) {
    return from({m.rows, m.cols}, m.v, requires_grad);
}

Tensor Tensor::scalar(double v) { return from({1}, {v}); }

double Tensor::item() const {
    if (size() != 1) throw std::invalid_argument("item(): tensor " + shape_str(shape()) + " is not scalar");
    return n_->value[0];
}

Mat Tensor::to_mat() const {
    check_rank2(*this, "to_mat");
    return Mat(dim(0), dim(1), n_->value);
}

void backward(const Tensor& root) {
    if (root.size() != 1)
        throw std::invalid_argument("backward: root must be scalar, got " + shape_str(root.shape()));
    auto* rn = root.node();
    if (!rn->requires_grad) return;

    std::vector<detail::TensorNode*> order;
    std::unordered_set<detail::TensorNode*> seen;
    std::vector<detail::TensorNode*> stack{rn};
    seen.insert(rn);
    while (!stack.empty()) {
        auto* n = stack.back();
        stack.pop_back();
        order.push_back(n);
        for (auto& p : n->parents)
            if (p->requires_grad && seen.insert(p.get()).second) stack.push_back(p.get());
    }
    std::sort(order.begin(), order.end(),
              [](auto* a, auto* b) { return a->id > b->id; });

    rn->ensure_grad();
    rn->grad[0] += 1.0;
    for (auto* n : order)
        if (n->backprop) n->backprop(*n);
}

// --- ops ---------------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b) {
    check_rank2(a, "matmul");
    check_rank2(b, "matmul");
    if (a.dim(1) != b.dim(0)) shape_error("matmul", a.shape(), b.shape());
    const int m = a.dim(0), k = a.dim(1), n = b.dim(1);
    auto* an = a.node();
    auto* bn = b.node();
    Tensor out = make_op({m, n}, {a, b}, [an, bn, m, k, n](detail::TensorNode& self) {
        const double* g = self.grad.data();
        if (an->requires_grad) {
            an->ensure_grad();
            double* da = an->grad.data();
            const double* bv = bn->value.data();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) {
                    const double gij = g[i * n + j];
                    for (int l = 0; l < k; ++l) da[i * k + l] += gij * bv[l * n + j];
                }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            double* db = bn->grad.data();
            const double* av = an->value.data();
            for (int i = 0; i < m; ++i)
                for (int l = 0; l < k; ++l) {
                    const double ail = av[i * k + l];
                    for (int j = 0; j < n; ++j) db[l * n + j] += ail * g[i * n + j];
                }
        }
    });
    double* c = out.node()->value.data();
    const double* av = an->value.data();
    const double* bv = bn->value.data();
    for (int i = 0; i < m; ++i)
        for (int l = 0; l < k; ++l) {
            const double ail = av[i * k + l];
            if (ail == 0.0) continue;
            const double* brow = bv + static_cast<size_t>(l) * n;
            double* crow = c + static_cast<size_t>(i) * n;
            for (int j = 0; j < n; ++j) crow[j] += ail * brow[j];
        }
    return out;
}

Tensor transpose(const Tensor& a) {
    check_rank2(a, "transpose");
    const int m = a.dim(0), n = a.dim(1);
    auto* an = a.node();
    Tensor out = make_op({n, m}, {a}, [an, m, n](detail::TensorNode& self) {
        an->ensure_grad();
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) an->grad[j * n + i] += self.grad[i * m + j];
    });
    double* c = out.node()->value.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) c[j * m + i] = an->value[i * n + j];
    return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("add", a.shape(), b.shape());
    auto* an = a.node();
    auto* bn = b.node();
    Tensor out = make_op(a.shape(), {a, b}, [an, bn](detail::TensorNode& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) bn->grad[i] += self.grad[i];
        }
    });
    double* c = out.node()->value.data();
    for (std::size_t i = 0; i < out.size(); ++i) c[i] = an->value[i] + bn->value[i];
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) shape_error("sub", a.shape(), b.shape());
    auto* an = a.node();
    auto* bn = b.node();
    Tensor out = make_op(a.shape(), {a, b}, [an, bn](detail::TensorNode& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) bn->grad[i] -= self.grad[i];
        }
    });
    double* c = out.node()->value.data();
    for (std::size_t i = 0; i < out.size(); ++i) c[i] = an->value[i] - bn->value[i];
    return out;
}

Tensor scale(const Tensor& a, double s) {
    auto* an = a.node();
    Tensor out = make_op(a.shape(), {a}, [an, s](detail::TensorNode& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) an->grad[i] += s * self.grad[i];
    });
    double* c = out.node()->value.data();
    for (std::size_t i = 0; i < out.size(); ++i) c[i] = s * an->value[i];
    return out;
}

Tensor add_row_bias(const Tensor& x, const Tensor& b) {
    check_rank2(x, "add_row_bias");
    if (b.rank() != 1 || b.dim(0) != x.dim(1)) shape_error("add_row_bias", x.shape(), b.shape());
    const int m = x.dim(0), n = x.dim(1);
    auto* xn = x.node();
    auto* bn = b.node();
    Tensor out = make_op(x.shape(), {x, b}, [xn, bn, m, n](detail::TensorNode& self) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) xn->grad[i] += self.grad[i];
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < n; ++j) bn->grad[j] += self.grad[i * n + j];
        }
    });
    double* c = out.node()->value.data();
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) c[i * n + j] = xn->value[i * n + j] + bn->value[j];
    return out;
}

Tensor gelu(const Tensor& x) {
    auto* xn = x.node();
    Tensor out = make_op(x.shape(), {x}, [xn](detail::TensorNode& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) {
            const double v = xn->value[i];
            const double cdf = 0.5 * (1.0 + std::erf(v * kInvSqrt2));
            const double pdf = kInvSqrt2Pi * std::exp(-0.5 * v * v);
            xn->grad[i] += self.grad[i] * (cdf + v * pdf);
        }
    });
    double* c = out.node()->value.data();
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double v = xn->value[i];
        c[i] = 0.5 * v * (1.0 + std::erf(v * kInvSqrt2));
    }
    return out;
}

Tensor softmax_rows(const Tensor& x) {
    check_rank2(x, "softmax_rows");
    const int m = x.dim(0), n = x.dim(1);
    auto* xn = x.node();
    Tensor out = make_op(x.shape(), {x}, [xn, m, n](detail::TensorNode& self) {
        xn->ensure_grad();
        for (int i = 0; i < m; ++i) {
            const double* y = self.value.data() + static_cast<size_t>(i) * n;
            const double* gy = self.grad.data() + static_cast<size_t>(i) * n;
            double dot = 0.0;
            for (int j = 0; j < n; ++j) dot += gy[j] * y[j];
            for (int j = 0; j < n; ++j) xn->grad[i * n + j] += y[j] * (gy[j] - dot);
        }
    });
    double* c = out.node()->value.data();
    for (int i = 0; i < m; ++i) {
        const double* row = xn->value.data() + static_cast<size_t>(i) * n;
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            c[i * n + j] = std::exp(row[j] - mx);
            sum += c[i * n + j];
        }
        for (int j = 0; j < n; ++j) c[i * n + j] /= sum;
    }
    return out;
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
    check_rank2(x, "layer_norm");
    const int m = x.dim(0), n = x.dim(1);
    const bool affine = gamma.defined();
    if (affine) {
        if (gamma.rank() != 1 || gamma.dim(0) != n) shape_error("layer_norm", x.shape(), gamma.shape());
        if (!beta.defined() || beta.rank() != 1 || beta.dim(0) != n)
            shape_error("layer_norm", x.shape(), beta.defined() ? beta.shape() : Shape{});
    }

    // per-row mean / inv-std captured for the backward pass
    auto mu = std::make_shared<std::vector<double>>(m);
    auto istd = std::make_shared<std::vector<double>>(m);
    auto* xn = x.node();
    auto* gn = affine ? gamma.node() : nullptr;
    auto* bn = affine ? beta.node() : nullptr;

    std::vector<Tensor> parents{x};
    if (affine) {
        parents.push_back(gamma);
        parents.push_back(beta);
    }
    Tensor out = make_op(x.shape(), std::move(parents),
                         [xn, gn, bn, mu, istd, m, n](detail::TensorNode& self) {
        for (int i = 0; i < m; ++i) {
            const double* xv = xn->value.data() + static_cast<size_t>(i) * n;
            const double* gy = self.grad.data() + static_cast<size_t>(i) * n;
            const double is = (*istd)[i], mean = (*mu)[i];
            if (gn && gn->requires_grad) {
                gn->ensure_grad();
                for (int j = 0; j < n; ++j) gn->grad[j] += gy[j] * (xv[j] - mean) * is;
            }
            if (bn && bn->requires_grad) {
                bn->ensure_grad();
                for (int j = 0; j < n; ++j) bn->grad[j] += gy[j];
            }
            if (xn->requires_grad) {
                xn->ensure_grad();
                double sum_g = 0.0, sum_gx = 0.0;
                for (int j = 0; j < n; ++j) {
                    const double gj = gn ? gy[j] * gn->value[j] : gy[j];
                    const double xh = (xv[j] - mean) * is;
                    sum_g += gj;
                    sum_gx += gj * xh;
                }
                for (int j = 0; j < n; ++j) {
                    const double gj = gn ? gy[j] * gn->value[j] : gy[j];
                    const double xh = (xv[j] - mean) * is;
                    xn->grad[i * n + j] += is * (gj - (sum_g + xh * sum_gx) / n);
                }
            }
        }
    });
    double* c = out.node()->value.data();
    for (int i = 0; i < m; ++i) {
        const double* xv = xn->value.data() + static_cast<size_t>(i) * n;
        double mean = 0.0;
        for (int j = 0; j < n; ++j) mean += xv[j];
        mean /= n;
        double var = 0.0;
        for (int j = 0; j < n; ++j) var += (xv[j] - mean) * (xv[j] - mean);
        var /= n;
        const double is = 1.0 / std::sqrt(var + eps);
        (*mu)[i] = mean;
        (*istd)[i] = is;
        for (int j = 0; j < n; ++j) {
            const double xh = (xv[j] - mean) * is;
            c[i * n + j] = affine ? gn->value[j] * xh + bn->value[j] : xh;
        }
    }
    return out;
}

Tensor layer_norm(const Tensor& x, double eps) { return layer_norm(x, Tensor(), Tensor(), eps); }

Tensor concat_channels(std::span<const Tensor> parts) {
    if (parts.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const int m = parts[0].dim(0);
    int total = 0;
    for (const auto& p : parts) {
        check_rank2(p, "concat_channels");
        if (p.dim(0) != m) shape_error("concat_channels", parts[0].shape(), p.shape());
        total += p.dim(1);
    }
    std::vector<Tensor> parents(parts.begin(), parts.end());
    std::vector<detail::TensorNode*> pn;
    std::vector<int> widths;
    for (const auto& p : parts) {
        pn.push_back(p.node());
        widths.push_back(p.dim(1));
    }
    Tensor out = make_op({m, total}, std::move(parents),
                         [pn, widths, m, total](detail::TensorNode& self) {
        int off = 0;
        for (std::size_t k = 0; k < pn.size(); ++k) {
            if (pn[k]->requires_grad) {
                pn[k]->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int j = 0; j < widths[k]; ++j)
                        pn[k]->grad[i * widths[k] + j] += self.grad[i * total + off + j];
            }
            off += widths[k];
        }
    });
    double* c = out.node()->value.data();
    int off = 0;
    for (std::size_t k = 0; k < pn.size(); ++k) {
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < widths[k]; ++j)
                c[i * total + off + j] = pn[k]->value[i * widths[k] + j];
        off += widths[k];
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& x, std::span<const int> widths) {
    check_rank2(x, "split_channels");
    const int m = x.dim(0), n = x.dim(1);
    int total = 0;
    for (int w : widths) total += w;
    if (total != n)
        throw std::invalid_argument("split_channels: widths sum to " + std::to_string(total) +
                                    " but tensor is " + shape_str(x.shape()));
    std::vector<Tensor> out;
    auto* xn = x.node();
    int off = 0;
    for (int w : widths) {
        Tensor part = make_op({m, w}, {x}, [xn, off, w, n, m](detail::TensorNode& self) {
            xn->ensure_grad();
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < w; ++j) xn->grad[i * n + off + j] += self.grad[i * w + j];
        });
        double* c = part.node()->value.data();
        for (int i = 0; i < m; ++i)
            for (int j = 0; j < w; ++j) c[i * w + j] = xn->value[i * n + off + j];
        out.push_back(std::move(part));
        off += w;
    }
    return out;
}

Tensor gather_rows(const Tensor& x, std::span<const int> idx) {
    check_rank2(x, "gather_rows");
    const int m = x.dim(0), n = x.dim(1);
    for (int i : idx)
        if (i < 0 || i >= m)
            throw std::invalid_argument("gather_rows: index " + std::to_string(i) +
                                        " out of range for " + shape_str(x.shape()));
    std::vector<int> ind(idx.begin(), idx.end());
    const int r = static_cast<int>(ind.size());
    auto* xn = x.node();
    Tensor out = make_op({r, n}, {x}, [xn, ind, r, n](detail::TensorNode& self) {
        xn->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < n; ++j) xn->grad[ind[i] * n + j] += self.grad[i * n + j];
    });
    double* c = out.node()->value.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) c[i * n + j] = xn->value[ind[i] * n + j];
    return out;
}

Tensor scatter_rows(const Tensor& x, std::span<const int> idx, int out_rows) {
    check_rank2(x, "scatter_rows");
    const int r = x.dim(0), n = x.dim(1);
    if (static_cast<int>(idx.size()) != r)
        throw std::invalid_argument("scatter_rows: " + std::to_string(idx.size()) +
                                    " indices for " + shape_str(x.shape()));
    std::vector<int> ind(idx.begin(), idx.end());
    std::vector<bool> hit(static_cast<size_t>(out_rows), false);
    for (int i : ind) {
        if (i < 0 || i >= out_rows)
            throw std::invalid_argument("scatter_rows: index " + std::to_string(i) +
                                        " out of range for " + std::to_string(out_rows) + " rows");
        if (hit[static_cast<size_t>(i)])
            throw std::invalid_argument("scatter_rows: duplicate index " + std::to_string(i));
        hit[static_cast<size_t>(i)] = true;
    }
    auto* xn = x.node();
    Tensor out = make_op({out_rows, n}, {x}, [xn, ind, r, n](detail::TensorNode& self) {
        xn->ensure_grad();
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < n; ++j) xn->grad[i * n + j] += self.grad[ind[i] * n + j];
    });
    double* c = out.node()->value.data();
    for (int i = 0; i < r; ++i)
        for (int j = 0; j < n; ++j) c[ind[i] * n + j] = xn->value[i * n + j];
    return out;
}

Tensor reshape(const Tensor& x, Shape shape) {
    if (shape_numel(shape) != x.size())
        shape_error("reshape", x.shape(), shape);
    auto* xn = x.node();
    Tensor out = make_op(std::move(shape), {x}, [xn](detail::TensorNode& self) {
        xn->ensure_grad();
        for (std::size_t i = 0; i < self.size(); ++i) xn->grad[i] += self.grad[i];
    });
    out.node()->value = xn->value;
    return out;
}

Tensor mean_sq(const Tensor& x) {
    auto* xn = x.node();
    const double k = static_cast<double>(x.size());
    if (x.size() == 0) throw std::invalid_argument("mean_sq: empty tensor");
    Tensor out = make_op({1}, {x}, [xn, k](detail::TensorNode& self) {
        xn->ensure_grad();
        const double g = self.grad[0];
        for (std::size_t i = 0; i < xn->value.size(); ++i)
            xn->grad[i] += g * 2.0 * xn->value[i] / k;
    });
    double acc = 0.0;
    for (double v : xn->value) acc += v * v;
    out.node()->value[0] = acc / k;
    return out;
}

}  // namespace htnet
