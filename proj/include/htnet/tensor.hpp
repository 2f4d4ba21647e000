#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "htnet/mat.hpp"

namespace htnet {

using Shape = std::vector<int>;

std::string shape_str(const Shape& s);

namespace detail {

struct TensorNode {
    Shape shape;
    std::vector<double> value;
    std::vector<double> grad;  // sized lazily, kept for leaves across steps
    bool requires_grad = false;
    std::uint64_t id = 0;
    std::vector<std::shared_ptr<TensorNode>> parents;
    std::function<void(TensorNode&)> backprop;  // pulls this->grad into parents

    std::size_t size() const { return value.size(); }
    void ensure_grad() {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

}  // namespace detail

// Value-semantic handle to a node of the computation graph. Ops are free
// functions that record how to push gradients back to their operands;
// backward() replays them in reverse creation order, which makes gradient
// accumulation deterministic.
class Tensor {
public:
    Tensor() = default;

    static Tensor zeros(Shape shape, bool requires_grad = false);
    static Tensor full(Shape shape, double fill, bool requires_grad = false);
    static Tensor from(Shape shape, std::vector<double> data, bool requires_grad = false);
    static Tensor from_mat(const Mat& m, bool requires_grad = false);
    static Tensor scalar(double v);

    bool defined() const { return n_ != nullptr; }
    const Shape& shape() const { return n_->shape; }
    int rank() const { return static_cast<int>(n_->shape.size()); }
    int dim(int i) const { return n_->shape[static_cast<size_t>(i)]; }
    std::size_t size() const { return n_->value.size(); }

    std::span<const double> values() const { return n_->value; }
    std::span<double> values_mut() { return n_->value; }  // leaf updates only
    double item() const;

    bool requires_grad() const { return n_->requires_grad; }
    std::span<const double> grad() const { return n_->grad; }
    void zero_grad() { n_->grad.assign(n_->value.size(), 0.0); }

    Mat to_mat() const;

    detail::TensorNode* node() const { return n_.get(); }

private:
    explicit Tensor(std::shared_ptr<detail::TensorNode> n) : n_(std::move(n)) {}
    std::shared_ptr<detail::TensorNode> n_;

    friend Tensor make_op(Shape shape, std::vector<Tensor> parents,
                          std::function<void(detail::TensorNode&)> backprop);
};

// Seeds d(root)/d(root) = 1 and accumulates gradients into every node that
// requires them. root must be scalar. Leaf gradients add up across calls;
// clear them with zero_grad between steps.
void backward(const Tensor& root);

// --- op set -----------------------------------------------------------------

Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double s);
// x (m x n) plus bias row b (n), broadcast over rows
Tensor add_row_bias(const Tensor& x, const Tensor& b);
Tensor gelu(const Tensor& x);
Tensor softmax_rows(const Tensor& x);
// Normalizes each row over the channel (column) dimension. gamma/beta may be
// undefined tensors for a parameter-free norm.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);
Tensor layer_norm(const Tensor& x, double eps = 1e-5);
Tensor concat_channels(std::span<const Tensor> parts);
std::vector<Tensor> split_channels(const Tensor& x, std::span<const int> widths);
// Row gather/scatter with constant indices; gradients flow through values
// only (indices are plain integers, so differentiating through the index
// choice is not expressible).
Tensor gather_rows(const Tensor& x, std::span<const int> idx);
// Places row r of x at row idx[r] of an out_rows-tall result, zeros elsewhere.
// Indices must be distinct.
Tensor scatter_rows(const Tensor& x, std::span<const int> idx, int out_rows);
Tensor reshape(const Tensor& x, Shape shape);
// mean of squared entries, as a scalar tensor of shape {1}
Tensor mean_sq(const Tensor& x);

}  // namespace htnet
