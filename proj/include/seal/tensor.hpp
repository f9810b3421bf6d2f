#pragma once

// Minimal reverse-mode automatic differentiation over row-major matrices.
//
// A Tensor is a handle to a graph node holding a rows x cols value. Operations
// on tensors that require gradients record their parents and a backward closure;
// Tensor::backward() on a scalar walks the graph in reverse topological order.
// With grad recording disabled (NoGradGuard) operations only read their inputs,
// so a set of parameter tensors can be shared by concurrent forward passes.

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace seal::ag {

struct Node {
    int rows = 0;
    int cols = 0;
    std::vector<double> value;
    std::vector<double> grad;
    bool requires_grad = false;
    std::vector<std::shared_ptr<Node>> parents;
    std::function<void(Node&)> backward;

    void ensure_grad()
    {
        if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
    }
};

class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

    static Tensor zeros(int rows, int cols);
    static Tensor constant(int rows, int cols, std::vector<double> values);
    static Tensor parameter(int rows, int cols, std::vector<double> values);
    static Tensor scalar(double v) { return constant(1, 1, {v}); }

    bool defined() const { return node_ != nullptr; }
    int rows() const { return node_->rows; }
    int cols() const { return node_->cols; }
    std::size_t size() const { return node_->value.size(); }
    const std::vector<double>& value() const { return node_->value; }
    std::vector<double>& mutable_value() { return node_->value; }
    double operator()(int r, int c) const { return node_->value[std::size_t(r) * node_->cols + c]; }
    double item() const { return node_->value.at(0); }
    std::vector<double> row(int r) const;

    bool requires_grad() const { return node_->requires_grad; }
    const std::vector<double>& grad() const { return node_->grad; }
    std::vector<double>& mutable_grad()
    {
        node_->ensure_grad();
        return node_->grad;
    }
    void zero_grad() { node_->grad.assign(node_->value.size(), 0.0); }

    // Seeds d(self)/d(self) = 1 on a 1x1 tensor and accumulates into every leaf.
    void backward();

    // Same value, cut from the graph.
    Tensor detach() const { return constant(rows(), cols(), value()); }

    const std::shared_ptr<Node>& node() const { return node_; }

private:
    std::shared_ptr<Node> node_;
};

bool grad_enabled();

class NoGradGuard {
public:
    NoGradGuard();
    ~NoGradGuard();
    NoGradGuard(const NoGradGuard&) = delete;
    NoGradGuard& operator=(const NoGradGuard&) = delete;

private:
    bool previous_;
};

Tensor matmul(const Tensor& a, const Tensor& b);     // (n x k)(k x m)
Tensor matmul_nt(const Tensor& a, const Tensor& b);  // a * b^T
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);  // x W^T + b
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor add_row(const Tensor& a, const Tensor& row);  // broadcast a 1 x c row
Tensor scale(const Tensor& a, double s);
Tensor gelu(const Tensor& a);
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps = 1e-5);

// Row softmax. When `allow` is non-empty (rows x cols, 1 = allowed) disallowed
// entries get zero probability; a row with nothing allowed falls back to all-allowed.
// `fallback_rows` (optional) receives the number of rows that fell back.
Tensor softmax_rows(const Tensor& x, std::span<const uint8_t> allow = {}, int* fallback_rows = nullptr);

Tensor slice_cols(const Tensor& a, int c0, int n);
Tensor slice_rows(const Tensor& a, int r0, int n);
Tensor concat_cols(const std::vector<Tensor>& parts);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor gather_rows(const Tensor& a, std::span<const int> index);
// Same row-major values viewed as rows x cols.
Tensor reshape(const Tensor& a, int rows, int cols);

Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);

// Per-row cosine similarity (n x 1). A zero-norm row of `a` yields 0 with zero gradient.
Tensor cosine_rows(const Tensor& a, const Tensor& b);

// Mean binary cross-entropy with logits against fixed soft targets in [0, 1].
Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets);

}  // namespace seal::ag
