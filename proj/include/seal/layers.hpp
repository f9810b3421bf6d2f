#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "seal/tensor.hpp"

namespace seal::nn {

using ag::Tensor;

// Named parameters in a stable (lexicographic) order. Values are kept
// representable in 32-bit floats so checkpoints round-trip exactly.
class ParamStore {
public:
    Tensor add(const std::string& name, int rows, int cols, std::vector<double> values);
    Tensor add_normal(const std::string& name, int rows, int cols, double stddev, std::mt19937_64& rng);
    Tensor add_constant(const std::string& name, int rows, int cols, double value);

    bool contains(const std::string& name) const { return params_.count(name) != 0; }
    Tensor get(const std::string& name) const;
    // Overwrites a parameter's values in place (shape must match).
    void set(const std::string& name, const std::vector<double>& values);

    std::vector<std::string> names() const;
    const std::map<std::string, Tensor>& all() const { return params_; }
    std::size_t count() const;

    void zero_grad();
    // Rounds every value to the nearest float.
    void quantize();

private:
    std::map<std::string, Tensor> params_;
};

struct Linear {
    Tensor weight;  // out x in
    Tensor bias;    // 1 x out (undefined when disabled)

    Linear() = default;
    Linear(ParamStore& store, const std::string& prefix, int in, int out, std::mt19937_64& rng,
           bool with_bias = true);
    Tensor operator()(const Tensor& x) const { return ag::linear(x, weight, bias); }
    int in() const { return weight.cols(); }
    int out() const { return weight.rows(); }
};

struct LayerNorm {
    Tensor gamma;
    Tensor beta;

    LayerNorm() = default;
    LayerNorm(ParamStore& store, const std::string& prefix, int dim);
    Tensor operator()(const Tensor& x) const { return ag::layer_norm(x, gamma, beta); }
};

struct FeedForward {
    Linear fc1;
    Linear fc2;

    FeedForward() = default;
    FeedForward(ParamStore& store, const std::string& prefix, int dim, int hidden, std::mt19937_64& rng);
    Tensor operator()(const Tensor& x) const { return fc2(ag::gelu(fc1(x))); }
};

// Multi-head scaled dot-product attention. Queries come from a q_dim space, keys
// and values from a kv_dim space; the output lives in out_dim.
class MultiHeadAttention {
public:
    MultiHeadAttention() = default;
    MultiHeadAttention(ParamStore& store, const std::string& prefix, int q_dim, int kv_dim, int inner_dim,
                       int out_dim, int heads, std::mt19937_64& rng);

    // `allow` is n_q x n_kv (1 = attend). Rows with no allowed key fall back to
    // attending everywhere; the count of such rows is added to *fallbacks.
    Tensor operator()(const Tensor& queries, const Tensor& keys, const Tensor& values,
                      std::span<const uint8_t> allow = {}, int* fallbacks = nullptr) const;
    Tensor operator()(const Tensor& queries, const Tensor& keys_values, std::span<const uint8_t> allow = {},
                      int* fallbacks = nullptr) const
    {
        return (*this)(queries, keys_values, keys_values, allow, fallbacks);
    }

    int heads() const { return heads_; }
    const Linear& q() const { return q_; }
    const Linear& k() const { return k_; }
    const Linear& v() const { return v_; }
    const Linear& o() const { return o_; }

private:
    Linear q_, k_, v_, o_;
    int heads_ = 1;
};

// Fixed 2D sinusoidal encoding for an h x w grid (row-major tokens), dim columns.
// Half the channels encode the row, half the column.
Tensor grid_positional_encoding(int h, int w, int dim);
// Encoding of a continuous point given in normalized [0, 1] coordinates.
std::vector<double> point_positional_encoding(double x, double y, int dim);

// Adam with bias correction.
class Adam {
public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8) : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    // Updates every tensor in `params` from its accumulated gradient.
    void step(const std::vector<Tensor>& params, double lr);
    long steps() const { return t_; }

private:
    double beta1_, beta2_, eps_;
    long t_ = 0;
    std::map<const ag::Node*, std::pair<std::vector<double>, std::vector<double>>> moments_;
};

}  // namespace seal::nn
