#include "seal/layers.hpp"

#include <cmath>
#include <stdexcept>

#include "seal/error.hpp"

namespace seal::nn {

namespace {

double to_float(double v) { return static_cast<double>(static_cast<float>(v)); }

}  // namespace

Tensor ParamStore::add(const std::string& name, int rows, int cols, std::vector<double> values)
{
    if (params_.count(name)) throw ConfigError("duplicate parameter " + name);
    for (auto& v : values) v = to_float(v);
    auto t = Tensor::parameter(rows, cols, std::move(values));
    params_.emplace(name, t);
    return t;
}

Tensor ParamStore::add_normal(const std::string& name, int rows, int cols, double stddev, std::mt19937_64& rng)
{
    std::normal_distribution<double> dist(0.0, stddev);
    std::vector<double> v(std::size_t(rows) * cols);
    for (auto& x : v) x = dist(rng);
    return add(name, rows, cols, std::move(v));
}

Tensor ParamStore::add_constant(const std::string& name, int rows, int cols, double value)
{
    return add(name, rows, cols, std::vector<double>(std::size_t(rows) * cols, value));
}

Tensor ParamStore::get(const std::string& name) const
{
    auto it = params_.find(name);
    if (it == params_.end()) throw NotFoundError("no parameter named " + name);
    return it->second;
}

void ParamStore::set(const std::string& name, const std::vector<double>& values)
{
    auto t = get(name);
    if (values.size() != t.size()) throw ValidationError("parameter " + name + ": size mismatch");
    auto& dst = t.mutable_value();
    for (std::size_t i = 0; i < values.size(); ++i) dst[i] = to_float(values[i]);
}

std::vector<std::string> ParamStore::names() const
{
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [k, _] : params_) out.push_back(k);
    return out;
}

std::size_t ParamStore::count() const
{
    std::size_t n = 0;
    for (const auto& [_, t] : params_) n += t.size();
    return n;
}

void ParamStore::zero_grad()
{
    for (auto& [_, t] : params_) {
        Tensor copy = t;
        copy.zero_grad();
    }
}

void ParamStore::quantize()
{
    for (auto& [_, t] : params_) {
        Tensor copy = t;
        for (auto& v : copy.mutable_value()) v = to_float(v);
    }
}

Linear::Linear(ParamStore& store, const std::string& prefix, int in, int out, std::mt19937_64& rng, bool with_bias)
{
    weight = store.add_normal(prefix + ".weight", out, in, 1.0 / std::sqrt(double(in)), rng);
    if (with_bias) bias = store.add_constant(prefix + ".bias", 1, out, 0.0);
}

LayerNorm::LayerNorm(ParamStore& store, const std::string& prefix, int dim)
{
    gamma = store.add_constant(prefix + ".gamma", 1, dim, 1.0);
    beta = store.add_constant(prefix + ".beta", 1, dim, 0.0);
}

FeedForward::FeedForward(ParamStore& store, const std::string& prefix, int dim, int hidden, std::mt19937_64& rng)
    : fc1(store, prefix + ".fc1", dim, hidden, rng), fc2(store, prefix + ".fc2", hidden, dim, rng)
{
}

MultiHeadAttention::MultiHeadAttention(ParamStore& store, const std::string& prefix, int q_dim, int kv_dim,
                                       int inner_dim, int out_dim, int heads, std::mt19937_64& rng)
    : q_(store, prefix + ".q", q_dim, inner_dim, rng),
      k_(store, prefix + ".k", kv_dim, inner_dim, rng),
      v_(store, prefix + ".v", kv_dim, inner_dim, rng),
      o_(store, prefix + ".o", inner_dim, out_dim, rng),
      heads_(heads)
{
    if (heads <= 0 || inner_dim % heads != 0) throw ConfigError(prefix + ": inner dim not divisible by heads");
}

Tensor MultiHeadAttention::operator()(const Tensor& queries, const Tensor& keys, const Tensor& values,
                                      std::span<const uint8_t> allow, int* fallbacks) const
{
    const Tensor q = q_(queries);
    const Tensor k = k_(keys);
    const Tensor v = v_(values);
    const int inner = q.cols();
    const int dh = inner / heads_;
    const double scale = 1.0 / std::sqrt(double(dh));
    std::vector<Tensor> outs;
    outs.reserve(heads_);
    for (int h = 0; h < heads_; ++h) {
        const Tensor qh = heads_ == 1 ? q : ag::slice_cols(q, h * dh, dh);
        const Tensor kh = heads_ == 1 ? k : ag::slice_cols(k, h * dh, dh);
        const Tensor vh = heads_ == 1 ? v : ag::slice_cols(v, h * dh, dh);
        int fb = 0;
        const Tensor p = ag::softmax_rows(ag::scale(ag::matmul_nt(qh, kh), scale), allow, &fb);
        if (fallbacks && h == 0) *fallbacks += fb;
        outs.push_back(ag::matmul(p, vh));
    }
    return o_(heads_ == 1 ? outs.front() : ag::concat_cols(outs));
}

Tensor grid_positional_encoding(int h, int w, int dim)
{
    std::vector<double> v(std::size_t(h) * w * dim);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const auto enc = point_positional_encoding((x + 0.5) / w, (y + 0.5) / h, dim);
            std::copy(enc.begin(), enc.end(), v.begin() + (std::ptrdiff_t(y) * w + x) * dim);
        }
    }
    return Tensor::constant(h * w, dim, std::move(v));
}

std::vector<double> point_positional_encoding(double x, double y, int dim)
{
    std::vector<double> enc(dim, 0.0);
    const int half = dim / 2;
    const int freqs = std::max(1, half / 2);
    for (int axis = 0; axis < 2; ++axis) {
        const double coord = axis == 0 ? x : y;
        for (int f = 0; f < freqs; ++f) {
            const double omega = M_PI * std::pow(2.0, 0.5 * f);
            const int base = axis * half + 2 * f;
            if (base < dim) enc[base] = std::sin(omega * coord);
            if (base + 1 < dim) enc[base + 1] = std::cos(omega * coord);
        }
    }
    return enc;
}

void Adam::step(const std::vector<Tensor>& params, double lr)
{
    ++t_;
    const double c1 = 1.0 - std::pow(beta1_, double(t_));
    const double c2 = 1.0 - std::pow(beta2_, double(t_));
    for (const auto& p : params) {
        Tensor t = p;
        if (t.grad().size() != t.size()) continue;
        auto& [m, v] = moments_[t.node().get()];
        if (m.empty()) {
            m.assign(t.size(), 0.0);
            v.assign(t.size(), 0.0);
        }
        auto& val = t.mutable_value();
        const auto& g = t.grad();
        for (std::size_t i = 0; i < val.size(); ++i) {
            m[i] = beta1_ * m[i] + (1.0 - beta1_) * g[i];
            v[i] = beta2_ * v[i] + (1.0 - beta2_) * g[i] * g[i];
            const double step = lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + eps_);
            val[i] = to_float(val[i] - step);
        }
    }
}

}  // namespace seal::nn
