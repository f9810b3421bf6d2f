#include "seal/tensor.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include "seal/error.hpp"

namespace seal::ag {

namespace {

thread_local bool g_grad_enabled = true;

using NodePtr = std::shared_ptr<Node>;

NodePtr new_node(int rows, int cols)
{
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value.assign(std::size_t(rows) * cols, 0.0);
    return n;
}

// Attaches parents and the backward closure when any parent is differentiable.
Tensor finish(NodePtr out, std::vector<NodePtr> parents, std::function<void(Node&)> fn)
{
    if (g_grad_enabled) {
        const bool any = std::any_of(parents.begin(), parents.end(),
                                     [](const NodePtr& p) { return p->requires_grad; });
        if (any) {
            out->requires_grad = true;
            out->parents = std::move(parents);
            out->backward = std::move(fn);
        }
    }
    return Tensor(std::move(out));
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op)
{
    if (a.rows() != b.rows() || a.cols() != b.cols()) {
        throw std::invalid_argument(std::string(op) + ": shape mismatch");
    }
}

// c[n x m] += a[n x k] * b[k x m]
void gemm_nn(const double* a, const double* b, double* c, int n, int k, int m)
{
    for (int i = 0; i < n; ++i) {
        double* ci = c + std::size_t(i) * m;
        const double* ai = a + std::size_t(i) * k;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            const double* bp = b + std::size_t(p) * m;
            for (int j = 0; j < m; ++j) ci[j] += av * bp[j];
        }
    }
}

// c[n x m] += a[n x k] * b[m x k]^T
void gemm_nt(const double* a, const double* b, double* c, int n, int k, int m)
{
    for (int i = 0; i < n; ++i) {
        const double* ai = a + std::size_t(i) * k;
        double* ci = c + std::size_t(i) * m;
        for (int j = 0; j < m; ++j) {
            const double* bj = b + std::size_t(j) * k;
            double acc = 0.0;
            for (int p = 0; p < k; ++p) acc += ai[p] * bj[p];
            ci[j] += acc;
        }
    }
}

// c[k x m] += a[n x k]^T * b[n x m]
void gemm_tn(const double* a, const double* b, double* c, int n, int k, int m)
{
    for (int i = 0; i < n; ++i) {
        const double* ai = a + std::size_t(i) * k;
        const double* bi = b + std::size_t(i) * m;
        for (int p = 0; p < k; ++p) {
            const double av = ai[p];
            if (av == 0.0) continue;
            double* cp = c + std::size_t(p) * m;
            for (int j = 0; j < m; ++j) cp[j] += av * bi[j];
        }
    }
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Tensor Tensor::zeros(int rows, int cols) { return Tensor(new_node(rows, cols)); }

Tensor Tensor::constant(int rows, int cols, std::vector<double> values)
{
    if (values.size() != std::size_t(rows) * cols) throw std::invalid_argument("tensor: size mismatch");
    auto n = std::make_shared<Node>();
    n->rows = rows;
    n->cols = cols;
    n->value = std::move(values);
    return Tensor(std::move(n));
}

Tensor Tensor::parameter(int rows, int cols, std::vector<double> values)
{
    Tensor t = constant(rows, cols, std::move(values));
    t.node_->requires_grad = true;
    return t;
}

std::vector<double> Tensor::row(int r) const
{
    const auto begin = node_->value.begin() + std::ptrdiff_t(r) * cols();
    return {begin, begin + cols()};
}

void Tensor::backward()
{
    if (size() != 1) throw std::invalid_argument("backward: tensor is not a scalar");
    if (!node_->requires_grad) return;
    // Iterative post-order DFS for a topological order.
    std::vector<Node*> order;
    std::unordered_set<Node*> seen;
    std::vector<std::pair<Node*, std::size_t>> stack{{node_.get(), 0}};
    seen.insert(node_.get());
    while (!stack.empty()) {
        auto& [n, idx] = stack.back();
        if (idx < n->parents.size()) {
            Node* p = n->parents[idx++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(n);
            stack.pop_back();
        }
    }
    for (Node* n : order) n->ensure_grad();
    node_->grad[0] += 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        if ((*it)->backward) (*it)->backward(**it);
    }
}

Tensor matmul(const Tensor& a, const Tensor& b)
{
    if (a.cols() != b.rows()) throw std::invalid_argument("matmul: inner dimension mismatch");
    const int n = a.rows(), k = a.cols(), m = b.cols();
    auto out = new_node(n, m);
    gemm_nn(a.value().data(), b.value().data(), out->value.data(), n, k, m);
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn, n, k, m](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            gemm_nt(self.grad.data(), bn->value.data(), an->grad.data(), n, m, k);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            gemm_tn(an->value.data(), self.grad.data(), bn->grad.data(), n, k, m);
        }
    });
}

Tensor matmul_nt(const Tensor& a, const Tensor& b)
{
    if (a.cols() != b.cols()) throw std::invalid_argument("matmul_nt: inner dimension mismatch");
    const int n = a.rows(), k = a.cols(), m = b.rows();
    auto out = new_node(n, m);
    gemm_nt(a.value().data(), b.value().data(), out->value.data(), n, k, m);
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn, n, k, m](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            gemm_nn(self.grad.data(), bn->value.data(), an->grad.data(), n, m, k);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            gemm_tn(self.grad.data(), an->value.data(), bn->grad.data(), n, m, k);
        }
    });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias)
{
    if (x.cols() != weight.cols()) throw std::invalid_argument("linear: input dimension mismatch");
    if (bias.defined() && (bias.rows() != 1 || bias.cols() != weight.rows())) {
        throw std::invalid_argument("linear: bias shape mismatch");
    }
    const int n = x.rows(), k = x.cols(), m = weight.rows();
    auto out = new_node(n, m);
    if (bias.defined()) {
        for (int i = 0; i < n; ++i) {
            std::copy(bias.value().begin(), bias.value().end(), out->value.begin() + std::ptrdiff_t(i) * m);
        }
    }
    gemm_nt(x.value().data(), weight.value().data(), out->value.data(), n, k, m);
    auto xn = x.node(), wn = weight.node();
    auto bn = bias.defined() ? bias.node() : new_node(1, m);
    return finish(out, {xn, wn, bn}, [xn, wn, bn, n, k, m](Node& self) {
        if (xn->requires_grad) {
            xn->ensure_grad();
            gemm_nn(self.grad.data(), wn->value.data(), xn->grad.data(), n, m, k);
        }
        if (wn->requires_grad) {
            wn->ensure_grad();
            gemm_tn(self.grad.data(), xn->value.data(), wn->grad.data(), n, m, k);
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) bn->grad[j] += self.grad[std::size_t(i) * m + j];
            }
        }
    });
}

namespace {

template <typename F, typename GA, typename GB>
Tensor binary(const Tensor& a, const Tensor& b, const char* name, F f, GA ga, GB gb)
{
    check_same_shape(a, b, name);
    auto out = new_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = f(a.value()[i], b.value()[i]);
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn, ga, gb](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                an->grad[i] += self.grad[i] * ga(an->value[i], bn->value[i]);
            }
        }
        if (bn->requires_grad) {
            bn->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) {
                bn->grad[i] += self.grad[i] * gb(an->value[i], bn->value[i]);
            }
        }
    });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b)
{
    return binary(
        a, b, "add", [](double x, double y) { return x + y; }, [](double, double) { return 1.0; },
        [](double, double) { return 1.0; });
}

Tensor sub(const Tensor& a, const Tensor& b)
{
    return binary(
        a, b, "sub", [](double x, double y) { return x - y; }, [](double, double) { return 1.0; },
        [](double, double) { return -1.0; });
}

Tensor mul(const Tensor& a, const Tensor& b)
{
    return binary(
        a, b, "mul", [](double x, double y) { return x * y; }, [](double, double y) { return y; },
        [](double x, double) { return x; });
}

Tensor add_row(const Tensor& a, const Tensor& row)
{
    if (row.rows() != 1 || row.cols() != a.cols()) throw std::invalid_argument("add_row: shape mismatch");
    const int n = a.rows(), m = a.cols();
    auto out = new_node(n, m);
    for (int i = 0; i < n; ++i) {
        for (int j = 0; j < m; ++j) {
            out->value[std::size_t(i) * m + j] = a.value()[std::size_t(i) * m + j] + row.value()[j];
        }
    }
    auto an = a.node(), rn = row.node();
    return finish(out, {an, rn}, [an, rn, n, m](Node& self) {
        if (an->requires_grad) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
        }
        if (rn->requires_grad) {
            rn->ensure_grad();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) rn->grad[j] += self.grad[std::size_t(i) * m + j];
            }
        }
    });
}

Tensor scale(const Tensor& a, double s)
{
    auto out = new_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < out->value.size(); ++i) out->value[i] = a.value()[i] * s;
    auto an = a.node();
    return finish(out, {an}, [an, s](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * s;
    });
}

Tensor gelu(const Tensor& a)
{
    constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
    constexpr double kA = 0.044715;
    auto out = new_node(a.rows(), a.cols());
    for (std::size_t i = 0; i < out->value.size(); ++i) {
        const double x = a.value()[i];
        out->value[i] = 0.5 * x * (1.0 + std::tanh(kC * (x + kA * x * x * x)));
    }
    auto an = a.node();
    return finish(out, {an}, [an](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) {
            const double x = an->value[i];
            const double u = kC * (x + kA * x * x * x);
            const double th = std::tanh(u);
            const double du = kC * (1.0 + 3.0 * kA * x * x);
            const double d = 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
            an->grad[i] += self.grad[i] * d;
        }
    });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps)
{
    const int n = x.rows(), m = x.cols();
    if (gamma.size() != std::size_t(m) || beta.size() != std::size_t(m)) {
        throw std::invalid_argument("layer_norm: affine shape mismatch");
    }
    auto out = new_node(n, m);
    auto xhat = std::make_shared<std::vector<double>>(std::size_t(n) * m);
    auto inv_std = std::make_shared<std::vector<double>>(n);
    for (int i = 0; i < n; ++i) {
        const double* xi = x.value().data() + std::size_t(i) * m;
        double mu = 0.0;
        for (int j = 0; j < m; ++j) mu += xi[j];
        mu /= m;
        double var = 0.0;
        for (int j = 0; j < m; ++j) var += (xi[j] - mu) * (xi[j] - mu);
        var /= m;
        const double is = 1.0 / std::sqrt(var + eps);
        (*inv_std)[i] = is;
        for (int j = 0; j < m; ++j) {
            const double h = (xi[j] - mu) * is;
            (*xhat)[std::size_t(i) * m + j] = h;
            out->value[std::size_t(i) * m + j] = h * gamma.value()[j] + beta.value()[j];
        }
    }
    auto xn = x.node(), gn = gamma.node(), bn = beta.node();
    return finish(out, {xn, gn, bn}, [xn, gn, bn, xhat, inv_std, n, m](Node& self) {
        if (gn->requires_grad || bn->requires_grad) {
            gn->ensure_grad();
            bn->ensure_grad();
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < m; ++j) {
                    const double g = self.grad[std::size_t(i) * m + j];
                    if (gn->requires_grad) gn->grad[j] += g * (*xhat)[std::size_t(i) * m + j];
                    if (bn->requires_grad) bn->grad[j] += g;
                }
            }
        }
        if (xn->requires_grad) {
            xn->ensure_grad();
            std::vector<double> dh(m);
            for (int i = 0; i < n; ++i) {
                double s1 = 0.0, s2 = 0.0;
                for (int j = 0; j < m; ++j) {
                    dh[j] = self.grad[std::size_t(i) * m + j] * gn->value[j];
                    s1 += dh[j];
                    s2 += dh[j] * (*xhat)[std::size_t(i) * m + j];
                }
                for (int j = 0; j < m; ++j) {
                    const double h = (*xhat)[std::size_t(i) * m + j];
                    xn->grad[std::size_t(i) * m + j] += (*inv_std)[i] * (dh[j] - s1 / m - h * s2 / m);
                }
            }
        }
    });
}

Tensor softmax_rows(const Tensor& x, std::span<const uint8_t> allow, int* fallback_rows)
{
    const int n = x.rows(), m = x.cols();
    if (!allow.empty() && allow.size() != std::size_t(n) * m) {
        throw std::invalid_argument("softmax_rows: allow mask shape mismatch");
    }
    auto out = new_node(n, m);
    int fallbacks = 0;
    for (int i = 0; i < n; ++i) {
        const double* xi = x.value().data() + std::size_t(i) * m;
        double* oi = out->value.data() + std::size_t(i) * m;
        const uint8_t* ai = allow.empty() ? nullptr : allow.data() + std::size_t(i) * m;
        bool any = ai == nullptr;
        if (ai) {
            for (int j = 0; j < m && !any; ++j) any = ai[j] != 0;
            if (!any) ++fallbacks;
        }
        const bool use_mask = ai != nullptr && any;
        double mx = -std::numeric_limits<double>::infinity();
        for (int j = 0; j < m; ++j) {
            if (!use_mask || ai[j]) mx = std::max(mx, xi[j]);
        }
        double total = 0.0;
        for (int j = 0; j < m; ++j) {
            const double e = (!use_mask || ai[j]) ? std::exp(xi[j] - mx) : 0.0;
            oi[j] = e;
            total += e;
        }
        for (int j = 0; j < m; ++j) oi[j] /= total;
    }
    if (fallback_rows) *fallback_rows = fallbacks;
    auto xn = x.node();
    return finish(out, {xn}, [xn, n, m](Node& self) {
        xn->ensure_grad();
        for (int i = 0; i < n; ++i) {
            const double* yi = self.value.data() + std::size_t(i) * m;
            const double* gi = self.grad.data() + std::size_t(i) * m;
            double dot = 0.0;
            for (int j = 0; j < m; ++j) dot += yi[j] * gi[j];
            for (int j = 0; j < m; ++j) xn->grad[std::size_t(i) * m + j] += yi[j] * (gi[j] - dot);
        }
    });
}

Tensor slice_cols(const Tensor& a, int c0, int n)
{
    const int rows = a.rows(), m = a.cols();
    if (c0 < 0 || n < 0 || c0 + n > m) throw std::invalid_argument("slice_cols: out of range");
    auto out = new_node(rows, n);
    for (int i = 0; i < rows; ++i) {
        std::copy_n(a.value().begin() + std::ptrdiff_t(i) * m + c0, n,
                    out->value.begin() + std::ptrdiff_t(i) * n);
    }
    auto an = a.node();
    return finish(out, {an}, [an, rows, m, c0, n](Node& self) {
        an->ensure_grad();
        for (int i = 0; i < rows; ++i) {
            for (int j = 0; j < n; ++j) an->grad[std::size_t(i) * m + c0 + j] += self.grad[std::size_t(i) * n + j];
        }
    });
}

Tensor slice_rows(const Tensor& a, int r0, int n)
{
    const int m = a.cols();
    if (r0 < 0 || n < 0 || r0 + n > a.rows()) throw std::invalid_argument("slice_rows: out of range");
    auto out = new_node(n, m);
    std::copy_n(a.value().begin() + std::ptrdiff_t(r0) * m, std::size_t(n) * m, out->value.begin());
    auto an = a.node();
    return finish(out, {an}, [an, r0, m](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[std::size_t(r0) * m + i] += self.grad[i];
    });
}

Tensor concat_cols(const std::vector<Tensor>& parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
    const int rows = parts.front().rows();
    int total = 0;
    for (const auto& p : parts) {
        if (p.rows() != rows) throw std::invalid_argument("concat_cols: row mismatch");
        total += p.cols();
    }
    auto out = new_node(rows, total);
    std::vector<NodePtr> nodes;
    std::vector<int> offsets;
    int off = 0;
    for (const auto& p : parts) {
        for (int i = 0; i < rows; ++i) {
            std::copy_n(p.value().begin() + std::ptrdiff_t(i) * p.cols(), p.cols(),
                        out->value.begin() + std::ptrdiff_t(i) * total + off);
        }
        nodes.push_back(p.node());
        offsets.push_back(off);
        off += p.cols();
    }
    return finish(out, nodes, [nodes, offsets, rows, total](Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            auto& pn = *nodes[k];
            if (!pn.requires_grad) continue;
            pn.ensure_grad();
            for (int i = 0; i < rows; ++i) {
                for (int j = 0; j < pn.cols; ++j) {
                    pn.grad[std::size_t(i) * pn.cols + j] += self.grad[std::size_t(i) * total + offsets[k] + j];
                }
            }
        }
    });
}

Tensor concat_rows(const std::vector<Tensor>& parts)
{
    if (parts.empty()) throw std::invalid_argument("concat_rows: no inputs");
    const int cols = parts.front().cols();
    int total = 0;
    for (const auto& p : parts) {
        if (p.cols() != cols) throw std::invalid_argument("concat_rows: column mismatch");
        total += p.rows();
    }
    auto out = new_node(total, cols);
    std::vector<NodePtr> nodes;
    std::vector<std::size_t> offsets;
    std::size_t off = 0;
    for (const auto& p : parts) {
        std::copy(p.value().begin(), p.value().end(), out->value.begin() + std::ptrdiff_t(off));
        nodes.push_back(p.node());
        offsets.push_back(off);
        off += p.size();
    }
    return finish(out, nodes, [nodes, offsets](Node& self) {
        for (std::size_t k = 0; k < nodes.size(); ++k) {
            auto& pn = *nodes[k];
            if (!pn.requires_grad) continue;
            pn.ensure_grad();
            for (std::size_t i = 0; i < pn.value.size(); ++i) pn.grad[i] += self.grad[offsets[k] + i];
        }
    });
}

Tensor gather_rows(const Tensor& a, std::span<const int> index)
{
    const int m = a.cols();
    const int n = static_cast<int>(index.size());
    auto out = new_node(n, m);
    for (int i = 0; i < n; ++i) {
        if (index[i] < 0 || index[i] >= a.rows()) throw std::invalid_argument("gather_rows: index out of range");
        std::copy_n(a.value().begin() + std::ptrdiff_t(index[i]) * m, m, out->value.begin() + std::ptrdiff_t(i) * m);
    }
    auto an = a.node();
    std::vector<int> idx(index.begin(), index.end());
    return finish(out, {an}, [an, idx = std::move(idx), m](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < idx.size(); ++i) {
            for (int j = 0; j < m; ++j) an->grad[std::size_t(idx[i]) * m + j] += self.grad[i * m + j];
        }
    });
}

Tensor reshape(const Tensor& a, int rows, int cols)
{
    if (std::size_t(rows) * cols != a.size()) throw std::invalid_argument("reshape: size mismatch");
    auto out = new_node(rows, cols);
    out->value = a.value();
    auto an = a.node();
    return finish(out, {an}, [an](Node& self) {
        an->ensure_grad();
        for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    });
}

Tensor sum(const Tensor& a)
{
    auto out = new_node(1, 1);
    out->value[0] = std::accumulate(a.value().begin(), a.value().end(), 0.0);
    auto an = a.node();
    return finish(out, {an}, [an](Node& self) {
        an->ensure_grad();
        for (auto& g : an->grad) g += self.grad[0];
    });
}

Tensor mean(const Tensor& a)
{
    return scale(sum(a), 1.0 / static_cast<double>(std::max<std::size_t>(1, a.size())));
}

Tensor cosine_rows(const Tensor& a, const Tensor& b)
{
    check_same_shape(a, b, "cosine_rows");
    const int n = a.rows(), m = a.cols();
    auto out = new_node(n, 1);
    auto na = std::make_shared<std::vector<double>>(n);
    auto nb = std::make_shared<std::vector<double>>(n);
    for (int i = 0; i < n; ++i) {
        const double* ai = a.value().data() + std::size_t(i) * m;
        const double* bi = b.value().data() + std::size_t(i) * m;
        double dot = 0.0, aa = 0.0, bb = 0.0;
        for (int j = 0; j < m; ++j) {
            dot += ai[j] * bi[j];
            aa += ai[j] * ai[j];
            bb += bi[j] * bi[j];
        }
        (*na)[i] = std::sqrt(aa);
        (*nb)[i] = std::sqrt(bb);
        out->value[i] = ((*na)[i] > 0.0 && (*nb)[i] > 0.0) ? dot / ((*na)[i] * (*nb)[i]) : 0.0;
    }
    auto an = a.node(), bn = b.node();
    return finish(out, {an, bn}, [an, bn, na, nb, n, m](Node& self) {
        for (int i = 0; i < n; ++i) {
            const double A = (*na)[i], B = (*nb)[i];
            if (A == 0.0 || B == 0.0) continue;
            const double c = self.value[i];
            const double g = self.grad[i];
            const double* ai = an->value.data() + std::size_t(i) * m;
            const double* bi = bn->value.data() + std::size_t(i) * m;
            if (an->requires_grad) {
                an->ensure_grad();
                for (int j = 0; j < m; ++j) {
                    an->grad[std::size_t(i) * m + j] += g * (bi[j] / (A * B) - c * ai[j] / (A * A));
                }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int j = 0; j < m; ++j) {
                    bn->grad[std::size_t(i) * m + j] += g * (ai[j] / (A * B) - c * bi[j] / (B * B));
                }
            }
        }
    });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const double> targets)
{
    if (targets.size() != logits.size()) throw std::invalid_argument("bce_with_logits: size mismatch");
    const std::size_t n = logits.size();
    auto out = new_node(1, 1);
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double z = logits.value()[i];
        // log(1 + exp(-|z|)) + max(z, 0) - z * y
        total += std::max(z, 0.0) - z * targets[i] + std::log1p(std::exp(-std::abs(z)));
    }
    out->value[0] = total / static_cast<double>(n);
    auto ln = logits.node();
    std::vector<double> y(targets.begin(), targets.end());
    return finish(out, {ln}, [ln, y = std::move(y), n](Node& self) {
        ln->ensure_grad();
        const double g = self.grad[0] / static_cast<double>(n);
        for (std::size_t i = 0; i < n; ++i) {
            const double s = 1.0 / (1.0 + std::exp(-ln->value[i]));
            ln->grad[i] += g * (s - y[i]);
        }
    });
}

}  // namespace seal::ag
