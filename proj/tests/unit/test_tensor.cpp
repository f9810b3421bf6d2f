#include <doctest.h>

#include <random>

#include "../grad_check.hpp"
#include "seal/layers.hpp"
#include "seal/tensor.hpp"

using namespace seal;
using ag::Tensor;

namespace {

Tensor rand_param(std::mt19937_64& rng, int r, int c, double s = 1.0)
{
    std::normal_distribution<double> n(0.0, s);
    std::vector<double> v(std::size_t(r) * c);
    for (auto& x : v) x = n(rng);
    return Tensor::parameter(r, c, v);
}

constexpr double kEps = 1e-5;
constexpr double kTol = 1e-6;

}  // namespace

TEST_CASE("elementwise and matrix ops match finite differences")
{
    std::mt19937_64 rng(1);
    auto a = rand_param(rng, 3, 4), b = rand_param(rng, 3, 4), w = rand_param(rng, 5, 4), bias = rand_param(rng, 1, 5);
    auto c = rand_param(rng, 4, 2), row = rand_param(rng, 1, 4);

    auto check = [&](const std::string name, std::function<Tensor()> f, std::vector<Tensor> leaves) {
        CAPTURE(name);
        const auto r = testutil::grad_check(f, leaves, kEps, 1e-3);
        CHECK(r.max_rel < kTol);
    };
    check("add", [&] { return ag::sum(ag::mul(ag::add(a, b), a)); }, {a, b});
    check("sub", [&] { return ag::sum(ag::mul(ag::sub(a, b), b)); }, {a, b});
    check("matmul", [&] { return ag::sum(ag::gelu(ag::matmul(a, c))); }, {a, c});
    check("matmul_nt", [&] { return ag::sum(ag::gelu(ag::matmul_nt(a, b))); }, {a, b});
    check("linear", [&] { return ag::sum(ag::gelu(ag::linear(a, w, bias))); }, {a, w, bias});
    check("add_row", [&] { return ag::sum(ag::gelu(ag::add_row(a, row))); }, {a, row});
    check("scale", [&] { return ag::mean(ag::gelu(ag::scale(a, -2.5))); }, {a});
    check("layer_norm", [&] {
        auto g = ag::layer_norm(a, row, ag::scale(row, 0.5));
        return ag::sum(ag::mul(g, b));
    }, {a, row});
    check("softmax", [&] { return ag::sum(ag::mul(ag::softmax_rows(a), b)); }, {a, b});
    const std::vector<uint8_t> allow{1, 0, 1, 1, 0, 0, 0, 0, 1, 1, 1, 1};
    check("masked softmax", [&] { return ag::sum(ag::mul(ag::softmax_rows(a, allow), b)); }, {a, b});
    check("slices", [&] {
        const auto left = ag::concat_cols({ag::slice_cols(a, 1, 2), ag::slice_cols(a, 0, 1)});
        const auto right = ag::slice_cols(ag::concat_rows({ag::slice_rows(b, 2, 1), ag::slice_rows(b, 0, 2)}), 0, 3);
        return ag::sum(ag::mul(left, right));
    }, {a, b});
    const std::vector<int> idx{2, 0, 2};
    check("gather", [&] { return ag::sum(ag::mul(ag::gather_rows(a, idx), b)); }, {a, b});
    check("reshape", [&] { return ag::sum(ag::gelu(ag::reshape(a, 4, 3))); }, {a});
    check("cosine", [&] { return ag::sum(ag::cosine_rows(a, b)); }, {a, b});
    const std::vector<double> targets{0, 1, 0.5, 0.2, 1, 0, 0, 1, 0.3, 0.9, 0.1, 0};
    check("bce", [&] { return ag::bce_with_logits(ag::reshape(a, 1, 12), targets); }, {a});
}

TEST_CASE("cosine of a zero row is zero with zero gradient")
{
    auto a = Tensor::parameter(1, 3, {0, 0, 0});
    auto b = Tensor::parameter(1, 3, {1, 2, 3});
    auto c = ag::sum(ag::cosine_rows(a, b));
    CHECK(c.item() == 0.0);
    c.backward();
    for (double g : a.grad()) CHECK(g == 0.0);
}

TEST_CASE("masked softmax gives zero weight to disallowed entries and falls back on empty rows")
{
    const auto x = Tensor::constant(2, 3, {1, 2, 3, 4, 5, 6});
    const std::vector<uint8_t> allow{0, 1, 1, 0, 0, 0};
    int fb = 0;
    const auto p = ag::softmax_rows(x, allow, &fb);
    CHECK(fb == 1);
    CHECK(p(0, 0) == 0.0);
    CHECK(p(0, 1) + p(0, 2) == doctest::Approx(1.0));
    const auto full = ag::softmax_rows(x);
    for (int j = 0; j < 3; ++j) CHECK(p(1, j) == doctest::Approx(full(1, j)));
}

TEST_CASE("no-grad mode records nothing")
{
    auto a = Tensor::parameter(1, 2, {1, 2});
    ag::NoGradGuard ng;
    const auto y = ag::scale(a, 2.0);
    CHECK_FALSE(y.requires_grad());
    CHECK(y.node()->parents.empty());
}

TEST_CASE("adam moves parameters against the gradient and keeps them float-representable")
{
    nn::ParamStore store;
    auto p = store.add("p", 1, 2, {1.0, -1.0});
    auto loss = ag::sum(ag::mul(p, p));
    loss.backward();
    nn::Adam adam;
    adam.step({p}, 0.1);
    CHECK(p(0, 0) < 1.0);
    CHECK(p(0, 1) > -1.0);
    for (double v : p.value()) CHECK(double(float(v)) == v);
}

TEST_CASE("param store keeps a stable order and rejects duplicates")
{
    nn::ParamStore s;
    s.add("b", 1, 1, {1});
    s.add("a", 1, 1, {2});
    CHECK(s.names() == std::vector<std::string>{"a", "b"});
    CHECK_THROWS(s.add("a", 1, 1, {3}));
    CHECK(s.count() == 2);
}
