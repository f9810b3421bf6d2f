#pragma once

// Independent reference implementations used as test oracles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include "seal/benchmark.hpp"
#include "seal/mask.hpp"

namespace oracle {

using seal::BinaryMask;

inline double iou(const BinaryMask& a, const BinaryMask& b)
{
    std::size_t inter = 0, uni = 0;
    for (std::size_t i = 0; i < a.bits().size(); ++i) {
        inter += a.bits()[i] && b.bits()[i];
        uni += a.bits()[i] || b.bits()[i];
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

// Exhaustive matcher: every injective assignment of size min(P, G) is scored by
// its pair keys (IoU desc, prediction area rank asc, GT index asc) sorted best
// first; the lexicographically best list wins. Returns per-prediction IoU or -1.
inline std::vector<double> brute_match(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts)
{
    const std::size_t P = preds.size(), G = gts.size();
    std::vector<double> none(P, -1.0);
    if (P == 0 || G == 0) return none;
    std::vector<std::size_t> rank(P);
    {
        std::vector<std::size_t> order(P);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](auto a, auto b) { return preds[a].area() > preds[b].area(); });
        for (std::size_t r = 0; r < P; ++r) rank[order[r]] = r;
    }
    using Key = std::tuple<double, std::size_t, std::size_t>;  // (-iou, rank, gt)
    auto better = [](const std::vector<Key>& a, const std::vector<Key>& b) { return a < b; };

    std::vector<Key> best_keys;
    std::vector<double> best;
    bool have = false;
    // Enumerate permutations of the larger side; the first min(P, G) slots pair up.
    if (P <= G) {
        std::vector<std::size_t> g(G);
        std::iota(g.begin(), g.end(), 0);
        do {
            std::vector<Key> keys;
            std::vector<double> out(P, -1.0);
            for (std::size_t p = 0; p < P; ++p) {
                const double v = iou(preds[p], gts[g[p]]);
                keys.emplace_back(-v, rank[p], g[p]);
                out[p] = v;
            }
            std::sort(keys.begin(), keys.end());
            if (!have || better(keys, best_keys)) {
                best_keys = keys;
                best = out;
                have = true;
            }
        } while (std::next_permutation(g.begin(), g.end()));
    } else {
        std::vector<std::size_t> p(P);
        std::iota(p.begin(), p.end(), 0);
        do {
            std::vector<Key> keys;
            std::vector<double> out(P, -1.0);
            for (std::size_t gi = 0; gi < G; ++gi) {
                const double v = iou(preds[p[gi]], gts[gi]);
                keys.emplace_back(-v, rank[p[gi]], gi);
                out[p[gi]] = v;
            }
            std::sort(keys.begin(), keys.end());
            if (!have || better(keys, best_keys)) {
                best_keys = keys;
                best = out;
                have = true;
            }
        } while (std::next_permutation(p.begin(), p.end()));
    }
    return best;
}

struct ApResult {
    double ap = 0.0, ap50 = 0.0, ap25 = 0.0;
};

// Class-mean precision at each threshold, over classes with ground truth.
inline ApResult brute_ap(const std::vector<std::vector<seal::benchmark::Prediction>>& preds,
                         const seal::benchmark::BenchmarkManifest& m)
{
    std::map<std::string, std::array<double, 12>> acc;  // 10 grid TPs, tp25, #preds
    std::map<std::string, std::size_t> gt_count;
    for (std::size_t f = 0; f < m.frames.size(); ++f) {
        std::map<std::string, std::vector<BinaryMask>> pb, gb;
        for (const auto& p : preds[f]) pb[p.label].push_back(p.mask);
        for (const auto& a : m.frames[f].annotations) gb[a.label].push_back(a.mask);
        for (const auto& [label, ps] : pb) {
            auto& a = acc[label];
            a[11] += double(ps.size());
            const auto it = gb.find(label);
            if (it == gb.end()) continue;
            const auto matched = brute_match(ps, it->second);
            for (double v : matched) {
                if (v < 0) continue;
                for (int t = 0; t < 10; ++t) a[t] += v >= (50 + 5 * t) / 100.0 ? 1.0 : 0.0;
                a[10] += v >= 0.25 ? 1.0 : 0.0;
            }
        }
        for (const auto& [label, gs] : gb) gt_count[label] += gs.size();
    }
    ApResult r;
    std::size_t n = 0;
    for (const auto& [label, g] : gt_count) {
        if (g == 0) continue;
        ++n;
        const auto it = acc.find(label);
        if (it == acc.end() || it->second[11] == 0) continue;
        const auto& a = it->second;
        double s = 0.0;
        for (int t = 0; t < 10; ++t) s += a[t] / a[11];
        r.ap += s / 10.0;
        r.ap50 += a[0] / a[11];
        r.ap25 += a[10] / a[11];
    }
    if (n > 0) {
        r.ap /= double(n);
        r.ap50 /= double(n);
        r.ap25 /= double(n);
    }
    return r;
}

// Furthest point sampling recomputed from scratch at every step. Distances to
// the centroid are compared as exact fractions: d * n^2 in integers.
inline std::vector<std::pair<int, int>> brute_fps(const BinaryMask& m, int k)
{
    std::vector<std::pair<int, int>> px;
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (m.get(x, y)) px.emplace_back(x, y);
        }
    }
    const long long n = static_cast<long long>(px.size());
    long long sx = 0, sy = 0;
    for (const auto& [x, y] : px) {
        sx += x;
        sy += y;
    }
    // (distance key, y, x) minimal
    auto seed = *std::min_element(px.begin(), px.end(), [&](const auto& a, const auto& b) {
        const long long da = (n * a.first - sx) * (n * a.first - sx) + (n * a.second - sy) * (n * a.second - sy);
        const long long db = (n * b.first - sx) * (n * b.first - sx) + (n * b.second - sy) * (n * b.second - sy);
        return std::make_tuple(da, a.second, a.first) < std::make_tuple(db, b.second, b.first);
    });
    std::vector<std::pair<int, int>> chosen{seed};
    while (static_cast<long long>(chosen.size()) < std::min<long long>(k, n)) {
        std::tuple<long long, int, int> best{1, 0, 0};
        bool have = false;
        for (const auto& p : px) {
            if (std::find(chosen.begin(), chosen.end(), p) != chosen.end()) continue;
            long long dmin = -1;
            for (const auto& c : chosen) {
                const long long d = (long long)(p.first - c.first) * (p.first - c.first) +
                                    (long long)(p.second - c.second) * (p.second - c.second);
                if (dmin < 0 || d < dmin) dmin = d;
            }
            const auto key = std::make_tuple(-dmin, p.second, p.first);
            if (!have || key < best) {
                best = key;
                have = true;
            }
        }
        chosen.emplace_back(std::get<2>(best), std::get<1>(best));
    }
    return chosen;
}

}  // namespace oracle
