#include <doctest.h>

#include <algorithm>
#include <fstream>
#include <numeric>
#include <random>

#include "../test_util.hpp"
#include "seal/error.hpp"
#include "seal/events.hpp"

using namespace seal;
using namespace seal::events;

namespace {

EventStream stream_of(std::initializer_list<std::tuple<int, int, int64_t, int>> evs, int w = 8, int h = 8)
{
    EventStream s;
    s.width = w;
    s.height = h;
    for (const auto& [x, y, t, p] : evs) s.push_back(x, y, t, p);
    return s;
}

EventStream random_stream(std::mt19937_64& rng, int n, int w, int h, int64_t t0, int64_t window, bool positive)
{
    std::uniform_int_distribution<int> xd(0, w - 1), yd(0, h - 1), pd(0, 1);
    std::uniform_int_distribution<int64_t> td(t0, t0 + window - 1);
    std::vector<int64_t> ts(n);
    for (auto& t : ts) t = td(rng);
    std::sort(ts.begin(), ts.end());
    EventStream s;
    s.width = w;
    s.height = h;
    for (int i = 0; i < n; ++i) s.push_back(xd(rng), yd(rng), ts[i], positive || pd(rng) ? 1 : -1);
    return s;
}

}  // namespace

TEST_CASE("binary event round trip")
{
    testutil::TempDir dir;
    const auto s = stream_of({{1, 2, 10, 1}, {3, 4, 20, -1}});
    save_events(s, dir / "a.evt", EventFormat::binary);
    const auto r = load_events(dir / "a.evt", EventFormat::binary);
    CHECK(r.xs == s.xs);
    CHECK(r.ys == s.ys);
    CHECK(r.ts == s.ts);
    CHECK(r.ps == s.ps);
    CHECK(r.width == 8);
    CHECK(r.height == 8);
}

TEST_CASE("empty payload with valid header")
{
    testutil::TempDir dir;
    EventStream s;
    s.width = 4;
    s.height = 3;
    save_events(s, dir / "e.evt", EventFormat::binary);
    const auto r = load_events(dir / "e.evt", EventFormat::binary);
    CHECK(r.size() == 0);
    CHECK(r.width == 4);
}

TEST_CASE("binary format errors")
{
    testutil::TempDir dir;
    {
        std::ofstream(dir / "bad.evt") << "NOPE0000000000000";
    }
    CHECK_THROWS_AS(load_events(dir / "bad.evt", EventFormat::binary), FormatError);
    const auto s = stream_of({{1, 2, 10, 1}, {3, 4, 20, -1}});
    save_events(s, dir / "t.evt", EventFormat::binary);
    std::filesystem::resize_file(dir / "t.evt", std::filesystem::file_size(dir / "t.evt") - 3);
    CHECK_THROWS_AS(load_events(dir / "t.evt", EventFormat::binary), FormatError);
}

TEST_CASE("csv row outside the sensor names the row")
{
    testutil::TempDir dir;
    {
        std::ofstream out(dir / "e.csv");
        out << "# width=4 height=4\nx,y,t,p\n4,0,0,1\n";
    }
    try {
        load_events(dir / "e.csv", EventFormat::csv);
        FAIL("expected a validation error");
    } catch (const ValidationError& e) {
        CHECK(std::string(e.what()).find("0") != std::string::npos);
    }
}

TEST_CASE("csv round trip")
{
    testutil::TempDir dir;
    const auto s = stream_of({{0, 0, 5, 1}, {7, 7, 6, -1}});
    save_events(s, dir / "a.csv", EventFormat::csv);
    const auto r = load_events(dir / "a.csv", EventFormat::csv);
    CHECK(r.ts == s.ts);
    CHECK(r.ps == s.ps);
    CHECK(r.width == 8);
}

TEST_CASE("validate rejects unsorted timestamps and bad polarity")
{
    auto s = stream_of({{0, 0, 5, 1}, {1, 1, 4, 1}});
    CHECK_THROWS_AS(validate(s), ValidationError);
    auto p = stream_of({{0, 0, 5, 1}});
    p.ps[0] = 0;
    CHECK_THROWS_AS(validate(p), ValidationError);
}

TEST_CASE("slice_window is half-open")
{
    const auto s = stream_of({{0, 0, 0, 1}, {0, 0, 10, 1}, {0, 0, 30, 1}});
    CHECK(slice_window(s, 0, 25).ts == std::vector<int64_t>{0, 10});
    CHECK(slice_window(s, 100, 25).empty());
    const auto b = stream_of({{0, 0, 10, 1}, {0, 0, 29, 1}, {0, 0, 30, 1}});
    CHECK(slice_window(b, 10, 20).ts == std::vector<int64_t>{10, 29});
}

TEST_CASE("slice_window returns a subsequence")
{
    std::mt19937_64 rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const auto s = random_stream(rng, 200, 8, 8, 0, 1000, false);
        const auto w = slice_window(s, 300, 250);
        CHECK(w.size() <= s.size());
        std::size_t j = 0;
        for (std::size_t i = 0; i < s.size() && j < w.size(); ++i) {
            if (s.ts[i] == w.ts[j] && s.xs[i] == w.xs[j] && s.ys[i] == w.ys[j] && s.ps[i] == w.ps[j]) ++j;
        }
        CHECK(j == w.size());
    }
}

TEST_CASE("voxelize examples")
{
    const VoxelConfig cfg{3, 25'000, 4, 4};
    const auto empty = voxelize(stream_of({}, 4, 4), cfg, 0);
    CHECK(empty.data.size() == 48);
    CHECK(empty.sum() == 0.0);

    const auto one = voxelize(stream_of({{1, 2, 1000, 1}}, 4, 4), cfg, 1000);
    for (int b = 0; b < 3; ++b) {
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 4; ++x) CHECK(one.at(b, y, x) == (b == 0 && y == 2 && x == 1 ? 1.0f : 0.0f));
        }
    }

    // t* = 2 * (25000/4) / 25000 = 0.5
    const auto half = voxelize(stream_of({{1, 2, 1000 + 6250, -1}}, 4, 4), cfg, 1000);
    CHECK(half.at(0, 2, 1) == doctest::Approx(-0.5));
    CHECK(half.at(1, 2, 1) == doctest::Approx(-0.5));
    CHECK(half.at(2, 2, 1) == 0.0f);
    CHECK(half.t0 == 1000);
}

TEST_CASE("single bin keeps all weight in bin 0")
{
    const VoxelConfig cfg{1, 1000, 2, 2};
    const auto g = voxelize(stream_of({{0, 0, 0, 1}, {1, 1, 999, 1}}, 2, 2), cfg, 0);
    CHECK(g.sum() == doctest::Approx(2.0));
}

TEST_CASE("kernel is a partition of unity")
{
    for (int B : {1, 2, 3, 5}) {
        for (int i = 0; i <= 1000; ++i) {
            const double t = (B - 1) * i / 1000.0;
            double s = 0.0;
            for (int b = 0; b < B; ++b) s += temporal_kernel(t, b);
            CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
        }
    }
}

TEST_CASE("voxelize conserves signed mass and is linear")
{
    std::mt19937_64 rng(11);
    const VoxelConfig cfg{3, 25'000, 16, 16};
    for (int trial = 0; trial < 10; ++trial) {
        const auto a = random_stream(rng, 300, 16, 16, 0, 25'000, false);
        const auto b = random_stream(rng, 200, 16, 16, 0, 25'000, false);
        double pa = 0.0;
        for (auto p : a.ps) pa += p;
        const auto ga = voxelize(a, cfg, 0);
        CHECK(ga.sum() == doctest::Approx(pa).epsilon(1e-4));

        const auto gb = voxelize(b, cfg, 0);
        // Interleave by time so the merged stream stays valid.
        EventStream merged = a;
        for (std::size_t i = 0; i < b.size(); ++i) merged.push_back(b.xs[i], b.ys[i], b.ts[i], b.ps[i]);
        std::vector<std::size_t> order(merged.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto i, auto j) { return merged.ts[i] < merged.ts[j]; });
        EventStream sorted;
        sorted.width = sorted.height = 16;
        for (auto i : order) sorted.push_back(merged.xs[i], merged.ys[i], merged.ts[i], merged.ps[i]);
        const auto gm = voxelize(sorted, cfg, 0);
        for (std::size_t i = 0; i < gm.data.size(); ++i) {
            CHECK(gm.data[i] == doctest::Approx(ga.data[i] + gb.data[i]).epsilon(1e-5));
        }
    }
}

TEST_CASE("concat of consecutive streams voxelizes additively")
{
    const auto a = stream_of({{0, 0, 0, 1}, {1, 1, 100, -1}});
    const auto b = stream_of({{2, 2, 200, 1}});
    const VoxelConfig cfg{3, 1000, 8, 8};
    const auto g = voxelize(concat(a, b), cfg, 0);
    const auto ga = voxelize(a, cfg, 0), gb = voxelize(b, cfg, 0);
    for (std::size_t i = 0; i < g.data.size(); ++i) CHECK(g.data[i] == doctest::Approx(ga.data[i] + gb.data[i]));
}

TEST_CASE("geometry mismatch rescales to nearest grid coordinate")
{
    const VoxelConfig cfg{1, 1000, 4, 4};
    const auto g = voxelize(stream_of({{7, 7, 0, 1}, {0, 0, 0, 1}}, 8, 8), cfg, 0);
    CHECK(g.sum() == doctest::Approx(2.0));
    CHECK(g.at(0, 0, 0) == 1.0f);
    CHECK(g.at(0, 3, 3) == 1.0f);
}

TEST_CASE("normalize_voxel")
{
    VoxelGrid g;
    g.config = {1, 1000, 2, 2};
    g.data = {0, 0, 0, 0};
    CHECK(normalize_voxel(g).data == g.data);
    g.data = {2, -1, 0.5f, 1};
    const auto n = normalize_voxel(g);
    CHECK(n.data == std::vector<float>{1, -0.5f, 0.25f, 0.5f});
    CHECK(normalize_voxel(n).data == n.data);
}

TEST_CASE("voxel file round trip")
{
    testutil::TempDir dir;
    std::mt19937_64 rng(5);
    const auto g = voxelize(random_stream(rng, 100, 8, 8, 50, 1000, false), {3, 1000, 8, 8}, 50);
    save_voxel(g, dir / "g.vox");
    const auto r = load_voxel(dir / "g.vox");
    CHECK(r.data == g.data);
    CHECK(r.t0 == 50);
    CHECK(r.config.bins == 3);
    CHECK(r.config.window_us == 1000);
}

TEST_CASE("invalid voxel config")
{
    CHECK_THROWS_AS((VoxelConfig{0, 1000, 4, 4}.validate()), ConfigError);
    CHECK_THROWS_AS((VoxelConfig{3, 0, 4, 4}.validate()), ConfigError);
}
