#include <doctest.h>

#include <fstream>
#include <random>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "seal/benchmark.hpp"
#include "seal/error.hpp"

using namespace seal;
using namespace seal::benchmark;

namespace {

BinaryMask rect(int h, int w, Box b)
{
    BinaryMask m(h, w);
    m.fill_box(b);
    return m;
}

BinaryMask random_blob(std::mt19937_64& rng, int h, int w)
{
    std::uniform_int_distribution<int> xd(0, w - 1), yd(0, h - 1);
    int x0 = xd(rng), x1 = xd(rng), y0 = yd(rng), y1 = yd(rng);
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    auto m = rect(h, w, {x0, y0, x1, y1});
    // Knock out a few pixels so masks are not all rectangles.
    for (int i = 0; i < 3; ++i) m.set(xd(rng), yd(rng), false);
    if (m.empty()) m.set(x0, y0);
    return m;
}

BenchmarkManifest small_manifest()
{
    BenchmarkManifest m;
    m.name = "t";
    m.classes = {"car", "person", "road"};
    m.exclude = {"road"};
    m.height = 8;
    m.width = 8;
    return m;
}

}  // namespace

TEST_CASE("default exclusions")
{
    CHECK(default_exclusions("ddd17") == std::vector<std::string>{"flat"});
    CHECK(default_exclusions("dsec11").size() == 4);
    const auto d19 = default_exclusions("dsec19");
    CHECK(d19.size() == 5);
    CHECK(std::find(d19.begin(), d19.end(), "sky") != d19.end());
    CHECK_THROWS_AS(default_exclusions("kitti"), ConfigError);
    CHECK(small_manifest().eval_classes() == std::vector<std::string>{"car", "person"});
}

TEST_CASE("assign_labels uses the majority class")
{
    guidance::MaskSet ms;
    ms.level = guidance::Level::instance;
    ms.frame_id = "f";
    std::vector<int> sem(16, 0);
    for (int i = 8; i < 16; ++i) sem[i] = 1;  // bottom two rows are class 1
    ms.masks.push_back(rect(4, 4, {0, 0, 3, 2}));  // 8 of class 0, 4 of class 1
    ms.masks.push_back(rect(4, 4, {0, 1, 3, 2}));  // 4 / 4: best is class 0 at exactly 0.5
    ms.masks.push_back(rect(4, 4, {0, 3, 3, 3}));  // class 1, excluded below
    ms.masks.push_back(BinaryMask(4, 4));
    const std::vector<std::string> table{"car", "road"};
    const auto a = assign_labels(ms, sem, table, {"road"});
    REQUIRE(a.size() == 2);
    CHECK(a[0].label == "car");
    CHECK(a[0].frame_id == "f");
    CHECK(a[1].label == "car");
    CHECK(assign_labels(ms, sem, table, {"road"}, 0.6).size() == 1);
    CHECK(assign_labels(ms, sem, table, {}).size() == 3);
    sem[0] = 7;
    CHECK_THROWS_AS(assign_labels(ms, sem, table, {}), DataError);
}

TEST_CASE("assign_labels never yields excluded labels")
{
    std::mt19937_64 rng(4);
    const std::vector<std::string> table{"a", "b", "c", "d"};
    for (int trial = 0; trial < 30; ++trial) {
        std::vector<int> sem(100);
        for (auto& s : sem) s = int(rng() % 4);
        guidance::MaskSet ms;
        for (int k = 0; k < 5; ++k) ms.masks.push_back(random_blob(rng, 10, 10));
        for (const auto& a : assign_labels(ms, sem, table, {"b", "d"}, 0.0)) {
            CHECK(a.label != "b");
            CHECK(a.label != "d");
        }
    }
}

TEST_CASE("furthest point sampling")
{
    const auto strip = rect(3, 11, {0, 0, 10, 0});
    CHECK(fps_points(strip) == std::vector<std::pair<int, int>>{{5, 0}, {0, 0}, {10, 0}});
    const auto two = rect(4, 4, {1, 1, 2, 1});
    CHECK(fps_points(two).size() == 2);
    CHECK_THROWS_AS(fps_points(BinaryMask(4, 4)), PreconditionError);

    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
        const auto m = random_blob(rng, 12, 12);
        CHECK(fps_points(m, 3) == oracle::brute_fps(m, 3));
    }
}

TEST_CASE("greedy matching agrees with exhaustive search")
{
    std::mt19937_64 rng(13);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<BinaryMask> p, g;
        const int np = int(rng() % 5), ng = int(rng() % 5);
        for (int i = 0; i < np; ++i) p.push_back(random_blob(rng, 6, 6));
        for (int i = 0; i < ng; ++i) g.push_back(random_blob(rng, 6, 6));
        const auto a = greedy_match(p, g);
        const auto b = oracle::brute_match(p, g);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-15));
    }
}

TEST_CASE("AP hand case")
{
    auto m = small_manifest();
    m.height = 1;
    m.width = 10;
    BenchmarkFrame f;
    f.frame_id = "0";
    f.annotations.push_back({rect(1, 10, {0, 0, 9, 0}), "car"});
    m.frames.push_back(f);
    const std::vector<std::vector<Prediction>> preds{{{rect(1, 10, {0, 0, 5, 0}), "car"}}};
    const auto r = evaluate_ap(preds, m);
    CHECK(r.ap == doctest::Approx(0.3));
    CHECK(r.ap50 == doctest::Approx(1.0));
    CHECK(r.ap25 == doctest::Approx(1.0));
    CHECK(r.per_class.size() == 1);

    // A second, unmatched prediction halves precision.
    const std::vector<std::vector<Prediction>> two{{{rect(1, 10, {0, 0, 5, 0}), "car"}, {rect(1, 10, {9, 0, 9, 0}), "car"}}};
    CHECK(evaluate_ap(two, m).ap50 == doctest::Approx(0.5));

    const std::vector<std::vector<Prediction>> bad{{{rect(1, 10, {0, 0, 5, 0}), "truck"}}};
    CHECK_THROWS_AS(evaluate_ap(bad, m), ValidationError);
    CHECK_THROWS_AS(evaluate_ap({}, m), ValidationError);
    const auto j = r.to_json();
    CHECK(j.at("AP").get<double>() == doctest::Approx(0.3));
    CHECK(r.table().find("car") != std::string::npos);
}

TEST_CASE("AP agrees with the exhaustive oracle and is monotone in the threshold")
{
    std::mt19937_64 rng(21);
    const auto grid = iou_thresholds();
    for (int t = 0; t + 1 < 10; ++t) CHECK(grid[t] < grid[t + 1]);
    for (int trial = 0; trial < 40; ++trial) {
        auto m = small_manifest();
        std::vector<std::vector<Prediction>> preds;
        for (int f = 0; f < 3; ++f) {
            BenchmarkFrame fr;
            fr.frame_id = std::to_string(f);
            for (int k = int(rng() % 4); k > 0; --k) fr.annotations.push_back({random_blob(rng, 8, 8), rng() % 2 ? "car" : "person"});
            m.frames.push_back(fr);
            std::vector<Prediction> ps;
            for (int k = int(rng() % 4); k > 0; --k) ps.push_back({random_blob(rng, 8, 8), rng() % 2 ? "car" : "person"});
            preds.push_back(ps);
        }
        const auto r = evaluate_ap(preds, m);
        const auto o = oracle::brute_ap(preds, m);
        CHECK(r.ap == doctest::Approx(o.ap).epsilon(1e-12));
        CHECK(r.ap50 == doctest::Approx(o.ap50).epsilon(1e-12));
        CHECK(r.ap25 == doctest::Approx(o.ap25).epsilon(1e-12));
        CHECK(r.ap25 >= r.ap50);
        CHECK(r.ap50 >= r.ap);
    }
}

TEST_CASE("manifest round trip and label checks")
{
    testutil::TempDir dir;
    auto m = small_manifest();
    BenchmarkFrame f;
    f.frame_id = "a";
    f.events = dir / "a.evt";
    f.t0 = 100;
    f.annotations.push_back({rect(8, 8, {1, 1, 3, 4}), "person", guidance::Level::part, "a"});
    m.frames.push_back(f);
    save_manifest(m, dir / "b.json");
    const auto r = load_manifest(dir / "b.json");
    CHECK(r.name == "t");
    CHECK(r.classes == m.classes);
    CHECK(r.exclude == m.exclude);
    REQUIRE(r.frames.size() == 1);
    CHECK(r.frames[0].t0 == 100);
    CHECK(r.frames[0].events == f.events);
    CHECK(r.frames[0].annotations[0].mask == f.annotations[0].mask);
    CHECK(r.frames[0].annotations[0].level == guidance::Level::part);

    m.frames[0].annotations[0].label = "road";
    save_manifest(m, dir / "c.json");
    CHECK_THROWS_AS(load_manifest(dir / "c.json"), DataError);
    {
        std::ofstream(dir / "d.json") << "{not json";
    }
    CHECK_THROWS_AS(load_manifest(dir / "d.json"), FormatError);
}

TEST_CASE("silhouette examples")
{
    CHECK(silhouette_score({{1, 0}, {2, 0}, {0, 1}, {0, 3}}, {0, 0, 1, 1}) == doctest::Approx(1.0));
    // Singletons score zero; the pair scores 1 - 0 / sqrt(2) each.
    CHECK(silhouette_score({{1, 0}, {1, 0}, {0, 1}}, {0, 0, 1}) == doctest::Approx(2.0 / 3.0));
    CHECK(silhouette_score({{1, 0}, {0, 1}}, {0, 0}) == 0.0);
    // Swapped labels give a negative score.
    CHECK(silhouette_score({{1, 0}, {0, 1}, {1, 0}, {0, 1}}, {0, 0, 1, 1}) < 0.0);
    CHECK_THROWS_AS(silhouette_score({{1, 0}}, {0, 1}), ValidationError);
}

TEST_CASE("prediction and feature export on a synthetic benchmark")
{
    testutil::TempDir dir;
    training::SynthCorpusConfig cfg;
    cfg.frames = 2;
    cfg.seed = 40;
    const auto path = write_synthetic_benchmark(dir.path(), cfg, "synthetic");
    const auto man = load_manifest(path);
    REQUIRE(man.frames.size() == 2);
    std::size_t annotations = 0;
    for (const auto& f : man.frames) annotations += f.annotations.size();
    REQUIRE(annotations > 0);

    const model::Model m(model::ModelConfig::desk(), 3);
    const guidance::SyntheticTextEncoder text(32, man.classes);
    const TextEncoder enc = [&](const std::string& s) { return text.encode(s); };

    const auto boxes = predict(m, man, PromptKind::box, enc);
    const auto points = predict(m, man, PromptKind::point, enc);
    for (std::size_t f = 0; f < man.frames.size(); ++f) {
        CHECK(boxes[f].size() == man.frames[f].annotations.size());
        CHECK(points[f].size() == man.frames[f].annotations.size());
    }
    const auto ev = man.eval_classes();
    for (const auto& fr : boxes) {
        for (const auto& p : fr) CHECK(std::find(ev.begin(), ev.end(), p.label) != ev.end());
    }
    CHECK_NOTHROW(evaluate_ap(boxes, man));
    const auto r1 = random_labels(boxes, man, 9), r2 = random_labels(boxes, man, 9);
    for (std::size_t f = 0; f < r1.size(); ++f) {
        for (std::size_t k = 0; k < r1[f].size(); ++k) CHECK(r1[f][k].label == r2[f][k].label);
    }

    const auto rows = export_mask_features(m, man, PromptKind::box, enc);
    CHECK(rows.size() == annotations);
    const auto again = export_mask_features(m, man, PromptKind::box, enc);
    for (std::size_t i = 0; i < rows.size(); ++i) CHECK(rows[i].feature == again[i].feature);

    save_feature_dump(rows, dir / "f.sft");
    const auto back = load_feature_dump(dir / "f.sft");
    REQUIRE(back.size() == rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        CHECK(back[i].frame == rows[i].frame);
        CHECK(back[i].label == rows[i].label);
        for (std::size_t c = 0; c < rows[i].feature.size(); ++c) {
            CHECK(back[i].feature[c] == double(float(rows[i].feature[c])));
        }
    }
    CHECK(prompt_kind_from_string("point") == PromptKind::point);
    CHECK_THROWS_AS(prompt_kind_from_string("lasso"), ValidationError);
}

TEST_CASE("roi profiling rows")
{
    const auto rows = profile_roi_align({16, 64}, {1, 50}, 4, 3, 1);
    REQUIRE(rows.size() == 4);
    for (const auto& r : rows) CHECK(r.ms >= 0.0);
    const auto csv = profile_csv(rows);
    CHECK(csv.rfind("resolution,masks,ms", 0) == 0);
    std::size_t lines = 0;
    for (char c : csv) lines += c == '\n';
    CHECK(lines == 5);
}
