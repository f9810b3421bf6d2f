#include <doctest.h>

#include <cmath>
#include <random>

#include "../test_util.hpp"
#include "seal/error.hpp"
#include "seal/guidance.hpp"

using namespace seal;
using namespace seal::guidance;

namespace {

double cosine(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0, na = 0, nb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += a[i] * b[i];
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return d / std::sqrt(na * nb);
}

double norm(const std::vector<double>& a)
{
    double s = 0;
    for (double v : a) s += v * v;
    return std::sqrt(s);
}

MaskSet halves(int h, int w)
{
    MaskSet ms;
    ms.level = Level::instance;
    BinaryMask l(h, w), r(h, w);
    l.fill_box({0, 0, w / 2 - 1, h - 1});
    r.fill_box({w / 2, 0, w - 1, h - 1});
    ms.masks = {l, r};
    return ms;
}

}  // namespace

TEST_CASE("validate_mask_set examples")
{
    auto ms = halves(4, 4);
    auto rep = validate_mask_set(ms, 4, 4);
    CHECK(rep.coverage == 1.0);
    CHECK(rep.overlap_pixels == 0);
    CHECK(rep.valid);

    ms.masks.push_back(ms.masks[0]);
    rep = validate_mask_set(ms, 4, 4);
    CHECK(rep.overlap_pixels == 8);
    CHECK(rep.valid);

    MaskSet half;
    half.masks = {halves(4, 4).masks[0]};
    rep = validate_mask_set(half, 4, 4);
    CHECK(rep.coverage == 0.5);
    CHECK_FALSE(rep.valid);

    MaskSet with_empty = halves(4, 4);
    with_empty.masks.emplace_back(4, 4);
    rep = validate_mask_set(with_empty, 4, 4);
    CHECK(rep.empty_masks == std::vector<std::size_t>{2});
    CHECK_FALSE(rep.valid);
}

TEST_CASE("mask_set_from_rle names the failing mask")
{
    std::vector<Rle> rles{rle_encode(halves(2, 2).masks[0]), Rle{2, 2, {1, 1}}};
    try {
        mask_set_from_rle(Level::part, rles, "f");
        FAIL("expected FormatError");
    } catch (const FormatError& e) {
        CHECK(std::string(e.what()).find("1") != std::string::npos);
    }
}

TEST_CASE("pool_pixel_features examples")
{
    FeatureMap c(3, 2, 2);
    for (auto& v : c.data) v = 0.7;
    BinaryMask m(8, 8);
    m.set(3, 4);
    for (double v : pool_pixel_features(c, m)) CHECK(v == doctest::Approx(0.7));

    FeatureMap lr(2, 2, 2);
    for (int y = 0; y < 2; ++y) {
        lr.at(0, y, 0) = 1.0;
        lr.at(1, y, 0) = -1.0;
        lr.at(0, y, 1) = 5.0;
        lr.at(1, y, 1) = 3.0;
    }
    const auto left = pool_pixel_features(lr, halves(4, 4).masks[0]);
    CHECK(left == std::vector<double>{1.0, -1.0});

    // 4x4 mask over a 2x2 map: cells (0,0) and (0,1) full, (1,0) half, (1,1) empty.
    FeatureMap f(1, 2, 2);
    f.data = {1.0, 2.0, 4.0, 8.0};
    BinaryMask w(4, 4);
    w.fill_box({0, 0, 3, 1});
    w.fill_box({0, 2, 1, 2});
    const double expect = (1.0 * 1.0 + 1.0 * 2.0 + 0.5 * 4.0) / 2.5;
    CHECK(pool_pixel_features(f, w)[0] == doctest::Approx(expect));

    CHECK_THROWS_AS(pool_pixel_features(f, BinaryMask(4, 4)), PreconditionError);
}

TEST_CASE("pool_pixel_features is linear in the map scale")
{
    std::mt19937_64 rng(4);
    std::normal_distribution<double> n;
    FeatureMap f(4, 3, 3);
    for (auto& v : f.data) v = n(rng);
    FeatureMap g = f;
    for (auto& v : g.data) v *= -3.0;
    BinaryMask m(9, 9);
    m.fill_box({1, 2, 6, 7});
    const auto a = pool_pixel_features(f, m), b = pool_pixel_features(g, m);
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(b[i] == doctest::Approx(-3.0 * a[i]));
}

TEST_CASE("boxes_from_masks")
{
    MaskSet ms;
    BinaryMask px(8, 8), full(8, 8), ell(8, 8);
    px.set(3, 5);
    full.fill_box({0, 0, 7, 7});
    ell.fill_box({2, 1, 2, 3});
    ell.fill_box({2, 3, 6, 3});
    ms.masks = {px, full, ell};
    const auto b = boxes_from_masks(ms);
    CHECK(b[0] == Box{3, 5, 3, 5});
    CHECK(b[1] == Box{0, 0, 7, 7});
    CHECK(b[2] == Box{2, 1, 6, 3});
    ms.masks.emplace_back(8, 8);
    CHECK_THROWS_AS(boxes_from_masks(ms), PreconditionError);
}

TEST_CASE("synthetic text encoder")
{
    SyntheticTextEncoder enc(16, {"car", "person", "traffic sign"});
    const auto car = enc.encode("car"), person = enc.encode("person");
    CHECK(norm(car) == doctest::Approx(1.0));
    CHECK(std::abs(cosine(car, person)) < 1e-12);
    CHECK(enc.encode("car") == car);
    // Multi-word phrases are recognised as one vocabulary entry.
    CHECK(cosine(enc.encode("traffic sign"), enc.encode("traffic sign")) == doctest::Approx(1.0));
    // A long caption stays close to its class phrase.
    CHECK(cosine(enc.encode("a car parked on the street"), car) > 0.8);
    CHECK(norm(enc.encode("zebra")) == doctest::Approx(1.0));
    CHECK_THROWS_AS(SyntheticTextEncoder(2, {"a", "b", "c"}), ConfigError);

    SyntheticTextEncoder templ(16, {"car", "person"}, 0x5ea1, "a photo of a {}");
    CHECK(templ.encode("car") != car);
    CHECK(cosine(templ.encode("car"), car) > cosine(templ.encode("car"), person));
}

TEST_CASE("synth_guidance is deterministic and class-separable")
{
    SynthConfig cfg;
    cfg.num_classes = 2;
    cfg.sigma = 0.0;
    const auto a = synth_guidance(7, cfg), b = synth_guidance(7, cfg);
    CHECK(a.image.rgb == b.image.rgb);
    CHECK(a.semantic_map == b.semantic_map);
    for (int l = 0; l < 3; ++l) {
        REQUIRE(a.mask_sets[l].masks.size() == b.mask_sets[l].masks.size());
        for (std::size_t k = 0; k < a.mask_sets[l].masks.size(); ++k) CHECK(a.mask_sets[l].masks[k] == b.mask_sets[l].masks[k]);
        CHECK(validate_mask_set(a.mask_sets[l], cfg.height, cfg.width).valid);
    }

    const auto g = build_guidance(a.image, a.mask_sets, a.providers);
    std::vector<std::vector<double>> by_class[2];
    const auto& inst = g.level(Level::instance);
    for (std::size_t k = 0; k < inst.records.size(); ++k) {
        const auto& m = inst.masks.masks[k];
        const auto box = tight_box(m);
        const int cls = a.semantic_map[std::size_t(box.y_min) * cfg.width + box.x_min];
        by_class[cls].push_back(inst.records[k].visual);
    }
    REQUIRE(!by_class[0].empty());
    REQUIRE(!by_class[1].empty());
    for (const auto& v : by_class[0]) CHECK(v == by_class[0].front());
    CHECK(std::abs(cosine(by_class[0].front(), by_class[1].front())) < 0.1);
}

TEST_CASE("too many classes for the guidance dim")
{
    SynthConfig cfg;
    cfg.num_classes = 5;
    cfg.dim = 4;
    CHECK_THROWS_AS(synth_guidance(1, cfg), ConfigError);
}

TEST_CASE("build_guidance structure and caption routing")
{
    SynthConfig cfg;
    const auto scene = synth_guidance(3, cfg);
    const auto g = build_guidance(scene.image, scene.mask_sets, scene.providers);
    for (Level l : kLevels) {
        const auto& lv = g.level(l);
        CHECK(lv.records.size() == scene.mask_sets[static_cast<int>(l)].size());
        for (const auto& r : lv.records) {
            CHECK(norm(r.visual) > 0);
            CHECK(norm(r.text) > 0);
            CHECK(r.text == scene.providers.text_encoder(r.caption_short));
            CHECK(r.caption_long.find(r.caption_short) != std::string::npos);
        }
    }
    const auto again = build_guidance(scene.image, scene.mask_sets, scene.providers);
    for (Level l : kLevels) {
        for (std::size_t k = 0; k < g.level(l).records.size(); ++k) {
            CHECK(g.level(l).records[k].visual == again.level(l).records[k].visual);
            CHECK(g.level(l).records[k].text == again.level(l).records[k].text);
        }
    }
}

TEST_CASE("custom providers: text feature comes from the short caption")
{
    Image img(4, 4);
    std::array<MaskSet, 3> sets;
    for (int l = 0; l < 3; ++l) {
        sets[l] = halves(4, 4);
        sets[l].level = kLevels[l];
    }
    TeacherProviders p;
    p.pixel_features = [](const Image&) {
        FeatureMap f(2, 2, 2);
        for (auto& v : f.data) v = 1.0;
        return f;
    };
    p.caption = [](const Image&, const BinaryMask&) { return Caption{"car", "a red car parked by the road"}; };
    p.text_encoder = [](const std::string& s) { return std::vector<double>{double(s.size()), 1.0}; };
    const auto g = build_guidance(img, sets, p);
    const auto& r = g.level(Level::semantic).records[0];
    CHECK(r.text == std::vector<double>{3.0, 1.0});
    CHECK(r.caption_long == "a red car parked by the road");
}

TEST_CASE("provider failures are wrapped with level and mask")
{
    Image img(4, 4);
    std::array<MaskSet, 3> sets;
    for (int l = 0; l < 3; ++l) {
        sets[l] = halves(4, 4);
        sets[l].level = kLevels[l];
    }
    TeacherProviders p;
    p.pixel_features = [](const Image&) { return FeatureMap(2, 2, 2); };
    p.caption = [](const Image&, const BinaryMask&) -> Caption { throw std::runtime_error("boom"); };
    p.text_encoder = [](const std::string&) { return std::vector<double>{1.0, 0.0}; };
    try {
        build_guidance(img, sets, p);
        FAIL("expected ProviderError");
    } catch (const ProviderError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("boom") != std::string::npos);
        CHECK(msg.find("mask 0") != std::string::npos);
    }
}

TEST_CASE("invalid level is rejected by build_guidance")
{
    Image img(4, 4);
    std::array<MaskSet, 3> sets;
    for (int l = 0; l < 3; ++l) {
        sets[l] = halves(4, 4);
        sets[l].level = kLevels[l];
    }
    sets[1].masks.pop_back();  // 50% coverage
    TeacherProviders p = synthetic_providers({"a", "b"}, 4, 0.0);
    CHECK_THROWS_AS(build_guidance(img, sets, p), PreconditionError);
}

TEST_CASE("guidance directory round trip")
{
    testutil::TempDir dir;
    const auto scene = synth_guidance(9, SynthConfig{});
    const auto g = build_guidance(scene.image, scene.mask_sets, scene.providers);
    save_guidance(g, dir / "g");
    for (const char* f : {"masks_s.json", "vfeat_i.bin", "tfeat_p.bin", "captions_s.json"}) {
        CHECK(std::filesystem::exists(dir / "g" / f));
    }
    const auto r = load_guidance(dir / "g", g.frame_id);
    for (Level l : kLevels) {
        REQUIRE(r.level(l).records.size() == g.level(l).records.size());
        for (std::size_t k = 0; k < g.level(l).records.size(); ++k) {
            const auto& a = g.level(l).records[k];
            const auto& b = r.level(l).records[k];
            CHECK(r.level(l).masks.masks[k] == g.level(l).masks.masks[k]);
            CHECK(b.caption_short == a.caption_short);
            for (std::size_t i = 0; i < a.visual.size(); ++i) CHECK(b.visual[i] == double(float(a.visual[i])));
        }
    }
}
