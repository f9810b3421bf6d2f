#include "seal/benchmark.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "seal/binio.hpp"
#include "seal/error.hpp"

namespace seal::benchmark {

using guidance::Level;
using nlohmann::json;

std::vector<std::string> BenchmarkManifest::eval_classes() const
{
    std::vector<std::string> out;
    for (const auto& c : classes) {
        if (std::find(exclude.begin(), exclude.end(), c) == exclude.end()) out.push_back(c);
    }
    return out;
}

std::vector<std::string> default_exclusions(const std::string& family)
{
    if (family == "ddd17") return {"flat"};
    if (family == "dsec11") return {"background", "road", "sidewalk", "wall"};
    if (family == "dsec19") return {"background", "road", "sidewalk", "wall", "sky"};
    throw ConfigError("unknown benchmark family '" + family + "'");
}

BenchmarkManifest load_manifest(const std::filesystem::path& path)
{
    std::ifstream in(path);
    if (!in) throw NotFoundError("cannot open benchmark manifest " + path.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    const auto base = path.parent_path();
    auto resolve = [&](const std::string& p) -> std::filesystem::path {
        if (p.empty()) return {};
        std::filesystem::path q(p);
        return q.is_absolute() ? q : base / q;
    };
    BenchmarkManifest m;
    try {
        m.name = doc.value("name", "");
        m.classes = doc.at("classes").get<std::vector<std::string>>();
        m.exclude = doc.value("exclude", std::vector<std::string>{});
        m.height = doc.value("height", 0);
        m.width = doc.value("width", 0);
        m.window_us = doc.value("window_us", int64_t{25'000});
        for (const auto& f : doc.at("frames")) {
            BenchmarkFrame bf;
            bf.frame_id = f.at("frame_id").get<std::string>();
            bf.events = resolve(f.value("events", ""));
            bf.voxel = resolve(f.value("voxel", ""));
            bf.t0 = f.value("t0", int64_t{-1});
            for (const auto& a : f.value("annotations", json::array())) {
                InstanceAnnotation ann;
                ann.mask = mask_from_json(a.at("mask"));
                ann.label = a.at("label").get<std::string>();
                ann.level = guidance::level_from_code(a.value("level", "i").at(0));
                ann.frame_id = bf.frame_id;
                if (std::find(m.classes.begin(), m.classes.end(), ann.label) == m.classes.end()) {
                    throw DataError("frame " + bf.frame_id + ": label '" + ann.label + "' not in class table");
                }
                if (std::find(m.exclude.begin(), m.exclude.end(), ann.label) != m.exclude.end()) {
                    throw DataError("frame " + bf.frame_id + ": excluded class '" + ann.label + "' annotated");
                }
                bf.annotations.push_back(std::move(ann));
            }
            m.frames.push_back(std::move(bf));
        }
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    return m;
}

void save_manifest(const BenchmarkManifest& m, const std::filesystem::path& path)
{
    const auto base = path.parent_path();
    auto rel = [&](const std::filesystem::path& p) {
        return p.empty() ? std::string() : std::filesystem::relative(p, base.empty() ? "." : base).generic_string();
    };
    json frames = json::array();
    for (const auto& f : m.frames) {
        json anns = json::array();
        for (const auto& a : f.annotations) {
            anns.push_back({{"mask", mask_to_json(a.mask)},
                            {"label", a.label},
                            {"level", std::string(1, guidance::level_code(a.level))}});
        }
        json jf = {{"frame_id", f.frame_id}, {"annotations", anns}};
        if (!f.events.empty()) jf["events"] = rel(f.events);
        if (!f.voxel.empty()) jf["voxel"] = rel(f.voxel);
        if (f.t0 >= 0) jf["t0"] = f.t0;
        frames.push_back(std::move(jf));
    }
    json doc = {{"name", m.name},         {"classes", m.classes},     {"exclude", m.exclude}, {"height", m.height},
                {"width", m.width},       {"window_us", m.window_us}, {"frames", frames}};
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << doc.dump() << '\n';
}

std::vector<InstanceAnnotation> assign_labels(const guidance::MaskSet& ms, const std::vector<int>& semantic_map,
                                              const std::vector<std::string>& class_table,
                                              const std::vector<std::string>& exclude, double min_overlap)
{
    std::vector<InstanceAnnotation> out;
    for (std::size_t k = 0; k < ms.masks.size(); ++k) {
        const auto& m = ms.masks[k];
        if (semantic_map.size() != m.bits().size()) {
            throw ValidationError("assign_labels: semantic map does not match mask " + std::to_string(k) + " geometry");
        }
        std::vector<std::size_t> votes(class_table.size(), 0);
        std::size_t area = 0;
        for (std::size_t p = 0; p < semantic_map.size(); ++p) {
            if (!m.bits()[p]) continue;
            const int c = semantic_map[p];
            if (c < 0 || c >= static_cast<int>(class_table.size())) {
                throw DataError("assign_labels: class index " + std::to_string(c) + " outside table of " +
                                std::to_string(class_table.size()));
            }
            ++votes[c];
            ++area;
        }
        if (area == 0) continue;
        const auto best = std::max_element(votes.begin(), votes.end()) - votes.begin();
        if (double(votes[best]) / double(area) < min_overlap) continue;
        const auto& label = class_table[best];
        if (std::find(exclude.begin(), exclude.end(), label) != exclude.end()) continue;
        out.push_back({m, label, ms.level, ms.frame_id});
    }
    return out;
}

std::vector<std::pair<int, int>> fps_points(const BinaryMask& mask, int k)
{
    if (mask.empty()) throw PreconditionError("fps_points: empty mask");
    std::vector<std::pair<int, int>> px;  // (x, y) in row-major order, i.e. sorted by (y, x)
    int64_t sx = 0, sy = 0;
    for (int y = 0; y < mask.height(); ++y) {
        for (int x = 0; x < mask.width(); ++x) {
            if (mask.get(x, y)) {
                px.emplace_back(x, y);
                sx += x;
                sy += y;
            }
        }
    }
    const int64_t n = static_cast<int64_t>(px.size());
    // Nearest to the centroid, compared exactly in n-scaled integer coordinates.
    std::size_t seed = 0;
    int64_t best = -1;
    for (std::size_t i = 0; i < px.size(); ++i) {
        const int64_t dx = n * px[i].first - sx, dy = n * px[i].second - sy;
        const int64_t d = dx * dx + dy * dy;
        if (best < 0 || d < best) {
            best = d;
            seed = i;
        }
    }
    const int count = static_cast<int>(std::min<int64_t>(k, n));
    std::vector<std::pair<int, int>> out{px[seed]};
    std::vector<int64_t> mind(px.size(), INT64_MAX);
    std::vector<bool> taken(px.size(), false);
    taken[seed] = true;
    std::size_t last = seed;
    while (static_cast<int>(out.size()) < count) {
        std::size_t pick = 0;
        int64_t far = -1;
        for (std::size_t i = 0; i < px.size(); ++i) {
            const int64_t dx = px[i].first - px[last].first, dy = px[i].second - px[last].second;
            mind[i] = std::min(mind[i], dx * dx + dy * dy);
            if (!taken[i] && mind[i] > far) {
                far = mind[i];
                pick = i;
            }
        }
        taken[pick] = true;
        out.push_back(px[pick]);
        last = pick;
    }
    return out;
}

Box box_from_mask(const BinaryMask& mask) { return tight_box(mask); }

std::array<double, 10> iou_thresholds()
{
    std::array<double, 10> t{};
    for (int i = 0; i < 10; ++i) t[i] = (50 + 5 * i) / 100.0;
    return t;
}

std::vector<double> greedy_match(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts)
{
    std::vector<std::size_t> rank_of(preds.size());
    {
        std::vector<std::size_t> order(preds.size());
        std::iota(order.begin(), order.end(), 0);
        std::vector<std::size_t> area(preds.size());
        for (std::size_t i = 0; i < preds.size(); ++i) area[i] = preds[i].area();
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return area[a] > area[b]; });
        for (std::size_t r = 0; r < order.size(); ++r) rank_of[order[r]] = r;
    }
    struct Pair {
        double iou;
        std::size_t rank, pred, gt;
    };
    std::vector<Pair> pairs;
    for (std::size_t p = 0; p < preds.size(); ++p) {
        for (std::size_t g = 0; g < gts.size(); ++g) pairs.push_back({mask_iou(preds[p], gts[g]), rank_of[p], p, g});
    }
    std::sort(pairs.begin(), pairs.end(), [](const Pair& a, const Pair& b) {
        if (a.iou != b.iou) return a.iou > b.iou;
        if (a.rank != b.rank) return a.rank < b.rank;
        return a.gt < b.gt;
    });
    std::vector<double> out(preds.size(), -1.0);
    std::vector<bool> gt_used(gts.size(), false);
    for (const auto& pr : pairs) {
        if (out[pr.pred] >= 0.0 || gt_used[pr.gt]) continue;
        out[pr.pred] = pr.iou;
        gt_used[pr.gt] = true;
    }
    return out;
}

EvalReport evaluate_ap(const std::vector<std::vector<Prediction>>& predictions, const BenchmarkManifest& manifest,
                       const std::string& prompt_kind)
{
    if (predictions.size() != manifest.frames.size()) {
        throw ValidationError("evaluate_ap: " + std::to_string(predictions.size()) + " prediction frames for " +
                              std::to_string(manifest.frames.size()) + " manifest frames");
    }
    const auto& classes = manifest.classes;
    auto class_index = [&](const std::string& label) {
        const auto it = std::find(classes.begin(), classes.end(), label);
        if (it == classes.end()) throw ValidationError("evaluate_ap: unknown label '" + label + "'");
        return static_cast<std::size_t>(it - classes.begin());
    };
    const std::size_t C = classes.size();
    std::vector<std::array<std::size_t, 11>> tp(C);  // 10 grid thresholds + 0.25
    std::vector<std::size_t> npred(C, 0), ngt(C, 0);
    const auto grid = iou_thresholds();
    for (std::size_t f = 0; f < manifest.frames.size(); ++f) {
        std::vector<std::vector<BinaryMask>> p_by(C), g_by(C);
        for (const auto& p : predictions[f]) p_by[class_index(p.label)].push_back(p.mask);
        for (const auto& a : manifest.frames[f].annotations) g_by[class_index(a.label)].push_back(a.mask);
        for (std::size_t c = 0; c < C; ++c) {
            npred[c] += p_by[c].size();
            ngt[c] += g_by[c].size();
            if (p_by[c].empty() || g_by[c].empty()) continue;
            for (double iou : greedy_match(p_by[c], g_by[c])) {
                if (iou < 0.0) continue;
                for (int t = 0; t < 10; ++t) tp[c][t] += iou >= grid[t];
                tp[c][10] += iou >= 0.25;
            }
        }
    }
    EvalReport r;
    r.prompt_kind = prompt_kind;
    std::size_t counted = 0;
    for (std::size_t c = 0; c < C; ++c) {
        if (ngt[c] == 0) continue;
        ClassAp ca;
        ca.gt = ngt[c];
        ca.predictions = npred[c];
        if (npred[c] > 0) {
            double s = 0.0;
            for (int t = 0; t < 10; ++t) s += double(tp[c][t]) / double(npred[c]);
            ca.ap = s / 10.0;
            ca.ap50 = double(tp[c][0]) / double(npred[c]);
            ca.ap25 = double(tp[c][10]) / double(npred[c]);
        }
        r.ap += ca.ap;
        r.ap50 += ca.ap50;
        r.ap25 += ca.ap25;
        r.per_class[classes[c]] = ca;
        ++counted;
    }
    if (counted > 0) {
        r.ap /= double(counted);
        r.ap50 /= double(counted);
        r.ap25 /= double(counted);
    }
    return r;
}

json EvalReport::to_json() const
{
    json pc = json::object();
    for (const auto& [name, c] : per_class) {
        pc[name] = {{"AP", c.ap}, {"AP50", c.ap50}, {"AP25", c.ap25}, {"gt", c.gt}, {"predictions", c.predictions}};
    }
    return {{"AP", ap}, {"AP50", ap50}, {"AP25", ap25}, {"prompt", prompt_kind}, {"per_class", pc}};
}

std::string EvalReport::table() const
{
    std::ostringstream os;
    char line[160];
    std::snprintf(line, sizeof line, "%-16s %7s %7s %7s %6s %6s\n", "class", "AP", "AP50", "AP25", "gt", "pred");
    os << line;
    for (const auto& [name, c] : per_class) {
        std::snprintf(line, sizeof line, "%-16s %7.4f %7.4f %7.4f %6zu %6zu\n", name.c_str(), c.ap, c.ap50, c.ap25,
                      c.gt, c.predictions);
        os << line;
    }
    std::snprintf(line, sizeof line, "%-16s %7.4f %7.4f %7.4f   (%s prompts)\n", "mean", ap, ap50, ap25,
                  prompt_kind.c_str());
    os << line;
    return os.str();
}

// ---------------------------------------------------------------------------

events::VoxelGrid load_frame_voxel(const BenchmarkFrame& f, const BenchmarkManifest& m, const model::ModelConfig& cfg)
{
    events::VoxelGrid g;
    if (!f.voxel.empty()) {
        g = events::load_voxel(f.voxel);
        if (g.config.bins != cfg.in_channels || g.config.height != cfg.height || g.config.width != cfg.width) {
            throw ConfigError("frame " + f.frame_id + ": voxel geometry does not match the model input");
        }
    } else if (!f.events.empty()) {
        const auto fmt = f.events.extension() == ".csv" ? events::EventFormat::csv : events::EventFormat::binary;
        const auto stream = events::load_events(f.events, fmt);
        const int64_t t0 = f.t0 >= 0 ? f.t0 : (stream.empty() ? 0 : stream.ts.front());
        const events::VoxelConfig vc{cfg.in_channels, m.window_us, cfg.height, cfg.width};
        g = events::voxelize(events::slice_window(stream, t0, m.window_us), vc, t0);
    } else {
        throw DataError("frame " + f.frame_id + " has neither events nor voxel");
    }
    return events::normalize_voxel(g);
}

Tensor class_tokens(const std::vector<std::string>& classes, const TextEncoder& enc)
{
    if (classes.empty()) return {};
    std::vector<double> v;
    int dim = 0;
    for (const auto& c : classes) {
        const auto e = enc(c);
        dim = static_cast<int>(e.size());
        v.insert(v.end(), e.begin(), e.end());
    }
    return Tensor::constant(static_cast<int>(classes.size()), dim, std::move(v));
}

PromptKind prompt_kind_from_string(const std::string& s)
{
    if (s == "box") return PromptKind::box;
    if (s == "point") return PromptKind::point;
    throw ValidationError("prompt kind must be 'box' or 'point', got '" + s + "'");
}

namespace {

model::Prompt prompt_for(const BinaryMask& mask, PromptKind kind)
{
    if (kind == PromptKind::box) return model::Prompt::box_of(box_from_mask(mask));
    return model::Prompt::points_of(fps_points(mask, 3));
}

struct FrameContext {
    Tensor feats, fused;
};

FrameContext frame_context(const model::Model& m, const BenchmarkFrame& f, const BenchmarkManifest& manifest,
                           const Tensor& text)
{
    FrameContext ctx;
    ctx.feats = m.encode_backbone(load_frame_voxel(f, manifest, m.config()));
    ctx.fused = m.enhance(ctx.feats, text);
    return ctx;
}

}  // namespace

std::vector<std::vector<Prediction>> predict(const model::Model& m, const BenchmarkManifest& manifest, PromptKind kind,
                                             const TextEncoder& enc, model::Granularity point_tag)
{
    ag::NoGradGuard ng;
    const auto classes = manifest.eval_classes();
    if (classes.empty()) throw ValidationError("predict: no evaluation classes");
    std::vector<std::pair<std::string, std::vector<double>>> queries;
    for (const auto& c : classes) queries.emplace_back(c, enc(c));
    const Tensor text = class_tokens(classes, enc);
    std::vector<std::vector<Prediction>> out;
    for (const auto& f : manifest.frames) {
        const auto ctx = frame_context(m, f, manifest, text);
        std::vector<Prediction> preds;
        for (const auto& a : f.annotations) {
            const auto masks = m.decode_masks(ctx.feats, {prompt_for(a.mask, kind)});
            const model::MaskPrediction* chosen = &masks.front();
            for (const auto& mp : masks) {
                if (kind == PromptKind::point && mp.granularity == point_tag) chosen = &mp;
            }
            const Tensor G = Tensor::constant(1, static_cast<int>(chosen->token.size()), chosen->token);
            const auto mf = m.mask_features(ctx.fused, G, {chosen->mask});
            const auto ranked = model::classify(mf.M_hat.row(0), queries);
            preds.push_back({chosen->mask, ranked.front().label});
        }
        out.push_back(std::move(preds));
    }
    return out;
}

std::vector<std::vector<Prediction>> random_labels(const std::vector<std::vector<Prediction>>& preds,
                                                   const BenchmarkManifest& manifest, uint64_t seed)
{
    const auto classes = manifest.eval_classes();
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> pick(0, classes.size() - 1);
    auto out = preds;
    for (auto& frame : out) {
        for (auto& p : frame) p.label = classes[pick(rng)];
    }
    return out;
}

std::vector<FeatureRow> export_mask_features(const model::Model& m, const BenchmarkManifest& manifest, PromptKind kind,
                                             const TextEncoder& enc)
{
    ag::NoGradGuard ng;
    const Tensor text = class_tokens(manifest.eval_classes(), enc);
    std::vector<FeatureRow> rows;
    for (std::size_t fi = 0; fi < manifest.frames.size(); ++fi) {
        const auto& f = manifest.frames[fi];
        if (f.annotations.empty()) continue;
        const auto ctx = frame_context(m, f, manifest, text);
        std::vector<Tensor> tokens;
        std::vector<BinaryMask> masks;
        for (const auto& a : f.annotations) {
            const auto out = m.decode(ctx.feats, prompt_for(a.mask, kind), false);
            tokens.push_back(kind == PromptKind::box ? out.tokens[0] : out.tokens[1]);
            masks.push_back(a.mask);
        }
        const auto mf = m.mask_features(ctx.fused, ag::concat_rows(tokens), masks);
        for (std::size_t k = 0; k < masks.size(); ++k) {
            const auto label = std::find(manifest.classes.begin(), manifest.classes.end(), f.annotations[k].label) -
                               manifest.classes.begin();
            rows.push_back({static_cast<uint32_t>(fi), static_cast<uint16_t>(label),
                            mf.M_hat.row(static_cast<int>(k)), static_cast<bool>(mf.dead[k])});
        }
    }
    return rows;
}

namespace {
constexpr char kFeatMagic[4] = {'S', 'F', 'T', '1'};
}

void save_feature_dump(const std::vector<FeatureRow>& rows, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    binio::Writer w(out);
    w.magic(kFeatMagic);
    const uint32_t D = rows.empty() ? 0 : static_cast<uint32_t>(rows.front().feature.size());
    w.u32(D);
    w.u32(static_cast<uint32_t>(rows.size()));
    for (const auto& r : rows) {
        if (r.feature.size() != D) throw ValidationError("feature dump: rows have different dims");
        w.u32(r.frame);
        w.u16(r.label);
        for (double v : r.feature) w.f32(static_cast<float>(v));
    }
}

std::vector<FeatureRow> load_feature_dump(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw NotFoundError("cannot open " + path.string());
    binio::Reader r(in, path.string());
    r.expect_magic(kFeatMagic);
    const uint32_t D = r.u32(), n = r.u32();
    std::vector<FeatureRow> rows(n);
    for (auto& row : rows) {
        row.frame = r.u32();
        row.label = r.u16();
        row.feature.resize(D);
        double norm = 0.0;
        for (auto& v : row.feature) {
            v = r.f32();
            norm += v * v;
        }
        row.dead = norm == 0.0;
    }
    return rows;
}

double silhouette_score(const std::vector<std::vector<double>>& features, const std::vector<int>& labels)
{
    const std::size_t n = features.size();
    if (labels.size() != n) throw ValidationError("silhouette: label count mismatch");
    std::set<int> distinct(labels.begin(), labels.end());
    if (distinct.size() < 2) return 0.0;
    std::vector<std::vector<double>> x = features;
    for (auto& v : x) {
        double s = 0.0;
        for (double a : v) s += a * a;
        s = std::sqrt(s);
        if (s > 0.0) {
            for (double& a : v) a /= s;
        }
    }
    auto dist = [&](std::size_t i, std::size_t j) {
        double s = 0.0;
        for (std::size_t k = 0; k < x[i].size(); ++k) s += (x[i][k] - x[j][k]) * (x[i][k] - x[j][k]);
        return std::sqrt(s);
    };
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        std::map<int, std::pair<double, std::size_t>> acc;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            auto& a = acc[labels[j]];
            a.first += dist(i, j);
            ++a.second;
        }
        const auto own = acc.find(labels[i]);
        if (own == acc.end() || own->second.second == 0) continue;  // singleton cluster scores 0
        const double a = own->second.first / double(own->second.second);
        double b = 1e300;
        for (const auto& [lab, s] : acc) {
            if (lab != labels[i] && s.second > 0) b = std::min(b, s.first / double(s.second));
        }
        const double m = std::max(a, b);
        total += m > 0.0 ? (b - a) / m : 0.0;
    }
    return total / double(n);
}

// ---------------------------------------------------------------------------

std::vector<ProfileRow> profile_roi_align(const std::vector<int>& resolutions, const std::vector<int>& mask_counts,
                                          int channels, int repeats, uint64_t seed)
{
    if (channels <= 0 || repeats <= 0) throw ConfigError("profile: channels and repeats must be positive");
    std::vector<ProfileRow> rows;
    for (int r : resolutions) {
        if (r <= 0) throw ConfigError("profile: resolutions must be positive");
        std::mt19937_64 rng(seed ^ uint64_t(r));
        FeatureMap f(channels, r, r);
        std::uniform_real_distribution<double> val(-1.0, 1.0);
        for (auto& v : f.data) v = val(rng);
        for (int count : mask_counts) {
            if (count <= 0) throw ConfigError("profile: mask counts must be positive");
            // Boxes are drawn in relative coordinates so every resolution sees the same layout.
            std::mt19937_64 brng(seed + uint64_t(count));
            std::uniform_real_distribution<double> size(0.1, 0.5), pos(0.0, 1.0);
            std::vector<model::Roi> rois;
            for (int k = 0; k < count; ++k) {
                const double w = size(brng), h = size(brng);
                const double x0 = pos(brng) * (1.0 - w), y0 = pos(brng) * (1.0 - h);
                rois.push_back({x0 * r - 0.5, y0 * r - 0.5, (x0 + w) * r - 0.5, (y0 + h) * r - 0.5});
            }
            std::vector<double> times;
            double sink = 0.0;
            for (int rep = 0; rep < repeats; ++rep) {
                const auto t0 = std::chrono::steady_clock::now();
                for (const auto& roi : rois) sink += model::roi_align(f, roi)[0];
                times.push_back(std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count());
            }
            if (std::isnan(sink)) throw Error("profile: non-finite pooling result");
            std::sort(times.begin(), times.end());
            rows.push_back({r, count, times[times.size() / 2]});
        }
    }
    return rows;
}

std::string profile_csv(const std::vector<ProfileRow>& rows)
{
    std::ostringstream os;
    os << "resolution,masks,ms\n";
    for (const auto& r : rows) os << r.resolution << ',' << r.masks << ',' << r.ms << '\n';
    return os.str();
}

std::filesystem::path write_synthetic_benchmark(const std::filesystem::path& dir, const training::SynthCorpusConfig& cfg,
                                                const std::string& name, const std::vector<std::string>& exclude)
{
    std::filesystem::create_directories(dir / "frames");
    BenchmarkManifest m;
    m.name = name;
    m.exclude = exclude;
    m.height = cfg.scene.height;
    m.width = cfg.scene.width;
    m.window_us = cfg.window_us;
    for (int i = 0; i < cfg.frames; ++i) {
        const uint64_t seed = cfg.seed + uint64_t(i);
        const auto scene = guidance::synth_guidance(seed, cfg.scene);
        m.classes = scene.class_names;
        BenchmarkFrame f;
        f.frame_id = scene.frame_id;
        f.t0 = int64_t(i) * cfg.window_us;
        f.events = dir / "frames" / (scene.frame_id + ".evt");
        events::save_events(guidance::synth_events(scene, seed, f.t0, cfg.window_us), f.events,
                            events::EventFormat::binary);
        f.annotations = assign_labels(scene.mask_sets[static_cast<int>(Level::instance)], scene.semantic_map,
                                      scene.class_names, exclude);
        m.frames.push_back(std::move(f));
    }
    const auto path = dir / "benchmark.json";
    save_manifest(m, path);
    return path;
}

}  // namespace seal::benchmark
