#include "seal/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "seal/error.hpp"

namespace seal::training {

using guidance::Level;
using nlohmann::json;

void TrainConfig::validate() const
{
    if (iterations <= 0) throw ConfigError("train: iterations must be positive");
    if (lr <= 0.0) throw ConfigError("train: lr must be positive");
    if (batch <= 0) throw ConfigError("train: batch must be positive");
    if (stage != 1 && stage != 2) throw ConfigError("train: stage must be 1 or 2");
}

DistillResult distill_loss(const std::array<Tensor, 3>& student, const guidance::HierGuidance& g,
                           const DistillToggles& toggles)
{
    DistillResult r;
    std::vector<Tensor> terms;
    double constant = 0.0;
    for (Level l : guidance::kLevels) {
        const int li = static_cast<int>(l);
        if (!toggles.levels[li]) continue;
        const auto& recs = g.level(l).records;
        const int K = static_cast<int>(recs.size());
        if (K == 0) continue;
        const Tensor& s = student[li];
        if (!s.defined() || s.rows() != K) {
            throw ValidationError("distill_loss: level " + std::string(1, guidance::level_code(l)) + " has " +
                                  std::to_string(s.defined() ? s.rows() : 0) + " student rows for " +
                                  std::to_string(K) + " guidance records");
        }
        const int D = s.cols();
        for (int k = 0; k < K; ++k) {
            double n = 0.0;
            for (int c = 0; c < D; ++c) n += s(k, c) * s(k, c);
            r.dead_features += n == 0.0;
        }
        auto stack = [&](bool visual) {
            std::vector<double> v;
            v.reserve(std::size_t(K) * D);
            for (const auto& rec : recs) {
                const auto& src = visual ? rec.visual : rec.text;
                if (static_cast<int>(src.size()) != D) throw ValidationError("distill_loss: guidance dim mismatch");
                v.insert(v.end(), src.begin(), src.end());
            }
            return Tensor::constant(K, D, std::move(v));
        };
        for (int term = 0; term < 2; ++term) {
            const bool visual = term == 0;
            if (visual ? !toggles.visual : !toggles.text) continue;
            constant += 1.0;
            terms.push_back(ag::scale(ag::sum(ag::cosine_rows(s, stack(visual))), -1.0 / K));
        }
    }
    Tensor total = Tensor::scalar(constant);
    for (const auto& t : terms) total = ag::add(total, t);
    r.loss = total;
    return r;
}

Tensor stage1_align_loss(const Tensor& student, const Tensor& teacher)
{
    const Tensor cos = ag::cosine_rows(student, teacher);
    return ag::add(Tensor::scalar(1.0), ag::scale(ag::sum(cos), -1.0 / cos.rows()));
}

Tensor feature_tokens(const FeatureMap& f)
{
    const std::size_t n = f.cells();
    std::vector<double> v(n * f.channels);
    for (int c = 0; c < f.channels; ++c) {
        for (std::size_t i = 0; i < n; ++i) v[i * f.channels + c] = f.data[c * n + i];
    }
    return Tensor::constant(static_cast<int>(n), f.channels, std::move(v));
}

double lr_schedule(long /*iteration*/, int epoch, const TrainConfig& cfg)
{
    return epoch >= cfg.decay_epoch ? cfg.lr * cfg.decay : cfg.lr;
}

Tensor teacher_tokens(const FeatureMap& teacher, const model::ModelConfig& cfg)
{
    const int h2 = cfg.h2(), w2 = cfg.w2(), C = teacher.channels;
    std::vector<double> pooled(std::size_t(h2) * w2 * C, 0.0);
    for (int i = 0; i < h2; ++i) {
        const int y0 = i * teacher.height / h2, y1 = (i + 1) * teacher.height / h2;
        for (int j = 0; j < w2; ++j) {
            const int x0 = j * teacher.width / w2, x1 = (j + 1) * teacher.width / w2;
            const double inv = 1.0 / std::max(1, (y1 - y0) * (x1 - x0));
            double* out = pooled.data() + (std::size_t(i) * w2 + j) * C;
            for (int c = 0; c < C; ++c) {
                double acc = 0.0;
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) acc += teacher.at(c, y, x);
                }
                out[c] = acc * inv;
            }
        }
    }
    Tensor t = Tensor::constant(h2 * w2, C, std::move(pooled));
    if (C == cfg.d2) return t;
    std::mt19937_64 rng(0x7eacULL);
    std::normal_distribution<double> normal(0.0, 1.0 / std::sqrt(double(cfg.d2)));
    std::vector<double> proj(std::size_t(C) * cfg.d2);
    for (auto& x : proj) x = normal(rng);
    return ag::matmul(t, Tensor::constant(C, cfg.d2, std::move(proj)));
}

Tensor caption_tokens(const guidance::HierGuidance& g, const guidance::TeacherProviders& teacher)
{
    std::set<std::string> seen;
    std::vector<double> v;
    int rows = 0, dim = 0;
    for (Level l : guidance::kLevels) {
        for (const auto& r : g.level(l).records) {
            const std::string& text = r.caption_long.empty() ? r.caption_short : r.caption_long;
            if (text.empty() || !seen.insert(text).second) continue;
            const auto e = teacher.text_encoder(text);
            dim = static_cast<int>(e.size());
            v.insert(v.end(), e.begin(), e.end());
            ++rows;
        }
    }
    if (rows == 0) return {};
    return Tensor::constant(rows, dim, std::move(v));
}

Dataset load_dataset(const std::filesystem::path& manifest, const model::ModelConfig& cfg)
{
    std::ifstream in(manifest);
    if (!in) throw DataError("cannot open manifest " + manifest.string());
    json doc;
    try {
        in >> doc;
    } catch (const json::exception& e) {
        throw FormatError(manifest.string() + ": " + e.what());
    }
    const auto base = manifest.parent_path();
    auto resolve = [&](const std::string& p) {
        std::filesystem::path path(p);
        return path.is_absolute() ? path : base / path;
    };
    Dataset ds;
    ds.classes = doc.value("classes", std::vector<std::string>{});
    const json teacher = doc.value("teacher", json::object());
    const int tdim = teacher.value("dim", cfg.d);
    if (tdim != cfg.d) {
        throw ConfigError("teacher dim " + std::to_string(tdim) + " differs from model dim " + std::to_string(cfg.d));
    }
    ds.teacher = guidance::synthetic_providers(ds.classes, tdim, teacher.value("sigma", 0.0),
                                               teacher.value("noise_seed", uint64_t{0}));
    const int64_t window = doc.value("window_us", int64_t{25'000});
    for (const auto& f : doc.at("frames")) {
        Sample s;
        s.frame_id = f.at("frame_id").get<std::string>();
        const auto ev_path = resolve(f.at("events").get<std::string>());
        const auto fmt = ev_path.extension() == ".csv" ? events::EventFormat::csv : events::EventFormat::binary;
        const auto stream = events::load_events(ev_path, fmt);
        const events::VoxelConfig vc{cfg.in_channels, window, cfg.height, cfg.width};
        const int64_t t0 = f.contains("t0") ? f["t0"].get<int64_t>() : (stream.empty() ? 0 : stream.ts.front());
        s.voxel = events::normalize_voxel(events::voxelize(events::slice_window(stream, t0, window), vc, t0));
        s.image = load_ppm(resolve(f.at("image").get<std::string>()));
        if (!f.contains("guidance")) throw DataError("missing guidance for frame " + s.frame_id);
        const auto gdir = resolve(f["guidance"].get<std::string>());
        if (!std::filesystem::is_directory(gdir)) throw DataError("missing guidance for frame " + s.frame_id);
        s.guidance = guidance::load_guidance(gdir, s.frame_id);
        if (s.guidance.dim() != 0 && s.guidance.dim() != cfg.d) {
            throw DataError("frame " + s.frame_id + ": guidance dim " + std::to_string(s.guidance.dim()) +
                            " differs from model dim " + std::to_string(cfg.d));
        }
        ds.samples.push_back(std::move(s));
    }
    if (ds.samples.empty()) throw DataError(manifest.string() + ": no frames");
    return ds;
}

void TrainLog::write_jsonl(const std::filesystem::path& path) const
{
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    for (const auto& e : entries) out << json{{"iter", e.iter}, {"loss", e.loss}, {"lr", e.lr}}.dump() << '\n';
}

double TrainLog::mean_loss(long from, long to) const
{
    from = std::max(0L, from);
    to = std::min<long>(to, static_cast<long>(entries.size()));
    if (to <= from) return 0.0;
    double s = 0.0;
    for (long i = from; i < to; ++i) s += entries[i].loss;
    return s / double(to - from);
}

namespace {

const guidance::LevelGuidance& lvl(const Sample& s, Level l) { return s.guidance.level(l); }

int containing(const guidance::MaskSet& ms, int x, int y)
{
    for (std::size_t k = 0; k < ms.masks.size(); ++k) {
        if (ms.masks[k].get(x, y)) return static_cast<int>(k);
    }
    return -1;
}

std::vector<double> mask_targets(const BinaryMask& m)
{
    return {m.bits().begin(), m.bits().end()};
}

Tensor stage1_frame_loss(const model::Model& model, const Sample& s, const Tensor& teacher, const TrainConfig& cfg,
                         std::mt19937_64& rng)
{
    const Tensor feats = model.encode_backbone(s.voxel);
    Tensor loss = stage1_align_loss(feats, teacher);
    const auto& inst = lvl(s, Level::instance).masks;
    if (inst.masks.empty() || cfg.prompts_per_frame <= 0) return loss;
    std::vector<Tensor> bce;
    std::uniform_int_distribution<std::size_t> pick(0, inst.masks.size() - 1);
    for (int p = 0; p < cfg.prompts_per_frame; ++p) {
        const BinaryMask& m = inst.masks[pick(rng)];
        if (p % 2 == 0) {
            const auto out = model.decode(feats, model::Prompt::box_of(tight_box(m)));
            bce.push_back(ag::bce_with_logits(out.logits[0], mask_targets(m)));
            continue;
        }
        std::vector<std::pair<int, int>> pixels;
        for (int y = 0; y < m.height(); ++y) {
            for (int x = 0; x < m.width(); ++x) {
                if (m.get(x, y)) pixels.emplace_back(x, y);
            }
        }
        std::uniform_int_distribution<std::size_t> px(0, pixels.size() - 1);
        const int npts = 1 + static_cast<int>(rng() % 3);
        std::vector<std::pair<int, int>> pts;
        for (int k = 0; k < npts; ++k) pts.push_back(pixels[px(rng)]);
        const auto [x, y] = pts.front();
        const int si = containing(lvl(s, Level::semantic).masks, x, y);
        const int pi = containing(lvl(s, Level::part).masks, x, y);
        const BinaryMask& coarse = si >= 0 ? lvl(s, Level::semantic).masks.masks[si] : m;
        const BinaryMask& fine = pi >= 0 ? lvl(s, Level::part).masks.masks[pi] : m;
        const auto out = model.decode(feats, model::Prompt::points_of(pts));
        bce.push_back(ag::bce_with_logits(out.logits[0], mask_targets(coarse)));
        bce.push_back(ag::bce_with_logits(out.logits[1], mask_targets(m)));
        bce.push_back(ag::bce_with_logits(out.logits[2], mask_targets(fine)));
    }
    Tensor mask_loss = ag::concat_rows(bce);
    return ag::add(loss, ag::scale(ag::mean(mask_loss), cfg.mask_weight));
}

struct Stage2Frame {
    Tensor feats;
    Tensor text;
    std::array<Tensor, 3> G;
};

bool trainable(const std::string& name, int stage)
{
    if (stage == 1) return name.rfind("backbone.", 0) == 0 || name.rfind("decoder.", 0) == 0;
    return name.rfind("fusion.", 0) == 0 || name.rfind("se.", 0) == 0 || name.rfind("mfe.", 0) == 0;
}

}  // namespace

TrainResult train(const Dataset& data, const TrainConfig& cfg, const model::ModelConfig& mcfg, const model::Model* init)
{
    cfg.validate();
    if (cfg.stage == 2 && init == nullptr) {
        throw PreconditionError("stage 2 requires a stage-1 checkpoint (--init)");
    }
    if (data.samples.empty()) throw DataError("train: empty dataset");
    model::Model net(mcfg, cfg.seed);
    if (init) {
        for (const auto& [name, t] : init->params().all()) {
            const bool copy = cfg.stage == 1 || name.rfind("backbone.", 0) == 0 || name.rfind("decoder.", 0) == 0;
            if (!copy || !net.params().contains(name)) continue;
            if (net.params().get(name).size() != t.size()) throw ConfigError("init checkpoint: shape mismatch for " + name);
            net.params().set(name, t.value());
        }
    }
    std::vector<Tensor> params;
    for (const auto& [name, t] : net.params().all()) {
        if (trainable(name, cfg.stage)) params.push_back(t);
    }

    const std::size_t N = data.samples.size();
    std::vector<Tensor> teachers;
    std::vector<Stage2Frame> cache;
    if (cfg.stage == 1) {
        for (const auto& s : data.samples) teachers.push_back(teacher_tokens(data.teacher.pixel_features(s.image), mcfg));
    } else {
        ag::NoGradGuard ng;
        for (const auto& s : data.samples) {
            Stage2Frame f;
            f.feats = net.encode_backbone(s.voxel).detach();
            f.text = caption_tokens(s.guidance, data.teacher);
            for (Level l : guidance::kLevels) {
                const auto& masks = lvl(s, l).masks.masks;
                std::vector<Tensor> rows;
                for (const auto& m : masks) {
                    rows.push_back(net.decode(f.feats, model::Prompt::box_of(tight_box(m)), false).tokens[0]);
                }
                if (!rows.empty()) f.G[static_cast<int>(l)] = ag::concat_rows(rows).detach();
            }
            cache.push_back(std::move(f));
        }
    }

    const DistillToggles toggles{cfg.visual, cfg.text, cfg.levels};
    std::mt19937_64 rng(cfg.seed ^ 0x5eedULL);
    std::vector<std::size_t> order(N);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::size_t cursor = 0;
    long seen = 0;
    nn::Adam adam;
    TrainResult result{std::move(net), {}};
    model::Model& m = result.model;

    for (long it = 0; it < cfg.iterations; ++it) {
        const auto start = std::chrono::steady_clock::now();
        const int epoch = 1 + static_cast<int>(seen / static_cast<long>(N));
        const double lr = lr_schedule(it, epoch, cfg);
        for (auto& p : params) p.zero_grad();
        std::vector<Tensor> losses;
        for (int b = 0; b < cfg.batch; ++b) {
            if (cursor == N) {
                std::shuffle(order.begin(), order.end(), rng);
                cursor = 0;
            }
            const std::size_t i = order[cursor++];
            ++seen;
            const Sample& s = data.samples[i];
            if (cfg.stage == 1) {
                losses.push_back(stage1_frame_loss(m, s, teachers[i], cfg, rng));
                continue;
            }
            const Stage2Frame& f = cache[i];
            const Tensor fused = m.enhance(f.feats, f.text);
            std::array<Tensor, 3> student;
            for (Level l : guidance::kLevels) {
                const int li = static_cast<int>(l);
                if (!cfg.levels[li] || lvl(s, l).masks.masks.empty()) continue;
                student[li] = m.mask_features(fused, f.G[li], lvl(s, l).masks.masks).M_hat;
            }
            auto d = distill_loss(student, s.guidance, toggles);
            result.log.dead_features += d.dead_features;
            losses.push_back(d.loss);
        }
        const Tensor loss = ag::scale(ag::sum(ag::concat_rows(losses)), 1.0 / cfg.batch);
        if (!std::isfinite(loss.item())) throw Error("train: non-finite loss at iteration " + std::to_string(it));
        Tensor(loss).backward();
        adam.step(params, lr);
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
        result.log.entries.push_back({it, loss.item(), lr, ms});
    }
    if (!cfg.checkpoint_path.empty()) {
        model::save_checkpoint(m, {cfg.stage, cfg.iterations, cfg.seed, data.classes}, cfg.checkpoint_path);
        result.log.checkpoint_path = cfg.checkpoint_path;
    }
    return result;
}

std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, const SynthCorpusConfig& cfg)
{
    std::filesystem::create_directories(dir / "frames");
    json frames = json::array();
    std::vector<std::string> classes;
    for (int i = 0; i < cfg.frames; ++i) {
        const uint64_t seed = cfg.seed + uint64_t(i);
        const auto scene = guidance::synth_guidance(seed, cfg.scene);
        classes = scene.class_names;
        const int64_t t0 = int64_t(i) * cfg.window_us;
        const auto ev = guidance::synth_events(scene, seed, t0, cfg.window_us);
        const std::string id = scene.frame_id;
        events::save_events(ev, dir / "frames" / (id + ".evt"), events::EventFormat::binary);
        save_ppm(scene.image, dir / "frames" / (id + ".ppm"));
        const auto g = guidance::build_guidance(scene.image, scene.mask_sets, scene.providers);
        guidance::save_guidance(g, dir / "frames" / (id + "_guidance"));
        frames.push_back({{"frame_id", id},
                          {"events", "frames/" + id + ".evt"},
                          {"image", "frames/" + id + ".ppm"},
                          {"guidance", "frames/" + id + "_guidance"},
                          {"t0", t0}});
    }
    if (classes.empty()) classes = cfg.scene.class_names.empty() ? guidance::default_class_names(cfg.scene.num_classes)
                                                                 : cfg.scene.class_names;
    json doc = {{"classes", classes},
                {"teacher", {{"dim", cfg.scene.dim}, {"sigma", cfg.scene.sigma}}},
                {"window_us", cfg.window_us},
                {"height", cfg.scene.height},
                {"width", cfg.scene.width},
                {"frames", frames}};
    const auto path = dir / "manifest.json";
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << doc.dump(2) << '\n';
    return path;
}

}  // namespace seal::training
