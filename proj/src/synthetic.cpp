#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <memory>
#include <numeric>
#include <random>

#include "seal/error.hpp"
#include "seal/guidance.hpp"

namespace seal::guidance {

namespace {

uint64_t splitmix64(uint64_t x)
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

uint64_t fnv1a(const void* data, std::size_t n, uint64_t h = 0xcbf29ce484222325ULL)
{
    const auto* p = static_cast<const uint8_t*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ULL;
    }
    return h;
}

double hash_uniform(uint64_t h) { return (double(splitmix64(h) >> 11) + 0.5) * 0x1.0p-53; }

double hash_normal(uint64_t h)
{
    const double u1 = hash_uniform(h);
    const double u2 = hash_uniform(h ^ 0xa5a5a5a5a5a5a5a5ULL);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
}

void normalize(std::vector<double>& v)
{
    double n = 0.0;
    for (double x : v) n += x * x;
    n = std::sqrt(n);
    if (n > 0.0) {
        for (double& x : v) x /= n;
    }
}

struct Rect {
    int x0, y0, x1, y1;  // half-open
    int w() const { return x1 - x0; }
    int h() const { return y1 - y0; }
    int area() const { return w() * h(); }
};

}  // namespace

std::vector<std::string> tokenize(const std::string& text)
{
    std::vector<std::string> out;
    std::string cur;
    for (char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (std::isalnum(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) out.push_back(std::move(cur));
    return out;
}

SyntheticTextEncoder::SyntheticTextEncoder(int dim, std::vector<std::string> vocabulary, uint64_t seed,
                                           std::string prompt_template)
    : dim_(dim), seed_(seed), template_(std::move(prompt_template)), vocabulary_(std::move(vocabulary))
{
    if (dim <= 0) throw ConfigError("text encoder: dim must be positive");
    if (static_cast<int>(vocabulary_.size()) > dim) {
        throw ConfigError("text encoder: " + std::to_string(vocabulary_.size()) +
                          " phrases cannot have orthogonal bases in dim " + std::to_string(dim));
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    for (const auto& phrase : vocabulary_) {
        phrase_tokens_.push_back(tokenize(phrase));
        std::vector<double> v(dim);
        // Gram-Schmidt against earlier bases, retried on the (measure-zero) degenerate draw.
        for (;;) {
            for (auto& x : v) x = normal(rng);
            for (const auto& b : basis_) {
                double d = 0.0;
                for (int i = 0; i < dim; ++i) d += v[i] * b[i];
                for (int i = 0; i < dim; ++i) v[i] -= d * b[i];
            }
            double n = 0.0;
            for (double x : v) n += x * x;
            if (n > 1e-6) break;
        }
        normalize(v);
        basis_.push_back(std::move(v));
    }
}

std::vector<double> SyntheticTextEncoder::word_vector(const std::string& word) const
{
    std::vector<double> v(dim_);
    const uint64_t h = fnv1a(word.data(), word.size(), seed_ ^ 0x77ULL);
    for (int i = 0; i < dim_; ++i) v[i] = hash_normal(h + 0x1000ULL * uint64_t(i));
    normalize(v);
    return v;
}

std::vector<double> SyntheticTextEncoder::encode(const std::string& text) const
{
    std::string full = template_;
    if (auto pos = full.find("{}"); pos != std::string::npos) {
        full.replace(pos, 2, text);
    } else {
        full = text;
    }
    const auto tokens = tokenize(full);
    std::vector<double> acc(dim_, 0.0);
    std::size_t i = 0;
    while (i < tokens.size()) {
        std::size_t best_len = 0;
        std::size_t best = 0;
        for (std::size_t p = 0; p < phrase_tokens_.size(); ++p) {
            const auto& pt = phrase_tokens_[p];
            if (pt.empty() || pt.size() <= best_len || i + pt.size() > tokens.size()) continue;
            if (std::equal(pt.begin(), pt.end(), tokens.begin() + std::ptrdiff_t(i))) {
                best_len = pt.size();
                best = p;
            }
        }
        if (best_len > 0) {
            for (int d = 0; d < dim_; ++d) acc[d] += basis_[best][d];
            i += best_len;
        } else {
            const auto wv = word_vector(tokens[i]);
            for (int d = 0; d < dim_; ++d) acc[d] += 0.25 * wv[d];
            ++i;
        }
    }
    if (tokens.empty()) acc = word_vector("");
    normalize(acc);
    return acc;
}

std::vector<std::string> default_class_names(int count)
{
    static const std::vector<std::string> kNames = {
        "car", "person", "vegetation", "building", "pole", "fence", "traffic sign", "truck",
        "bus", "rider", "bicycle", "wall", "terrain", "train", "motorcycle", "traffic light"};
    std::vector<std::string> out;
    for (int i = 0; i < count; ++i) {
        out.push_back(i < static_cast<int>(kNames.size()) ? kNames[i] : "class " + std::to_string(i));
    }
    return out;
}

TeacherProviders synthetic_providers(const std::vector<std::string>& class_names, int dim, double sigma,
                                     uint64_t noise_seed)
{
    auto encoder = std::make_shared<SyntheticTextEncoder>(dim, class_names);
    auto bases = std::make_shared<std::vector<std::vector<double>>>();
    // Float-representable bases keep noise-free pooled means exact.
    for (std::size_t k = 0; k < class_names.size(); ++k) {
        auto b = encoder->basis(k);
        for (double& v : b) v = static_cast<float>(v);
        bases->push_back(std::move(b));
    }
    auto names = std::make_shared<std::vector<std::string>>(class_names);

    TeacherProviders p;
    p.pixel_features = [bases, dim, sigma, noise_seed](const Image& img) {
        FeatureMap f(dim, img.height, img.width);
        const uint64_t image_hash = fnv1a(img.rgb.data(), img.rgb.size(), noise_seed);
        for (int y = 0; y < img.height; ++y) {
            for (int x = 0; x < img.width; ++x) {
                const int cls = img.at(x, y, 0);
                if (cls >= static_cast<int>(bases->size())) {
                    throw ProviderError("pixel (" + std::to_string(x) + ", " + std::to_string(y) +
                                        ") carries unknown class " + std::to_string(cls));
                }
                const auto& b = (*bases)[cls];
                for (int c = 0; c < dim; ++c) {
                    double v = b[c];
                    if (sigma > 0.0) {
                        const uint64_t h = image_hash ^ splitmix64((uint64_t(y) * img.width + x) * 4096ULL + c);
                        v += sigma * hash_normal(h);
                    }
                    f.at(c, y, x) = v;
                }
            }
        }
        return f;
    };
    p.caption = [names](const Image& img, const BinaryMask& mask) {
        std::map<int, std::size_t> votes;
        for (int y = 0; y < mask.height(); ++y) {
            for (int x = 0; x < mask.width(); ++x) {
                if (mask.get(x, y)) ++votes[img.at(x, y, 0)];
            }
        }
        if (votes.empty()) throw ProviderError("caption requested for an empty mask");
        const int cls = std::max_element(votes.begin(), votes.end(), [](const auto& a, const auto& b) {
                            return a.second < b.second;
                        })->first;
        if (cls >= static_cast<int>(names->size())) throw ProviderError("unknown class " + std::to_string(cls));
        static const char* kScenes[] = {"in a driving scene", "seen from the road", "next to the street",
                                        "under daylight"};
        const auto& name = (*names)[cls];
        return Caption{name, "a " + name + " " + kScenes[mask.area() % 4]};
    };
    p.text_encoder = [encoder](const std::string& s) { return encoder->encode(s); };
    return p;
}

SyntheticScene synth_guidance(uint64_t seed, const SynthConfig& cfg)
{
    if (cfg.num_classes <= 0 || cfg.masks_per_class <= 0 || cfg.parts_per_instance <= 0) {
        throw ConfigError("synth: class, mask and part counts must be positive");
    }
    if (cfg.num_classes > cfg.dim) {
        throw ConfigError("synth: " + std::to_string(cfg.num_classes) + " classes exceed guidance dim " +
                          std::to_string(cfg.dim));
    }
    if (cfg.num_classes > 255) throw ConfigError("synth: at most 255 classes");
    const int H = cfg.height, W = cfg.width;
    SyntheticScene scene;
    scene.frame_id = "synth_" + std::to_string(seed);
    scene.class_names = cfg.class_names.empty() ? default_class_names(cfg.num_classes) : cfg.class_names;
    if (static_cast<int>(scene.class_names.size()) != cfg.num_classes) {
        throw ConfigError("synth: class_names size differs from num_classes");
    }
    std::mt19937_64 rng(splitmix64(seed));

    // Guillotine partition of the frame into instance tiles.
    const int target = cfg.num_classes * cfg.masks_per_class;
    std::vector<Rect> tiles{{0, 0, W, H}};
    while (static_cast<int>(tiles.size()) < target) {
        std::vector<std::size_t> order(tiles.size());
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return tiles[a].area() > tiles[b].area(); });
        bool split = false;
        for (auto idx : order) {
            const Rect r = tiles[idx];
            const bool vertical = r.w() >= r.h();
            const int len = vertical ? r.w() : r.h();
            if (len < 2 * cfg.min_tile) continue;
            std::uniform_int_distribution<int> cut(cfg.min_tile, len - cfg.min_tile);
            const int c = cut(rng);
            Rect a = r, b = r;
            if (vertical) {
                a.x1 = r.x0 + c;
                b.x0 = r.x0 + c;
            } else {
                a.y1 = r.y0 + c;
                b.y0 = r.y0 + c;
            }
            tiles[idx] = a;
            tiles.push_back(b);
            split = true;
            break;
        }
        if (!split) break;
    }
    std::vector<int> classes;
    for (int k = 0; k < cfg.num_classes; ++k) {
        for (int m = 0; m < cfg.masks_per_class; ++m) classes.push_back(k);
    }
    std::shuffle(classes.begin(), classes.end(), rng);
    classes.resize(tiles.size());

    std::vector<int> cls_map(std::size_t(H) * W, 0), inst_map(std::size_t(H) * W, 0), part_map(std::size_t(H) * W, 0);
    int next_part = 0;
    for (std::size_t t = 0; t < tiles.size(); ++t) {
        const Rect& r = tiles[t];
        const bool vertical = r.w() >= r.h();
        const int len = vertical ? r.w() : r.h();
        const int parts = std::min(cfg.parts_per_instance, len);
        for (int y = r.y0; y < r.y1; ++y) {
            for (int x = r.x0; x < r.x1; ++x) {
                const std::size_t p = std::size_t(y) * W + x;
                cls_map[p] = classes[t];
                inst_map[p] = static_cast<int>(t);
                const int offset = vertical ? x - r.x0 : y - r.y0;
                part_map[p] = next_part + std::min(parts - 1, offset * parts / len);
            }
        }
        next_part += parts;
    }
    int next_inst = static_cast<int>(tiles.size());
    std::vector<int> inst_class(classes.begin(), classes.end());

    // Tiny objects carved out of larger tiles: these vanish at feature resolution.
    const int s = cfg.small_size;
    for (int k = 0, attempts = 0; k < cfg.small_objects && attempts < 50 * (cfg.small_objects + 1); ++attempts) {
        std::uniform_int_distribution<std::size_t> pick(0, tiles.size() - 1);
        const std::size_t t = pick(rng);
        const Rect& r = tiles[t];
        if (r.w() < s + 2 || r.h() < s + 2) continue;
        std::uniform_int_distribution<int> px(r.x0 + 1, r.x1 - s - 1), py(r.y0 + 1, r.y1 - s - 1);
        const int x0 = px(rng), y0 = py(rng);
        bool ok = true;
        std::map<int, int> part_hits;
        for (int y = y0 - 1; y < y0 + s + 1 && ok; ++y) {
            for (int x = x0 - 1; x < x0 + s + 1; ++x) {
                if (inst_map[std::size_t(y) * W + x] != static_cast<int>(t)) ok = false;
            }
        }
        if (!ok) continue;
        for (int y = y0; y < y0 + s; ++y) {
            for (int x = x0; x < x0 + s; ++x) ++part_hits[part_map[std::size_t(y) * W + x]];
        }
        for (const auto& [pid, n] : part_hits) {
            const auto total = std::count(part_map.begin(), part_map.end(), pid);
            if (total <= n) ok = false;
        }
        if (!ok) continue;
        int cls = classes[t];
        if (cfg.num_classes > 1) {
            std::uniform_int_distribution<int> pc(0, cfg.num_classes - 2);
            cls = pc(rng);
            if (cls >= classes[t]) ++cls;
        }
        for (int y = y0; y < y0 + s; ++y) {
            for (int x = x0; x < x0 + s; ++x) {
                const std::size_t p = std::size_t(y) * W + x;
                cls_map[p] = cls;
                inst_map[p] = next_inst;
                part_map[p] = next_part;
            }
        }
        inst_class.push_back(cls);
        ++next_inst;
        ++next_part;
        ++k;
    }

    auto masks_from = [&](const std::vector<int>& ids, int count) {
        std::vector<BinaryMask> out(count, BinaryMask(H, W));
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) out[ids[std::size_t(y) * W + x]].set(x, y);
        }
        std::vector<BinaryMask> kept;
        for (auto& m : out) {
            if (!m.empty()) kept.push_back(std::move(m));
        }
        return kept;
    };
    scene.mask_sets[0] = {Level::semantic, masks_from(cls_map, cfg.num_classes), scene.frame_id};
    {
        std::vector<BinaryMask> inst(next_inst, BinaryMask(H, W));
        for (int y = 0; y < H; ++y) {
            for (int x = 0; x < W; ++x) inst[inst_map[std::size_t(y) * W + x]].set(x, y);
        }
        for (int i = 0; i < next_inst; ++i) {
            if (!inst[i].empty()) scene.instances.push_back({inst[i], inst_class[i]});
        }
        std::vector<BinaryMask> masks;
        for (const auto& si : scene.instances) masks.push_back(si.mask);
        scene.mask_sets[1] = {Level::instance, std::move(masks), scene.frame_id};
    }
    scene.mask_sets[2] = {Level::part, masks_from(part_map, next_part), scene.frame_id};
    scene.semantic_map = cls_map;

    scene.image = Image(H, W);
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t p = std::size_t(y) * W + x;
            scene.image.at(x, y, 0) = static_cast<uint8_t>(cls_map[p]);
            scene.image.at(x, y, 1) = static_cast<uint8_t>((inst_map[p] * 37 + 40) % 256);
            scene.image.at(x, y, 2) = static_cast<uint8_t>((part_map[p] * 91 + 20) % 256);
        }
    }
    scene.providers = synthetic_providers(scene.class_names, cfg.dim, cfg.sigma);
    return scene;
}

events::EventStream synth_events(const SyntheticScene& scene, uint64_t seed, int64_t t_start, int64_t window_us)
{
    const int H = scene.image.height, W = scene.image.width;
    std::vector<int> inst_map(std::size_t(H) * W, -1);
    for (std::size_t i = 0; i < scene.instances.size(); ++i) {
        const auto& bits = scene.instances[i].mask.bits();
        for (std::size_t p = 0; p < bits.size(); ++p) {
            if (bits[p]) inst_map[p] = static_cast<int>(i);
        }
    }
    struct Signature {
        double rate, positive, t_mean, t_spread;
        int fx, fy;
    };
    auto signature = [](int cls) {
        const uint64_t h = splitmix64(0xc1a55ULL + uint64_t(cls) * 7919ULL);
        Signature s;
        s.rate = 0.8 + 1.6 * hash_uniform(h ^ 1);
        s.positive = (cls % 2 == 0) ? 0.8 - 0.2 * hash_uniform(h ^ 2) : 0.2 + 0.2 * hash_uniform(h ^ 2);
        s.t_mean = 0.15 + 0.7 * hash_uniform(h ^ 3);
        s.t_spread = 0.05 + 0.12 * hash_uniform(h ^ 4);
        s.fx = cls % 3;
        s.fy = (cls / 3) % 3 + (cls % 3 == 0 ? 1 : 0);
        return s;
    };
    std::mt19937_64 rng(splitmix64(seed ^ 0xe7e7ULL));
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    struct Ev {
        int64_t t;
        int x, y, p;
    };
    std::vector<Ev> evs;
    auto emit = [&](int x, int y, double frac, int p) {
        frac = std::clamp(frac, 0.0, 0.999);
        evs.push_back({t_start + static_cast<int64_t>(frac * double(window_us)), x, y, p});
    };
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            const std::size_t p = std::size_t(y) * W + x;
            const int cls = scene.semantic_map[p];
            const Signature s = signature(cls);
            const double phase = 2.0 * M_PI * (s.fx * x + s.fy * y) / 8.0;
            std::poisson_distribution<int> count(s.rate * (1.0 + 0.8 * std::cos(phase)));
            std::normal_distribution<double> when(s.t_mean, s.t_spread);
            for (int n = count(rng); n > 0; --n) emit(x, y, when(rng), uni(rng) < s.positive ? 1 : -1);
            const bool boundary = (x + 1 < W && inst_map[p + 1] != inst_map[p]) ||
                                  (y + 1 < H && inst_map[p + W] != inst_map[p]) ||
                                  (x > 0 && inst_map[p - 1] != inst_map[p]) || (y > 0 && inst_map[p - W] != inst_map[p]);
            if (boundary) {
                std::poisson_distribution<int> edge(2.5);
                for (int n = edge(rng); n > 0; --n) emit(x, y, uni(rng), uni(rng) < 0.5 ? 1 : -1);
            }
        }
    }
    std::stable_sort(evs.begin(), evs.end(), [](const Ev& a, const Ev& b) { return a.t < b.t; });
    events::EventStream out;
    out.width = W;
    out.height = H;
    for (const auto& e : evs) out.push_back(e.x, e.y, e.t, e.p);
    return out;
}

}  // namespace seal::guidance
