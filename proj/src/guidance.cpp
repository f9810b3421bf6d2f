#include "seal/guidance.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "seal/binio.hpp"
#include "seal/error.hpp"

namespace seal::guidance {

using nlohmann::json;

char level_code(Level l)
{
    switch (l) {
    case Level::semantic: return 's';
    case Level::instance: return 'i';
    case Level::part: return 'p';
    }
    return '?';
}

std::string level_name(Level l)
{
    switch (l) {
    case Level::semantic: return "semantic";
    case Level::instance: return "instance";
    case Level::part: return "part";
    }
    return "unknown";
}

Level level_from_code(char c)
{
    switch (c) {
    case 's': return Level::semantic;
    case 'i': return Level::instance;
    case 'p': return Level::part;
    default: throw ValidationError(std::string("unknown hierarchy level '") + c + "'");
    }
}

MaskSet mask_set_from_rle(Level level, const std::vector<Rle>& rles, const std::string& frame_id)
{
    MaskSet ms{level, {}, frame_id};
    ms.masks.reserve(rles.size());
    for (std::size_t i = 0; i < rles.size(); ++i) {
        try {
            ms.masks.push_back(rle_decode(rles[i]));
        } catch (const FormatError& e) {
            throw FormatError("mask " + std::to_string(i) + " (level " + level_code(level) + "): " + e.what());
        }
    }
    return ms;
}

MaskSetReport validate_mask_set(const MaskSet& ms, int height, int width, double coverage_threshold)
{
    MaskSetReport report;
    std::vector<uint16_t> hits(std::size_t(height) * width, 0);
    for (std::size_t i = 0; i < ms.masks.size(); ++i) {
        const auto& m = ms.masks[i];
        if (m.height() != height || m.width() != width) {
            throw ValidationError("mask " + std::to_string(i) + ": decodes to " + std::to_string(m.height()) + "x" +
                                  std::to_string(m.width()) + ", expected " + std::to_string(height) + "x" +
                                  std::to_string(width));
        }
        std::size_t area = 0;
        const auto& bits = m.bits();
        for (std::size_t p = 0; p < bits.size(); ++p) {
            if (bits[p]) {
                ++area;
                ++hits[p];
            }
        }
        if (area == 0) report.empty_masks.push_back(i);
    }
    std::size_t covered = 0;
    for (auto h : hits) {
        covered += h > 0;
        report.overlap_pixels += h > 1;
    }
    report.coverage = hits.empty() ? 0.0 : double(covered) / double(hits.size());
    report.valid = report.coverage >= coverage_threshold && report.empty_masks.empty();
    return report;
}

std::vector<Box> boxes_from_masks(const MaskSet& ms)
{
    std::vector<Box> boxes;
    boxes.reserve(ms.masks.size());
    for (const auto& m : ms.masks) boxes.push_back(tight_box(m));
    return boxes;
}

std::vector<double> pool_pixel_features(const FeatureMap& f, const BinaryMask& mask)
{
    if (mask.empty()) throw PreconditionError("pool_pixel_features: empty mask");
    std::vector<double> weights;
    if (mask.height() == f.height && mask.width() == f.width) {
        weights.assign(mask.bits().begin(), mask.bits().end());
    } else {
        weights = area_resample(mask, f.height, f.width);
    }
    double total = 0.0;
    for (double w : weights) total += w;
    if (total <= 0.0) {
        const Box b = tight_box(mask);
        const double sy = double(f.height) / mask.height();
        const double sx = double(f.width) / mask.width();
        const int y0 = std::clamp(static_cast<int>(b.y_min * sy), 0, f.height - 1);
        const int y1 = std::clamp(static_cast<int>(b.y_max * sy), 0, f.height - 1);
        const int x0 = std::clamp(static_cast<int>(b.x_min * sx), 0, f.width - 1);
        const int x1 = std::clamp(static_cast<int>(b.x_max * sx), 0, f.width - 1);
        std::fill(weights.begin(), weights.end(), 0.0);
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) weights[std::size_t(y) * f.width + x] = 1.0;
        }
        total = double(y1 - y0 + 1) * (x1 - x0 + 1);
    }
    std::vector<double> out(f.channels, 0.0);
    const std::size_t cells = f.cells();
    for (int c = 0; c < f.channels; ++c) {
        const double* plane = f.data.data() + std::size_t(c) * cells;
        double acc = 0.0;
        for (std::size_t i = 0; i < cells; ++i) acc += weights[i] * plane[i];
        out[c] = acc / total;
    }
    return out;
}

int HierGuidance::dim() const
{
    for (const auto& lg : levels) {
        if (!lg.records.empty()) return static_cast<int>(lg.records.front().visual.size());
    }
    return 0;
}

HierGuidance build_guidance(const Image& image, const std::array<MaskSet, 3>& mask_sets,
                            const TeacherProviders& providers, double coverage_threshold)
{
    HierGuidance g;
    g.frame_id = mask_sets[0].frame_id;
    for (Level l : kLevels) {
        const auto& ms = mask_sets[static_cast<int>(l)];
        if (ms.level != l) throw PreconditionError("build_guidance: mask sets must be ordered s, i, p");
        const auto report = validate_mask_set(ms, image.height, image.width, coverage_threshold);
        if (!report.valid) {
            throw PreconditionError("build_guidance: level " + std::string(1, level_code(l)) +
                                    " mask set invalid (coverage " + std::to_string(report.coverage) + ", " +
                                    std::to_string(report.empty_masks.size()) + " empty masks)");
        }
    }
    FeatureMap pixel_features;
    try {
        pixel_features = providers.pixel_features(image);
    } catch (const std::exception& e) {
        throw ProviderError(std::string("pixel feature provider failed: ") + e.what());
    }
    for (Level l : kLevels) {
        const auto& ms = mask_sets[static_cast<int>(l)];
        auto& lg = g.level(l);
        lg.masks = ms;
        for (std::size_t k = 0; k < ms.masks.size(); ++k) {
            GuidanceRecord rec;
            rec.mask_index = k;
            try {
                rec.visual = pool_pixel_features(pixel_features, ms.masks[k]);
                const Caption cap = providers.caption(image, ms.masks[k]);
                rec.caption_short = cap.short_text;
                rec.caption_long = cap.long_text;
                rec.text = providers.text_encoder(cap.short_text);
            } catch (const std::exception& e) {
                throw ProviderError("level " + std::string(1, level_code(l)) + " mask " + std::to_string(k) +
                                    ": " + e.what());
            }
            lg.records.push_back(std::move(rec));
        }
    }
    return g;
}

namespace {

void write_rows(const std::filesystem::path& path, const std::vector<GuidanceRecord>& records, bool visual)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    binio::Writer w(out);
    for (const auto& r : records) {
        for (double v : (visual ? r.visual : r.text)) w.f32(static_cast<float>(v));
    }
}

std::vector<std::vector<double>> read_rows(const std::filesystem::path& path, std::size_t rows)
{
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) throw DataError("missing guidance file " + path.string());
    const auto bytes = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    if (rows == 0) return {};
    if (bytes % (rows * 4) != 0) throw FormatError(path.string() + ": size is not rows x dim floats");
    const std::size_t dim = bytes / (rows * 4);
    binio::Reader r(in, path.string());
    std::vector<std::vector<double>> out(rows, std::vector<double>(dim));
    for (auto& row : out) {
        for (auto& v : row) v = r.f32();
    }
    return out;
}

std::string suffix(Level l) { return std::string("_") + level_code(l); }

}  // namespace

void save_mask_set(const MaskSet& ms, const std::filesystem::path& path)
{
    json arr = json::array();
    for (const auto& m : ms.masks) arr.push_back(mask_to_json(m));
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << arr.dump();
}

MaskSet load_mask_set(const std::filesystem::path& path, Level level, const std::string& frame_id)
{
    std::ifstream in(path);
    if (!in) throw DataError("missing mask file " + path.string());
    json arr;
    try {
        in >> arr;
    } catch (const json::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    std::vector<Rle> rles;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        try {
            rles.push_back(rle_from_json(arr[i]));
        } catch (const FormatError& e) {
            throw FormatError(path.string() + ": mask " + std::to_string(i) + ": " + e.what());
        }
    }
    return mask_set_from_rle(level, rles, frame_id);
}

void save_guidance(const HierGuidance& g, const std::filesystem::path& dir)
{
    std::filesystem::create_directories(dir);
    for (Level l : kLevels) {
        const auto& lg = g.level(l);
        save_mask_set(lg.masks, dir / ("masks" + suffix(l) + ".json"));
        write_rows(dir / ("vfeat" + suffix(l) + ".bin"), lg.records, true);
        write_rows(dir / ("tfeat" + suffix(l) + ".bin"), lg.records, false);
        json caps = json::array();
        for (const auto& r : lg.records) caps.push_back({{"short", r.caption_short}, {"long", r.caption_long}});
        std::ofstream out(dir / ("captions" + suffix(l) + ".json"));
        out << caps.dump();
    }
}

HierGuidance load_guidance(const std::filesystem::path& dir, const std::string& frame_id)
{
    if (!std::filesystem::is_directory(dir)) throw DataError("missing guidance for frame " + frame_id + ": " + dir.string());
    HierGuidance g;
    g.frame_id = frame_id;
    for (Level l : kLevels) {
        auto& lg = g.level(l);
        lg.masks = load_mask_set(dir / ("masks" + suffix(l) + ".json"), l, frame_id);
        const std::size_t k = lg.masks.size();
        auto vis = read_rows(dir / ("vfeat" + suffix(l) + ".bin"), k);
        auto txt = read_rows(dir / ("tfeat" + suffix(l) + ".bin"), k);
        std::ifstream in(dir / ("captions" + suffix(l) + ".json"));
        if (!in) throw DataError("missing captions for frame " + frame_id);
        json caps;
        in >> caps;
        if (caps.size() != k) throw DataError("frame " + frame_id + ": caption count differs from mask count");
        for (std::size_t i = 0; i < k; ++i) {
            GuidanceRecord r;
            r.mask_index = i;
            r.visual = std::move(vis[i]);
            r.text = std::move(txt[i]);
            r.caption_short = caps[i].value("short", "");
            r.caption_long = caps[i].value("long", "");
            lg.records.push_back(std::move(r));
        }
    }
    return g;
}

}  // namespace seal::guidance
