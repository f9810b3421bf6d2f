#include "seal/events.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>

#include "seal/binio.hpp"
#include "seal/error.hpp"

namespace seal::events {

namespace {

constexpr char kEventMagic[4] = {'E', 'V', 'T', '1'};
constexpr char kVoxelMagic[4] = {'V', 'O', 'X', '1'};

void check_record(const EventStream& s, std::size_t i)
{
    if (s.xs[i] >= s.width || s.ys[i] >= s.height) {
        throw ValidationError("event record " + std::to_string(i) + ": coordinate (" +
                              std::to_string(s.xs[i]) + ", " + std::to_string(s.ys[i]) +
                              ") outside " + std::to_string(s.width) + "x" +
                              std::to_string(s.height) + " sensor");
    }
    if (s.ps[i] != 1 && s.ps[i] != -1) {
        throw ValidationError("event record " + std::to_string(i) + ": polarity must be +1 or -1");
    }
    if (i > 0 && s.ts[i] < s.ts[i - 1]) {
        throw ValidationError("event record " + std::to_string(i) + ": timestamp decreases");
    }
}

EventStream load_binary(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open event file " + path.string());
    binio::Reader r(in, path.string());
    r.expect_magic(kEventMagic);
    EventStream s;
    s.width = r.u16();
    s.height = r.u16();
    const uint64_t count = r.u64();
    s.xs.reserve(count);
    s.ys.reserve(count);
    s.ts.reserve(count);
    s.ps.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        const uint16_t x = r.u16();
        const uint16_t y = r.u16();
        const uint64_t t = r.u64();
        const int8_t p = r.i8();
        s.xs.push_back(x);
        s.ys.push_back(y);
        s.ts.push_back(static_cast<int64_t>(t));
        s.ps.push_back(p);
        check_record(s, s.size() - 1);
    }
    return s;
}

EventStream load_csv(const std::filesystem::path& path, int width, int height)
{
    std::ifstream in(path);
    if (!in) throw FormatError("cannot open event file " + path.string());
    std::string line;
    if (!std::getline(in, line)) throw FormatError(path.string() + ": missing csv header");
    // Optional geometry comment: "# width=W height=H" before the header row.
    if (line.rfind('#', 0) == 0) {
        std::istringstream meta(line.substr(1));
        std::string kv;
        while (meta >> kv) {
            auto eq = kv.find('=');
            if (eq == std::string::npos) continue;
            const auto key = kv.substr(0, eq);
            const int value = std::stoi(kv.substr(eq + 1));
            if (key == "width") width = value;
            if (key == "height") height = value;
        }
        if (!std::getline(in, line)) throw FormatError(path.string() + ": missing csv header");
    }
    if (line.find("x,y,t,p") != 0) throw FormatError(path.string() + ": csv header must be x,y,t,p");
    EventStream s;
    s.width = width;
    s.height = height;
    std::size_t row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        long long v[4];
        char c1 = 0, c2 = 0, c3 = 0;
        std::istringstream ls(line);
        if (!(ls >> v[0] >> c1 >> v[1] >> c2 >> v[2] >> c3 >> v[3]) || c1 != ',' || c2 != ',' ||
            c3 != ',') {
            throw FormatError(path.string() + ": malformed csv row " + std::to_string(row));
        }
        const bool known = width > 0 && height > 0;
        if (v[0] < 0 || v[1] < 0 || (known && (v[0] >= width || v[1] >= height))) {
            throw ValidationError("event record " + std::to_string(row) + ": coordinate (" +
                                  std::to_string(v[0]) + ", " + std::to_string(v[1]) +
                                  ") outside " + std::to_string(width) + "x" +
                                  std::to_string(height) + " sensor");
        }
        s.xs.push_back(static_cast<uint16_t>(v[0]));
        s.ys.push_back(static_cast<uint16_t>(v[1]));
        s.ts.push_back(v[2]);
        s.ps.push_back(static_cast<int8_t>(v[3]));
        if (known) check_record(s, row);
        ++row;
    }
    if (s.width <= 0 || s.height <= 0) {
        s.width = s.empty() ? 1 : *std::max_element(s.xs.begin(), s.xs.end()) + 1;
        s.height = s.empty() ? 1 : *std::max_element(s.ys.begin(), s.ys.end()) + 1;
        validate(s);
    }
    return s;
}

}  // namespace

void EventStream::push_back(int x, int y, int64_t t, int p)
{
    xs.push_back(static_cast<uint16_t>(x));
    ys.push_back(static_cast<uint16_t>(y));
    ts.push_back(t);
    ps.push_back(static_cast<int8_t>(p));
}

void validate(const EventStream& s)
{
    const auto n = s.ts.size();
    if (s.xs.size() != n || s.ys.size() != n || s.ps.size() != n) {
        throw ValidationError("event stream arrays differ in length");
    }
    if (s.width <= 0 || s.height <= 0) throw ValidationError("event stream has no sensor geometry");
    for (std::size_t i = 0; i < n; ++i) check_record(s, i);
}

EventStream load_events(const std::filesystem::path& path, EventFormat format, int width,
                        int height)
{
    if (format == EventFormat::binary) return load_binary(path);
    return load_csv(path, width, height);
}

void save_events(const EventStream& s, const std::filesystem::path& path, EventFormat format)
{
    validate(s);
    if (format == EventFormat::binary) {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw FormatError("cannot write " + path.string());
        binio::Writer w(out);
        w.magic(kEventMagic);
        w.u16(static_cast<uint16_t>(s.width));
        w.u16(static_cast<uint16_t>(s.height));
        w.u64(s.size());
        for (std::size_t i = 0; i < s.size(); ++i) {
            w.u16(s.xs[i]);
            w.u16(s.ys[i]);
            w.u64(static_cast<uint64_t>(s.ts[i]));
            w.i8(s.ps[i]);
        }
        return;
    }
    std::ofstream out(path);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "# width=" << s.width << " height=" << s.height << "\n";
    out << "x,y,t,p\n";
    for (std::size_t i = 0; i < s.size(); ++i) {
        out << s.xs[i] << ',' << s.ys[i] << ',' << s.ts[i] << ',' << int(s.ps[i]) << '\n';
    }
}

EventStream slice_window(const EventStream& s, int64_t t_start, int64_t window_us)
{
    if (window_us <= 0) throw PreconditionError("slice_window: window must be positive");
    const auto lo = std::lower_bound(s.ts.begin(), s.ts.end(), t_start) - s.ts.begin();
    const auto hi = std::lower_bound(s.ts.begin(), s.ts.end(), t_start + window_us) - s.ts.begin();
    EventStream out;
    out.width = s.width;
    out.height = s.height;
    out.xs.assign(s.xs.begin() + lo, s.xs.begin() + hi);
    out.ys.assign(s.ys.begin() + lo, s.ys.begin() + hi);
    out.ts.assign(s.ts.begin() + lo, s.ts.begin() + hi);
    out.ps.assign(s.ps.begin() + lo, s.ps.begin() + hi);
    return out;
}

EventStream concat(const EventStream& a, const EventStream& b)
{
    EventStream out = a;
    out.xs.insert(out.xs.end(), b.xs.begin(), b.xs.end());
    out.ys.insert(out.ys.end(), b.ys.begin(), b.ys.end());
    out.ts.insert(out.ts.end(), b.ts.begin(), b.ts.end());
    out.ps.insert(out.ps.end(), b.ps.begin(), b.ps.end());
    return out;
}

void VoxelConfig::validate() const
{
    if (bins < 1) throw ConfigError("voxel config: bins must be >= 1");
    if (window_us <= 0) throw ConfigError("voxel config: window must be positive");
    if (height <= 0 || width <= 0) throw ConfigError("voxel config: grid size must be positive");
}

double VoxelGrid::sum() const
{
    double acc = 0.0;
    for (float v : data) acc += v;
    return acc;
}

double temporal_kernel(double t_star, int bin)
{
    return std::max(1.0 - std::abs(t_star - bin), 0.0);
}

VoxelGrid voxelize(const EventStream& s, const VoxelConfig& cfg, int64_t t0)
{
    cfg.validate();
    VoxelGrid grid;
    grid.config = cfg;
    grid.t0 = t0;
    grid.data.assign(static_cast<std::size_t>(cfg.bins) * cfg.height * cfg.width, 0.0f);
    const bool rescale = s.width != cfg.width || s.height != cfg.height;
    const double sx = rescale && s.width > 0 ? double(cfg.width) / s.width : 1.0;
    const double sy = rescale && s.height > 0 ? double(cfg.height) / s.height : 1.0;
    const double last_bin = cfg.bins - 1;
    for (std::size_t j = 0; j < s.size(); ++j) {
        int x = s.xs[j];
        int y = s.ys[j];
        if (rescale) {
            x = std::clamp(static_cast<int>(std::lround((x + 0.5) * sx - 0.5)), 0, cfg.width - 1);
            y = std::clamp(static_cast<int>(std::lround((y + 0.5) * sy - 0.5)), 0, cfg.height - 1);
        }
        double t_star = last_bin * double(s.ts[j] - t0) / double(cfg.window_us);
        t_star = std::clamp(t_star, 0.0, last_bin);
        const int lo = static_cast<int>(std::floor(t_star));
        for (int b = lo; b <= std::min(lo + 1, cfg.bins - 1); ++b) {
            const double w = temporal_kernel(t_star, b);
            if (w > 0.0) grid.at(b, y, x) += static_cast<float>(s.ps[j] * w);
        }
    }
    return grid;
}

VoxelGrid voxelize(const EventStream& s, const VoxelConfig& cfg)
{
    return voxelize(s, cfg, s.empty() ? 0 : s.ts.front());
}

VoxelGrid normalize_voxel(const VoxelGrid& grid)
{
    float peak = 0.0f;
    for (float v : grid.data) peak = std::max(peak, std::abs(v));
    VoxelGrid out = grid;
    if (peak == 0.0f || peak == 1.0f) return out;
    for (float& v : out.data) v /= peak;
    return out;
}

void save_voxel(const VoxelGrid& g, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    binio::Writer w(out);
    w.magic(kVoxelMagic);
    w.u32(static_cast<uint32_t>(g.config.bins));
    w.u32(static_cast<uint32_t>(g.config.height));
    w.u32(static_cast<uint32_t>(g.config.width));
    w.i64(g.t0);
    w.i64(g.config.window_us);
    for (float v : g.data) w.f32(v);
}

VoxelGrid load_voxel(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open voxel file " + path.string());
    binio::Reader r(in, path.string());
    r.expect_magic(kVoxelMagic);
    VoxelGrid g;
    g.config.bins = static_cast<int>(r.u32());
    g.config.height = static_cast<int>(r.u32());
    g.config.width = static_cast<int>(r.u32());
    g.t0 = r.i64();
    g.config.window_us = r.i64();
    g.config.validate();
    const std::size_t n = static_cast<std::size_t>(g.config.bins) * g.config.height * g.config.width;
    g.data.resize(n);
    for (auto& v : g.data) v = r.f32();
    return g;
}

}  // namespace seal::events
