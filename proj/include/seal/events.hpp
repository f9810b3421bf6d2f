#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace seal::events {

// Raw asynchronous events in struct-of-arrays layout.
struct EventStream {
    std::vector<uint16_t> xs;
    std::vector<uint16_t> ys;
    std::vector<int64_t> ts;  // microseconds, non-decreasing
    std::vector<int8_t> ps;   // +1 / -1
    int width = 0;
    int height = 0;

    std::size_t size() const { return ts.size(); }
    bool empty() const { return ts.empty(); }
    void push_back(int x, int y, int64_t t, int p);
};

enum class EventFormat { binary, csv };

// Throws ValidationError naming the first offending record index.
void validate(const EventStream& stream);

// CSV geometry comes from a leading "# width=W height=H" line, the arguments, or
// (when both are absent) the coordinate range.
EventStream load_events(const std::filesystem::path& path, EventFormat format, int width = 0,
                        int height = 0);
void save_events(const EventStream& stream, const std::filesystem::path& path, EventFormat format);

// Events with t_start <= t < t_start + window_us, order preserved.
EventStream slice_window(const EventStream& stream, int64_t t_start, int64_t window_us);

EventStream concat(const EventStream& a, const EventStream& b);

struct VoxelConfig {
    int bins = 3;
    int64_t window_us = 25'000;
    int height = 512;
    int width = 512;

    static VoxelConfig dsec(int height, int width) { return {3, 25'000, height, width}; }
    static VoxelConfig ddd17(int height, int width) { return {3, 15'000, height, width}; }
    void validate() const;
};

struct VoxelGrid {
    std::vector<float> data;  // bins x height x width, row-major
    VoxelConfig config;
    int64_t t0 = 0;

    float at(int b, int y, int x) const
    {
        return data[(static_cast<std::size_t>(b) * config.height + y) * config.width + x];
    }
    float& at(int b, int y, int x)
    {
        return data[(static_cast<std::size_t>(b) * config.height + y) * config.width + x];
    }
    double sum() const;
};

// Triangular temporal kernel max(1 - |t* - b|, 0) with t* = (B-1)(t - t0)/window.
double temporal_kernel(double t_star, int bin);

// Voxelizes one window starting at t0. Events whose sensor geometry differs from
// the configured grid are mapped to the nearest grid coordinate.
VoxelGrid voxelize(const EventStream& stream, const VoxelConfig& cfg, int64_t t0);
// t0 defaults to the first event timestamp (0 for an empty stream).
VoxelGrid voxelize(const EventStream& stream, const VoxelConfig& cfg);

// Per-grid max-abs scaling into [-1, 1]; all-zero grids are returned unchanged.
VoxelGrid normalize_voxel(const VoxelGrid& grid);

// VOX1 container: magic, u32 bins, u32 height, u32 width, i64 t0, i64 window, f32 data.
void save_voxel(const VoxelGrid& grid, const std::filesystem::path& path);
VoxelGrid load_voxel(const std::filesystem::path& path);

}  // namespace seal::events
