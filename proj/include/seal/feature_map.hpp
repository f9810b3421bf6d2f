#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "seal/mask.hpp"

namespace seal {

// channels x height x width, channel-major.
struct FeatureMap {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> data;

    FeatureMap() = default;
    FeatureMap(int c, int h, int w) : channels(c), height(h), width(w), data(std::size_t(c) * h * w, 0.0) {}

    double& at(int c, int y, int x) { return data[(std::size_t(c) * height + y) * width + x]; }
    double at(int c, int y, int x) const { return data[(std::size_t(c) * height + y) * width + x]; }
    std::size_t cells() const { return std::size_t(height) * width; }
};

// 8-bit RGB image, row-major, interleaved.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<uint8_t> rgb;

    Image() = default;
    Image(int h, int w) : height(h), width(w), rgb(std::size_t(h) * w * 3, 0) {}
    uint8_t& at(int x, int y, int c) { return rgb[(std::size_t(y) * width + x) * 3 + c]; }
    uint8_t at(int x, int y, int c) const { return rgb[(std::size_t(y) * width + x) * 3 + c]; }
};

void save_ppm(const Image& image, const std::filesystem::path& path);
Image load_ppm(const std::filesystem::path& path);

// Fraction of each out_h x out_w cell covered by set mask pixels (area interpolation).
std::vector<double> area_resample(const BinaryMask& mask, int out_h, int out_w);

}  // namespace seal
