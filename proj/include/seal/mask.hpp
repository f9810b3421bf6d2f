#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace seal {

// Inclusive pixel box.
struct Box {
    int x_min = 0;
    int y_min = 0;
    int x_max = 0;
    int y_max = 0;

    int width() const { return x_max - x_min + 1; }
    int height() const { return y_max - y_min + 1; }
    bool contains(int x, int y) const { return x >= x_min && x <= x_max && y >= y_min && y <= y_max; }
    friend bool operator==(const Box&, const Box&) = default;
};

// Dense binary mask, row-major.
class BinaryMask {
public:
    BinaryMask() = default;
    BinaryMask(int height, int width) : height_(height), width_(width), bits_(std::size_t(height) * width, 0) {}

    int height() const { return height_; }
    int width() const { return width_; }
    bool get(int x, int y) const { return bits_[std::size_t(y) * width_ + x] != 0; }
    void set(int x, int y, bool v = true) { bits_[std::size_t(y) * width_ + x] = v ? 1 : 0; }
    const std::vector<uint8_t>& bits() const { return bits_; }
    std::vector<uint8_t>& bits() { return bits_; }

    std::size_t area() const;
    bool empty() const { return area() == 0; }
    void fill_box(const Box& b, bool v = true);

    friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

private:
    int height_ = 0;
    int width_ = 0;
    std::vector<uint8_t> bits_;
};

// Tight inclusive bounding box; PreconditionError on an empty mask.
Box tight_box(const BinaryMask& mask);

// |a & b| / |a | b|; two empty masks give 0.
double mask_iou(const BinaryMask& a, const BinaryMask& b);

// COCO-style run-length encoding: column-major runs, starting with a zero run.
struct Rle {
    int height = 0;
    int width = 0;
    std::vector<uint32_t> counts;

    friend bool operator==(const Rle&, const Rle&) = default;
};

Rle rle_encode(const BinaryMask& mask);
BinaryMask rle_decode(const Rle& rle);

// cocoapi compressed string form of the counts (LEB128-like, delta coded).
std::string rle_counts_to_string(const std::vector<uint32_t>& counts);
std::vector<uint32_t> rle_counts_from_string(const std::string& s);

// {"size": [h, w], "counts": "<compressed>"}; from_json also accepts a counts list.
nlohmann::json rle_to_json(const Rle& rle);
Rle rle_from_json(const nlohmann::json& j);

inline nlohmann::json mask_to_json(const BinaryMask& m) { return rle_to_json(rle_encode(m)); }
inline BinaryMask mask_from_json(const nlohmann::json& j) { return rle_decode(rle_from_json(j)); }

}  // namespace seal
