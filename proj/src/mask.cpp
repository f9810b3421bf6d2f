#include "seal/mask.hpp"

#include <algorithm>
#include <numeric>

#include "seal/error.hpp"

namespace seal {

std::size_t BinaryMask::area() const
{
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), uint8_t{1}));
}

void BinaryMask::fill_box(const Box& b, bool v)
{
    for (int y = std::max(0, b.y_min); y <= std::min(height_ - 1, b.y_max); ++y) {
        for (int x = std::max(0, b.x_min); x <= std::min(width_ - 1, b.x_max); ++x) set(x, y, v);
    }
}

Box tight_box(const BinaryMask& m)
{
    Box b{m.width(), m.height(), -1, -1};
    for (int y = 0; y < m.height(); ++y) {
        for (int x = 0; x < m.width(); ++x) {
            if (!m.get(x, y)) continue;
            b.x_min = std::min(b.x_min, x);
            b.y_min = std::min(b.y_min, y);
            b.x_max = std::max(b.x_max, x);
            b.y_max = std::max(b.y_max, y);
        }
    }
    if (b.x_max < 0) throw PreconditionError("bounding box of an empty mask");
    return b;
}

double mask_iou(const BinaryMask& a, const BinaryMask& b)
{
    if (a.height() != b.height() || a.width() != b.width()) {
        throw PreconditionError("mask_iou: geometry mismatch");
    }
    std::size_t inter = 0;
    std::size_t uni = 0;
    const auto& ab = a.bits();
    const auto& bb = b.bits();
    for (std::size_t i = 0; i < ab.size(); ++i) {
        inter += ab[i] & bb[i];
        uni += ab[i] | bb[i];
    }
    return uni == 0 ? 0.0 : double(inter) / double(uni);
}

Rle rle_encode(const BinaryMask& m)
{
    Rle r{m.height(), m.width(), {}};
    uint8_t prev = 0;
    uint32_t run = 0;
    for (int x = 0; x < m.width(); ++x) {
        for (int y = 0; y < m.height(); ++y) {
            const uint8_t v = m.get(x, y) ? 1 : 0;
            if (v != prev) {
                r.counts.push_back(run);
                run = 0;
                prev = v;
            }
            ++run;
        }
    }
    r.counts.push_back(run);
    return r;
}

BinaryMask rle_decode(const Rle& r)
{
    if (r.height < 0 || r.width < 0) throw FormatError("rle: negative size");
    const uint64_t total = uint64_t(r.height) * uint64_t(r.width);
    const uint64_t sum = std::accumulate(r.counts.begin(), r.counts.end(), uint64_t{0});
    if (sum != total) {
        throw FormatError("rle: run lengths sum to " + std::to_string(sum) + ", expected " +
                          std::to_string(total));
    }
    BinaryMask m(r.height, r.width);
    uint64_t pos = 0;
    bool value = false;
    for (uint32_t c : r.counts) {
        for (uint32_t k = 0; k < c; ++k, ++pos) {
            if (value) m.set(int(pos / r.height), int(pos % r.height));
        }
        value = !value;
    }
    return m;
}

// Same scheme as cocoapi's rleToString: each count (delta coded against the count two
// positions back, from index 3 on) is written as 5-bit groups offset by 48.
std::string rle_counts_to_string(const std::vector<uint32_t>& counts)
{
    std::string s;
    for (std::size_t i = 0; i < counts.size(); ++i) {
        long long x = counts[i];
        if (i > 2) x -= static_cast<long long>(counts[i - 2]);
        bool more = true;
        while (more) {
            char c = static_cast<char>(x & 0x1f);
            x >>= 5;
            more = (c & 0x10) ? x != -1 : x != 0;
            if (more) c |= 0x20;
            s.push_back(static_cast<char>(c + 48));
        }
    }
    return s;
}

std::vector<uint32_t> rle_counts_from_string(const std::string& s)
{
    std::vector<uint32_t> counts;
    std::size_t p = 0;
    while (p < s.size()) {
        long long x = 0;
        int k = 0;
        bool more = true;
        while (more) {
            if (p >= s.size()) throw FormatError("rle: truncated counts string");
            const long long c = static_cast<long long>(s[p]) - 48;
            if (c < 0 || c > 63) throw FormatError("rle: invalid character in counts string");
            x |= (c & 0x1f) << (5 * k);
            more = (c & 0x20) != 0;
            ++p;
            ++k;
            if (!more && (c & 0x10)) x |= -1LL << (5 * k);
        }
        if (counts.size() > 2) x += counts[counts.size() - 2];
        if (x < 0) throw FormatError("rle: negative run length");
        counts.push_back(static_cast<uint32_t>(x));
    }
    return counts;
}

nlohmann::json rle_to_json(const Rle& r)
{
    return {{"size", {r.height, r.width}}, {"counts", rle_counts_to_string(r.counts)}};
}

Rle rle_from_json(const nlohmann::json& j)
{
    try {
        Rle r;
        r.height = j.at("size").at(0).get<int>();
        r.width = j.at("size").at(1).get<int>();
        const auto& c = j.at("counts");
        if (c.is_string()) {
            r.counts = rle_counts_from_string(c.get<std::string>());
        } else {
            r.counts = c.get<std::vector<uint32_t>>();
        }
        return r;
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("rle: ") + e.what());
    }
}

}  // namespace seal
