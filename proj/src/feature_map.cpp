#include "seal/feature_map.hpp"

#include <algorithm>
#include <fstream>
#include <string>

#include "seal/error.hpp"

namespace seal {

void save_ppm(const Image& image, const std::filesystem::path& path)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw FormatError("cannot write " + path.string());
    out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(image.rgb.data()), static_cast<std::streamsize>(image.rgb.size()));
}

Image load_ppm(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FormatError("cannot open image " + path.string());
    std::string magic;
    int w = 0, h = 0, maxval = 0;
    in >> magic >> w >> h >> maxval;
    if (magic != "P6" || w <= 0 || h <= 0 || maxval != 255) throw FormatError(path.string() + ": not a binary 8-bit PPM");
    in.get();
    Image img(h, w);
    in.read(reinterpret_cast<char*>(img.rgb.data()), static_cast<std::streamsize>(img.rgb.size()));
    if (static_cast<std::size_t>(in.gcount()) != img.rgb.size()) throw FormatError(path.string() + ": truncated image");
    return img;
}

std::vector<double> area_resample(const BinaryMask& mask, int out_h, int out_w)
{
    const int h = mask.height(), w = mask.width();
    std::vector<double> cells(std::size_t(out_h) * out_w, 0.0);
    const double sy = double(h) / out_h;
    const double sx = double(w) / out_w;
    const double cell_area = sy * sx;
    for (int y = 0; y < h; ++y) {
        // Output rows overlapped by input row [y, y+1).
        const int oy0 = static_cast<int>(y / sy);
        const int oy1 = std::min(out_h - 1, static_cast<int>((y + 1) / sy - 1e-12));
        for (int x = 0; x < w; ++x) {
            if (!mask.get(x, y)) continue;
            const int ox0 = static_cast<int>(x / sx);
            const int ox1 = std::min(out_w - 1, static_cast<int>((x + 1) / sx - 1e-12));
            for (int oy = oy0; oy <= oy1; ++oy) {
                const double ov_y = std::min(double(y + 1), (oy + 1) * sy) - std::max(double(y), oy * sy);
                if (ov_y <= 0) continue;
                for (int ox = ox0; ox <= ox1; ++ox) {
                    const double ov_x = std::min(double(x + 1), (ox + 1) * sx) - std::max(double(x), ox * sx);
                    if (ov_x <= 0) continue;
                    cells[std::size_t(oy) * out_w + ox] += ov_y * ov_x / cell_area;
                }
            }
        }
    }
    return cells;
}

}  // namespace seal
