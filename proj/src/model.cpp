#include "seal/model.hpp"

#include <algorithm>
#include <cmath>

#include "seal/error.hpp"

namespace seal::model {

using nlohmann::json;

void ModelConfig::validate() const
{
    auto fail = [](const std::string& m) { throw ConfigError("model config: " + m); };
    if (height <= 0 || width <= 0 || patch <= 0) fail("sizes must be positive");
    if (height % patch != 0 || width % patch != 0) fail("input size must be divisible by the patch size");
    if (d2 <= 0 || d <= 0) fail("feature dims must be positive");
    if (fusion_layers < 1) fail("fusion_layers must be >= 1");
    if (in_channels < 1 || backbone_depth < 0 || window < 1 || decoder_upscale < 1 || ffn_mult < 1) {
        fail("invalid layer settings");
    }
    if (backbone_heads < 1 || d2 % backbone_heads != 0) fail("d2 must be divisible by backbone_heads");
    if (fusion_heads < 1 || d2 % fusion_heads != 0) fail("d2 must be divisible by fusion_heads");
    if (decoder_heads < 1 || d % decoder_heads != 0) fail("d must be divisible by decoder_heads");
    if (box_dilation < 0) fail("box_dilation must be >= 0");
}

ModelConfig ModelConfig::desk()
{
    ModelConfig c;
    c.height = 64;
    c.width = 64;
    c.patch = 8;
    c.d2 = 32;
    c.d = 32;
    c.fusion_layers = 2;
    c.window = 4;
    return c;
}

json config_to_json(const ModelConfig& c)
{
    return {{"height", c.height},
            {"width", c.width},
            {"in_channels", c.in_channels},
            {"patch", c.patch},
            {"backbone_depth", c.backbone_depth},
            {"backbone_heads", c.backbone_heads},
            {"d2", c.d2},
            {"d", c.d},
            {"fusion_layers", c.fusion_layers},
            {"fusion_heads", c.fusion_heads},
            {"window", c.window},
            {"decoder_heads", c.decoder_heads},
            {"decoder_upscale", c.decoder_upscale},
            {"ffn_mult", c.ffn_mult},
            {"box_dilation", c.box_dilation},
            {"fusion", c.fusion},
            {"spatial_encoding", c.spatial_encoding},
            {"mask_enhancer", c.mask_enhancer}};
}

ModelConfig config_from_json(const json& j)
{
    ModelConfig c;
    try {
        c.height = j.value("height", c.height);
        c.width = j.value("width", c.width);
        c.in_channels = j.value("in_channels", c.in_channels);
        c.patch = j.value("patch", c.patch);
        c.backbone_depth = j.value("backbone_depth", c.backbone_depth);
        c.backbone_heads = j.value("backbone_heads", c.backbone_heads);
        c.d2 = j.value("d2", c.d2);
        c.d = j.value("d", c.d);
        c.fusion_layers = j.value("fusion_layers", c.fusion_layers);
        c.fusion_heads = j.value("fusion_heads", c.fusion_heads);
        c.window = j.value("window", c.window);
        c.decoder_heads = j.value("decoder_heads", c.decoder_heads);
        c.decoder_upscale = j.value("decoder_upscale", c.decoder_upscale);
        c.ffn_mult = j.value("ffn_mult", c.ffn_mult);
        c.box_dilation = j.value("box_dilation", c.box_dilation);
        c.fusion = j.value("fusion", c.fusion);
        c.spatial_encoding = j.value("spatial_encoding", c.spatial_encoding);
        c.mask_enhancer = j.value("mask_enhancer", c.mask_enhancer);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("model config: ") + e.what());
    }
    c.validate();
    return c;
}

void validate_prompt(const Prompt& p, int height, int width)
{
    auto inside = [&](int x, int y) { return x >= 0 && y >= 0 && x < width && y < height; };
    if (p.kind == Prompt::Kind::point) {
        if (p.points.empty()) throw ValidationError("point prompt without points");
        for (const auto& [x, y] : p.points) {
            if (!inside(x, y)) {
                throw ValidationError("point (" + std::to_string(x) + ", " + std::to_string(y) + ") outside " +
                                      std::to_string(width) + "x" + std::to_string(height) + " frame");
            }
        }
    } else {
        const Box& b = p.box;
        if (!inside(b.x_min, b.y_min) || !inside(b.x_max, b.y_max)) {
            throw ValidationError("box outside " + std::to_string(width) + "x" + std::to_string(height) + " frame");
        }
        if (b.x_min > b.x_max || b.y_min > b.y_max) throw ValidationError("degenerate box (min corner past max)");
    }
}

std::string granularity_name(Granularity g)
{
    switch (g) {
    case Granularity::coarse: return "coarse";
    case Granularity::mid: return "mid";
    case Granularity::fine: return "fine";
    case Granularity::box: return "box";
    }
    return "unknown";
}

// ---------------------------------------------------------------------------
// RoI machinery.

Roi roi_from_box(const Box& b, int patch)
{
    const double s = 1.0 / patch;
    return {b.x_min * s - 0.5, b.y_min * s - 0.5, (b.x_max + 1) * s - 0.5, (b.y_max + 1) * s - 0.5};
}

int roi_sampling_ratio(double extent, int bins)
{
    return std::max(1, static_cast<int>(std::ceil(extent / bins)));
}

namespace {

struct Tap {
    int idx[4];
    double w[4];
    bool valid;
};

// Bilinear tap at (y, x) on an h x w grid, border handling as in the reference RoI-Align.
Tap bilinear_tap(double y, double x, int h, int w)
{
    Tap t{};
    if (y < -1.0 || y > h || x < -1.0 || x > w) {
        t.valid = false;
        return t;
    }
    t.valid = true;
    y = std::max(y, 0.0);
    x = std::max(x, 0.0);
    int y0 = static_cast<int>(y), x0 = static_cast<int>(x), y1, x1;
    if (y0 >= h - 1) {
        y0 = y1 = h - 1;
        y = y0;
    } else {
        y1 = y0 + 1;
    }
    if (x0 >= w - 1) {
        x0 = x1 = w - 1;
        x = x0;
    } else {
        x1 = x0 + 1;
    }
    const double ly = y - y0, lx = x - x0, hy = 1.0 - ly, hx = 1.0 - lx;
    t.idx[0] = y0 * w + x0;
    t.idx[1] = y0 * w + x1;
    t.idx[2] = y1 * w + x0;
    t.idx[3] = y1 * w + x1;
    t.w[0] = hy * hx;
    t.w[1] = hy * lx;
    t.w[2] = ly * hx;
    t.w[3] = ly * lx;
    return t;
}

// Row interpolation matrix (n_out x n_in), half-pixel centres, edge clamped.
std::vector<double> interp_matrix(int n_out, int n_in)
{
    std::vector<double> m(std::size_t(n_out) * n_in, 0.0);
    const double s = double(n_in) / n_out;
    for (int i = 0; i < n_out; ++i) {
        double src = std::clamp((i + 0.5) * s - 0.5, 0.0, double(n_in - 1));
        const int i0 = static_cast<int>(src);
        const int i1 = std::min(i0 + 1, n_in - 1);
        const double f = src - i0;
        m[std::size_t(i) * n_in + i0] += 1.0 - f;
        m[std::size_t(i) * n_in + i1] += f;
    }
    return m;
}

}  // namespace

std::vector<std::vector<std::pair<int, double>>> roi_align_coefficients(int h, int w, const Roi& roi, int bins)
{
    const double bin_h = (roi.y1 - roi.y0) / bins;
    const double bin_w = (roi.x1 - roi.x0) / bins;
    const int gh = roi_sampling_ratio(roi.y1 - roi.y0, bins);
    const int gw = roi_sampling_ratio(roi.x1 - roi.x0, bins);
    const double inv = 1.0 / (gh * gw);
    std::vector<std::vector<std::pair<int, double>>> out(std::size_t(bins) * bins);
    std::vector<double> acc(std::size_t(h) * w);
    for (int ph = 0; ph < bins; ++ph) {
        for (int pw = 0; pw < bins; ++pw) {
            std::fill(acc.begin(), acc.end(), 0.0);
            for (int iy = 0; iy < gh; ++iy) {
                const double y = roi.y0 + ph * bin_h + (iy + 0.5) * bin_h / gh;
                for (int ix = 0; ix < gw; ++ix) {
                    const double x = roi.x0 + pw * bin_w + (ix + 0.5) * bin_w / gw;
                    const Tap t = bilinear_tap(y, x, h, w);
                    if (!t.valid) continue;
                    for (int k = 0; k < 4; ++k) acc[t.idx[k]] += t.w[k] * inv;
                }
            }
            auto& bin = out[std::size_t(ph) * bins + pw];
            for (int c = 0; c < h * w; ++c) {
                if (acc[c] != 0.0) bin.emplace_back(c, acc[c]);
            }
        }
    }
    return out;
}

std::vector<double> roi_align(const FeatureMap& f, const Roi& roi, int bins)
{
    const int h = f.height, w = f.width, C = f.channels;
    const std::size_t plane = f.cells();
    const double bin_h = (roi.y1 - roi.y0) / bins;
    const double bin_w = (roi.x1 - roi.x0) / bins;
    const int gh = roi_sampling_ratio(roi.y1 - roi.y0, bins);
    const int gw = roi_sampling_ratio(roi.x1 - roi.x0, bins);
    const double inv = 1.0 / (gh * gw);
    std::vector<double> out(std::size_t(C) * bins * bins, 0.0);
    for (int ph = 0; ph < bins; ++ph) {
        for (int pw = 0; pw < bins; ++pw) {
            const std::size_t o = std::size_t(ph) * bins + pw;
            for (int iy = 0; iy < gh; ++iy) {
                const double y = roi.y0 + ph * bin_h + (iy + 0.5) * bin_h / gh;
                for (int ix = 0; ix < gw; ++ix) {
                    const double x = roi.x0 + pw * bin_w + (ix + 0.5) * bin_w / gw;
                    const Tap t = bilinear_tap(y, x, h, w);
                    if (!t.valid) continue;
                    for (int c = 0; c < C; ++c) {
                        const double* p = f.data.data() + c * plane;
                        out[c * std::size_t(bins) * bins + o] +=
                            inv * (t.w[0] * p[t.idx[0]] + t.w[1] * p[t.idx[1]] + t.w[2] * p[t.idx[2]] +
                                   t.w[3] * p[t.idx[3]]);
                    }
                }
            }
        }
    }
    return out;
}

std::vector<double> mask_to_grid(const BinaryMask& mask, int h2, int w2)
{
    const int H = mask.height(), W = mask.width();
    const double sy = double(H) / h2, sx = double(W) / w2;
    std::vector<double> g(std::size_t(h2) * w2, 0.0);
    for (int i = 0; i < h2; ++i) {
        for (int j = 0; j < w2; ++j) {
            const double y = std::clamp((i + 0.5) * sy - 0.5, 0.0, double(H - 1));
            const double x = std::clamp((j + 0.5) * sx - 0.5, 0.0, double(W - 1));
            const int y0 = static_cast<int>(y), x0 = static_cast<int>(x);
            const int y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
            const double ly = y - y0, lx = x - x0;
            g[std::size_t(i) * w2 + j] = (1 - ly) * (1 - lx) * mask.get(x0, y0) + (1 - ly) * lx * mask.get(x1, y0) +
                                         ly * (1 - lx) * mask.get(x0, y1) + ly * lx * mask.get(x1, y1);
        }
    }
    return g;
}

std::optional<std::vector<double>> roi_pool_weights(const BinaryMask& mask, int h2, int w2, int patch)
{
    if (mask.empty()) throw PreconditionError("roi_mask_pool: empty mask");
    const Box box = tight_box(mask);
    const auto grid = mask_to_grid(mask, h2, w2);
    const auto coeffs = roi_align_coefficients(h2, w2, roi_from_box(box, patch));
    std::vector<double> bin_w(coeffs.size(), 0.0);
    bool alive = false;
    double total = 0.0;
    for (std::size_t b = 0; b < coeffs.size(); ++b) {
        for (const auto& [c, a] : coeffs[b]) bin_w[b] += a * grid[c];
        alive = alive || bin_w[b] >= kDeadThreshold;
        total += bin_w[b];
    }
    if (!alive) return std::nullopt;
    std::vector<double> cell(std::size_t(h2) * w2, 0.0);
    for (std::size_t b = 0; b < coeffs.size(); ++b) {
        for (const auto& [c, a] : coeffs[b]) cell[c] += bin_w[b] * a / total;
    }
    return cell;
}

PoolResult roi_mask_pool(const Tensor& fused, int h2, int w2, int patch, const BinaryMask& mask, const nn::Linear* proj)
{
    if (mask.height() != h2 * patch || mask.width() != w2 * patch) {
        throw ValidationError("roi_mask_pool: mask is " + std::to_string(mask.height()) + "x" +
                              std::to_string(mask.width()) + ", expected " + std::to_string(h2 * patch) + "x" +
                              std::to_string(w2 * patch));
    }
    const int out_dim = proj ? proj->out() : fused.cols();
    auto weights = roi_pool_weights(mask, h2, w2, patch);
    if (!weights) return {Tensor::zeros(1, out_dim), true};
    const Tensor w = Tensor::constant(1, h2 * w2, std::move(*weights));
    Tensor s = ag::matmul(w, fused);
    if (proj) s = (*proj)(s);
    return {s, false};
}

Tensor spatial_encode(const Tensor& G, const Tensor& S, const nn::Linear& proj)
{
    return proj(ag::concat_cols({G, S}));
}

Tensor windowed_self_attention(const Tensor& tokens, int h, int w, int window, const nn::MultiHeadAttention& attn)
{
    if (window >= h && window >= w) return attn(tokens, tokens);
    std::vector<int> order;
    std::vector<Tensor> outs;
    for (int wy = 0; wy < h; wy += window) {
        for (int wx = 0; wx < w; wx += window) {
            std::vector<int> idx;
            for (int y = wy; y < std::min(h, wy + window); ++y) {
                for (int x = wx; x < std::min(w, wx + window); ++x) idx.push_back(y * w + x);
            }
            const Tensor sub = ag::gather_rows(tokens, idx);
            outs.push_back(attn(sub, sub));
            order.insert(order.end(), idx.begin(), idx.end());
        }
    }
    std::vector<int> inverse(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) inverse[order[i]] = static_cast<int>(i);
    return ag::gather_rows(ag::concat_rows(outs), inverse);
}

std::vector<uint8_t> mask_allow_cells(const BinaryMask& mask, int h, int w)
{
    const auto cells = area_resample(mask, h, w);
    std::vector<uint8_t> allow(cells.size());
    for (std::size_t i = 0; i < cells.size(); ++i) allow[i] = cells[i] > 0.0;
    return allow;
}

std::vector<Ranked> classify(const std::vector<double>& m_hat,
                             const std::vector<std::pair<std::string, std::vector<double>>>& queries,
                             const std::vector<std::pair<std::string, std::vector<double>>>& canonical)
{
    if (queries.empty()) throw ValidationError("classify: no queries");
    auto norm = [](const std::vector<double>& v) {
        double n = 0.0;
        for (double x : v) n += x * x;
        return std::sqrt(n);
    };
    const double nm = norm(m_hat);
    std::vector<Ranked> out;
    auto score = [&](const std::string& label, const std::vector<double>& q) {
        if (q.size() != m_hat.size()) throw ValidationError("classify: query '" + label + "' has wrong dimension");
        const double nq = norm(q);
        if (nq == 0.0) throw ValidationError("classify: query '" + label + "' has zero norm");
        double dot = 0.0;
        for (std::size_t i = 0; i < q.size(); ++i) dot += q[i] * m_hat[i];
        out.push_back({label, nm > 0.0 ? dot / (nm * nq) : 0.0});
    };
    for (const auto& [label, q] : queries) score(label, q);
    for (const auto& [label, q] : canonical) score(label, q);
    std::stable_sort(out.begin(), out.end(), [](const Ranked& a, const Ranked& b) { return a.score > b.score; });
    return out;
}

// ---------------------------------------------------------------------------
// Model.

Model::Model(const ModelConfig& cfg, uint64_t seed) : cfg_(cfg)
{
    cfg_.validate();
    std::mt19937_64 rng(seed);
    const int D2 = cfg_.d2, D = cfg_.d, h2 = cfg_.h2(), w2 = cfg_.w2();
    const int patch_dim = cfg_.in_channels * cfg_.patch * cfg_.patch;

    patch_embed_ = nn::Linear(store_, "backbone.patch_embed", patch_dim, D2, rng);
    for (int i = 0; i < cfg_.backbone_depth; ++i) {
        const std::string p = "backbone.blocks." + std::to_string(i);
        Block b;
        b.ln1 = nn::LayerNorm(store_, p + ".ln1", D2);
        b.attn = nn::MultiHeadAttention(store_, p + ".attn", D2, D2, D2, D2, cfg_.backbone_heads, rng);
        b.ln2 = nn::LayerNorm(store_, p + ".ln2", D2);
        b.ffn = nn::FeedForward(store_, p + ".ffn", D2, D2 * cfg_.ffn_mult, rng);
        backbone_.push_back(std::move(b));
    }
    backbone_norm_ = nn::LayerNorm(store_, "backbone.norm", D2);

    if (cfg_.fusion) {
        for (int i = 0; i < cfg_.fusion_layers; ++i) {
            const std::string p = "fusion." + std::to_string(i);
            FusionLayer f;
            f.ln_self = nn::LayerNorm(store_, p + ".self.norm", D2);
            f.self = nn::MultiHeadAttention(store_, p + ".self", D2, D2, D2, D2, cfg_.fusion_heads, rng);
            f.ln_cross = nn::LayerNorm(store_, p + ".cross.norm", D2);
            f.cross = nn::MultiHeadAttention(store_, p + ".cross", D2, D, D2, D2, cfg_.fusion_heads, rng);
            f.ln_ffn = nn::LayerNorm(store_, p + ".ffn.norm", D2);
            f.ffn = nn::FeedForward(store_, p + ".ffn", D2, D2 * cfg_.ffn_mult, rng);
            fusion_.push_back(std::move(f));
        }
    }
    pool_proj_ = nn::Linear(store_, "fusion.pool_proj", D2, D, rng);

    dec_in_ = nn::Linear(store_, "decoder.in", D2, D, rng);
    output_tokens_ = store_.add_normal("decoder.tokens", 4, D, 1.0, rng);
    point_embed_ = store_.add_normal("decoder.point_embed", 1, D, 1.0, rng);
    corner_embed_ = store_.add_normal("decoder.corner_embed", 2, D, 1.0, rng);
    for (int i = 0; i < 2; ++i) {
        const std::string p = "decoder.blocks." + std::to_string(i);
        TwoWay t;
        t.ln_self = nn::LayerNorm(store_, p + ".self.norm", D);
        t.self = nn::MultiHeadAttention(store_, p + ".self", D, D, D, D, cfg_.decoder_heads, rng);
        t.ln_t2i = nn::LayerNorm(store_, p + ".t2i.norm", D);
        t.t2i = nn::MultiHeadAttention(store_, p + ".t2i", D, D, D, D, cfg_.decoder_heads, rng);
        t.ln_mlp = nn::LayerNorm(store_, p + ".mlp.norm", D);
        t.mlp = nn::FeedForward(store_, p + ".mlp", D, D * cfg_.ffn_mult, rng);
        t.ln_i2t = nn::LayerNorm(store_, p + ".i2t.norm", D);
        t.i2t = nn::MultiHeadAttention(store_, p + ".i2t", D, D, D, D, cfg_.decoder_heads, rng);
        dec_blocks_.push_back(std::move(t));
    }
    dec_final_ln_ = nn::LayerNorm(store_, "decoder.final.norm", D);
    dec_final_ = nn::MultiHeadAttention(store_, "decoder.final", D, D, D, D, cfg_.decoder_heads, rng);
    dec_up_ = nn::Linear(store_, "decoder.up", D, D, rng);
    dec_hyper1_ = nn::Linear(store_, "decoder.hyper1", D, D, rng);
    dec_hyper2_ = nn::Linear(store_, "decoder.hyper2", D, D + 5, rng);

    if (cfg_.spatial_encoding) se_proj_ = nn::Linear(store_, "se.proj", 2 * D, D, rng);
    if (cfg_.mask_enhancer) {
        mfe_attn_ = nn::MultiHeadAttention(store_, "mfe.attn", D, D2, D, D, cfg_.decoder_heads, rng);
        mfe_norm_ = nn::LayerNorm(store_, "mfe.norm", D);
    }

    pos_d2_ = nn::grid_positional_encoding(h2, w2, D2);
    pos_d_ = nn::grid_positional_encoding(h2, w2, D);
    const int u = cfg_.decoder_upscale;
    {
        const auto ry = interp_matrix(u * h2, h2);
        const auto rx = interp_matrix(u * w2, w2);
        const int no = u * h2 * u * w2, ni = h2 * w2;
        std::vector<double> m(std::size_t(no) * ni, 0.0);
        for (int oy = 0; oy < u * h2; ++oy) {
            for (int ox = 0; ox < u * w2; ++ox) {
                for (int iy = 0; iy < h2; ++iy) {
                    const double a = ry[std::size_t(oy) * h2 + iy];
                    if (a == 0.0) continue;
                    for (int ix = 0; ix < w2; ++ix) {
                        m[std::size_t(oy * u * w2 + ox) * ni + iy * w2 + ix] = a * rx[std::size_t(ox) * w2 + ix];
                    }
                }
            }
        }
        upsample_ = Tensor::constant(no, ni, std::move(m));
    }
    rows_up_ = Tensor::constant(cfg_.height, u * h2, interp_matrix(cfg_.height, u * h2));
    cols_up_ = Tensor::constant(cfg_.width, u * w2, interp_matrix(cfg_.width, u * w2));
}

Tensor Model::encode_backbone(const events::VoxelGrid& voxel) const
{
    const auto& vc = voxel.config;
    if (vc.bins != cfg_.in_channels || vc.height != cfg_.height || vc.width != cfg_.width) {
        throw ConfigError("voxel grid " + std::to_string(vc.bins) + "x" + std::to_string(vc.height) + "x" +
                          std::to_string(vc.width) + " does not match model input " +
                          std::to_string(cfg_.in_channels) + "x" + std::to_string(cfg_.height) + "x" +
                          std::to_string(cfg_.width));
    }
    const int p = cfg_.patch, h2 = cfg_.h2(), w2 = cfg_.w2(), B = cfg_.in_channels;
    const int pd = B * p * p;
    std::vector<double> patches(std::size_t(h2) * w2 * pd);
    for (int i = 0; i < h2; ++i) {
        for (int j = 0; j < w2; ++j) {
            double* row = patches.data() + (std::size_t(i) * w2 + j) * pd;
            for (int b = 0; b < B; ++b) {
                for (int dy = 0; dy < p; ++dy) {
                    for (int dx = 0; dx < p; ++dx) *row++ = voxel.at(b, i * p + dy, j * p + dx);
                }
            }
        }
    }
    Tensor x = ag::add(patch_embed_(Tensor::constant(h2 * w2, pd, std::move(patches))), pos_d2_);
    for (const auto& b : backbone_) {
        const Tensor a = b.ln1(x);
        x = ag::add(x, b.attn(a, a));
        x = ag::add(x, b.ffn(b.ln2(x)));
    }
    return backbone_norm_(x);
}

Tensor Model::enhance(const Tensor& features, const Tensor& text) const
{
    if (!cfg_.fusion) return features;
    const bool has_text = text.defined() && text.rows() > 0;
    if (has_text && text.cols() != cfg_.d) throw ValidationError("text tokens must have dim " + std::to_string(cfg_.d));
    Tensor x = features;
    for (std::size_t i = 0; i < fusion_.size(); ++i) {
        const auto& f = fusion_[i];
        const int window = i + 1 == fusion_.size() ? std::max(cfg_.h2(), cfg_.w2()) : cfg_.window;
        x = ag::add(x, windowed_self_attention(f.ln_self(x), cfg_.h2(), cfg_.w2(), window, f.self));
        if (has_text) x = ag::add(x, f.cross(f.ln_cross(x), text));
        x = ag::add(x, f.ffn(f.ln_ffn(x)));
    }
    return x;
}

std::vector<double> Model::dense_prompt_channels(const Prompt& p) const
{
    const int H = cfg_.height, W = cfg_.width;
    std::vector<double> ch(std::size_t(H) * W * 5, 0.0);
    const double scale = std::max(H, W);
    const double radii[3] = {0.25 * scale, 0.1 * scale, 0.04 * scale};
    for (int y = 0; y < H; ++y) {
        for (int x = 0; x < W; ++x) {
            double* c = ch.data() + (std::size_t(y) * W + x) * 5;
            c[0] = 1.0;
            if (p.kind == Prompt::Kind::box) {
                c[1] = p.box.contains(x, y) ? 1.0 : 0.0;
            } else {
                double d2min = 1e300;
                for (const auto& [px, py] : p.points) {
                    d2min = std::min(d2min, double(x - px) * (x - px) + double(y - py) * (y - py));
                }
                for (int r = 0; r < 3; ++r) c[2 + r] = std::exp(-d2min / (2.0 * radii[r] * radii[r]));
            }
        }
    }
    return ch;
}

DecoderOutput Model::decode(const Tensor& features, const Prompt& prompt, bool with_logits) const
{
    validate_prompt(prompt, cfg_.height, cfg_.width);
    const int D = cfg_.d, H = cfg_.height, W = cfg_.width;
    Tensor img = dec_in_(features);

    std::vector<Tensor> prompt_tokens;
    auto pe = [&](double x, double y) {
        return Tensor::constant(1, D, nn::point_positional_encoding(x / W, y / H, D));
    };
    if (prompt.kind == Prompt::Kind::point) {
        for (const auto& [x, y] : prompt.points) prompt_tokens.push_back(ag::add(pe(x + 0.5, y + 0.5), point_embed_));
    } else {
        const Box& b = prompt.box;
        prompt_tokens.push_back(ag::add(pe(b.x_min, b.y_min), ag::slice_rows(corner_embed_, 0, 1)));
        prompt_tokens.push_back(ag::add(pe(b.x_max + 1, b.y_max + 1), ag::slice_rows(corner_embed_, 1, 1)));
    }
    std::vector<Tensor> all{output_tokens_};
    all.insert(all.end(), prompt_tokens.begin(), prompt_tokens.end());
    const Tensor t0 = ag::concat_rows(all);
    Tensor t = t0;
    for (const auto& blk : dec_blocks_) {
        Tensor a = blk.ln_self(t);
        t = ag::add(t, blk.self(ag::add(a, t0), ag::add(a, t0), a));
        a = blk.ln_t2i(t);
        t = ag::add(t, blk.t2i(ag::add(a, t0), ag::add(img, pos_d_), img));
        t = ag::add(t, blk.mlp(blk.ln_mlp(t)));
        const Tensor ai = blk.ln_i2t(img);
        img = ag::add(img, blk.i2t(ag::add(ai, pos_d_), ag::add(t, t0), t));
    }
    t = ag::add(t, dec_final_(ag::add(dec_final_ln_(t), t0), ag::add(img, pos_d_), img));

    DecoderOutput out;
    std::vector<int> which;
    if (prompt.kind == Prompt::Kind::box) {
        which = {0};
        out.tags = {Granularity::box};
    } else {
        which = {1, 2, 3};
        out.tags = {Granularity::coarse, Granularity::mid, Granularity::fine};
    }
    if (!with_logits) {
        for (int k : which) out.tokens.push_back(ag::slice_rows(t, k, 1));
        return out;
    }

    const Tensor up = ag::gelu(dec_up_(ag::matmul(upsample_, img)));  // (u h2 u w2) x D
    const Tensor dense = Tensor::constant(H * W, 5, dense_prompt_channels(prompt));
    const int uh = cfg_.decoder_upscale * cfg_.h2(), uw = cfg_.decoder_upscale * cfg_.w2();

    for (int k : which) {
        const Tensor tok = ag::slice_rows(t, k, 1);
        const Tensor hyper = dec_hyper2_(ag::gelu(dec_hyper1_(tok)));  // 1 x (D + 5)
        const Tensor low = ag::reshape(ag::matmul_nt(up, ag::slice_cols(hyper, 0, D)), uh, uw);
        const Tensor full = ag::matmul_nt(ag::matmul(rows_up_, low), cols_up_);  // H x W
        const Tensor extra = ag::matmul_nt(dense, ag::slice_cols(hyper, D, 5));  // HW x 1
        out.logits.push_back(ag::add(ag::reshape(full, 1, H * W), ag::reshape(extra, 1, H * W)));
        out.tokens.push_back(tok);
    }
    return out;
}

std::vector<MaskPrediction> Model::decode_masks(const Tensor& features, const std::vector<Prompt>& prompts) const
{
    for (const auto& p : prompts) validate_prompt(p, cfg_.height, cfg_.width);
    const int H = cfg_.height, W = cfg_.width;
    std::vector<MaskPrediction> preds;
    for (const auto& p : prompts) {
        const DecoderOutput d = decode(features, p);
        for (std::size_t k = 0; k < d.logits.size(); ++k) {
            MaskPrediction mp;
            mp.granularity = d.tags[k];
            mp.token = d.tokens[k].value();
            mp.mask = BinaryMask(H, W);
            const auto& lg = d.logits[k].value();
            Box clip{0, 0, W - 1, H - 1};
            if (p.kind == Prompt::Kind::box) {
                const int g = cfg_.box_dilation;
                clip = {std::max(0, p.box.x_min - g), std::max(0, p.box.y_min - g), std::min(W - 1, p.box.x_max + g),
                        std::min(H - 1, p.box.y_max + g)};
            }
            for (int y = 0; y < H; ++y) {
                for (int x = 0; x < W; ++x) {
                    if (lg[std::size_t(y) * W + x] > 0.0 && clip.contains(x, y)) mp.mask.set(x, y);
                }
            }
            if (mp.granularity == Granularity::coarse) {
                for (const auto& [x, y] : p.points) mp.mask.set(x, y);
            }
            preds.push_back(std::move(mp));
        }
    }
    return preds;
}

PoolResult Model::pool(const Tensor& fused, const BinaryMask& mask) const
{
    return roi_mask_pool(fused, cfg_.h2(), cfg_.w2(), cfg_.patch, mask, &pool_proj_);
}

Tensor Model::spatial(const Tensor& G, const Tensor& S) const
{
    if (!cfg_.spatial_encoding) return S;
    return spatial_encode(G, S, se_proj_);
}

Tensor Model::enhance_masks(const Tensor& M, const Tensor& fused, const std::vector<BinaryMask>& masks) const
{
    if (!cfg_.mask_enhancer) return M;
    const int n = cfg_.h2() * cfg_.w2();
    std::vector<uint8_t> allow;
    allow.reserve(masks.size() * n);
    for (const auto& m : masks) {
        const auto a = mask_allow_cells(m, cfg_.h2(), cfg_.w2());
        allow.insert(allow.end(), a.begin(), a.end());
    }
    const Tensor kv = ag::add(fused, pos_d2_);
    return mfe_norm_(ag::add(M, mfe_attn_(M, kv, kv, allow)));
}

Model::MaskFeatures Model::mask_features(const Tensor& fused, const Tensor& G, const std::vector<BinaryMask>& masks) const
{
    MaskFeatures mf;
    std::vector<Tensor> rows;
    for (const auto& m : masks) {
        if (m.empty()) {
            rows.push_back(Tensor::zeros(1, cfg_.d));
            mf.dead.push_back(true);
            continue;
        }
        auto r = pool(fused, m);
        rows.push_back(r.S);
        mf.dead.push_back(r.dead);
    }
    mf.S = ag::concat_rows(rows);
    mf.M = spatial(G, mf.S);
    mf.M_hat = enhance_masks(mf.M, fused, masks);
    return mf;
}

}  // namespace seal::model
