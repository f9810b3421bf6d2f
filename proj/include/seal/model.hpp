#pragma once

// The segmentation/recognition network: patch-transformer event backbone,
// language fusion stack, promptable mask decoder, RoI mask pooling, spatial
// encoding and mask feature enhancer, plus cosine classification.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "seal/events.hpp"
#include "seal/feature_map.hpp"
#include "seal/layers.hpp"
#include "seal/mask.hpp"
#include "seal/tensor.hpp"

namespace seal::model {

using ag::Tensor;

struct ModelConfig {
    int height = 512;
    int width = 512;
    int in_channels = 3;     // voxel bins
    int patch = 32;          // downscale factor H -> H2
    int backbone_depth = 2;
    int backbone_heads = 4;
    int d2 = 64;             // backbone feature dim
    int d = 64;              // guidance / classification dim
    int fusion_layers = 6;
    int fusion_heads = 4;
    int window = 14;
    int decoder_heads = 4;
    int decoder_upscale = 2;
    int ffn_mult = 2;
    int box_dilation = 2;    // predicted box masks are clipped to the box grown by this many pixels
    bool fusion = true;
    bool spatial_encoding = true;
    bool mask_enhancer = true;

    int h2() const { return height / patch; }
    int w2() const { return width / patch; }
    void validate() const;

    // 64x64 input, 8x8 feature grid.
    static ModelConfig desk();
};

nlohmann::json config_to_json(const ModelConfig& c);
ModelConfig config_from_json(const nlohmann::json& j);

struct Prompt {
    enum class Kind { point, box };
    Kind kind = Kind::point;
    std::vector<std::pair<int, int>> points;  // (x, y); several points form one prompt
    Box box;

    static Prompt point(int x, int y) { return {Kind::point, {{x, y}}, {}}; }
    static Prompt points_of(std::vector<std::pair<int, int>> pts) { return {Kind::point, std::move(pts), {}}; }
    static Prompt box_of(const Box& b) { return {Kind::box, {}, b}; }
};

// Throws ValidationError when the prompt leaves the frame or the box is degenerate.
void validate_prompt(const Prompt& p, int height, int width);

enum class Granularity { coarse = 0, mid = 1, fine = 2, box = 3 };
std::string granularity_name(Granularity g);

struct MaskPrediction {
    BinaryMask mask;
    std::vector<double> token;  // G, dim D
    Granularity granularity = Granularity::box;
};

// Differentiable decoder outputs for one prompt.
struct DecoderOutput {
    std::vector<Tensor> logits;  // per returned mask, 1 x (H*W) full-resolution logits
    std::vector<Tensor> tokens;  // per returned mask, 1 x D
    std::vector<Granularity> tags;
};

struct MaskFeatureBundle {
    std::vector<double> S;
    bool dead = false;
    std::vector<double> G;
    std::vector<double> M;
    std::vector<double> M_hat;
};

inline constexpr int kRoiBins = 7;
inline constexpr double kDeadThreshold = 1e-6;

// Region in continuous feature-grid coordinates (already scaled and offset).
struct Roi {
    double x0, y0, x1, y1;
};

// Feature-grid RoI for an inclusive pixel box: aligned (half-pixel offset) mapping.
Roi roi_from_box(const Box& b, int patch);

// Adaptive sampling ratio per axis (ceil of bin extent, at least 1).
int roi_sampling_ratio(double extent, int bins = kRoiBins);

// Bilinear RoI-Align of a C x h x w map to C x bins x bins.
std::vector<double> roi_align(const FeatureMap& f, const Roi& roi, int bins = kRoiBins);

// RoI-Align expressed as per-bin sparse coefficients over the h x w cells.
std::vector<std::vector<std::pair<int, double>>> roi_align_coefficients(int h, int w, const Roi& roi,
                                                                        int bins = kRoiBins);

// Mask at feature resolution by bilinear point sampling at cell centres.
std::vector<double> mask_to_grid(const BinaryMask& mask, int h2, int w2);

// Cell weights realizing the mask-weighted RoI average: S_raw = sum_c w_c F_c.
// Empty optional when every bin weight falls below the dead threshold.
std::optional<std::vector<double>> roi_pool_weights(const BinaryMask& mask, int h2, int w2, int patch);

struct PoolResult {
    Tensor S;  // 1 x D (exact zeros when dead)
    bool dead = false;
};

// fused: (h2*w2) x C token matrix. proj may be null (S stays in C dims).
PoolResult roi_mask_pool(const Tensor& fused, int h2, int w2, int patch, const BinaryMask& mask,
                         const nn::Linear* proj);

// M = proj(concat(G, S)).
Tensor spatial_encode(const Tensor& G, const Tensor& S, const nn::Linear& proj);

// Multi-head attention restricted to non-overlapping window x window blocks of an
// h x w token grid; partial edge windows behave as padded-and-cropped windows.
Tensor windowed_self_attention(const Tensor& tokens, int h, int w, int window, const nn::MultiHeadAttention& attn);

// Allow set of cells whose area-resampled mask weight is positive (row-major h x w).
std::vector<uint8_t> mask_allow_cells(const BinaryMask& mask, int h, int w);

struct Ranked {
    std::string label;
    double score = 0.0;
};

inline const std::array<std::string, 4> kCanonicalPhrases{"object", "things", "stuff", "texture"};

// Cosine ranking; canonical distractors are appended after the queries when
// `canonical` holds. Score ties keep input order. Zero-norm query -> ValidationError.
std::vector<Ranked> classify(const std::vector<double>& m_hat,
                             const std::vector<std::pair<std::string, std::vector<double>>>& queries,
                             const std::vector<std::pair<std::string, std::vector<double>>>& canonical = {});

class Model {
public:
    Model(const ModelConfig& cfg, uint64_t seed);
    Model(const Model&) = delete;
    Model& operator=(const Model&) = delete;
    Model(Model&&) = default;
    Model& operator=(Model&&) = default;

    const ModelConfig& config() const { return cfg_; }
    nn::ParamStore& params() { return store_; }
    const nn::ParamStore& params() const { return store_; }

    // Voxel (B x H x W) -> (H2*W2) x D2 token matrix.
    Tensor encode_backbone(const events::VoxelGrid& voxel) const;
    // L fusion layers; text (T x D) may be undefined or empty, which skips cross-attention.
    Tensor enhance(const Tensor& features, const Tensor& text) const;

    // Without logits only the mask tokens are produced (cheaper).
    DecoderOutput decode(const Tensor& features, const Prompt& prompt, bool with_logits = true) const;
    std::vector<MaskPrediction> decode_masks(const Tensor& features, const std::vector<Prompt>& prompts) const;

    PoolResult pool(const Tensor& fused, const BinaryMask& mask) const;
    // K x D rows. SE disabled -> returns S.
    Tensor spatial(const Tensor& G, const Tensor& S) const;
    // Masked cross-attention of each row of M over fused cells allowed by its mask.
    Tensor enhance_masks(const Tensor& M, const Tensor& fused, const std::vector<BinaryMask>& masks) const;

    // S -> M -> M_hat for a set of masks sharing one fused map; G is K x D.
    struct MaskFeatures {
        Tensor S, M, M_hat;
        std::vector<bool> dead;
    };
    MaskFeatures mask_features(const Tensor& fused, const Tensor& G, const std::vector<BinaryMask>& masks) const;

    Tensor positional() const { return pos_d2_; }

private:
    struct Block {
        nn::LayerNorm ln1, ln2;
        nn::MultiHeadAttention attn;
        nn::FeedForward ffn;
    };
    struct FusionLayer {
        nn::LayerNorm ln_self, ln_cross, ln_ffn;
        nn::MultiHeadAttention self, cross;
        nn::FeedForward ffn;
    };
    struct TwoWay {
        nn::LayerNorm ln_self, ln_t2i, ln_mlp, ln_i2t;
        nn::MultiHeadAttention self, t2i, i2t;
        nn::FeedForward mlp;
    };

    std::vector<double> dense_prompt_channels(const Prompt& p) const;

    ModelConfig cfg_;
    nn::ParamStore store_;

    nn::Linear patch_embed_;
    std::vector<Block> backbone_;
    nn::LayerNorm backbone_norm_;

    std::vector<FusionLayer> fusion_;
    nn::Linear pool_proj_;

    nn::Linear dec_in_;
    Tensor output_tokens_;  // 4 x D
    Tensor point_embed_, corner_embed_;  // 1 x D, 2 x D
    std::vector<TwoWay> dec_blocks_;
    nn::LayerNorm dec_final_ln_;
    nn::MultiHeadAttention dec_final_;
    nn::Linear dec_up_;
    nn::Linear dec_hyper1_, dec_hyper2_;

    nn::Linear se_proj_;
    nn::MultiHeadAttention mfe_attn_;
    nn::LayerNorm mfe_norm_;

    Tensor pos_d2_, pos_d_;
    Tensor upsample_;             // (u*h2*u*w2) x (h2*w2)
    Tensor rows_up_, cols_up_;    // H x (u*h2), W x (u*w2)
};

// ---------------------------------------------------------------------------
// Checkpoints.

struct CheckpointMeta {
    int stage = 0;
    long iteration = 0;
    uint64_t seed = 0;
    std::vector<std::string> classes;  // text-encoder vocabulary used in training
};

// "SCK1", u32 json length, json {config, stage, iteration, seed}, u32 count,
// then per array: u16 name length, name, u32 rows, u32 cols, rows*cols f32.
void save_checkpoint(const Model& m, const CheckpointMeta& meta, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path, CheckpointMeta* meta = nullptr);

// Parameter counts grouped by the first name component (second for fusion/decoder sub-blocks not split).
std::map<std::string, std::size_t> count_params(const nn::ParamStore& store);

}  // namespace seal::model
