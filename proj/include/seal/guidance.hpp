#pragma once

// Multimodal hierarchical semantic guidance: per-level mask sets with a visual
// feature (pooled teacher pixel features) and a text feature (encoded short
// caption) for every mask. Teachers are pluggable providers.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "seal/events.hpp"
#include "seal/feature_map.hpp"
#include "seal/mask.hpp"

namespace seal::guidance {

enum class Level { semantic = 0, instance = 1, part = 2 };
inline constexpr std::array<Level, 3> kLevels{Level::semantic, Level::instance, Level::part};

char level_code(Level l);  // 's', 'i', 'p'
std::string level_name(Level l);
Level level_from_code(char c);

struct MaskSet {
    Level level = Level::semantic;
    std::vector<BinaryMask> masks;
    std::string frame_id;

    std::size_t size() const { return masks.size(); }
};

// Decodes COCO RLE masks; FormatError names the failing mask index.
MaskSet mask_set_from_rle(Level level, const std::vector<Rle>& rles, const std::string& frame_id);

struct MaskSetReport {
    double coverage = 0.0;
    std::size_t overlap_pixels = 0;  // pixels covered by two or more masks
    std::vector<std::size_t> empty_masks;
    bool valid = false;
};

inline constexpr double kDefaultCoverageThreshold = 0.95;

MaskSetReport validate_mask_set(const MaskSet& ms, int height, int width,
                                double coverage_threshold = kDefaultCoverageThreshold);

// Tight inclusive box of every mask.
std::vector<Box> boxes_from_masks(const MaskSet& ms);

// Teacher-side mask pooling: area-resampled mask weights over the feature grid,
// falling back to the mask's bounding-box cells when every weight is zero.
std::vector<double> pool_pixel_features(const FeatureMap& features, const BinaryMask& mask);

struct Caption {
    std::string short_text;
    std::string long_text;
};

struct TeacherProviders {
    std::function<FeatureMap(const Image&)> pixel_features;
    std::function<Caption(const Image&, const BinaryMask&)> caption;
    std::function<std::vector<double>(const std::string&)> text_encoder;
};

struct GuidanceRecord {
    std::size_t mask_index = 0;
    std::vector<double> visual;
    std::vector<double> text;
    std::string caption_short;
    std::string caption_long;
};

struct LevelGuidance {
    MaskSet masks;
    std::vector<GuidanceRecord> records;
};

struct HierGuidance {
    std::string frame_id;
    std::array<LevelGuidance, 3> levels;

    const LevelGuidance& level(Level l) const { return levels[static_cast<int>(l)]; }
    LevelGuidance& level(Level l) { return levels[static_cast<int>(l)]; }
    int dim() const;
};

HierGuidance build_guidance(const Image& image, const std::array<MaskSet, 3>& mask_sets,
                            const TeacherProviders& providers,
                            double coverage_threshold = kDefaultCoverageThreshold);

// Guidance directory: masks_{s,i,p}.json, vfeat_{s,i,p}.bin, tfeat_{s,i,p}.bin,
// captions_{s,i,p}.json. Feature files hold rows of little-endian f32.
void save_guidance(const HierGuidance& g, const std::filesystem::path& dir);
HierGuidance load_guidance(const std::filesystem::path& dir, const std::string& frame_id);
void save_mask_set(const MaskSet& ms, const std::filesystem::path& path);
MaskSet load_mask_set(const std::filesystem::path& path, Level level, const std::string& frame_id);

// ---------------------------------------------------------------------------
// Desk-scale teachers.

// Bag-of-phrases text encoder. Registered phrases map to orthonormal basis
// vectors; any other word maps to a small hashed Gaussian vector. Output is
// L2-normalized. Optional template applied before encoding ("{}" = text).
class SyntheticTextEncoder {
public:
    SyntheticTextEncoder(int dim, std::vector<std::string> vocabulary, uint64_t seed = 0x5ea1,
                         std::string prompt_template = "{}");

    std::vector<double> encode(const std::string& text) const;
    const std::vector<double>& basis(std::size_t phrase_index) const { return basis_.at(phrase_index); }
    int dim() const { return dim_; }
    const std::vector<std::string>& vocabulary() const { return vocabulary_; }

private:
    std::vector<double> word_vector(const std::string& word) const;

    int dim_;
    uint64_t seed_;
    std::string template_;
    std::vector<std::string> vocabulary_;
    std::vector<std::vector<std::string>> phrase_tokens_;
    std::vector<std::vector<double>> basis_;
};

std::vector<std::string> tokenize(const std::string& text);

struct SynthConfig {
    int height = 64;
    int width = 64;
    int num_classes = 3;
    int masks_per_class = 3;   // instance masks per class
    int parts_per_instance = 2;
    int small_objects = 0;     // extra tiny instances pasted inside larger ones
    int small_size = 3;
    int min_tile = 6;
    int dim = 32;
    double sigma = 0.0;        // teacher feature noise
    std::vector<std::string> class_names;  // defaults to a built-in list
};

// Instance-level description of a generated scene.
struct SceneInstance {
    BinaryMask mask;
    int class_id = 0;
};

struct SyntheticScene {
    std::string frame_id;
    Image image;                      // R channel carries the class id
    std::array<MaskSet, 3> mask_sets;
    std::vector<int> semantic_map;    // class id per pixel
    std::vector<SceneInstance> instances;
    std::vector<std::string> class_names;
    TeacherProviders providers;
};

std::vector<std::string> default_class_names(int count);

// Deterministic in (seed, cfg). ConfigError when num_classes > dim.
SyntheticScene synth_guidance(uint64_t seed, const SynthConfig& cfg);

// Synthetic providers shared by every scene of one class table.
TeacherProviders synthetic_providers(const std::vector<std::string>& class_names, int dim, double sigma,
                                     uint64_t noise_seed = 0);

// Event stream whose local statistics encode the class and instance layout of
// the scene: class-specific rate, polarity, timing and texture, plus boundary events.
events::EventStream synth_events(const SyntheticScene& scene, uint64_t seed, int64_t t_start, int64_t window_us);

}  // namespace seal::guidance
