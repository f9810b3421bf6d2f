#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "seal/events.hpp"
#include "seal/guidance.hpp"
#include "seal/mask.hpp"
#include "seal/model.hpp"
#include "seal/training.hpp"

namespace seal::benchmark {

using ag::Tensor;

struct InstanceAnnotation {
    BinaryMask mask;
    std::string label;
    guidance::Level level = guidance::Level::instance;
    std::string frame_id;
};

struct BenchmarkFrame {
    std::string frame_id;
    std::filesystem::path events;  // event file, or empty when `voxel` is set
    std::filesystem::path voxel;   // pre-voxelized VOX1 file
    int64_t t0 = -1;               // -1: first event
    std::vector<InstanceAnnotation> annotations;
};

struct BenchmarkManifest {
    std::string name;
    std::vector<std::string> classes;
    std::vector<std::string> exclude;
    int height = 0;
    int width = 0;
    int64_t window_us = 25'000;
    std::vector<BenchmarkFrame> frames;

    // Classes that may appear as labels (table minus exclusions), in table order.
    std::vector<std::string> eval_classes() const;
};

// Background classes removed per benchmark family ("ddd17", "dsec11", "dsec19").
std::vector<std::string> default_exclusions(const std::string& family);

BenchmarkManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const BenchmarkManifest& m, const std::filesystem::path& path);

// Majority semantic label per mask; drops masks below min_overlap or with an excluded label.
std::vector<InstanceAnnotation> assign_labels(const guidance::MaskSet& ms, const std::vector<int>& semantic_map,
                                              const std::vector<std::string>& class_table,
                                              const std::vector<std::string>& exclude, double min_overlap = 0.5);

// Furthest point sampling, seeded at the set pixel nearest the centroid. Ties go
// to the smallest (y, x). Returns every pixel when k exceeds the mask area.
std::vector<std::pair<int, int>> fps_points(const BinaryMask& mask, int k = 3);

Box box_from_mask(const BinaryMask& mask);

struct Prediction {
    BinaryMask mask;
    std::string label;
};

// IoU thresholds 0.50, 0.55, ..., 0.95.
std::array<double, 10> iou_thresholds();

// Greedy one-to-one matching of one class in one frame. Predictions are visited in
// descending-area order; pairs are taken by (IoU desc, prediction rank, GT index).
// Returns, for each prediction (input order), the IoU of its match or -1.
std::vector<double> greedy_match(const std::vector<BinaryMask>& preds, const std::vector<BinaryMask>& gts);

struct ClassAp {
    double ap = 0.0, ap50 = 0.0, ap25 = 0.0;
    std::size_t gt = 0, predictions = 0;
};

struct EvalReport {
    double ap = 0.0, ap50 = 0.0, ap25 = 0.0;
    std::map<std::string, ClassAp> per_class;
    std::string prompt_kind;

    nlohmann::json to_json() const;
    std::string table() const;
};

// predictions[f] belongs to manifest.frames[f]. Unknown label -> ValidationError.
EvalReport evaluate_ap(const std::vector<std::vector<Prediction>>& predictions, const BenchmarkManifest& manifest,
                       const std::string& prompt_kind = "box");

// ---------------------------------------------------------------------------
// Model-driven evaluation and feature export.

using TextEncoder = std::function<std::vector<double>(const std::string&)>;

events::VoxelGrid load_frame_voxel(const BenchmarkFrame& f, const BenchmarkManifest& m, const model::ModelConfig& cfg);

// Class-name embeddings as fusion text tokens (rows in `classes` order).
Tensor class_tokens(const std::vector<std::string>& classes, const TextEncoder& enc);

enum class PromptKind { box, point };
PromptKind prompt_kind_from_string(const std::string& s);

// One prompt per annotation (box from the mask, or 3 FPS points) -> predicted mask and label.
std::vector<std::vector<Prediction>> predict(const model::Model& m, const BenchmarkManifest& manifest,
                                             PromptKind kind, const TextEncoder& enc,
                                             model::Granularity point_tag = model::Granularity::mid);

// Same masks with labels drawn uniformly from the evaluation classes.
std::vector<std::vector<Prediction>> random_labels(const std::vector<std::vector<Prediction>>& preds,
                                                   const BenchmarkManifest& manifest, uint64_t seed);

struct FeatureRow {
    uint32_t frame = 0;
    uint16_t label = 0;
    std::vector<double> feature;
    bool dead = false;
};

// M_hat per annotation, pooled with the annotation mask and the prompt's mask token.
std::vector<FeatureRow> export_mask_features(const model::Model& m, const BenchmarkManifest& manifest,
                                             PromptKind kind, const TextEncoder& enc);
// "SFT1", u32 D, u32 rows, then rows of (u32 frame, u16 label, D f32).
void save_feature_dump(const std::vector<FeatureRow>& rows, const std::filesystem::path& path);
std::vector<FeatureRow> load_feature_dump(const std::filesystem::path& path);

// Mean silhouette with Euclidean distance between L2-normalized features.
double silhouette_score(const std::vector<std::vector<double>>& features, const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Profiling.

struct ProfileRow {
    int resolution = 0;
    int masks = 0;
    double ms = 0.0;
};

// Median wall-clock of RoI-Align over `masks` random boxes on a channels x r x r map.
std::vector<ProfileRow> profile_roi_align(const std::vector<int>& resolutions, const std::vector<int>& mask_counts,
                                          int channels, int repeats, uint64_t seed = 0);
std::string profile_csv(const std::vector<ProfileRow>& rows);

// ---------------------------------------------------------------------------
// Synthetic benchmark: instance masks of synthetic scenes labelled from their semantic maps.
std::filesystem::path write_synthetic_benchmark(const std::filesystem::path& dir,
                                                const training::SynthCorpusConfig& cfg, const std::string& name,
                                                const std::vector<std::string>& exclude = {});

}  // namespace seal::benchmark
