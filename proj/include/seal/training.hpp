#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "seal/events.hpp"
#include "seal/feature_map.hpp"
#include "seal/guidance.hpp"
#include "seal/model.hpp"

namespace seal::training {

using ag::Tensor;

struct TrainConfig {
    long iterations = 15'000;
    int batch = 8;
    double lr = 2e-4;
    double decay = 0.9;
    int decay_epoch = 3;
    uint64_t seed = 0;
    int stage = 1;
    bool visual = true;                          // VG term
    bool text = true;                            // TG term
    std::array<bool, 3> levels{true, true, true};  // s, i, p
    int prompts_per_frame = 4;                   // stage-1 decoder supervision
    double mask_weight = 1.0;
    std::string checkpoint_path;                 // written at the end when non-empty

    void validate() const;
};

struct DistillToggles {
    bool visual = true;
    bool text = true;
    std::array<bool, 3> levels{true, true, true};
};

struct DistillResult {
    Tensor loss;           // 1 x 1
    int dead_features = 0; // zero-norm student rows seen
};

// Sum over enabled levels of the per-level mean (1 - cos) against visual and
// text guidance. student[l] is K_l x D, row-aligned with the level's records;
// disabled levels may be undefined.
DistillResult distill_loss(const std::array<Tensor, 3>& student, const guidance::HierGuidance& g,
                           const DistillToggles& toggles);

// Mean over cells of (1 - cos(student_c, teacher_c)); both are cells x channels.
Tensor stage1_align_loss(const Tensor& student, const Tensor& teacher);

// C x H x W map as an (H*W) x C token matrix.
Tensor feature_tokens(const FeatureMap& f);

// Epochs count from 1; single decay from cfg.decay_epoch on.
double lr_schedule(long iteration, int epoch, const TrainConfig& cfg);

struct Sample {
    std::string frame_id;
    events::VoxelGrid voxel;  // normalized, model geometry
    Image image;
    guidance::HierGuidance guidance;
};

struct Dataset {
    std::vector<Sample> samples;
    std::vector<std::string> classes;
    guidance::TeacherProviders teacher;  // stage-1 teacher and text encoder
};

// Manifest document:
// {"classes": [...], "teacher": {"dim": D, "sigma": s}, "window_us": n,
//  "frames": [{"frame_id", "events", "image", "guidance", "t0"?}]}
// Relative paths resolve against the manifest's directory.
Dataset load_dataset(const std::filesystem::path& manifest, const model::ModelConfig& cfg);

// Teacher map pooled to the feature grid and projected to D2 (identity when D == D2).
Tensor teacher_tokens(const FeatureMap& teacher, const model::ModelConfig& cfg);

struct TrainLogEntry {
    long iter = 0;
    double loss = 0.0;
    double lr = 0.0;
    double wall_ms = 0.0;
};

struct TrainLog {
    std::vector<TrainLogEntry> entries;
    std::string checkpoint_path;
    int dead_features = 0;

    // One {iter, loss, lr} record per line.
    void write_jsonl(const std::filesystem::path& path) const;
    double mean_loss(long from, long to) const;  // entries [from, to)
};

struct TrainResult {
    model::Model model;
    TrainLog log;
};

// Stage 1 trains backbone + decoder; stage 2 requires `init` and trains fusion,
// pooling projection, SE and MFE with everything else frozen.
TrainResult train(const Dataset& data, const TrainConfig& cfg, const model::ModelConfig& mcfg,
                  const model::Model* init = nullptr);

// Text tokens used by the fusion stack for one frame: encoded long captions, deduplicated.
Tensor caption_tokens(const guidance::HierGuidance& g, const guidance::TeacherProviders& teacher);

// Synthetic corpus on disk: per frame an EVT1 event file, a PPM image, a guidance
// directory, plus manifest.json. Frame i uses seed + i.
struct SynthCorpusConfig {
    int frames = 64;
    uint64_t seed = 1;
    guidance::SynthConfig scene;
    int64_t window_us = 25'000;
};
std::filesystem::path write_synthetic_corpus(const std::filesystem::path& dir, const SynthCorpusConfig& cfg);

}  // namespace seal::training
