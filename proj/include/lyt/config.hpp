// Experiment configuration: one human-readable key=value file describing the
// whole pipeline (system, rendering, distractors, model, both training phases,
// metrics), with single-key overrides and a canonical hash.
//
// File format: `key = value` lines; blank lines and lines starting with `#`
// are ignored; later keys override earlier ones. The documented schema is the
// key set emitted by to_text(), which serializes every field in sorted order
// with deterministic number formatting — hash() is FNV-1a over that canonical
// text, so equal configurations hash equally regardless of input spelling.
//
// Distractor settings are named presets (none | background | texture |
// occlusion | brightness | mixed): `distract.train` picks the training
// augmentation, `distract.eval` a comma-separated list of evaluation variants.
//
// Derived, non-serialized wiring: the model's frame geometry follows data.h /
// data.w, phase seeds derive from the experiment seed (phase 2 = seed + 1),
// and both phases augment with the training preset.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lyt/dynamics.hpp"
#include "lyt/model.hpp"
#include "lyt/probe.hpp"
#include "lyt/render.hpp"
#include "lyt/trainer.hpp"

namespace lyt {

struct DataConfig {
    std::size_t n_train = 48;
    std::size_t n_eval = 16;
    real duration = 1.2;  // seconds per clip
    real fps = 20.0;
    std::size_t h = 32, w = 32;
};

struct MetricsConfig {
    RankCriterion criterion = RankCriterion::R2;
    std::size_t d_select = 0;  // 0 = system ground-truth dimension
};

DistractorConfig distractor_preset(const std::string& name);  // throws ConfigError

struct ExperimentConfig {
    std::uint64_t seed = 42;
    std::string output_dir = "runs/exp";
    SystemSpec system;
    DataConfig data;
    std::string distract_train = "none";
    std::vector<std::string> distract_eval = {"none", "background", "occlusion"};
    ModelConfig model;
    TrainConfig phase1;
    TrainConfig phase2;
    MetricsConfig metrics;

    // Applies one `key = value` override; throws ConfigError for unknown keys
    // or unparseable values.
    void apply(const std::string& key, const std::string& value);

    static ExperimentConfig from_text(const std::string& text);
    static ExperimentConfig from_file(const std::filesystem::path& path);

    std::string to_text() const;  // canonical: sorted keys, stable formatting
    std::uint64_t hash() const;   // FNV-1a of to_text()

    void validate() const;  // throws ConfigError on referential inconsistency

    std::size_t frames_per_clip() const;
    std::size_t d_select_effective() const;  // resolves 0 to ground-truth dim
    DistractorConfig train_distractor() const;
    std::vector<DistractorConfig> eval_distractors() const;

    // Re-derives the non-serialized wiring (frame geometry, phase seeds,
    // augmentation presets). Called by from_text; call again after manual
    // field edits.
    void finalize();
};

}  // namespace lyt
