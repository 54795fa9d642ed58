#pragma once
// ============================================================================
// End-to-end experiment plumbing shared by the CLI binary and the test
// suites: dataset generation, two-phase training with probing and dimension
// selection in between, metric evaluation, the ablation grid, SVG report
// plots, and gradient checking.
//
// Dataset layout under <output_dir>/dataset/:
//   manifest.json                     counts, config hash, file lists
//   train/clip_0000.lytv              clean renders (training distractors are
//   train/clip_0000_states.csv        applied as augmentation at train time)
//   eval_<variant>/clip_0000.lytv     the same eval trajectories re-rendered
//   eval_<variant>/clip_0000_states.csv   once per distractor variant (baked)
//
// Training artifacts under <output_dir>/:
//   config.txt                        canonical config text (hash source)
//   phase1.lytc, phase2.lytc          train-state checkpoints per phase
//   train_phase1.csv, train_phase2.csv   TrainLog rows
//   selection.csv                     ranked dims, scores, selected subset
//   report.csv, mi_matrix_<ds>.csv    evaluation outputs
//   plots/*.svg                       overlays, ranked bars, loss curves
// ============================================================================

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "lyt/config.hpp"
#include "lyt/model.hpp"
#include "lyt/probe.hpp"
#include "lyt/render.hpp"
#include "lyt/trainer.hpp"

namespace lyt {

// ---------------------------------------------------------------- dataset

struct DatasetSplit {
    std::string name;  // "train", "eval_none", ...
    std::vector<VideoClip> clips;
    std::vector<StateTrajectory> states;  // frame-aligned, one per clip
};

struct Dataset {
    DatasetSplit train;
    std::vector<DatasetSplit> eval;  // one per eval distractor variant
};

std::filesystem::path dataset_dir(const ExperimentConfig& cfg);

/// Ground-truth trajectory for one clip, subsampled to frame times.
/// split_id: 0 = train, 1 = eval (eval variants share trajectories).
StateTrajectory simulate_clip_states(const ExperimentConfig& cfg, std::uint32_t split_id,
                                     std::uint32_t index);

/// Physical probe targets as a T×d_GT matrix. Circular motion: (x, y);
/// single pendulum: (th, th_dot); double: (th1, th2, th1_dot, th2_dot);
/// elastic: (r, th, r_dot, th_dot, x, y); reaction-diffusion: field means
/// (mean_u, mean_v), accepted either as full fields or already summarized.
Mat probe_targets(SystemKind kind, const StateTrajectory& traj);

struct GenerateResult {
    std::filesystem::path dir;
    std::size_t n_train = 0;
    std::size_t n_eval = 0;  // per eval variant
    bool skipped = false;    // output existed and no_overwrite was set
};

GenerateResult cmd_generate(const ExperimentConfig& cfg, bool no_overwrite = false);

/// Reads a generated dataset back; throws IoError when missing or when the
/// manifest hash does not match the config.
Dataset load_dataset(const ExperimentConfig& cfg);

// ---------------------------------------------------------------- training

struct TrainOptions {
    int phase = 0;          // 0 = both phases, 1 or 2 = that phase only
    std::size_t steps = 0;  // > 0 overrides the configured step count
    bool no_overwrite = false;
};

struct TrainResult {
    std::filesystem::path phase1_ckpt;
    std::filesystem::path phase2_ckpt;  // empty when phase 2 was skipped
    TrainLog log1, log2;
    std::vector<std::size_t> ranked;    // full ranking from the probe step
    std::vector<std::size_t> selected;  // dims handed to init_lyapunov
    bool skipped = false;               // nothing to do under no_overwrite
};

/// Phase 1 on the train split, then rank/select on clean train latents, then
/// phase 2 (skipped entirely when the effective lambda_lyap is 0). A partial
/// checkpoint (fewer steps than requested) is resumed bit-exactly; a complete
/// one is retrained from scratch unless no_overwrite is set.
TrainResult cmd_train(const ExperimentConfig& cfg, const TrainOptions& opts = {});

// ---------------------------------------------------------------- evaluation

struct EvalRow {
    std::string metric;
    std::string dataset;
    real value = 0;
    real std_dev = 0;
    std::vector<real> split_values;
};

struct ExperimentReport {
    std::uint64_t config_hash = 0;
    std::uint64_t seed = 0;
    std::vector<EvalRow> rows;

    // CSV: `metric,dataset,value,std,split_values` after a config-hash line;
    // split_values joined with '|'.
    void to_csv(std::ostream& os) const;
    const EvalRow* find(const std::string& metric, const std::string& dataset) const;
};

/// Causal sliding-window latents: row r of the result is the encoding of
/// frames [r, r + T_ctx) taken at the window end, so it pairs with state row
/// r + T_ctx - 1. The first T_ctx - 1 frames have no causal window and are
/// dropped.
LatentSequence extract_latents(const Model& model, const VideoClip& clip);

/// Per eval variant: MI total (selected dims vs targets), AMSE, 2-NN ID
/// (full-sample value, 3-split mean/std), K-step and 4K-step rollout errors
/// against the static baseline, and the measured Lyapunov hinge. One overlap
/// row compares the variants' latents on shared trajectories. Loads the
/// given checkpoint, else phase2.lytc, else phase1.lytc, else evaluates a
/// freshly initialized model.
ExperimentReport cmd_evaluate(const ExperimentConfig& cfg,
                              const std::filesystem::path& checkpoint = {});

// ---------------------------------------------------------------- ablation

struct AblateCell {
    std::string name;  // "full_lyap", "full_nolyap", "lite_lyap", "lite_nolyap"
    bool lite = false;
    real lambda_lyap = 0;
    std::uint64_t flops = 0;  // analytic forward cost of one training window
    real id_err = 0;          // |2-NN ID − ground-truth dimension|
    ExperimentReport report;  // evaluation on the first eval variant
};

struct AblateResult {
    std::vector<AblateCell> cells;
    // Lyapunov ablation table: variant,lambda_lyap,mi,amse,long_horizon,l_lyap
    void table_lyap_csv(std::ostream& os) const;
    // Encoder variant table: variant,flops,mi,amse,id_err
    void table_encoder_csv(std::ostream& os) const;
};

/// {full, lite} × {lambda_lyap > 0, 0} over one shared dataset. Unlike
/// `cmd_train --lyap 0`, the lambda = 0 arms still run phase 2 (with a zero
/// coefficient) so both arms see identical optimization budgets and the
/// comparison isolates the regularizer.
AblateResult cmd_ablate(const ExperimentConfig& cfg);

// ---------------------------------------------------------------- plots, gradcheck

/// Latent-trajectory overlays (one SVG per consecutive selected-dim pair, one
/// curve per eval variant on a shared trajectory), the ranked-score bar
/// chart, and loss curves from the training logs. Returns the written paths.
std::vector<std::filesystem::path> cmd_plot(const ExperimentConfig& cfg);

/// Finite-difference check of every loss term on a small seeded window.
GradcheckReport cmd_gradcheck(const ExperimentConfig& cfg);

}  // namespace lyt
