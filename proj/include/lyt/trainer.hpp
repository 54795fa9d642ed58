#pragma once
// ============================================================================
// Two-phase training loop: Adam with global-norm clipping on f32-grid
// parameters, seeded batch sampling with per-step distractor augmentation,
// train-state checkpoints that resume bit-exactly, finite-difference gradient
// checking, and held-out rollout evaluation.
// ============================================================================

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "lyt/model.hpp"
#include "lyt/render.hpp"

namespace lyt {

struct TrainConfig {
    std::size_t steps = 2000;
    std::size_t batch = 8;
    real lr = 3e-4;
    real lr_final = -1.0;    // >= 0 enables cosine decay toward this value
    std::size_t warmup = 0;  // linear warmup steps
    real beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
    real clip_norm = 1.0;    // 0 disables clipping
    std::uint64_t seed = 0;
    std::size_t log_every = 1;
    bool phase2_unfreeze = false;      // phase 2: also train encoder/decoder
    DistractorConfig distractors;      // re-seeded per (step, sample)

    void validate() const;  // throws ConfigError
    real lr_at(std::size_t step) const;
};

struct TrainLogRow {
    std::size_t step = 0;
    real l_rec = 0, l_pred = 0, l_lyap = 0, l_total = 0, gnorm = 0;
    double ms = 0;  // wall time of this step
};

struct TrainLog {
    std::vector<TrainLogRow> rows;
    // CSV: `step,l_rec,l_pred,l_lyap,l_total,gnorm` after a config-hash line.
    // Wall times stay in memory only so fixed-seed reruns match byte for byte.
    void to_csv(std::ostream& os, std::uint64_t config_hash) const;
};

/// Adam moments per trainable tensor, aligned with the trainable list.
/// Moments are kept on the f32 grid so checkpointed state resumes bit-exactly.
struct AdamState {
    std::vector<std::vector<real>> m, v;
    std::size_t t = 0;  // completed optimizer steps

    bool empty() const { return t == 0 && m.empty(); }
};

/// Optimizer state plus the global step, carried across checkpoints.
struct TrainState {
    AdamState opt;
    std::size_t step = 0;
};

/// The parameters a phase updates: phase 1 trains everything except the
/// Lyapunov head; phase 2 trains f + W, or all parameters when unfrozen.
std::vector<std::pair<std::string, Tensor>> trainable_params(const Model& model, int phase,
                                                             bool unfreeze);

/// One Adam update over `params` from their accumulated gradients. Applies
/// global-norm clipping first; rounds parameters and moments to the f32 grid.
/// Returns the pre-clip gradient norm.
real adam_step(std::vector<std::pair<std::string, Tensor>>& params, AdamState& state,
               const TrainConfig& cfg, real lr);

/// Phase 1: L_rec + λ_pred·L_pred on sliding windows of the training clips.
/// Phase 2: adds λ_lyap·L_lyap on the selected dims (requires init_lyapunov).
/// If `state` is supplied, training continues from state->step (resume).
TrainLog train_phase1(Model& model, const std::vector<VideoClip>& clips, const TrainConfig& cfg,
                      TrainState* state = nullptr);
TrainLog train_phase2(Model& model, const std::vector<VideoClip>& clips, const TrainConfig& cfg,
                      TrainState* state = nullptr);

/// Train-state checkpoint: model parameters plus Adam moments and step.
/// extra_kv lines (e.g. a config hash) are appended to the config record.
void save_train_checkpoint(const std::filesystem::path& path, const Model& model,
                           const TrainState& state, int phase, bool unfreeze,
                           const std::string& extra_kv = "");
Model load_train_checkpoint(const std::filesystem::path& path, TrainState& state_out);

// ---------------------------------------------------------------------------
// Evaluation and gradient checking
// ---------------------------------------------------------------------------

struct PredEval {
    real model_err = 0;   // mean per-frame squared rollout error
    real static_err = 0;  // last-context-frame repetition baseline
};

/// K-step pixel prediction on the first window of each clip, no gradients.
PredEval eval_prediction(const Model& model, const std::vector<VideoClip>& clips, std::size_t K);

/// Mean reconstruction loss over the first window of each clip, no gradients.
real eval_reconstruction(const Model& model, const std::vector<VideoClip>& clips);

struct GradcheckIssue {
    std::string loss, tensor;
    std::size_t index = 0;
    real analytic = 0, fd = 0, rel = 0;
};

struct GradcheckReport {
    std::size_t checked = 0;
    std::vector<std::string> losses;
    std::vector<GradcheckIssue> failures;
    real worst_rel = 0;
    bool ok() const { return failures.empty(); }
};

/// Central-difference verification of every loss term (reconstruction,
/// prediction, Lyapunov hinge in both active and inactive regimes, and the
/// combined objective) against the tape gradients, on a small window.
/// Checks up to per_tensor spread-out elements of each trainable tensor.
GradcheckReport gradcheck_model(Model& model, const real* frames, std::size_t t_ctx,
                                std::size_t K, std::size_t per_tensor, real tol = 1e-4);

}  // namespace lyt
