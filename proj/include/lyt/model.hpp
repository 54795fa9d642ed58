#pragma once
// ============================================================================
// The LyTimeT network: patch tokenizer, factorized temporal/spatial attention
// encoder (pre-LN, mean-pooled to one z_t per frame), deconvolutional decoder
// with a last-frame skip connection, residual-MLP transition f, the Lyapunov
// head V(z~) = |W z~|^2, and all loss terms.
// ============================================================================

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "lyt/common.hpp"
#include "lyt/io.hpp"
#include "lyt/ops.hpp"
#include "lyt/tensor.hpp"

namespace lyt {

struct ModelConfig {
    std::size_t patch = 8;               // P, pixels
    std::size_t dim = 64;                // d, token width
    std::size_t depth = 2;               // L, blocks
    std::size_t heads = 4;
    std::size_t latent = 16;             // d_z
    std::size_t horizon = 4;             // K, rollout steps
    bool lite = false;
    std::size_t sparsify_stride = 1;     // Lite only; full model requires 1
    real lambda_pred = 1.0;
    real lambda_lyap = 0.1;
    std::size_t frame_h = 32, frame_w = 32, frame_c = 1;
    std::size_t t_ctx = 8;               // encoder context window length
    std::size_t t_max = 16;              // temporal positional table size
    std::size_t dec_c0 = 64;             // decoder seed channels

    void validate() const;  // throws ConfigError
    std::size_t n_patches() const { return (frame_h / patch) * (frame_w / patch); }
    std::size_t n_kept() const;          // patches entering attention
    std::size_t head_dim() const { return dim / heads; }
    std::size_t frame_size() const { return frame_h * frame_w * frame_c; }

    std::string to_kv() const;                       // key=value serialization
    static ModelConfig from_kv(const std::string&);  // throws ConfigError

    // Lite derivation: stride 2, half heads, half width.
    ModelConfig lite_variant() const;
};

/// Latent sequence for probe-facing consumers: plain values, no tape.
struct LatentSequence {
    Mat z;                // T×d_z
    std::string clip_id;
};

struct EncodeResult {
    Tensor z;     // T×d_z
    Tensor skip;  // 1×d, mean of pre-block patch embeddings of the last frame
};

/// Attention matrices recorded during a traced encode (tests only):
/// one entry per (block, kind, group, head), each row-stochastic.
using AttentionTrace = std::vector<Mat>;

// ---------------------------------------------------------------------------
// Patch tokenization (row-major patch order; unpatchify . patchify = id)
// ---------------------------------------------------------------------------
Mat patchify(const real* frame, std::size_t H, std::size_t W, std::size_t C, std::size_t P);
void unpatchify(const Mat& tokens, real* frame, std::size_t H, std::size_t W, std::size_t C,
                std::size_t P);

class Model {
  public:
    ModelConfig cfg;

    // Seeded parameter initialization. Attention/MLP output projections and
    // the transition output layer start at zero (residual identity at init);
    // other linears draw U(+-1/sqrt(fan_in)); positional tables N(0, 0.02).
    static Model init(const ModelConfig& cfg, std::uint64_t seed);

    // --- parameters -------------------------------------------------------
    const std::vector<std::pair<std::string, Tensor>>& params() const { return params_; }
    Tensor param(const std::string& name) const;  // throws ContractError if absent
    bool has_param(const std::string& name) const;

    // --- forward passes ---------------------------------------------------
    // frames: T contiguous frames, row-major H->W->C each.
    EncodeResult encode(const real* frames, std::size_t T, AttentionTrace* trace = nullptr) const;
    // As encode but keeps every stride-th patch token (original positional
    // indices). stride=1 is bit-identical to encode.
    EncodeResult encode_lite(const real* frames, std::size_t T, std::size_t stride,
                             AttentionTrace* trace = nullptr) const;

    Tensor decode(const Tensor& z_row, const Tensor& skip) const;  // 1×(H·W·C), in [0,1]
    Tensor transition(const Tensor& z) const;                      // row-wise f(z)
    std::vector<Tensor> rollout(const Tensor& z_row, std::size_t K) const;  // {f(z)..f^K(z)}

    // --- phase 2 ----------------------------------------------------------
    // Installs the selected latent dims and the Lyapunov head W (identity).
    void init_lyapunov(std::vector<std::size_t> selected_dims);
    const std::vector<std::size_t>& selected_dims() const { return selected_; }
    Tensor lyapunov_w() const { return param("lyap.w"); }
    Tensor select(const Tensor& z) const;  // project rows onto selected dims

    // --- checkpointing ----------------------------------------------------
    // extra: optimizer state etc.; extra_kv: appended to the config record.
    CheckpointData to_checkpoint(const std::vector<std::pair<std::string, Tensor>>& extra = {},
                                 const std::string& extra_kv = "") const;
    static Model from_checkpoint(const CheckpointData& ckpt);

  private:
    std::vector<std::pair<std::string, Tensor>> params_;
    std::vector<std::size_t> selected_;

    Tensor add_param(const std::string& name, Tensor t);
    Tensor block_forward(Tensor x, std::size_t block, std::size_t T, std::size_t kept,
                         AttentionTrace* trace) const;
};

// ---------------------------------------------------------------------------
// Loss terms (per-frame sum over pixels, mean over frames/steps)
// ---------------------------------------------------------------------------
Tensor frame_target(const real* frame, std::size_t n);  // constant 1×n leaf

// decoded: T tensors of shape 1×F; frames: T contiguous target frames.
Tensor loss_rec(const std::vector<Tensor>& decoded, const real* frames, std::size_t frame_size);
// decoded_rollout: K tensors 1×F vs the K future frames.
Tensor loss_pred(const std::vector<Tensor>& decoded_rollout, const real* future,
                 std::size_t frame_size);
Tensor lyapunov_V(const Tensor& z_sel, const Tensor& w);  // |W z~|^2 for one row
// z_rollout: K+1 selected-latent rows z~_0..z~_K; mean hinge of V increases.
Tensor loss_lyap(const std::vector<Tensor>& z_rollout, const Tensor& w);
Tensor loss_total(const Tensor& l_rec, const Tensor* l_pred, const Tensor* l_lyap,
                  real lambda_pred, real lambda_lyap);

}  // namespace lyt
