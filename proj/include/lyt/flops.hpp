#pragma once
// Analytic forward-pass FLOP accounting. One multiply-accumulate counts as
// two FLOPs; matrix products dominate, so normalization, softmax, activation
// and bias terms are excluded uniformly across model variants.

#include <cstdint>

#include "lyt/model.hpp"

namespace lyt {

/// Attention score-matrix entries per block under the factorized scheme:
/// n_patch·T² (temporal) + T·n_patch² (spatial).
std::uint64_t score_entries_factorized(std::size_t n_patch, std::size_t T);

/// Score entries per block if space and time attended jointly: (n_patch·T)².
std::uint64_t score_entries_joint(std::size_t n_patch, std::size_t T);

std::uint64_t encode_flops(const ModelConfig& cfg, std::size_t T);
std::uint64_t decode_flops(const ModelConfig& cfg);      // one frame
std::uint64_t transition_flops(const ModelConfig& cfg);  // one latent step

/// Full training-window forward pass: encode T frames, decode T + K frames,
/// roll the transition K steps.
std::uint64_t window_forward_flops(const ModelConfig& cfg, std::size_t T, std::size_t K);

}  // namespace lyt
