#include "lyt/flops.hpp"

namespace lyt {

namespace {
using u64 = std::uint64_t;
}

u64 score_entries_factorized(std::size_t n_patch, std::size_t T) {
    return u64(n_patch) * T * T + u64(T) * n_patch * n_patch;
}

u64 score_entries_joint(std::size_t n_patch, std::size_t T) {
    u64 nt = u64(n_patch) * T;
    return nt * nt;
}

u64 encode_flops(const ModelConfig& cfg, std::size_t T) {
    const u64 d = cfg.dim, nk = cfg.n_kept(), rows = u64(T) * nk;
    const u64 ppc = u64(cfg.patch) * cfg.patch * cfg.frame_c;
    u64 total = 2 * rows * ppc * d;  // patch projection
    // per block: two attentions (QKV + out projections + scores/values) + MLP
    const u64 attn_linear = 2 * (6 + 2) * rows * d * d;
    const u64 attn_scores = 4 * d * score_entries_factorized(nk, T);
    const u64 mlp = 2 * 2 * rows * d * (4 * d);
    total += cfg.depth * (attn_linear + attn_scores + mlp);
    total += 2 * u64(T) * d * cfg.latent;  // latent head
    return total;
}

u64 decode_flops(const ModelConfig& cfg) {
    const u64 c0 = cfg.dec_c0, seed = 16 * c0;
    u64 total = 2 * u64(cfg.latent) * seed + 2 * u64(cfg.dim) * seed;  // seed projections
    const u64 chans[4] = {c0, c0 / 2, c0 / 4, cfg.frame_c};
    u64 hw = 16;  // input cells per channel at the 4×4 seed
    for (int s = 0; s < 3; ++s) {
        total += 2 * hw * chans[s] * chans[s + 1] * 16;  // k=4 stamps
        hw *= 4;
    }
    return total;
}

u64 transition_flops(const ModelConfig& cfg) {
    return 2 * 2 * u64(cfg.latent) * (4 * cfg.latent);
}

u64 window_forward_flops(const ModelConfig& cfg, std::size_t T, std::size_t K) {
    return encode_flops(cfg, T) + (u64(T) + K) * decode_flops(cfg) +
           u64(K) * transition_flops(cfg);
}

}  // namespace lyt
