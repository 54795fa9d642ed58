#pragma once
// ============================================================================
// Rasterization of state trajectories into grayscale video clips, plus the
// seeded distractor augmentations (background replacement, texture
// perturbation, occlusion rectangles, brightness jitter).
// ============================================================================

#include <cstdint>
#include <string>
#include <vector>

#include "lyt/dynamics.hpp"

namespace lyt {

struct VideoClip {
  std::size_t t = 0, h = 0, w = 0, c = 1;
  real fps = 20.0;
  std::vector<real> frames;  // t*h*w*c row-major (T -> H -> W -> C), values in [0,1]
  real background = 0.0;     // canonical background value before augmentation
  std::uint64_t seed = 0;    // generation seed (metadata)
  std::string source;        // system id (metadata)

  std::size_t frame_size() const { return h * w * c; }
  const real* frame(std::size_t i) const { return frames.data() + i * frame_size(); }
  real* frame(std::size_t i) { return frames.data() + i * frame_size(); }
  void validate() const;  // shape/range invariants; throws ContractError
};

struct DistractorConfig {
  real background_replace_prob = 0.0;  // probability in [0,1]
  std::uint32_t background_pool = 0;   // procedural texture pool id
  real texture_amplitude = 0.0;        // [0,1]
  real occlusion_max_frac = 0.0;       // [0,0.3] of frame area
  real brightness_max = 0.0;           // [0,0.5]
  std::uint64_t seed = 0;

  void validate() const;  // throws ConfigError
  bool is_identity() const {
    return background_replace_prob == 0.0 && texture_amplitude == 0.0 &&
           occlusion_max_frac == 0.0 && brightness_max == 0.0;
  }
};

// Anti-aliased rendering of one state. Geometric systems draw on a zero
// background; reaction-diffusion maps the u field through a grayscale ramp.
std::vector<real> render_frame(const SystemSpec& spec, const real* state, std::size_t H,
                               std::size_t W);

// Canonical background value for a system's renders.
real canonical_background(SystemKind kind);

// Sample the trajectory at fps by nearest time index. T = floor(duration*fps)+1.
VideoClip render_clip(const SystemSpec& spec, const StateTrajectory& traj, real fps,
                      std::size_t H, std::size_t W);

// Apply the four distractor families in a fixed order (background, texture,
// occlusion, brightness), then clamp to [0,1]. Deterministic given cfg.seed.
VideoClip apply_distractors(const VideoClip& clip, const DistractorConfig& cfg);

// One of the 8 procedural pool textures evaluated at a pixel; parameters are
// derived from (seed, pool, index). Exposed for tests.
real pool_texture_value(std::uint64_t seed, std::uint32_t pool, std::uint32_t index,
                        std::size_t x, std::size_t y);

}  // namespace lyt
