#include "lyt/render.hpp"

#include <algorithm>
#include <cmath>

namespace lyt {

namespace {

real clamp01(real v) { return std::min(1.0, std::max(0.0, v)); }

// Coverage of a disc with a 1-pixel anti-aliasing band.
real disc_coverage(real px, real py, real cx, real cy, real r) {
  const real d = std::hypot(px - cx, py - cy);
  return clamp01(r + 0.5 - d);
}

// Coverage of a thick segment (rod) with a 1-pixel anti-aliasing band.
real rod_coverage(real px, real py, real x0, real y0, real x1, real y1, real halfwidth) {
  const real vx = x1 - x0, vy = y1 - y0;
  const real len2 = vx * vx + vy * vy;
  real t = len2 > 0.0 ? ((px - x0) * vx + (py - y0) * vy) / len2 : 0.0;
  t = std::min(1.0, std::max(0.0, t));
  const real d = std::hypot(px - (x0 + t * vx), py - (y0 + t * vy));
  return clamp01(halfwidth + 0.5 - d);
}

void paint(std::vector<real>& img, std::size_t W, std::size_t x, std::size_t y, real cov,
           real intensity) {
  real& px = img[y * W + x];
  px = std::max(px, cov * intensity);
}

struct Pivot {
  real x, y;
};
Pivot pivot_of(std::size_t H, std::size_t W) {
  return {0.5 * static_cast<real>(W), 0.15 * static_cast<real>(H)};
}

}  // namespace

void VideoClip::validate() const {
  if (t < 2) throw ContractError("VideoClip: need at least 2 frames");
  if (frames.size() != t * h * w * c) throw DimensionError("VideoClip: frame buffer size mismatch");
  for (real v : frames)
    if (!(v >= 0.0 && v <= 1.0)) throw ContractError("VideoClip: pixel outside [0,1]");
}

void DistractorConfig::validate() const {
  if (background_replace_prob < 0.0 || background_replace_prob > 1.0)
    throw ConfigError("DistractorConfig: background_replace_prob outside [0,1]");
  if (texture_amplitude < 0.0 || texture_amplitude > 1.0)
    throw ConfigError("DistractorConfig: texture_amplitude outside [0,1]");
  if (occlusion_max_frac < 0.0 || occlusion_max_frac > 0.3)
    throw ConfigError("DistractorConfig: occlusion_max_frac outside [0,0.3]");
  if (brightness_max < 0.0 || brightness_max > 0.5)
    throw ConfigError("DistractorConfig: brightness_max outside [0,0.5]");
}

real canonical_background(SystemKind kind) {
  return kind == SystemKind::ReactionDiffusion ? 1.0 : 0.0;
}

std::vector<real> render_frame(const SystemSpec& spec, const real* state, std::size_t H,
                               std::size_t W) {
  std::vector<real> img(H * W, 0.0);
  const real Hf = static_cast<real>(H);

  auto draw_disc = [&](real cx, real cy, real r, real intensity) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        real cov = disc_coverage(x + 0.5, y + 0.5, cx, cy, r);
        if (cov > 0.0) paint(img, W, x, y, cov, intensity);
      }
  };
  auto draw_rod = [&](real x0, real y0, real x1, real y1, real hw, real intensity) {
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        real cov = rod_coverage(x + 0.5, y + 0.5, x0, y0, x1, y1, hw);
        if (cov > 0.0) paint(img, W, x, y, cov, intensity);
      }
  };

  switch (spec.kind) {
    case SystemKind::CircularMotion: {
      // World box [-1.4r, 1.4r]^2 onto the frame, y axis flipped.
      const real s = static_cast<real>(W) / (2.8 * spec.params.radius);
      const real cx = 0.5 * W + state[0] * s;
      const real cy = 0.5 * H - state[1] * s;
      draw_disc(cx, cy, 0.10 * Hf, 1.0);
      break;
    }
    case SystemKind::SinglePendulum: {
      const Pivot pv = pivot_of(H, W);
      const real lpx = 0.55 * Hf;
      const real bx = pv.x + lpx * std::sin(state[0]);
      const real by = pv.y + lpx * std::cos(state[0]);
      draw_rod(pv.x, pv.y, bx, by, 1.0, 0.7);
      draw_disc(bx, by, 0.10 * Hf, 1.0);
      break;
    }
    case SystemKind::DoublePendulum: {
      const Pivot pv = pivot_of(H, W);
      const real l1 = 0.28 * Hf, l2 = 0.28 * Hf;
      const real b1x = pv.x + l1 * std::sin(state[0]);
      const real b1y = pv.y + l1 * std::cos(state[0]);
      const real b2x = b1x + l2 * std::sin(state[1]);
      const real b2y = b1y + l2 * std::cos(state[1]);
      draw_rod(pv.x, pv.y, b1x, b1y, 1.0, 0.7);
      draw_rod(b1x, b1y, b2x, b2y, 1.0, 0.7);
      draw_disc(b1x, b1y, 0.07 * Hf, 0.9);
      draw_disc(b2x, b2y, 0.09 * Hf, 1.0);
      break;
    }
    case SystemKind::ElasticPendulum: {
      const Pivot pv = pivot_of(H, W);
      const real s = 0.35 * Hf;  // pixels per metre of radial extension
      const real bx = pv.x + s * state[0] * std::sin(state[1]);
      const real by = pv.y + s * state[0] * std::cos(state[1]);
      draw_rod(pv.x, pv.y, bx, by, 0.7, 0.6);
      draw_disc(bx, by, 0.09 * Hf, 1.0);
      break;
    }
    case SystemKind::ReactionDiffusion: {
      // u field through a grayscale ramp, nearest-neighbour grid sampling.
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
          const std::size_t gy = y * spec.rd_h / H;
          const std::size_t gx = x * spec.rd_w / W;
          img[y * W + x] = clamp01(state[gy * spec.rd_w + gx]);
        }
      break;
    }
  }
  for (real& v : img) v = clamp01(v);
  return img;
}

VideoClip render_clip(const SystemSpec& spec, const StateTrajectory& traj, real fps,
                      std::size_t H, std::size_t W) {
  if (traj.length() < 2) throw ContractError("render_clip: trajectory too short");
  const real duration = traj.times.back() - traj.times.front();
  const real traj_dt = traj.times[1] - traj.times[0];
  const std::size_t T = static_cast<std::size_t>(std::floor(duration * fps + 1e-9)) + 1;

  VideoClip clip;
  clip.t = T;
  clip.h = H;
  clip.w = W;
  clip.c = 1;
  clip.fps = fps;
  clip.background = canonical_background(spec.kind);
  clip.source = to_string(spec.kind);
  clip.frames.resize(T * H * W);
  for (std::size_t i = 0; i < T; ++i) {
    const real t = static_cast<real>(i) / fps;
    std::size_t idx = static_cast<std::size_t>(std::llround(t / traj_dt));
    idx = std::min(idx, traj.length() - 1);
    std::vector<real> img = render_frame(spec, traj.state(idx), H, W);
    std::copy(img.begin(), img.end(), clip.frame(i));
  }
  return clip;
}

real pool_texture_value(std::uint64_t seed, std::uint32_t pool, std::uint32_t index,
                        std::size_t x, std::size_t y) {
  Rng rng = Rng::keyed(seed, {TAG_DISTRACT, 7777, pool, index});
  const real a = rng.uniform(), b = rng.uniform();
  auto frac = [](real v) { return v - std::floor(v); };
  auto lattice = [&](std::uint64_t gx, std::uint64_t gy) {
    const std::uint64_t h =
        splitmix64(seed ^ splitmix64(pool * 31ull + index) ^ splitmix64(gx * 0x632BE5ABull) ^
                   splitmix64(gy * 0x9E3779B9ull));
    return static_cast<real>(h >> 11) * 0x1.0p-53;
  };
  auto value_noise = [&](real cell) {
    const real fx = static_cast<real>(x) / cell, fy = static_cast<real>(y) / cell;
    const std::uint64_t gx = static_cast<std::uint64_t>(fx), gy = static_cast<std::uint64_t>(fy);
    const real tx = fx - gx, ty = fy - gy;
    const real v00 = lattice(gx, gy), v10 = lattice(gx + 1, gy);
    const real v01 = lattice(gx, gy + 1), v11 = lattice(gx + 1, gy + 1);
    return (v00 * (1 - tx) + v10 * tx) * (1 - ty) + (v01 * (1 - tx) + v11 * tx) * ty;
  };

  switch (index % 8) {
    case 0: return a + (b - a) * frac(static_cast<real>(x) / 32.0);
    case 1: return a + (b - a) * frac(static_cast<real>(y) / 32.0);
    case 2: return a + (b - a) * frac(static_cast<real>(x + y) / 64.0);
    case 3: return ((x / 4 + y / 4) % 2 == 0) ? a : b;
    case 4: return ((x / 8 + y / 8) % 2 == 0) ? a : b;
    case 5: return a + (b - a) * value_noise(8.0);
    case 6: return a + (b - a) * value_noise(4.0);
    default: {
      const real cx = 8.0 + 16.0 * rng.uniform(), cy = 8.0 + 16.0 * rng.uniform();
      const real f = rng.uniform(0.3, 0.9);
      const real d = std::hypot(static_cast<real>(x) - cx, static_cast<real>(y) - cy);
      const real v = 0.5 + 0.5 * std::sin(d * f);
      return a + (b - a) * v;
    }
  }
}

VideoClip apply_distractors(const VideoClip& clip, const DistractorConfig& cfg) {
  cfg.validate();
  VideoClip out = clip;
  const std::size_t H = clip.h, W = clip.w;
  Rng rng = Rng::keyed(cfg.seed, {TAG_DISTRACT, clip.seed});

  // 1. Background replacement: canonical-background pixels only.
  if (cfg.background_replace_prob > 0.0 && rng.uniform() < cfg.background_replace_prob) {
    const std::uint32_t tex = static_cast<std::uint32_t>(rng.below(8));
    for (std::size_t i = 0; i < out.t; ++i) {
      real* fr = out.frame(i);
      for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
          if (fr[y * W + x] == clip.background)
            fr[y * W + x] = pool_texture_value(cfg.seed, cfg.background_pool, tex, x, y);
    }
  }

  // 2. Texture perturbation: band-limited lattice noise, static per clip.
  if (cfg.texture_amplitude > 0.0) {
    const std::size_t cell = 4;
    const std::size_t gw = W / cell + 2, gh = H / cell + 2;
    std::vector<real> lattice(gw * gh);
    for (real& v : lattice) v = rng.uniform(-cfg.texture_amplitude, cfg.texture_amplitude);
    std::vector<real> noise(H * W);
    for (std::size_t y = 0; y < H; ++y)
      for (std::size_t x = 0; x < W; ++x) {
        const real fx = static_cast<real>(x) / cell, fy = static_cast<real>(y) / cell;
        const std::size_t gx = static_cast<std::size_t>(fx), gy = static_cast<std::size_t>(fy);
        const real tx = fx - gx, ty = fy - gy;
        const real v00 = lattice[gy * gw + gx], v10 = lattice[gy * gw + gx + 1];
        const real v01 = lattice[(gy + 1) * gw + gx], v11 = lattice[(gy + 1) * gw + gx + 1];
        noise[y * W + x] = (v00 * (1 - tx) + v10 * tx) * (1 - ty) +
                           (v01 * (1 - tx) + v11 * tx) * ty;
      }
    for (std::size_t i = 0; i < out.t; ++i) {
      real* fr = out.frame(i);
      for (std::size_t p = 0; p < H * W; ++p) fr[p] += noise[p];
    }
  }

  // 3. Occlusion rectangles: static per clip, total area within budget.
  if (cfg.occlusion_max_frac > 0.0) {
    const std::size_t n = 1 + rng.below(3);
    const real budget = cfg.occlusion_max_frac * static_cast<real>(H * W);
    for (std::size_t r = 0; r < n; ++r) {
      const real target = (budget / static_cast<real>(n)) * rng.uniform(0.5, 1.0);
      if (target < 1.0) continue;
      const real aspect = rng.uniform(0.5, 2.0);
      std::size_t rw = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(target * aspect)));
      std::size_t rh = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(target / aspect)));
      rw = std::min(rw, W);
      rh = std::min(rh, H);
      const std::size_t x0 = rng.below(W - rw + 1);
      const std::size_t y0 = rng.below(H - rh + 1);
      const real fill = rng.uniform();
      for (std::size_t i = 0; i < out.t; ++i) {
        real* fr = out.frame(i);
        for (std::size_t y = y0; y < y0 + rh; ++y)
          for (std::size_t x = x0; x < x0 + rw; ++x) fr[y * W + x] = fill;
      }
    }
  }

  // 4. Per-clip brightness shift.
  if (cfg.brightness_max > 0.0) {
    const real delta = rng.uniform(-cfg.brightness_max, cfg.brightness_max);
    for (real& v : out.frames) v += delta;
  }

  for (real& v : out.frames) v = std::min(1.0, std::max(0.0, v));
  return out;
}

}  // namespace lyt
