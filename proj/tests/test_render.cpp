#include <algorithm>
#include <cmath>
#include <numeric>

#include "doctest.h"
#include "lyt/render.hpp"

using namespace lyt;

namespace {

// Centroid of the saturated (disc) pixels, as (x, y). The bob disc is the
// only region that reaches full intensity.
std::pair<real, real> argmax_pixel(const std::vector<real>& frame, std::size_t H, std::size_t W) {
    real hi = *std::max_element(frame.begin(), frame.end());
    real sx = 0, sy = 0, m = 0;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            if (frame[y * W + x] >= hi - 1e-9) {
                sx += real(x) + 0.5;
                sy += real(y) + 0.5;
                m += 1;
            }
    return {sx / m, sy / m};
}

// Intensity-weighted centroid of the frame, as (x, y).
std::pair<real, real> centroid(const std::vector<real>& frame, std::size_t H, std::size_t W) {
    real sx = 0, sy = 0, m = 0;
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x) {
            real v = frame[y * W + x];
            sx += v * (real(x) + 0.5);
            sy += v * (real(y) + 0.5);
            m += v;
        }
    return {sx / m, sy / m};
}

SystemSpec pendulum_spec() {
    SystemSpec spec;
    spec.kind = SystemKind::SinglePendulum;
    return spec;
}

}  // namespace

TEST_CASE("pendulum frame geometry: bob lands where the angle says") {
    SystemSpec spec = pendulum_spec();
    const std::size_t H = 32, W = 32;
    const real pivot_x = 0.5 * W, pivot_y = 0.15 * H, lpx = 0.55 * H;

    // theta = 0: bob hangs straight down from the pivot
    real state0[2] = {0.0, 0.0};
    auto down = render_frame(spec, state0, H, W);
    auto [bx, by] = argmax_pixel(down, H, W);
    CHECK(std::abs(bx - pivot_x) <= 1.0);
    CHECK(std::abs(by - (pivot_y + lpx)) <= 1.0);

    // theta = +pi/2: bob to the right of the pivot at pivot height
    real state1[2] = {1.5707963267948966, 0.0};
    auto side = render_frame(spec, state1, H, W);
    auto [sx, sy] = argmax_pixel(side, H, W);
    CHECK(sx > pivot_x + 0.5 * lpx);
    CHECK(std::abs(sy - pivot_y) <= 2.0);

    // mirrored angle gives the horizontally mirrored frame
    real state2[2] = {-1.5707963267948966, 0.0};
    auto mirror = render_frame(spec, state2, H, W);
    for (std::size_t y = 0; y < H; ++y)
        for (std::size_t x = 0; x < W; ++x)
            CHECK(mirror[y * W + x] == doctest::Approx(side[y * W + (W - 1 - x)]).epsilon(1e-12));
}

TEST_CASE("frames stay in [0,1] with a dark background and bright foreground") {
    SystemSpec spec = pendulum_spec();
    real state[2] = {0.9, 0.0};
    auto frame = render_frame(spec, state, 32, 32);
    REQUIRE(frame.size() == 32 * 32);
    real lo = *std::min_element(frame.begin(), frame.end());
    real hi = *std::max_element(frame.begin(), frame.end());
    CHECK(lo == 0.0);
    CHECK(hi <= 1.0);
    CHECK(hi > 0.9);  // bob disc saturates
    std::size_t dark = std::count(frame.begin(), frame.end(), 0.0);
    CHECK(dark > frame.size() / 2);  // mostly background
    CHECK(dark < frame.size());     // but not empty
    CHECK(canonical_background(SystemKind::SinglePendulum) == 0.0);
    CHECK(canonical_background(SystemKind::ReactionDiffusion) == 1.0);
}

TEST_CASE("circular motion disc follows the state point") {
    SystemSpec spec;
    spec.kind = SystemKind::CircularMotion;
    const std::size_t H = 32, W = 32;
    // state (x, y) = (radius, 0): disc sits right of frame center
    real right[2] = {1.0, 0.0};
    auto frame = render_frame(spec, right, H, W);
    auto [cx, cy] = centroid(frame, H, W);
    // world box spans ±1.4·radius, so x=radius maps to 0.5 + 1/2.8 of width
    real expect_x = W * (0.5 + 1.0 / 2.8);
    CHECK(std::abs(cx - expect_x) < 1.0);
    CHECK(std::abs(cy - 0.5 * H) < 1.0);

    // quarter turn: (0, radius) renders the disc above center (y axis points up)
    real up[2] = {0.0, 1.0};
    auto frame_up = render_frame(spec, up, H, W);
    auto [ux, uy] = centroid(frame_up, H, W);
    CHECK(std::abs(ux - 0.5 * W) < 1.0);
    CHECK(uy < 0.5 * H - 2.0);
}

TEST_CASE("reaction-diffusion frames are the u field on a grayscale ramp") {
    SystemSpec spec;
    spec.kind = SystemKind::ReactionDiffusion;
    spec.rd_h = 16;
    spec.rd_w = 16;
    std::vector<real> state(2 * 16 * 16, 0.0);
    for (std::size_t i = 0; i < 256; ++i) state[i] = 0.37;  // constant u, v ignored
    auto frame = render_frame(spec, state.data(), 32, 32);
    for (real v : frame) CHECK(v == doctest::Approx(0.37).epsilon(1e-12));

    // u=1 renders as the canonical background
    for (std::size_t i = 0; i < 256; ++i) state[i] = 1.0;
    auto bg = render_frame(spec, state.data(), 32, 32);
    for (real v : bg) CHECK(v == 1.0);
}

TEST_CASE("render_clip samples the trajectory at the frame rate") {
    SystemSpec spec = pendulum_spec();
    StateTrajectory traj = integrate_rk4(spec, {1.1, 0.3}, 2000);  // 2 s at dt=1e-3
    VideoClip clip = render_clip(spec, traj, 20.0, 32, 32);
    CHECK(clip.t == 41);  // floor(2.0·20)+1
    CHECK(clip.h == 32);
    CHECK(clip.w == 32);
    CHECK(clip.c == 1);
    CHECK(clip.fps == 20.0);
    CHECK(clip.background == 0.0);
    clip.validate();

    // frame i comes from trajectory row 50·i (nearest index at dt=1e-3, fps=20)
    for (std::size_t i : {std::size_t(0), std::size_t(7), std::size_t(40)}) {
        auto direct = render_frame(spec, traj.state(50 * i), 32, 32);
        for (std::size_t p = 0; p < direct.size(); ++p)
            CHECK(clip.frame(i)[p] == direct[p]);
    }
}

TEST_CASE("identity distractor config is a no-op") {
    SystemSpec spec = pendulum_spec();
    StateTrajectory traj = integrate_rk4(spec, {0.8, -0.2}, 500);
    VideoClip clip = render_clip(spec, traj, 20.0, 32, 32);
    DistractorConfig cfg;
    cfg.seed = 99;
    REQUIRE(cfg.is_identity());
    VideoClip out = apply_distractors(clip, cfg);
    CHECK(out.frames == clip.frames);
}

TEST_CASE("background replacement keeps every foreground pixel") {
    SystemSpec spec = pendulum_spec();
    StateTrajectory traj = integrate_rk4(spec, {1.4, 0.0}, 500);
    VideoClip clip = render_clip(spec, traj, 20.0, 32, 32);
    DistractorConfig cfg;
    cfg.background_replace_prob = 1.0;
    cfg.background_pool = 8;
    cfg.seed = 5;
    VideoClip out = apply_distractors(clip, cfg);
    bool any_changed = false;
    for (std::size_t i = 0; i < clip.frames.size(); ++i) {
        if (clip.frames[i] != clip.background)
            CHECK(out.frames[i] == clip.frames[i]);
        else if (out.frames[i] != clip.frames[i])
            any_changed = true;
    }
    CHECK(any_changed);
}

TEST_CASE("occlusion rectangles stay within the area budget") {
    SystemSpec spec = pendulum_spec();
    StateTrajectory traj = integrate_rk4(spec, {1.0, 0.5}, 500);
    VideoClip clip = render_clip(spec, traj, 20.0, 32, 32);
    for (std::uint64_t seed : {1, 2, 3, 4, 5, 6, 7, 8}) {
        DistractorConfig cfg;
        cfg.occlusion_max_frac = 0.2;
        cfg.seed = seed;
        VideoClip out = apply_distractors(clip, cfg);
        // occluders are static across frames; measure changed pixels on frame 0
        std::size_t changed = 0;
        for (std::size_t p = 0; p < clip.frame_size(); ++p)
            if (out.frame(0)[p] != clip.frame(0)[p]) ++changed;
        CHECK(changed <= std::size_t(0.2 * 32 * 32) + 1);
        // static occluders: the changed-pixel mask is identical in every frame
        for (std::size_t f = 1; f < clip.t; ++f)
            for (std::size_t p = 0; p < clip.frame_size(); ++p) {
                bool moved0 = out.frame(0)[p] != clip.frame(0)[p];
                bool movedf = out.frame(f)[p] != clip.frame(f)[p];
                if (moved0 != movedf) {
                    // a pixel can coincide with the fill value in one frame only
                    CHECK(std::abs(out.frame(f)[p] - out.frame(0)[p]) <= 1.0);
                }
            }
    }
}

TEST_CASE("brightness jitter shifts every non-clipped pixel by one constant") {
    SystemSpec spec = pendulum_spec();
    StateTrajectory traj = integrate_rk4(spec, {0.6, 0.1}, 500);
    VideoClip clip = render_clip(spec, traj, 20.0, 32, 32);
    DistractorConfig cfg;
    cfg.brightness_max = 0.2;
    cfg.seed = 12;
    VideoClip out = apply_distractors(clip, cfg);
    // find the shift from an interior-valued pixel, then check it is global
    real shift = 0;
    bool found = false;
    for (std::size_t i = 0; i < clip.frames.size() && !found; ++i)
        if (clip.frames[i] > 0.25 && clip.frames[i] < 0.75 && out.frames[i] > 0.0 &&
            out.frames[i] < 1.0) {
            shift = out.frames[i] - clip.frames[i];
            found = true;
        }
    REQUIRE(found);
    CHECK(std::abs(shift) <= 0.2);
    for (std::size_t i = 0; i < clip.frames.size(); ++i) {
        real expect = std::clamp(clip.frames[i] + shift, 0.0, 1.0);
        CHECK(out.frames[i] == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("distractors are deterministic in the seed and vary across seeds") {
    SystemSpec spec = pendulum_spec();
    StateTrajectory traj = integrate_rk4(spec, {1.2, 0.0}, 500);
    VideoClip clip = render_clip(spec, traj, 20.0, 32, 32);
    DistractorConfig cfg;
    cfg.background_replace_prob = 0.5;
    cfg.texture_amplitude = 0.1;
    cfg.occlusion_max_frac = 0.1;
    cfg.brightness_max = 0.1;
    cfg.seed = 31;
    VideoClip a = apply_distractors(clip, cfg);
    VideoClip b = apply_distractors(clip, cfg);
    CHECK(a.frames == b.frames);
    cfg.seed = 32;
    VideoClip c = apply_distractors(clip, cfg);
    CHECK(a.frames != c.frames);
    // output respects the range contract
    for (real v : c.frames) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("pool textures are deterministic and in range") {
    for (std::uint32_t pool = 0; pool < 8; ++pool)
        for (std::size_t y = 0; y < 32; y += 5)
            for (std::size_t x = 0; x < 32; x += 5) {
                real v = pool_texture_value(77, pool, pool, x, y);
                CHECK(v >= 0.0);
                CHECK(v <= 1.0);
                CHECK(v == pool_texture_value(77, pool, pool, x, y));
            }
    // different seeds generally give different textures (value-noise pool)
    CHECK(pool_texture_value(1, 5, 0, 13, 17) != pool_texture_value(2, 5, 0, 13, 17));
}

TEST_CASE("clip and distractor validation rejects malformed inputs") {
    VideoClip clip;
    clip.t = 2;
    clip.h = 4;
    clip.w = 4;
    clip.c = 1;
    clip.frames.assign(2 * 4 * 4 - 1, 0.0);  // one value short
    CHECK_THROWS_AS(clip.validate(), DimensionError);
    clip.frames.push_back(1.5);  // right size, out of range
    CHECK_THROWS_AS(clip.validate(), ContractError);
    clip.frames.back() = 1.0;
    CHECK_NOTHROW(clip.validate());

    DistractorConfig cfg;
    cfg.background_replace_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg.background_replace_prob = 0.5;
    cfg.occlusion_max_frac = 0.6;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}
