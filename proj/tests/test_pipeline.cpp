#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "doctest.h"
#include "lyt/config.hpp"
#include "lyt/io.hpp"
#include "lyt/pipeline.hpp"
#include "lyt/probe.hpp"
#include "lyt/svg.hpp"

using namespace lyt;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / "lyt_pipeline_tests" / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(bool(is));
    std::ostringstream os;
    os << is.rdbuf();
    return os.str();
}

// Small end-to-end configuration: full 32x32 frames (the decoder geometry is
// fixed) but a minimal model and a handful of short clips.
ExperimentConfig tiny_config(const fs::path& out) {
    ExperimentConfig c;
    c.seed = 7;
    c.output_dir = out.string();
    c.system.kind = SystemKind::SinglePendulum;
    c.data.n_train = 3;
    c.data.n_eval = 4;       // 4 clips x 14 windows: enough rows for the KDE MI floor
    c.data.duration = 0.8;   // 17 frames at 20 fps
    c.data.fps = 20.0;
    c.distract_train = "none";
    c.distract_eval = {"none", "background"};
    c.model.patch = 8;
    c.model.dim = 16;
    c.model.depth = 1;
    c.model.heads = 2;
    c.model.latent = 4;
    c.model.horizon = 2;
    c.model.t_ctx = 4;
    c.model.t_max = 8;
    c.model.dec_c0 = 4;
    c.model.lambda_pred = 1.0;
    c.model.lambda_lyap = 0.1;
    c.phase1.steps = 8;
    c.phase1.batch = 2;
    c.phase1.lr = 1e-3;
    c.phase2.steps = 6;
    c.phase2.batch = 2;
    c.phase2.lr = 1e-3;
    c.finalize();
    c.validate();
    return c;
}

// Tag-stack well-formedness check, enough for our own SVG output: every
// opened element is closed in order, attributes are quoted, exactly one root.
void check_well_formed_xml(const std::string& text) {
    std::vector<std::string> stack;
    std::size_t i = 0, roots = 0;
    while ((i = text.find('<', i)) != std::string::npos) {
        const std::size_t end = text.find('>', i);
        REQUIRE(end != std::string::npos);
        std::string tag = text.substr(i + 1, end - i - 1);
        i = end + 1;
        if (tag.rfind("?", 0) == 0 || tag.rfind("!--", 0) == 0) continue;
        if (tag.rfind("/", 0) == 0) {
            REQUIRE(!stack.empty());
            CHECK(stack.back() == tag.substr(1));
            stack.pop_back();
            if (stack.empty()) ++roots;
            continue;
        }
        const bool self_closing = !tag.empty() && tag.back() == '/';
        const std::string name = tag.substr(0, tag.find_first_of(" \t\n/"));
        REQUIRE(!name.empty());
        if (!self_closing) {
            stack.push_back(name);
        } else if (stack.empty()) {
            ++roots;
        }
    }
    CHECK(stack.empty());
    CHECK(roots == 1);
}

void check_tensors_equal(const CheckpointData& a, const CheckpointData& b) {
    REQUIRE(a.tensors.size() == b.tensors.size());
    for (const NamedTensor& ta : a.tensors) {
        const NamedTensor* tb = b.find(ta.name);
        REQUIRE(tb != nullptr);
        REQUIRE(ta.shape == tb->shape);
        CHECK(ta.values == tb->values);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// SVG emitter
// ---------------------------------------------------------------------------

TEST_CASE("svg line chart is well-formed, escaped, and gap-aware") {
    SvgSeries smooth{"smooth", {{0, 1}, {1, 2}, {2, 1.5}}};
    SvgSeries gappy{"a<b&c", {{0, 0}, {1, std::nan("")}, {2, 4}, {3, 5}}};
    const std::string svg =
        svg_line_chart("losses <phase&1>", "step", "loss", {smooth, gappy});

    check_well_formed_xml(svg);
    CHECK(svg.find("losses &lt;phase&amp;1&gt;") != std::string::npos);
    CHECK(svg.find("a&lt;b&amp;c") != std::string::npos);
    CHECK(svg.find("<b") == std::string::npos);  // raw title must not leak markup

    // The NaN splits the second polyline into two pen-down segments.
    std::size_t two_segment_paths = 0;
    for (std::size_t at = 0; (at = svg.find("<path", at)) != std::string::npos; ++at) {
        const std::size_t d0 = svg.find("d=\"", at);
        REQUIRE(d0 != std::string::npos);
        const std::size_t d1 = svg.find('"', d0 + 3);
        const std::string d = svg.substr(d0 + 3, d1 - d0 - 3);
        two_segment_paths += std::count(d.begin(), d.end(), 'M') == 2;
    }
    CHECK(two_segment_paths == 1);

    CHECK(svg_line_chart("t", "x", "y", {smooth}) == svg_line_chart("t", "x", "y", {smooth}));
}

TEST_CASE("svg charts reject empty input") {
    CHECK_THROWS_AS((void)svg_bar_chart("t", "y", {}), ContractError);
    SvgSeries all_nan{"s", {{0, std::nan("")}, {1, std::nan("")}}};
    CHECK_THROWS_AS((void)svg_line_chart("t", "x", "y", {all_nan}), ContractError);
}

TEST_CASE("svg bar chart draws one bar per entry") {
    const std::string svg = svg_bar_chart("scores", "r2", {{"z0", 0.9}, {"z1", 0.4}, {"z2", 0.1}});
    check_well_formed_xml(svg);
    std::size_t rects = 0;
    for (std::size_t at = 0; (at = svg.find("<rect", at)) != std::string::npos; ++at) ++rects;
    CHECK(rects >= 4);  // background + 3 bars
    CHECK(svg.find("z1") != std::string::npos);
}

// ---------------------------------------------------------------------------
// Probe targets
// ---------------------------------------------------------------------------

TEST_CASE("probe targets pass pendulum states through unchanged") {
    StateTrajectory traj;
    traj.dim = 2;
    traj.times = {0.0, 0.1};
    traj.states = {0.3, -1.2, 0.4, 0.9};
    const Mat s = probe_targets(SystemKind::SinglePendulum, traj);
    REQUIRE(s.rows == 2);
    REQUIRE(s.cols == 2);
    CHECK(s(0, 0) == 0.3);
    CHECK(s(1, 1) == 0.9);
}

TEST_CASE("probe targets augment the elastic pendulum with cartesian bob coordinates") {
    StateTrajectory traj;
    traj.dim = 4;
    traj.times = {0.0};
    const real r = 1.25, th = 0.6, rdot = -0.2, thdot = 0.8;
    traj.states = {r, th, rdot, thdot};
    const Mat s = probe_targets(SystemKind::ElasticPendulum, traj);
    REQUIRE(s.rows == 1);
    REQUIRE(s.cols == 6);
    CHECK(s(0, 0) == r);
    CHECK(s(0, 3) == thdot);
    CHECK(s(0, 4) == doctest::Approx(r * std::sin(th)).epsilon(1e-12));
    CHECK(s(0, 5) == doctest::Approx(-r * std::cos(th)).epsilon(1e-12));
}

TEST_CASE("probe targets keep the reaction-diffusion two-channel summary") {
    StateTrajectory traj;
    traj.dim = 2;
    traj.times = {0.0, 1.0, 2.0};
    traj.states = {0.9, 0.1, 0.8, 0.2, 0.7, 0.3};
    const Mat s = probe_targets(SystemKind::ReactionDiffusion, traj);
    REQUIRE(s.rows == 3);
    REQUIRE(s.cols == 2);
    CHECK(s(2, 0) == doctest::Approx(0.7));
    CHECK(s(2, 1) == doctest::Approx(0.3));
}

// ---------------------------------------------------------------------------
// Dataset generation
// ---------------------------------------------------------------------------

TEST_CASE("generate is deterministic, self-describing, and respects no-overwrite") {
    const fs::path dir = scratch("generate");
    ExperimentConfig cfg = tiny_config(dir / "run");

    const GenerateResult first = cmd_generate(cfg);
    CHECK(!first.skipped);
    CHECK(first.n_train == 3);
    CHECK(first.n_eval == 4);  // per eval variant

    const fs::path manifest = first.dir / "manifest.json";
    const fs::path clip0 = first.dir / "train" / "clip_0000.lytv";
    const fs::path states0 = first.dir / "train" / "clip_0000_states.csv";
    REQUIRE(fs::exists(manifest));
    REQUIRE(fs::exists(clip0));
    REQUIRE(fs::exists(states0));
    const std::string manifest_a = slurp(manifest);
    const std::string clip_a = slurp(clip0);
    const std::string states_a = slurp(states0);

    // Regeneration reproduces every artifact byte for byte.
    const GenerateResult second = cmd_generate(cfg);
    CHECK(!second.skipped);
    CHECK(slurp(manifest) == manifest_a);
    CHECK(slurp(clip0) == clip_a);
    CHECK(slurp(states0) == states_a);

    // --no-overwrite refuses to touch an existing dataset.
    const GenerateResult third = cmd_generate(cfg, /*no_overwrite=*/true);
    CHECK(third.skipped);
    CHECK(slurp(manifest) == manifest_a);

    // The manifest names the config, the splits, and every file.
    char want[32];
    std::snprintf(want, sizeof want, "%016llx", static_cast<unsigned long long>(cfg.hash()));
    CHECK(manifest_a.find(want) != std::string::npos);
    CHECK(manifest_a.find("\"train\"") != std::string::npos);
    CHECK(manifest_a.find("eval_background") != std::string::npos);
    CHECK(manifest_a.find("clip_0000.lytv") != std::string::npos);

    // Loading round-trips counts and shapes; a different config is rejected.
    const Dataset ds = load_dataset(cfg);
    REQUIRE(ds.train.clips.size() == 3);
    REQUIRE(ds.eval.size() == 2);
    REQUIRE(ds.eval[0].clips.size() == 4);
    CHECK(ds.eval[0].name == "eval_none");
    CHECK(ds.train.clips[0].t == cfg.frames_per_clip());
    CHECK(ds.train.states[0].length() == cfg.frames_per_clip());
    CHECK(ds.train.clips[0].fps == doctest::Approx(20.0));

    ExperimentConfig other = cfg;
    other.seed = 8;
    other.finalize();
    CHECK_THROWS_AS((void)load_dataset(other), IoError);
}

TEST_CASE("generated pendulum states conserve energy and match the stored csv") {
    const fs::path dir = scratch("energy");
    ExperimentConfig cfg = tiny_config(dir / "run");

    const StateTrajectory traj = simulate_clip_states(cfg, 0, 0);
    REQUIRE(traj.length() == cfg.frames_per_clip());
    REQUIRE(traj.dim == 2);

    const real e0 = system_energy(cfg.system, traj.state(0));
    real worst = 0;
    for (std::size_t i = 1; i < traj.length(); ++i) {
        const real e = system_energy(cfg.system, traj.state(i));
        worst = std::max(worst, std::abs(e - e0) / std::abs(e0));
    }
    CHECK(worst < 1e-9);

    cmd_generate(cfg);
    const Dataset ds = load_dataset(cfg);
    REQUIRE(ds.train.states[0].dim == 2);
    CHECK(ds.train.states[0].state(0)[0] == doctest::Approx(traj.state(0)[0]).epsilon(1e-15));
    CHECK(ds.train.states[0].state(5)[1] == doctest::Approx(traj.state(5)[1]).epsilon(1e-15));
}

TEST_CASE("circular-motion ground-truth states have intrinsic dimension one") {
    ExperimentConfig cfg = tiny_config(fs::temp_directory_path() / "lyt_unused");
    cfg.system.kind = SystemKind::CircularMotion;
    cfg.data.n_train = 32;
    cfg.data.duration = 1.0;  // 21 frames: arcs overlap around the circle
    cfg.finalize();

    Mat pts(0, 2);
    for (std::size_t i = 0; i < cfg.data.n_train; ++i) {
        const StateTrajectory traj = simulate_clip_states(cfg, 0, i);
        REQUIRE(traj.dim == 2);
        pts.v.insert(pts.v.end(), traj.states.begin(), traj.states.end());
        pts.rows += traj.length();
    }
    REQUIRE(pts.rows == 32 * 21);
    const IDResult id = intrinsic_dimension_2nn(pts);
    CHECK(id.d_hat == doctest::Approx(1.0).epsilon(0.3));
}

// ---------------------------------------------------------------------------
// Training commands
// ---------------------------------------------------------------------------

TEST_CASE("phase-1 training writes a loadable checkpoint and a full log") {
    const fs::path dir = scratch("train_phase1");
    ExperimentConfig cfg = tiny_config(dir / "run");
    cmd_generate(cfg);

    TrainOptions opts;
    opts.phase = 1;
    opts.steps = 10;
    const TrainResult res = cmd_train(cfg, opts);
    CHECK(res.log1.rows.size() == 10);
    CHECK(res.log2.rows.empty());

    REQUIRE(fs::exists(res.phase1_ckpt));
    TrainState state;
    const Model m = load_train_checkpoint(res.phase1_ckpt, state);
    CHECK(state.step == 10);
    CHECK(m.cfg.latent == cfg.model.latent);

    const std::string log = slurp(fs::path(cfg.output_dir) / "train_phase1.csv");
    CHECK(log.rfind("# config_hash=", 0) == 0);
    CHECK(std::count(log.begin(), log.end(), '\n') == 12);  // hash + header + 10 rows

    const std::string conf = slurp(fs::path(cfg.output_dir) / "config.txt");
    CHECK(conf.rfind("# config_hash=", 0) == 0);
    CHECK(conf.find("system.kind") != std::string::npos);
}

TEST_CASE("two-phase training records the ranked selection") {
    const fs::path dir = scratch("train_full");
    ExperimentConfig cfg = tiny_config(dir / "run");
    cmd_generate(cfg);

    const TrainResult res = cmd_train(cfg);
    CHECK(res.log1.rows.size() == cfg.phase1.steps);
    CHECK(res.log2.rows.size() == cfg.phase2.steps);
    REQUIRE(res.selected.size() == cfg.d_select_effective());
    for (std::size_t d : res.selected) CHECK(d < cfg.model.latent);
    REQUIRE(res.ranked.size() == cfg.model.latent);

    const std::string sel = slurp(fs::path(cfg.output_dir) / "selection.csv");
    CHECK(sel.rfind("# config_hash=", 0) == 0);
    CHECK(sel.find("rank,dim,score,selected") != std::string::npos);

    TrainState state;
    const Model m2 = load_train_checkpoint(res.phase2_ckpt, state);
    CHECK(m2.selected_dims() == res.selected);
}

TEST_CASE("lambda zero trains exactly like phase 1 alone") {
    const fs::path dir = scratch("lyap_zero");

    ExperimentConfig zero = tiny_config(dir / "zero");
    zero.model.lambda_lyap = 0.0;
    zero.finalize();
    cmd_generate(zero);
    const TrainResult res_zero = cmd_train(zero);
    CHECK(res_zero.phase2_ckpt.empty());
    CHECK(!fs::exists(fs::path(zero.output_dir) / "phase2.lytc"));

    ExperimentConfig p1 = tiny_config(dir / "p1");
    cmd_generate(p1);
    TrainOptions opts;
    opts.phase = 1;
    const TrainResult res_p1 = cmd_train(p1, opts);

    check_tensors_equal(read_checkpoint(res_zero.phase1_ckpt), read_checkpoint(res_p1.phase1_ckpt));
}

TEST_CASE("training resumes bit-exactly and reruns reproduce every artifact") {
    const fs::path dir = scratch("resume");
    ExperimentConfig cfg = tiny_config(dir / "run");
    cmd_generate(cfg);
    const fs::path ckpt_path = fs::path(cfg.output_dir) / "phase1.lytc";
    const fs::path log_path = fs::path(cfg.output_dir) / "train_phase1.csv";

    TrainOptions opts10;
    opts10.phase = 1;
    opts10.steps = 10;
    const TrainResult one_shot = cmd_train(cfg, opts10);
    const std::string ckpt10 = slurp(ckpt_path);
    const std::string log10 = slurp(log_path);

    // Fixed-seed rerun: the complete run restarts from scratch and reproduces
    // checkpoint and log byte for byte.
    cmd_train(cfg, opts10);
    CHECK(slurp(ckpt_path) == ckpt10);
    CHECK(slurp(log_path) == log10);

    // Interrupt at step 5, then resume: same final checkpoint bytes, and the
    // overlapping log rows agree exactly with the uninterrupted run.
    TrainOptions opts5 = opts10;
    opts5.steps = 5;
    cmd_train(cfg, opts5);
    const TrainResult resumed = cmd_train(cfg, opts10);
    REQUIRE(resumed.log1.rows.size() == 5);
    CHECK(resumed.log1.rows.front().step == 5);
    CHECK(slurp(ckpt_path) == ckpt10);
    for (std::size_t i = 0; i < 5; ++i) {
        CHECK(resumed.log1.rows[i].l_total == one_shot.log1.rows[i + 5].l_total);
        CHECK(resumed.log1.rows[i].gnorm == one_shot.log1.rows[i + 5].gnorm);
    }

    // Complete checkpoints are left untouched under no-overwrite.
    TrainOptions keep = opts10;
    keep.no_overwrite = true;
    const TrainResult kept = cmd_train(cfg, keep);
    CHECK(kept.skipped);
    CHECK(slurp(ckpt_path) == ckpt10);
}

// ---------------------------------------------------------------------------
// Evaluate / ablate / plot
// ---------------------------------------------------------------------------

TEST_CASE("evaluating an untrained model yields finite rows with split detail") {
    const fs::path dir = scratch("eval_untrained");
    ExperimentConfig cfg = tiny_config(dir / "run");
    cmd_generate(cfg);

    const ExperimentReport report = cmd_evaluate(cfg);
    REQUIRE(!report.rows.empty());
    for (const EvalRow& row : report.rows) {
        CAPTURE(row.metric);
        CAPTURE(row.dataset);
        CHECK(std::isfinite(row.value));
        for (real v : row.split_values) CHECK(std::isfinite(v));
    }
    for (const char* variant_c : {"none", "background"}) {
        const std::string variant = variant_c;
        const EvalRow* id = report.find("id", variant);
        REQUIRE(id != nullptr);
        CHECK(id->split_values.size() == 3);
        real mean = 0;
        for (real v : id->split_values) mean += v;
        mean /= 3;
        CHECK(id->value == doctest::Approx(mean).epsilon(1e-12));
        CHECK(report.find("mi", variant) != nullptr);
        CHECK(report.find("amse", variant) != nullptr);
        CHECK(report.find("rollout_k", variant) != nullptr);
        CHECK(report.find("rollout_long", variant) != nullptr);
        CHECK(report.find("l_lyap", variant) != nullptr);
        REQUIRE(fs::exists(fs::path(cfg.output_dir) / ("mi_matrix_" + variant + ".csv")));
    }
    CHECK(report.find("overlap", "all") != nullptr);

    const std::string csv = slurp(fs::path(cfg.output_dir) / "report.csv");
    CHECK(csv.rfind("# config_hash=", 0) == 0);
    CHECK(csv.find("metric,dataset,value,std,split_values") != std::string::npos);
}

TEST_CASE("latent extraction is causal in the context window") {
    ExperimentConfig cfg = tiny_config(fs::temp_directory_path() / "lyt_unused");
    Model model = Model::init(cfg.model, 11);

    const std::size_t t = 10, fsz = cfg.model.frame_size();
    VideoClip a;
    a.t = t;
    a.h = cfg.model.frame_h;
    a.w = cfg.model.frame_w;
    a.c = 1;
    a.frames.resize(t * fsz);
    Rng rng = Rng::keyed(3, {9});
    for (real& v : a.frames) v = rng.uniform();
    VideoClip b = a;  // same first 7 frames, different tail
    for (std::size_t i = 7 * fsz; i < b.frames.size(); ++i) b.frames[i] = rng.uniform();

    const LatentSequence za = extract_latents(model, a);
    const LatentSequence zb = extract_latents(model, b);
    REQUIRE(za.z.rows == t - cfg.model.t_ctx + 1);  // one row per full window
    REQUIRE(za.z.cols == cfg.model.latent);

    // Windows ending before frame 7 agree exactly; later windows must differ.
    for (std::size_t r = 0; r + cfg.model.t_ctx <= 7; ++r)
        for (std::size_t c = 0; c < za.z.cols; ++c) CHECK(za.z(r, c) == zb.z(r, c));
    real diff = 0;
    const std::size_t last = za.z.rows - 1;
    for (std::size_t c = 0; c < za.z.cols; ++c)
        diff = std::max(diff, std::abs(za.z(last, c) - zb.z(last, c)));
    CHECK(diff > 0);

    VideoClip shorter = a;
    shorter.t = cfg.model.t_ctx - 1;
    shorter.frames.resize(shorter.t * fsz);
    CHECK_THROWS_AS((void)extract_latents(model, shorter), ContractError);
}

TEST_CASE("the ablation grid spans variants and budget-matched regularization") {
    const fs::path dir = scratch("ablate");
    ExperimentConfig cfg = tiny_config(dir / "run");
    cfg.phase1.steps = 4;
    cfg.phase2.steps = 3;
    cfg.finalize();
    cmd_generate(cfg);

    const AblateResult res = cmd_ablate(cfg);
    REQUIRE(res.cells.size() == 4);

    std::size_t full_on = 0, full_off = 0, lite_on = 0, lite_off = 0;
    for (const AblateCell& cell : res.cells) {
        (cell.lite ? (cell.lambda_lyap > 0 ? lite_on : lite_off)
                   : (cell.lambda_lyap > 0 ? full_on : full_off))++;
        CHECK(std::isfinite(cell.id_err));
        const EvalRow* lyap = cell.report.find("l_lyap", "none");
        REQUIRE(lyap != nullptr);
        CHECK(std::isfinite(lyap->value));
        CHECK(lyap->value >= 0);
    }
    CHECK(full_on == 1);
    CHECK(full_off == 1);
    CHECK(lite_on == 1);
    CHECK(lite_off == 1);

    real flops_full = 0, flops_lite = 0;
    for (const AblateCell& cell : res.cells)
        (cell.lite ? flops_lite : flops_full) = cell.flops;
    CHECK(flops_lite < flops_full);

    const std::string lyap_csv = slurp(fs::path(cfg.output_dir) / "table_lyapunov.csv");
    CHECK(lyap_csv.rfind("# config_hash=", 0) == 0);
    CHECK(std::count(lyap_csv.begin(), lyap_csv.end(), '\n') == 6);  // hash + header + 4 rows
    const std::string enc_csv = slurp(fs::path(cfg.output_dir) / "table_encoder.csv");
    CHECK(std::count(enc_csv.begin(), enc_csv.end(), '\n') == 6);
}

TEST_CASE("plot emits deterministic well-formed svg files") {
    const fs::path dir = scratch("plot");
    ExperimentConfig cfg = tiny_config(dir / "run");
    cfg.phase1.steps = 4;
    cfg.phase2.steps = 3;
    cfg.finalize();
    cmd_generate(cfg);
    cmd_train(cfg);

    const std::vector<fs::path> files = cmd_plot(cfg);
    REQUIRE(!files.empty());
    bool saw_overlay = false, saw_scores = false, saw_loss = false;
    for (const fs::path& f : files) {
        REQUIRE(fs::exists(f));
        const std::string svg = slurp(f);
        check_well_formed_xml(svg);
        CHECK(svg.find("config_hash=") != std::string::npos);
        const std::string name = f.filename().string();
        saw_overlay |= name.rfind("overlay_", 0) == 0;
        saw_scores |= name == "ranked_scores.svg";
        saw_loss |= name.rfind("loss_phase", 0) == 0;
    }
    CHECK(saw_overlay);
    CHECK(saw_scores);
    CHECK(saw_loss);

    // Same latents, same plots: a second run must reproduce identical bytes.
    std::vector<std::string> before;
    for (const fs::path& f : files) before.push_back(slurp(f));
    const std::vector<fs::path> files2 = cmd_plot(cfg);
    REQUIRE(files2.size() == files.size());
    for (std::size_t i = 0; i < files.size(); ++i) CHECK(slurp(files2[i]) == before[i]);
}
