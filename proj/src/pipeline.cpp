#include "lyt/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "lyt/flops.hpp"
#include "lyt/io.hpp"
#include "lyt/ops.hpp"
#include "lyt/svg.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace lyt {

namespace {

std::string hex16(std::uint64_t h) {
    char buf[20];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string fmt(real v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string clip_stem(std::size_t i) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "clip_%04u", static_cast<unsigned>(i));
    return buf;
}

// Integrator rows per rendered frame; frame times must lie on the dt grid.
std::size_t frame_stride(const ExperimentConfig& cfg) {
    const real exact = 1.0 / (cfg.data.fps * cfg.system.dt);
    const auto stride = static_cast<std::size_t>(std::llround(exact));
    if (stride < 1 || std::fabs(real(stride) - exact) > 1e-6)
        throw ConfigError("data.fps must subdivide the integrator step 1/dt");
    return stride;
}

// Full-rate trajectory backing one clip (frame-aligned already for RD).
StateTrajectory full_trajectory(const ExperimentConfig& cfg, std::uint32_t split_id,
                                std::uint32_t index) {
    Rng rng = Rng::keyed(cfg.seed, {TAG_DATASET, split_id, index});
    const std::vector<real> init = default_initial_state(cfg.system, rng);
    const std::size_t frames = cfg.frames_per_clip();
    if (cfg.system.kind == SystemKind::ReactionDiffusion)
        return simulate_rd(cfg.system, init, frames, 1.0 / cfg.data.fps);
    return integrate_rk4(cfg.system, init, (frames - 1) * frame_stride(cfg));
}

// Mean-field summary of a reaction-diffusion trajectory: (mean_u, mean_v).
StateTrajectory rd_summary(const StateTrajectory& traj) {
    const std::size_t cells = traj.dim / 2;
    StateTrajectory out;
    out.times = traj.times;
    out.dim = 2;
    out.states.resize(traj.length() * 2);
    for (std::size_t i = 0; i < traj.length(); ++i) {
        const real* s = traj.state(i);
        real mu = 0, mv = 0;
        for (std::size_t c = 0; c < cells; ++c) {
            mu += s[c];
            mv += s[cells + c];
        }
        out.states[2 * i] = mu / real(cells);
        out.states[2 * i + 1] = mv / real(cells);
    }
    return out;
}

StateTrajectory frame_states(const ExperimentConfig& cfg, const StateTrajectory& full) {
    if (cfg.system.kind == SystemKind::ReactionDiffusion) return rd_summary(full);
    return subsample(full, frame_stride(cfg));
}

std::vector<std::string> target_names(SystemKind kind) {
    switch (kind) {
        case SystemKind::CircularMotion: return {"x", "y"};
        case SystemKind::SinglePendulum: return {"th", "th_dot"};
        case SystemKind::DoublePendulum: return {"th1", "th2", "th1_dot", "th2_dot"};
        case SystemKind::ElasticPendulum: return {"r", "th", "r_dot", "th_dot", "x", "y"};
        case SystemKind::ReactionDiffusion: return {"mean_u", "mean_v"};
    }
    throw ContractError("target_names: unknown SystemKind");
}

VideoClip make_clip(const ExperimentConfig& cfg, const StateTrajectory& traj) {
    VideoClip clip = render_clip(cfg.system, traj, cfg.data.fps, cfg.data.h, cfg.data.w);
    if (clip.t != cfg.frames_per_clip())
        throw ContractError("cmd_generate: rendered frame count drifted from the config");
    clip.seed = cfg.seed;
    clip.source = to_string(cfg.system.kind);
    return clip;
}

void write_states_csv(const fs::path& path, const StateTrajectory& traj) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    write_trajectory_csv(traj, os);
}

// Latents + frame-aligned targets for one split, stacked across clips.
struct SplitLatents {
    Mat z;                     // rows = sum over clips of (T - t_ctx + 1)
    Mat s;                     // aligned probe targets
    std::vector<Mat> per_clip;  // per-clip latent blocks (all columns)
};

SplitLatents collect_latents(const ExperimentConfig& cfg, const Model& model,
                             const DatasetSplit& split) {
    SplitLatents out;
    const std::size_t d_z = model.cfg.latent;
    std::vector<Mat> targets;
    std::size_t total = 0;
    for (std::size_t i = 0; i < split.clips.size(); ++i) {
        LatentSequence ls = extract_latents(model, split.clips[i]);
        Mat st = probe_targets(cfg.system.kind, split.states[i]);
        if (st.rows != split.clips[i].t)
            throw ContractError("collect_latents: states not frame-aligned");
        out.per_clip.push_back(ls.z);
        targets.push_back(std::move(st));
        total += ls.z.rows;
    }
    const std::size_t d_s = targets.empty() ? 0 : targets[0].cols;
    out.z = Mat(total, d_z);
    out.s = Mat(total, d_s);
    std::size_t r = 0;
    const std::size_t skip = model.cfg.t_ctx - 1;
    for (std::size_t i = 0; i < out.per_clip.size(); ++i) {
        const Mat& z = out.per_clip[i];
        for (std::size_t t = 0; t < z.rows; ++t, ++r) {
            std::copy(z.row(t), z.row(t) + d_z, out.z.row(r));
            std::copy(targets[i].row(t + skip), targets[i].row(t + skip) + d_s, out.s.row(r));
        }
    }
    return out;
}

std::string variant_of(const std::string& split_name) {
    return split_name.rfind("eval_", 0) == 0 ? split_name.substr(5) : split_name;
}

void write_selection_csv(const fs::path& path, std::uint64_t hash,
                         const std::vector<std::size_t>& ranked, const std::vector<real>& scores,
                         const std::vector<std::size_t>& selected) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    os << "# config_hash=" << hex16(hash) << "\n";
    os << "rank,dim,score,selected\n";
    for (std::size_t r = 0; r < ranked.size(); ++r) {
        const std::size_t d = ranked[r];
        const bool sel = std::find(selected.begin(), selected.end(), d) != selected.end();
        os << r << "," << d << "," << fmt(scores[d]) << "," << (sel ? 1 : 0) << "\n";
    }
}

Tensor identity_w(std::size_t m) {
    std::vector<real> data(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) data[i * m + i] = 1.0;
    return Tensor::from(std::move(data), {m, m}, false);
}

// Measured Lyapunov hinge over the first window of each clip. Selection is
// passed in so untrained models (no installed head) can still be measured.
real measured_lyap(const Model& model, const std::vector<VideoClip>& clips,
                   const std::vector<std::size_t>& selected, const Tensor& w, std::size_t K) {
    NoGrad ng;
    auto pick = [&](const Tensor& z) { return transpose(gather_rows(transpose(z), selected)); };
    real sum = 0;
    for (const VideoClip& clip : clips) {
        EncodeResult enc = model.encode(clip.frame(0), model.cfg.t_ctx);
        Tensor z_last = gather_rows(enc.z, {model.cfg.t_ctx - 1});
        std::vector<Tensor> roll = model.rollout(z_last, K);
        std::vector<Tensor> chain;
        chain.reserve(K + 1);
        chain.push_back(pick(z_last));
        for (const Tensor& zk : roll) chain.push_back(pick(zk));
        sum += loss_lyap(chain, w).item();
    }
    return sum / real(clips.size());
}

void add_hash_comment(std::string& svg, std::uint64_t hash) {
    const auto nl = svg.find('\n');
    if (nl != std::string::npos)
        svg.insert(nl + 1, "<!-- config_hash=" + hex16(hash) + " -->\n");
}

struct ParsedLog {
    std::vector<real> step, l_rec, l_pred, l_lyap, l_total;
};

ParsedLog parse_train_csv(const fs::path& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot read " + path.string());
    ParsedLog out;
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#' || line.rfind("step,", 0) == 0) continue;
        std::istringstream ls(line);
        std::string cell;
        std::vector<real> vals;
        while (std::getline(ls, cell, ',')) vals.push_back(std::stod(cell));
        if (vals.size() < 5) continue;
        out.step.push_back(vals[0]);
        out.l_rec.push_back(vals[1]);
        out.l_pred.push_back(vals[2]);
        out.l_lyap.push_back(vals[3]);
        out.l_total.push_back(vals[4]);
    }
    return out;
}

// Selected dims for evaluation: the checkpointed choice when present, else
// ranked on clean training latents.
std::vector<std::size_t> resolve_selection(const ExperimentConfig& cfg, const Model& model,
                                           const Dataset& ds) {
    if (!model.selected_dims().empty()) return model.selected_dims();
    SplitLatents train = collect_latents(cfg, model, ds.train);
    std::vector<std::size_t> ranked = rank_dimensions(train.z, train.s, cfg.metrics.criterion);
    const std::size_t n = std::min(cfg.d_select_effective(), ranked.size());
    return std::vector<std::size_t>(ranked.begin(), ranked.begin() + n);
}

ExperimentReport evaluate_on(const ExperimentConfig& cfg, const Model& model, const Dataset& ds,
                             std::size_t n_variants, const fs::path& out_dir) {
    ExperimentReport report;
    report.config_hash = cfg.hash();
    report.seed = cfg.seed;
    const std::size_t K = model.cfg.horizon;
    const std::vector<std::size_t> selected = resolve_selection(cfg, model, ds);
    const Tensor w = model.has_param("lyap.w") ? model.lyapunov_w() : identity_w(selected.size());
    const std::vector<std::string> names = target_names(cfg.system.kind);

    std::vector<std::vector<Mat>> sel_runs;  // per variant, per clip: selected latents
    const std::size_t limit = std::min(n_variants, ds.eval.size());
    for (std::size_t v = 0; v < limit; ++v) {
        const DatasetSplit& split = ds.eval[v];
        const std::string variant = variant_of(split.name);
        SplitLatents lat = collect_latents(cfg, model, split);
        Mat z_sel = lat.z.select_cols(selected);

        std::vector<Mat> runs;
        for (const Mat& z : lat.per_clip) runs.push_back(z.select_cols(selected));
        sel_runs.push_back(std::move(runs));

        MIResult mi = total_mi(z_sel, lat.s);
        report.rows.push_back({"mi", variant, mi.total, 0, {}});
        {
            std::ofstream os(out_dir / ("mi_matrix_" + variant + ".csv"));
            if (!os) throw IoError("cannot write mi matrix for " + variant);
            os << "# config_hash=" << hex16(report.config_hash) << "\n";
            os << "dim";
            for (const auto& n : names) os << "," << n;
            os << "\n";
            for (std::size_t i = 0; i < mi.pairwise.rows; ++i) {
                os << "z" << selected[i];
                for (std::size_t j = 0; j < mi.pairwise.cols; ++j)
                    os << "," << fmt(mi.pairwise(i, j));
                os << "\n";
            }
        }

        ProbeResult probe = fit_linear_probe(z_sel, lat.s);
        report.rows.push_back({"amse", variant, probe.amse, 0, {}});
        real r2_min = 1.0;
        for (real r2 : probe.r2) r2_min = std::min(r2_min, r2);
        report.rows.push_back({"r2_min", variant, r2_min, 0, {}});

        IDResult id_full = intrinsic_dimension_2nn(lat.z);
        report.rows.push_back({"id", variant, id_full.split_mean, id_full.split_std,
                               id_full.splits});
        report.rows.push_back({"id_full", variant, id_full.d_hat, 0, {}});
        IDResult id_sel = intrinsic_dimension_2nn(z_sel);
        report.rows.push_back({"id_sel", variant, id_sel.split_mean, id_sel.split_std,
                               id_sel.splits});

        PredEval pk = eval_prediction(model, split.clips, K);
        report.rows.push_back({"rollout_k", variant, pk.model_err, 0, {}});
        report.rows.push_back({"rollout_static_k", variant, pk.static_err, 0, {}});
        std::size_t min_t = split.clips.front().t;
        for (const VideoClip& c : split.clips) min_t = std::min(min_t, c.t);
        const std::size_t h_long = std::min(4 * K, min_t - model.cfg.t_ctx);
        PredEval pl = eval_prediction(model, split.clips, h_long);
        report.rows.push_back({"rollout_long", variant, pl.model_err, 0, {}});
        report.rows.push_back({"rollout_static_long", variant, pl.static_err, 0, {}});

        report.rows.push_back(
            {"l_lyap", variant, measured_lyap(model, split.clips, selected, w, K), 0, {}});
    }

    if (limit >= 2) {
        std::vector<real> per_clip;
        const std::size_t n_clips = sel_runs[0].size();
        for (std::size_t i = 0; i < n_clips; ++i) {
            std::vector<Mat> runs;
            for (std::size_t v = 0; v < limit; ++v) runs.push_back(sel_runs[v][i]);
            per_clip.push_back(disentanglement_overlap(runs));
        }
        real mean = 0;
        for (real o : per_clip) mean += o;
        mean /= real(per_clip.size());
        real var = 0;
        for (real o : per_clip) var += (o - mean) * (o - mean);
        const real sd = per_clip.size() > 1 ? std::sqrt(var / real(per_clip.size() - 1)) : 0.0;
        report.rows.push_back({"overlap", "all", mean, sd, per_clip});
    }
    return report;
}

}  // namespace

// ---------------------------------------------------------------- dataset

std::filesystem::path dataset_dir(const ExperimentConfig& cfg) {
    return fs::path(cfg.output_dir) / "dataset";
}

StateTrajectory simulate_clip_states(const ExperimentConfig& cfg, std::uint32_t split_id,
                                     std::uint32_t index) {
    return frame_states(cfg, full_trajectory(cfg, split_id, index));
}

Mat probe_targets(SystemKind kind, const StateTrajectory& traj) {
    const std::size_t T = traj.length();
    if (kind == SystemKind::ReactionDiffusion) {
        const StateTrajectory summary = traj.dim == 2 ? traj : rd_summary(traj);
        Mat out(T, 2);
        for (std::size_t i = 0; i < T; ++i) {
            out(i, 0) = summary.state(i)[0];
            out(i, 1) = summary.state(i)[1];
        }
        return out;
    }
    if (kind == SystemKind::ElasticPendulum) {
        require(traj.dim == 4, "probe_targets: elastic pendulum state must be 4-dimensional");
        Mat out(T, 6);
        for (std::size_t i = 0; i < T; ++i) {
            const real* s = traj.state(i);
            out(i, 0) = s[0];
            out(i, 1) = s[1];
            out(i, 2) = s[2];
            out(i, 3) = s[3];
            out(i, 4) = s[0] * std::sin(s[1]);   // x = r sin(th)
            out(i, 5) = -s[0] * std::cos(s[1]);  // y = -r cos(th), hanging down
        }
        return out;
    }
    Mat out(T, traj.dim);
    for (std::size_t i = 0; i < T; ++i)
        std::copy(traj.state(i), traj.state(i) + traj.dim, out.row(i));
    return out;
}

GenerateResult cmd_generate(const ExperimentConfig& cfg, bool no_overwrite) {
    cfg.validate();
    GenerateResult res;
    res.dir = dataset_dir(cfg);
    res.n_train = cfg.data.n_train;
    res.n_eval = cfg.data.n_eval;
    const fs::path manifest_path = res.dir / "manifest.json";
    if (fs::exists(manifest_path)) {
        if (no_overwrite) {
            res.skipped = true;
            return res;
        }
        fs::remove_all(res.dir);
    }

    json manifest;
    manifest["config_hash"] = hex16(cfg.hash());
    manifest["seed"] = cfg.seed;
    manifest["system"] = to_string(cfg.system.kind);
    manifest["fps"] = cfg.data.fps;
    manifest["frames_per_clip"] = cfg.frames_per_clip();
    manifest["splits"] = json::array();

    auto write_split = [&](const std::string& name, const std::string& preset,
                           const std::vector<StateTrajectory>& trajs,
                           const std::vector<StateTrajectory>& frame_trajs,
                           std::uint64_t distract_tag) {
        const fs::path split_dir = res.dir / name;
        fs::create_directories(split_dir);
        const DistractorConfig base = distractor_preset(preset);
        json files = json::array();
        for (std::size_t i = 0; i < trajs.size(); ++i) {
            VideoClip clip = make_clip(cfg, trajs[i]);
            if (!base.is_identity()) {
                DistractorConfig dc = base;
                dc.seed = Rng::keyed(cfg.seed, {TAG_DISTRACT, distract_tag, i}).next_u64();
                clip = apply_distractors(clip, dc);
            }
            const std::string stem = clip_stem(i);
            write_clip(clip, split_dir / (stem + ".lytv"));
            write_states_csv(split_dir / (stem + "_states.csv"), frame_trajs[i]);
            files.push_back(name + "/" + stem + ".lytv");
        }
        json entry;
        entry["name"] = name;
        entry["distractor"] = preset;
        entry["clips"] = trajs.size();
        entry["files"] = files;
        manifest["splits"].push_back(entry);
    };

    {
        std::vector<StateTrajectory> full(cfg.data.n_train), aligned(cfg.data.n_train);
        for (std::size_t i = 0; i < cfg.data.n_train; ++i) {
            full[i] = full_trajectory(cfg, 0, std::uint32_t(i));
            aligned[i] = frame_states(cfg, full[i]);
        }
        write_split("train", "none", full, aligned, 0);
    }
    {
        std::vector<StateTrajectory> full(cfg.data.n_eval), aligned(cfg.data.n_eval);
        for (std::size_t i = 0; i < cfg.data.n_eval; ++i) {
            full[i] = full_trajectory(cfg, 1, std::uint32_t(i));
            aligned[i] = frame_states(cfg, full[i]);
        }
        for (std::size_t v = 0; v < cfg.distract_eval.size(); ++v)
            write_split("eval_" + cfg.distract_eval[v], cfg.distract_eval[v], full, aligned,
                        1000 + v);
    }

    write_text_file(manifest_path, manifest.dump(2) + "\n");
    return res;
}

Dataset load_dataset(const ExperimentConfig& cfg) {
    const fs::path dir = dataset_dir(cfg);
    const fs::path manifest_path = dir / "manifest.json";
    if (!fs::exists(manifest_path))
        throw IoError("dataset not found: " + manifest_path.string() + " (run generate first)");
    json manifest;
    try {
        manifest = json::parse(read_text_file(manifest_path));
    } catch (const json::exception& e) {
        throw IoError("bad manifest " + manifest_path.string() + ": " + e.what());
    }
    if (manifest.value("config_hash", "") != hex16(cfg.hash()))
        throw IoError("dataset at " + dir.string() + " was generated from a different config");

    Dataset ds;
    for (const auto& entry : manifest.at("splits")) {
        DatasetSplit split;
        split.name = entry.at("name").get<std::string>();
        const std::size_t count = entry.at("clips").get<std::size_t>();
        const fs::path split_dir = dir / split.name;
        for (std::size_t i = 0; i < count; ++i) {
            const std::string stem = clip_stem(i);
            VideoClip clip = read_clip(split_dir / (stem + ".lytv"));
            clip.fps = cfg.data.fps;
            clip.seed = cfg.seed;
            clip.source = to_string(cfg.system.kind);
            clip.background = canonical_background(cfg.system.kind);
            split.clips.push_back(std::move(clip));
            std::ifstream is(split_dir / (stem + "_states.csv"));
            if (!is) throw IoError("missing states csv for " + split.name + "/" + stem);
            split.states.push_back(read_trajectory_csv(is));
        }
        if (split.name == "train")
            ds.train = std::move(split);
        else
            ds.eval.push_back(std::move(split));
    }
    if (ds.train.clips.empty()) throw IoError("dataset has no train split: " + dir.string());
    return ds;
}

// ---------------------------------------------------------------- latents

LatentSequence extract_latents(const Model& model, const VideoClip& clip) {
    const std::size_t tc = model.cfg.t_ctx;
    require(clip.t >= tc, "extract_latents: clip shorter than the context window");
    require(clip.frame_size() == model.cfg.frame_size(),
            "extract_latents: clip geometry does not match the model");
    NoGrad ng;
    const std::size_t n = clip.t - tc + 1;
    LatentSequence out;
    out.clip_id = clip.source;
    out.z = Mat(n, model.cfg.latent);
    for (std::size_t r = 0; r < n; ++r) {
        EncodeResult enc = model.encode(clip.frame(r), tc);
        const std::vector<real>& z = enc.z.data();
        std::copy(z.begin() + (tc - 1) * model.cfg.latent, z.begin() + tc * model.cfg.latent,
                  out.z.row(r));
    }
    return out;
}

// ---------------------------------------------------------------- training

TrainResult cmd_train(const ExperimentConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    if (opts.phase < 0 || opts.phase > 2)
        throw ConfigError("cmd_train: phase must be 0 (both), 1, or 2");
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    const std::uint64_t hash = cfg.hash();
    const std::string hash_kv = "config_hash=" + hex16(hash) + "\n";
    write_text_file(dir / "config.txt", "# config_hash=" + hex16(hash) + "\n" + cfg.to_text());

    const Dataset ds = load_dataset(cfg);

    TrainResult res;
    res.phase1_ckpt = dir / "phase1.lytc";
    const bool lyap_on = cfg.model.lambda_lyap > 0;
    const bool want1 = opts.phase != 2;
    const bool want2 = opts.phase != 1 && lyap_on;

    Model model = Model::init(cfg.model, cfg.seed);
    TrainState st1;
    bool have_model = false;

    if (want1) {
        TrainConfig p1 = cfg.phase1;
        if (opts.steps) p1.steps = opts.steps;
        bool run = true;
        if (fs::exists(res.phase1_ckpt)) {
            TrainState st;
            Model loaded = load_train_checkpoint(res.phase1_ckpt, st);
            if (st.step >= p1.steps) {
                if (opts.no_overwrite) {  // complete: keep as-is
                    model = loaded;
                    st1 = st;
                    run = false;
                    res.skipped = true;
                }
                // else: retrain from scratch, reproducing the file bit-exactly
            } else {  // partial: resume
                model = loaded;
                st1 = st;
            }
        }
        if (run) {
            res.log1 = train_phase1(model, ds.train.clips, p1, &st1);
            save_train_checkpoint(res.phase1_ckpt, model, st1, 1, false, hash_kv);
            std::ofstream os(dir / "train_phase1.csv");
            if (!os) throw IoError("cannot write train_phase1.csv");
            res.log1.to_csv(os, hash);
        }
        have_model = true;
    }
    if (!want2) return res;

    res.phase2_ckpt = dir / "phase2.lytc";
    TrainConfig p2 = cfg.phase2;
    if (opts.steps) p2.steps = opts.steps;

    Model m2;
    TrainState st2;
    bool resume2 = false;
    if (fs::exists(res.phase2_ckpt)) {
        TrainState st;
        Model loaded = load_train_checkpoint(res.phase2_ckpt, st);
        if (st.step >= p2.steps) {
            if (opts.no_overwrite) {
                res.selected = loaded.selected_dims();
                res.skipped = true;
                return res;
            }
        } else {
            m2 = std::move(loaded);
            st2 = st;
            resume2 = true;
        }
    }
    if (!resume2) {
        if (!have_model) {
            if (!fs::exists(res.phase1_ckpt))
                throw IoError("cmd_train: phase 2 requested but " + res.phase1_ckpt.string() +
                              " does not exist; run phase 1 first");
            TrainState st;
            model = load_train_checkpoint(res.phase1_ckpt, st);
        }
        SplitLatents train = collect_latents(cfg, model, ds.train);
        res.ranked = rank_dimensions(train.z, train.s, cfg.metrics.criterion);
        const std::vector<real> scores =
            dimension_scores(train.z, train.s, cfg.metrics.criterion);
        const std::size_t n_sel = std::min(cfg.d_select_effective(), res.ranked.size());
        res.selected.assign(res.ranked.begin(), res.ranked.begin() + n_sel);
        write_selection_csv(dir / "selection.csv", hash, res.ranked, scores, res.selected);
        m2 = model;
        m2.init_lyapunov(res.selected);
    } else {
        res.selected = m2.selected_dims();
    }
    res.log2 = train_phase2(m2, ds.train.clips, p2, &st2);
    save_train_checkpoint(res.phase2_ckpt, m2, st2, 2, cfg.phase2.phase2_unfreeze, hash_kv);
    std::ofstream os(dir / "train_phase2.csv");
    if (!os) throw IoError("cannot write train_phase2.csv");
    res.log2.to_csv(os, hash);
    return res;
}

// ---------------------------------------------------------------- evaluation

void ExperimentReport::to_csv(std::ostream& os) const {
    os << "# config_hash=" << hex16(config_hash) << " seed=" << seed << "\n";
    os << "metric,dataset,value,std,split_values\n";
    for (const EvalRow& row : rows) {
        os << row.metric << "," << row.dataset << "," << fmt(row.value) << ","
           << fmt(row.std_dev) << ",";
        for (std::size_t i = 0; i < row.split_values.size(); ++i)
            os << (i ? "|" : "") << fmt(row.split_values[i]);
        os << "\n";
    }
}

const EvalRow* ExperimentReport::find(const std::string& metric,
                                      const std::string& dataset) const {
    for (const EvalRow& row : rows)
        if (row.metric == metric && row.dataset == dataset) return &row;
    return nullptr;
}

ExperimentReport cmd_evaluate(const ExperimentConfig& cfg,
                              const std::filesystem::path& checkpoint) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    const Dataset ds = load_dataset(cfg);

    Model model;
    fs::path ck = checkpoint;
    if (ck.empty()) {
        if (fs::exists(dir / "phase2.lytc"))
            ck = dir / "phase2.lytc";
        else if (fs::exists(dir / "phase1.lytc"))
            ck = dir / "phase1.lytc";
    }
    if (!ck.empty()) {
        TrainState st;
        model = load_train_checkpoint(ck, st);
    } else {
        model = Model::init(cfg.model, cfg.seed);  // untrained evaluation
    }

    ExperimentReport report = evaluate_on(cfg, model, ds, ds.eval.size(), dir);
    std::ofstream os(dir / "report.csv");
    if (!os) throw IoError("cannot write report.csv");
    report.to_csv(os);
    return report;
}

// ---------------------------------------------------------------- ablation

void AblateResult::table_lyap_csv(std::ostream& os) const {
    os << "variant,lambda_lyap,mi,amse,long_horizon,l_lyap\n";
    for (const AblateCell& cell : cells) {
        const std::string ds =
            cell.report.rows.empty() ? std::string() : cell.report.rows.front().dataset;
        auto get = [&](const char* m) {
            const EvalRow* row = cell.report.find(m, ds);
            return row ? row->value : std::nan("");
        };
        os << cell.name << "," << fmt(cell.lambda_lyap) << "," << fmt(get("mi")) << ","
           << fmt(get("amse")) << "," << fmt(get("rollout_long")) << "," << fmt(get("l_lyap"))
           << "\n";
    }
}

void AblateResult::table_encoder_csv(std::ostream& os) const {
    os << "variant,flops,mi,amse,id_err\n";
    for (const AblateCell& cell : cells) {
        const std::string ds =
            cell.report.rows.empty() ? std::string() : cell.report.rows.front().dataset;
        auto get = [&](const char* m) {
            const EvalRow* row = cell.report.find(m, ds);
            return row ? row->value : std::nan("");
        };
        os << cell.name << "," << cell.flops << "," << fmt(get("mi")) << "," << fmt(get("amse"))
           << "," << fmt(cell.id_err) << "\n";
    }
}

AblateResult cmd_ablate(const ExperimentConfig& cfg) {
    cfg.validate();
    const Dataset ds = load_dataset(cfg);
    const real lam_on = cfg.model.lambda_lyap > 0 ? cfg.model.lambda_lyap : 0.1;
    struct CellDef {
        const char* name;
        bool lite;
        real lam;
    };
    const CellDef defs[4] = {{"full_lyap", false, lam_on},
                             {"full_nolyap", false, 0.0},
                             {"lite_lyap", true, lam_on},
                             {"lite_nolyap", true, 0.0}};

    AblateResult out;
    for (const CellDef& defn : defs) {
        ExperimentConfig c = cfg;
        c.output_dir = (fs::path(cfg.output_dir) / "ablate" / defn.name).string();
        if (defn.lite) c.model = cfg.model.lite_variant();
        c.model.lambda_lyap = defn.lam;
        c.finalize();
        c.validate();
        const fs::path cell_dir(c.output_dir);
        fs::create_directories(cell_dir);
        const std::uint64_t hash = c.hash();
        const std::string hash_kv = "config_hash=" + hex16(hash) + "\n";
        write_text_file(cell_dir / "config.txt",
                        "# config_hash=" + hex16(hash) + "\n" + c.to_text());

        Model model = Model::init(c.model, c.seed);
        TrainState st1;
        TrainLog log1 = train_phase1(model, ds.train.clips, c.phase1, &st1);
        save_train_checkpoint(cell_dir / "phase1.lytc", model, st1, 1, false, hash_kv);
        {
            std::ofstream os(cell_dir / "train_phase1.csv");
            log1.to_csv(os, hash);
        }

        SplitLatents train = collect_latents(c, model, ds.train);
        std::vector<std::size_t> ranked = rank_dimensions(train.z, train.s, c.metrics.criterion);
        const std::vector<real> scores = dimension_scores(train.z, train.s, c.metrics.criterion);
        const std::size_t n_sel = std::min(c.d_select_effective(), ranked.size());
        std::vector<std::size_t> selected(ranked.begin(), ranked.begin() + n_sel);
        write_selection_csv(cell_dir / "selection.csv", hash, ranked, scores, selected);
        model.init_lyapunov(selected);

        // lambda = 0 cells still run phase 2 (continued f training, no hinge)
        // so both arms get the same optimization budget.
        TrainState st2;
        TrainLog log2 = train_phase2(model, ds.train.clips, c.phase2, &st2);
        save_train_checkpoint(cell_dir / "phase2.lytc", model, st2, 2, c.phase2.phase2_unfreeze,
                              hash_kv);
        {
            std::ofstream os(cell_dir / "train_phase2.csv");
            log2.to_csv(os, hash);
        }

        AblateCell cell;
        cell.name = defn.name;
        cell.lite = defn.lite;
        cell.lambda_lyap = defn.lam;
        cell.flops = window_forward_flops(c.model, c.model.t_ctx, c.model.horizon);
        cell.report = evaluate_on(c, model, ds, 1, cell_dir);
        {
            std::ofstream os(cell_dir / "report.csv");
            cell.report.to_csv(os);
        }
        const std::string first =
            cell.report.rows.empty() ? std::string() : cell.report.rows.front().dataset;
        if (const EvalRow* id = cell.report.find("id", first))
            cell.id_err = std::fabs(id->value - real(c.system.ground_truth_dim()));
        out.cells.push_back(std::move(cell));
    }

    const std::uint64_t hash = cfg.hash();
    {
        std::ofstream os(fs::path(cfg.output_dir) / "table_lyapunov.csv");
        if (!os) throw IoError("cannot write table_lyapunov.csv");
        os << "# config_hash=" << hex16(hash) << "\n";
        out.table_lyap_csv(os);
    }
    {
        std::ofstream os(fs::path(cfg.output_dir) / "table_encoder.csv");
        if (!os) throw IoError("cannot write table_encoder.csv");
        os << "# config_hash=" << hex16(hash) << "\n";
        out.table_encoder_csv(os);
    }
    return out;
}

// ---------------------------------------------------------------- plots

std::vector<std::filesystem::path> cmd_plot(const ExperimentConfig& cfg) {
    cfg.validate();
    const fs::path dir(cfg.output_dir);
    const fs::path plots = dir / "plots";
    fs::create_directories(plots);
    const std::uint64_t hash = cfg.hash();

    fs::path ck;
    if (fs::exists(dir / "phase2.lytc"))
        ck = dir / "phase2.lytc";
    else if (fs::exists(dir / "phase1.lytc"))
        ck = dir / "phase1.lytc";
    else
        throw IoError("cmd_plot: no checkpoint under " + dir.string() + "; train first");
    TrainState st;
    const Model model = load_train_checkpoint(ck, st);
    const Dataset ds = load_dataset(cfg);
    const std::vector<std::size_t> selected = resolve_selection(cfg, model, ds);

    std::vector<fs::path> written;
    auto emit = [&](const fs::path& path, std::string svg) {
        add_hash_comment(svg, hash);
        write_text_file(path, svg);
        written.push_back(path);
    };

    // One overlay per consecutive selected-dim pair, one curve per variant,
    // all tracing the same underlying eval trajectory.
    if (!ds.eval.empty() && !ds.eval[0].clips.empty()) {
        std::vector<Mat> latents;  // per variant, clip 0
        for (const DatasetSplit& split : ds.eval)
            latents.push_back(extract_latents(model, split.clips[0]).z);
        for (std::size_t p = 0; p + 1 < selected.size(); ++p) {
            const std::size_t a = selected[p], b = selected[p + 1];
            std::vector<SvgSeries> series;
            for (std::size_t v = 0; v < ds.eval.size(); ++v) {
                SvgSeries s;
                s.label = variant_of(ds.eval[v].name);
                for (std::size_t t = 0; t < latents[v].rows; ++t)
                    s.points.emplace_back(latents[v](t, a), latents[v](t, b));
                series.push_back(std::move(s));
            }
            const std::string xa = "z" + std::to_string(a), yb = "z" + std::to_string(b);
            emit(plots / ("overlay_" + xa + "_" + yb + ".svg"),
                 svg_line_chart("latent trajectory overlay", xa, yb, series));
        }
    }

    {
        SplitLatents train = collect_latents(cfg, model, ds.train);
        const std::vector<real> scores =
            dimension_scores(train.z, train.s, cfg.metrics.criterion);
        std::vector<std::size_t> ranked =
            rank_dimensions(train.z, train.s, cfg.metrics.criterion);
        std::vector<std::pair<std::string, real>> bars;
        for (std::size_t d : ranked) bars.emplace_back("z" + std::to_string(d), scores[d]);
        const char* crit = cfg.metrics.criterion == RankCriterion::R2 ? "R2 score" : "MI (nats)";
        emit(plots / "ranked_scores.svg",
             svg_bar_chart("ranked dimension scores", crit, bars));
    }

    for (int phase : {1, 2}) {
        const fs::path log_path = dir / ("train_phase" + std::to_string(phase) + ".csv");
        if (!fs::exists(log_path)) continue;
        const ParsedLog log = parse_train_csv(log_path);
        if (log.step.empty()) continue;
        auto mk = [&](const char* label, const std::vector<real>& ys) {
            SvgSeries s;
            s.label = label;
            for (std::size_t i = 0; i < log.step.size(); ++i)
                s.points.emplace_back(log.step[i], ys[i]);
            return s;
        };
        std::vector<SvgSeries> series{mk("l_total", log.l_total), mk("l_rec", log.l_rec),
                                      mk("l_pred", log.l_pred)};
        if (phase == 2) series.push_back(mk("l_lyap", log.l_lyap));
        emit(plots / ("loss_phase" + std::to_string(phase) + ".svg"),
             svg_line_chart("phase " + std::to_string(phase) + " losses", "step", "loss",
                            series));
    }
    return written;
}

// ---------------------------------------------------------------- gradcheck

GradcheckReport cmd_gradcheck(const ExperimentConfig& cfg) {
    cfg.validate();
    Model model = Model::init(cfg.model, cfg.seed);
    const std::size_t tc = cfg.model.t_ctx, K = cfg.model.horizon;
    Rng rng = Rng::keyed(cfg.seed, {TAG_GRADCHECK});
    std::vector<real> frames((tc + K) * cfg.model.frame_size());
    for (real& v : frames) v = std::clamp(0.5 + 0.25 * rng.normal(), 0.0, 1.0);
    return gradcheck_model(model, frames.data(), tc, K, 3);
}

}  // namespace lyt
