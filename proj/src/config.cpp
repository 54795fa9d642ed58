#include "lyt/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include "lyt/io.hpp"

namespace lyt {

namespace {

std::string fmt_real(real v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

real parse_real(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        real out = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad numeric value '" + v + "' for " + key);
    }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        unsigned long long out = std::stoull(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return out;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer value '" + v + "' for " + key);
    }
}

std::size_t parse_size(const std::string& key, const std::string& v) {
    return static_cast<std::size_t>(parse_u64(key, v));
}

bool parse_bool(const std::string& key, const std::string& v) {
    if (v == "0" || v == "false") return false;
    if (v == "1" || v == "true") return true;
    throw ConfigError("config: bad boolean value '" + v + "' for " + key);
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::string cur;
    std::istringstream is(v);
    while (std::getline(is, cur, ',')) {
        cur = trim(cur);
        if (!cur.empty()) out.push_back(cur);
    }
    return out;
}

std::string join_list(const std::vector<std::string>& items) {
    std::string out;
    for (std::size_t i = 0; i < items.size(); ++i) {
        if (i) out += ",";
        out += items[i];
    }
    return out;
}

// train1./train2. shared keys
bool apply_train(TrainConfig& t, const std::string& key, const std::string& sub,
                 const std::string& value) {
    if (sub == "steps")
        t.steps = parse_size(key, value);
    else if (sub == "batch")
        t.batch = parse_size(key, value);
    else if (sub == "lr")
        t.lr = parse_real(key, value);
    else if (sub == "lr_final")
        t.lr_final = parse_real(key, value);
    else if (sub == "warmup")
        t.warmup = parse_size(key, value);
    else if (sub == "clip_norm")
        t.clip_norm = parse_real(key, value);
    else if (sub == "log_every")
        t.log_every = parse_size(key, value);
    else
        return false;
    return true;
}

}  // namespace

DistractorConfig distractor_preset(const std::string& name) {
    DistractorConfig d;
    if (name == "none") return d;
    if (name == "background") {
        d.background_replace_prob = 1.0;
        d.background_pool = 4;
    } else if (name == "texture") {
        d.texture_amplitude = 0.3;
    } else if (name == "occlusion") {
        d.occlusion_max_frac = 0.2;
    } else if (name == "brightness") {
        d.brightness_max = 0.3;
    } else if (name == "mixed") {
        d.background_replace_prob = 0.5;
        d.background_pool = 4;
        d.texture_amplitude = 0.2;
        d.occlusion_max_frac = 0.15;
        d.brightness_max = 0.25;
    } else {
        throw ConfigError("config: unknown distractor preset '" + name + "'");
    }
    return d;
}

void ExperimentConfig::apply(const std::string& key, const std::string& value) {
    if (key == "seed") {
        seed = parse_u64(key, value);
    } else if (key == "output_dir") {
        output_dir = value;
    } else if (key == "system.kind") {
        system.kind = system_kind_from_string(value);
    } else if (key == "system.dt") {
        system.dt = parse_real(key, value);
    } else if (key == "system.omega") {
        system.params.omega = parse_real(key, value);
    } else if (key == "system.radius") {
        system.params.radius = parse_real(key, value);
    } else if (key == "system.g") {
        system.params.g = parse_real(key, value);
    } else if (key == "system.length") {
        system.params.length = parse_real(key, value);
    } else if (key == "system.length1") {
        system.params.length1 = parse_real(key, value);
    } else if (key == "system.length2") {
        system.params.length2 = parse_real(key, value);
    } else if (key == "system.mass") {
        system.params.mass = parse_real(key, value);
    } else if (key == "system.spring_k") {
        system.params.spring_k = parse_real(key, value);
    } else if (key == "system.natural_length") {
        system.params.natural_length = parse_real(key, value);
    } else if (key == "system.diff_u") {
        system.params.diff_u = parse_real(key, value);
    } else if (key == "system.diff_v") {
        system.params.diff_v = parse_real(key, value);
    } else if (key == "system.feed") {
        system.params.feed = parse_real(key, value);
    } else if (key == "system.kill") {
        system.params.kill = parse_real(key, value);
    } else if (key == "system.rd_speed") {
        system.params.rd_speed = parse_real(key, value);
    } else if (key == "system.rd_h") {
        system.rd_h = parse_size(key, value);
    } else if (key == "system.rd_w") {
        system.rd_w = parse_size(key, value);
    } else if (key == "data.n_train") {
        data.n_train = parse_size(key, value);
    } else if (key == "data.n_eval") {
        data.n_eval = parse_size(key, value);
    } else if (key == "data.duration") {
        data.duration = parse_real(key, value);
    } else if (key == "data.fps") {
        data.fps = parse_real(key, value);
    } else if (key == "data.h") {
        data.h = parse_size(key, value);
    } else if (key == "data.w") {
        data.w = parse_size(key, value);
    } else if (key == "distract.train") {
        distractor_preset(value);  // validate the name
        distract_train = value;
    } else if (key == "distract.eval") {
        auto items = split_list(value);
        if (items.empty()) throw ConfigError("config: distract.eval needs at least one preset");
        for (const auto& it : items) distractor_preset(it);
        distract_eval = items;
    } else if (key == "model.patch") {
        model.patch = parse_size(key, value);
    } else if (key == "model.dim") {
        model.dim = parse_size(key, value);
    } else if (key == "model.depth") {
        model.depth = parse_size(key, value);
    } else if (key == "model.heads") {
        model.heads = parse_size(key, value);
    } else if (key == "model.latent") {
        model.latent = parse_size(key, value);
    } else if (key == "model.horizon") {
        model.horizon = parse_size(key, value);
    } else if (key == "model.lite") {
        model.lite = parse_bool(key, value);
    } else if (key == "model.sparsify_stride") {
        model.sparsify_stride = parse_size(key, value);
    } else if (key == "model.lambda_pred") {
        model.lambda_pred = parse_real(key, value);
    } else if (key == "model.lambda_lyap") {
        model.lambda_lyap = parse_real(key, value);
    } else if (key == "model.t_ctx") {
        model.t_ctx = parse_size(key, value);
    } else if (key == "model.t_max") {
        model.t_max = parse_size(key, value);
    } else if (key == "model.dec_c0") {
        model.dec_c0 = parse_size(key, value);
    } else if (key.rfind("train1.", 0) == 0) {
        if (!apply_train(phase1, key, key.substr(7), value))
            throw ConfigError("config: unknown key '" + key + "'");
    } else if (key == "train2.unfreeze") {
        phase2.phase2_unfreeze = parse_bool(key, value);
    } else if (key.rfind("train2.", 0) == 0) {
        if (!apply_train(phase2, key, key.substr(7), value))
            throw ConfigError("config: unknown key '" + key + "'");
    } else if (key == "metrics.criterion") {
        if (value == "r2" || value == "R2")
            metrics.criterion = RankCriterion::R2;
        else if (value == "mi" || value == "MI")
            metrics.criterion = RankCriterion::MI;
        else
            throw ConfigError("config: metrics.criterion must be r2 or mi, got '" + value + "'");
    } else if (key == "metrics.d_select") {
        metrics.d_select = parse_size(key, value);
    } else {
        throw ConfigError("config: unknown key '" + key + "'");
    }
}

ExperimentConfig ExperimentConfig::from_text(const std::string& text) {
    ExperimentConfig cfg;
    std::istringstream is(text);
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(is, line)) {
        ++lineno;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) +
                              " has no '=': " + t);
        cfg.apply(trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
    }
    cfg.finalize();
    return cfg;
}

ExperimentConfig ExperimentConfig::from_file(const std::filesystem::path& path) {
    return from_text(read_text_file(path));
}

void ExperimentConfig::finalize() {
    model.frame_h = data.h;
    model.frame_w = data.w;
    model.frame_c = 1;
    phase1.seed = seed;
    phase2.seed = seed + 1;
    phase1.distractors = train_distractor();
    phase2.distractors = phase1.distractors;
}

std::string ExperimentConfig::to_text() const {
    std::map<std::string, std::string> kv;
    kv["seed"] = std::to_string(seed);
    kv["output_dir"] = output_dir;
    kv["system.kind"] = to_string(system.kind);
    kv["system.dt"] = fmt_real(system.dt);
    kv["system.omega"] = fmt_real(system.params.omega);
    kv["system.radius"] = fmt_real(system.params.radius);
    kv["system.g"] = fmt_real(system.params.g);
    kv["system.length"] = fmt_real(system.params.length);
    kv["system.length1"] = fmt_real(system.params.length1);
    kv["system.length2"] = fmt_real(system.params.length2);
    kv["system.mass"] = fmt_real(system.params.mass);
    kv["system.spring_k"] = fmt_real(system.params.spring_k);
    kv["system.natural_length"] = fmt_real(system.params.natural_length);
    kv["system.diff_u"] = fmt_real(system.params.diff_u);
    kv["system.diff_v"] = fmt_real(system.params.diff_v);
    kv["system.feed"] = fmt_real(system.params.feed);
    kv["system.kill"] = fmt_real(system.params.kill);
    kv["system.rd_speed"] = fmt_real(system.params.rd_speed);
    kv["system.rd_h"] = std::to_string(system.rd_h);
    kv["system.rd_w"] = std::to_string(system.rd_w);
    kv["data.n_train"] = std::to_string(data.n_train);
    kv["data.n_eval"] = std::to_string(data.n_eval);
    kv["data.duration"] = fmt_real(data.duration);
    kv["data.fps"] = fmt_real(data.fps);
    kv["data.h"] = std::to_string(data.h);
    kv["data.w"] = std::to_string(data.w);
    kv["distract.train"] = distract_train;
    kv["distract.eval"] = join_list(distract_eval);
    kv["model.patch"] = std::to_string(model.patch);
    kv["model.dim"] = std::to_string(model.dim);
    kv["model.depth"] = std::to_string(model.depth);
    kv["model.heads"] = std::to_string(model.heads);
    kv["model.latent"] = std::to_string(model.latent);
    kv["model.horizon"] = std::to_string(model.horizon);
    kv["model.lite"] = model.lite ? "1" : "0";
    kv["model.sparsify_stride"] = std::to_string(model.sparsify_stride);
    kv["model.lambda_pred"] = fmt_real(model.lambda_pred);
    kv["model.lambda_lyap"] = fmt_real(model.lambda_lyap);
    kv["model.t_ctx"] = std::to_string(model.t_ctx);
    kv["model.t_max"] = std::to_string(model.t_max);
    kv["model.dec_c0"] = std::to_string(model.dec_c0);
    const TrainConfig* phases[2] = {&phase1, &phase2};
    for (int p = 0; p < 2; ++p) {
        const std::string pre = p == 0 ? "train1." : "train2.";
        kv[pre + "steps"] = std::to_string(phases[p]->steps);
        kv[pre + "batch"] = std::to_string(phases[p]->batch);
        kv[pre + "lr"] = fmt_real(phases[p]->lr);
        kv[pre + "lr_final"] = fmt_real(phases[p]->lr_final);
        kv[pre + "warmup"] = std::to_string(phases[p]->warmup);
        kv[pre + "clip_norm"] = fmt_real(phases[p]->clip_norm);
        kv[pre + "log_every"] = std::to_string(phases[p]->log_every);
    }
    kv["train2.unfreeze"] = phase2.phase2_unfreeze ? "1" : "0";
    kv["metrics.criterion"] = metrics.criterion == RankCriterion::R2 ? "r2" : "mi";
    kv["metrics.d_select"] = std::to_string(metrics.d_select);

    std::string out;
    for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
    return out;
}

std::uint64_t ExperimentConfig::hash() const { return fnv1a64(to_text()); }

std::size_t ExperimentConfig::frames_per_clip() const {
    return static_cast<std::size_t>(std::llround(data.duration * data.fps)) + 1;
}

std::size_t ExperimentConfig::d_select_effective() const {
    const std::size_t want = metrics.d_select ? metrics.d_select : system.ground_truth_dim();
    return std::min(want, model.latent);
}

DistractorConfig ExperimentConfig::train_distractor() const {
    return distractor_preset(distract_train);
}

std::vector<DistractorConfig> ExperimentConfig::eval_distractors() const {
    std::vector<DistractorConfig> out;
    for (const auto& name : distract_eval) out.push_back(distractor_preset(name));
    return out;
}

void ExperimentConfig::validate() const {
    system.validate();
    model.validate();
    phase1.validate();
    phase2.validate();
    if (data.n_train < 1 || data.n_eval < 1)
        throw ConfigError("config: need at least one train and one eval clip");
    if (!(data.duration > 0) || !(data.fps > 0))
        throw ConfigError("config: duration and fps must be positive");
    if (data.h != model.frame_h || data.w != model.frame_w)
        throw ConfigError("config: model frame geometry out of sync (call finalize)");
    if (data.h % model.patch != 0 || data.w % model.patch != 0)
        throw ConfigError("config: frame size must be divisible by the patch size");
    if (frames_per_clip() < model.t_ctx + model.horizon)
        throw ConfigError("config: clips too short for t_ctx + horizon frames");
    if (metrics.d_select > model.latent)
        throw ConfigError("config: metrics.d_select exceeds the latent width");
    distractor_preset(distract_train);
    if (distract_eval.empty())
        throw ConfigError("config: need at least one eval distractor variant");
    for (const auto& name : distract_eval) distractor_preset(name);
}

}  // namespace lyt
