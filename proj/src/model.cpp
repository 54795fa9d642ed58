#include "lyt/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "lyt/rng.hpp"

namespace lyt {
namespace {

std::string fmt_real(real v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::unordered_map<std::string, std::string> parse_kv(const std::string& text) {
    std::unordered_map<std::string, std::string> kv;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line)) {
        if (line.empty() || line[0] == '#') continue;
        auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    return kv;
}

std::size_t kv_size(const std::unordered_map<std::string, std::string>& kv, const char* key,
                    std::size_t fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return static_cast<std::size_t>(std::stoull(it->second));
    } catch (const std::exception&) {
        throw ConfigError(std::string("bad integer for ") + key + ": " + it->second);
    }
}

real kv_real(const std::unordered_map<std::string, std::string>& kv, const char* key,
             real fallback) {
    auto it = kv.find(key);
    if (it == kv.end()) return fallback;
    try {
        return std::stod(it->second);
    } catch (const std::exception&) {
        throw ConfigError(std::string("bad number for ") + key + ": " + it->second);
    }
}

}  // namespace

// ---------------------------------------------------------------------------
// ModelConfig
// ---------------------------------------------------------------------------

void ModelConfig::validate() const {
    if (patch == 0 || dim == 0 || depth == 0 || heads == 0 || latent == 0)
        throw ConfigError("ModelConfig: sizes must be positive");
    if (dim % heads != 0) throw ConfigError("ModelConfig: dim must be divisible by heads");
    if (frame_h % patch != 0 || frame_w % patch != 0)
        throw ConfigError("ModelConfig: frame size must be divisible by patch");
    if (horizon < 1) throw ConfigError("ModelConfig: horizon must be >= 1");
    if (latent > dim) throw ConfigError("ModelConfig: latent must not exceed dim");
    if (!lite && sparsify_stride != 1)
        throw ConfigError("ModelConfig: sparsify_stride requires lite mode");
    if (sparsify_stride == 0) throw ConfigError("ModelConfig: sparsify_stride must be >= 1");
    if (frame_c != 1) throw ConfigError("ModelConfig: only single-channel frames supported");
    if (frame_h != 32 || frame_w != 32)
        throw ConfigError("ModelConfig: decoder upsamples 4x4 seed to 32x32 frames");
    if (t_ctx < 2) throw ConfigError("ModelConfig: context window must be >= 2 frames");
    if (t_max < t_ctx) throw ConfigError("ModelConfig: t_max must cover the context window");
    if (lambda_pred < 0 || lambda_lyap < 0)
        throw ConfigError("ModelConfig: loss weights must be nonnegative");
    if (dec_c0 < 4 || dec_c0 % 4 != 0)
        throw ConfigError("ModelConfig: dec_c0 must be a positive multiple of 4");
    if (sparsify_stride >= n_patches())
        throw ConfigError("ModelConfig: sparsify_stride must be below the patch count");
}

std::size_t ModelConfig::n_kept() const {
    std::size_t stride = lite ? sparsify_stride : 1;
    return (n_patches() + stride - 1) / stride;
}

std::string ModelConfig::to_kv() const {
    std::ostringstream os;
    os << "patch=" << patch << "\ndim=" << dim << "\ndepth=" << depth << "\nheads=" << heads
       << "\nlatent=" << latent << "\nhorizon=" << horizon << "\nlite=" << (lite ? 1 : 0)
       << "\nsparsify_stride=" << sparsify_stride << "\nlambda_pred=" << fmt_real(lambda_pred)
       << "\nlambda_lyap=" << fmt_real(lambda_lyap) << "\nframe_h=" << frame_h
       << "\nframe_w=" << frame_w << "\nframe_c=" << frame_c << "\nt_ctx=" << t_ctx
       << "\nt_max=" << t_max << "\ndec_c0=" << dec_c0 << "\n";
    return os.str();
}

ModelConfig ModelConfig::from_kv(const std::string& text) {
    auto kv = parse_kv(text);
    ModelConfig cfg;
    cfg.patch = kv_size(kv, "patch", cfg.patch);
    cfg.dim = kv_size(kv, "dim", cfg.dim);
    cfg.depth = kv_size(kv, "depth", cfg.depth);
    cfg.heads = kv_size(kv, "heads", cfg.heads);
    cfg.latent = kv_size(kv, "latent", cfg.latent);
    cfg.horizon = kv_size(kv, "horizon", cfg.horizon);
    cfg.lite = kv_size(kv, "lite", cfg.lite ? 1 : 0) != 0;
    cfg.sparsify_stride = kv_size(kv, "sparsify_stride", cfg.sparsify_stride);
    cfg.lambda_pred = kv_real(kv, "lambda_pred", cfg.lambda_pred);
    cfg.lambda_lyap = kv_real(kv, "lambda_lyap", cfg.lambda_lyap);
    cfg.frame_h = kv_size(kv, "frame_h", cfg.frame_h);
    cfg.frame_w = kv_size(kv, "frame_w", cfg.frame_w);
    cfg.frame_c = kv_size(kv, "frame_c", cfg.frame_c);
    cfg.t_ctx = kv_size(kv, "t_ctx", cfg.t_ctx);
    cfg.t_max = kv_size(kv, "t_max", cfg.t_max);
    cfg.dec_c0 = kv_size(kv, "dec_c0", cfg.dec_c0);
    cfg.validate();
    return cfg;
}

ModelConfig ModelConfig::lite_variant() const {
    ModelConfig out = *this;
    out.lite = true;
    out.sparsify_stride = 2;
    out.heads = std::max<std::size_t>(1, heads / 2);
    out.dim = std::max(out.heads, (dim / 2) / out.heads * out.heads);
    out.latent = std::min(out.latent, out.dim);
    out.validate();
    return out;
}

// ---------------------------------------------------------------------------
// Patch tokenization
// ---------------------------------------------------------------------------

Mat patchify(const real* frame, std::size_t H, std::size_t W, std::size_t C, std::size_t P) {
    if (P == 0 || H % P != 0 || W % P != 0)
        throw DimensionError("patchify: frame size not divisible by patch size");
    const std::size_t ny = H / P, nx = W / P;
    Mat tokens(ny * nx, P * P * C);
    for (std::size_t py = 0; py < ny; ++py)
        for (std::size_t px = 0; px < nx; ++px) {
            real* row = tokens.v.data() + (py * nx + px) * tokens.cols;
            std::size_t k = 0;
            for (std::size_t y = 0; y < P; ++y)
                for (std::size_t x = 0; x < P; ++x)
                    for (std::size_t c = 0; c < C; ++c)
                        row[k++] = frame[((py * P + y) * W + (px * P + x)) * C + c];
        }
    return tokens;
}

void unpatchify(const Mat& tokens, real* frame, std::size_t H, std::size_t W, std::size_t C,
                std::size_t P) {
    if (P == 0 || H % P != 0 || W % P != 0 || tokens.rows != (H / P) * (W / P) ||
        tokens.cols != P * P * C)
        throw DimensionError("unpatchify: token matrix does not match frame geometry");
    const std::size_t nx = W / P;
    for (std::size_t r = 0; r < tokens.rows; ++r) {
        const std::size_t py = r / nx, px = r % nx;
        const real* row = tokens.v.data() + r * tokens.cols;
        std::size_t k = 0;
        for (std::size_t y = 0; y < P; ++y)
            for (std::size_t x = 0; x < P; ++x)
                for (std::size_t c = 0; c < C; ++c)
                    frame[((py * P + y) * W + (px * P + x)) * C + c] = row[k++];
    }
}

// ---------------------------------------------------------------------------
// Model construction
// ---------------------------------------------------------------------------

Tensor Model::add_param(const std::string& name, Tensor t) {
    params_.emplace_back(name, t);
    return t;
}

Tensor Model::param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return t;
    throw ContractError("Model: unknown parameter " + name);
}

bool Model::has_param(const std::string& name) const {
    for (const auto& [n, t] : params_)
        if (n == name) return true;
    return false;
}

Model Model::init(const ModelConfig& cfg, std::uint64_t seed) {
    cfg.validate();
    Model m;
    m.cfg = cfg;
    Rng rng = Rng::keyed(seed, {TAG_INIT});

    auto grid = [](std::vector<real> v) {
        for (real& x : v) x = to_f32_grid(x);
        return v;
    };
    auto uniform_t = [&](std::vector<std::size_t> shape, real bound) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        std::vector<real> v(n);
        for (real& x : v) x = rng.uniform(-bound, bound);
        return Tensor::from(grid(std::move(v)), std::move(shape), true);
    };
    auto normal_t = [&](std::vector<std::size_t> shape, real sd) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        std::vector<real> v(n);
        for (real& x : v) x = sd * rng.normal();
        return Tensor::from(grid(std::move(v)), std::move(shape), true);
    };
    auto zeros_t = [&](std::vector<std::size_t> shape) { return Tensor::zeros(shape, true); };
    auto ones_t = [&](std::vector<std::size_t> shape) {
        return Tensor::full(std::move(shape), 1.0, true);
    };

    const std::size_t d = cfg.dim, ppc = cfg.patch * cfg.patch * cfg.frame_c;
    const real lin_d = 1.0 / std::sqrt(real(d));
    // attention input projections use Xavier bounds, biases start at zero
    const real xavier = std::sqrt(6.0 / real(2 * d));

    m.add_param("embed.w", uniform_t({ppc, d}, 1.0 / std::sqrt(real(ppc))));
    m.add_param("embed.b", uniform_t({1, d}, 1.0 / std::sqrt(real(ppc))));
    m.add_param("pos.spatial", normal_t({cfg.n_patches(), d}, 0.02));
    m.add_param("pos.temporal", normal_t({cfg.t_max, d}, 0.02));

    for (std::size_t i = 0; i < cfg.depth; ++i) {
        const std::string p = "b" + std::to_string(i) + ".";
        for (const char* kind : {"attn_t.", "attn_s."}) {
            const std::string ln = p + (kind[5] == 't' ? "ln_t." : "ln_s.");
            m.add_param(ln + "g", ones_t({1, d}));
            m.add_param(ln + "b", zeros_t({1, d}));
            m.add_param(p + kind + "wq", uniform_t({d, d}, xavier));
            m.add_param(p + kind + "bq", zeros_t({1, d}));
            m.add_param(p + kind + "wk", uniform_t({d, d}, xavier));
            m.add_param(p + kind + "bk", zeros_t({1, d}));
            m.add_param(p + kind + "wv", uniform_t({d, d}, xavier));
            m.add_param(p + kind + "bv", zeros_t({1, d}));
            m.add_param(p + kind + "wo", zeros_t({d, d}));
            m.add_param(p + kind + "bo", zeros_t({1, d}));
        }
        m.add_param(p + "ln_m.g", ones_t({1, d}));
        m.add_param(p + "ln_m.b", zeros_t({1, d}));
        m.add_param(p + "mlp.w1", uniform_t({d, 4 * d}, lin_d));
        m.add_param(p + "mlp.b1", uniform_t({1, 4 * d}, lin_d));
        m.add_param(p + "mlp.w2", zeros_t({4 * d, d}));
        m.add_param(p + "mlp.b2", zeros_t({1, d}));
    }

    m.add_param("head.w", uniform_t({d, cfg.latent}, lin_d));
    m.add_param("head.b", uniform_t({1, cfg.latent}, lin_d));

    const std::size_t c0 = cfg.dec_c0, seed_n = 16 * c0;
    const real lin_z = 1.0 / std::sqrt(real(cfg.latent));
    m.add_param("dec.fc.w", uniform_t({cfg.latent, seed_n}, lin_z));
    m.add_param("dec.fc.b", uniform_t({1, seed_n}, lin_z));
    m.add_param("dec.skip.w", uniform_t({d, seed_n}, lin_d));
    const std::size_t chans[4] = {c0, c0 / 2, c0 / 4, cfg.frame_c};
    for (int s = 0; s < 3; ++s) {
        const real bound = 1.0 / std::sqrt(real(chans[s + 1] * 16));
        m.add_param("dec.c" + std::to_string(s + 1) + ".w",
                    uniform_t({chans[s], chans[s + 1], 4, 4}, bound));
        m.add_param("dec.c" + std::to_string(s + 1) + ".b", uniform_t({chans[s + 1]}, bound));
    }

    m.add_param("f.ln.g", ones_t({1, cfg.latent}));
    m.add_param("f.ln.b", zeros_t({1, cfg.latent}));
    m.add_param("f.w1", uniform_t({cfg.latent, 4 * cfg.latent}, lin_z));
    m.add_param("f.b1", uniform_t({1, 4 * cfg.latent}, lin_z));
    m.add_param("f.w2", zeros_t({4 * cfg.latent, cfg.latent}));
    m.add_param("f.b2", zeros_t({1, cfg.latent}));
    return m;
}

// ---------------------------------------------------------------------------
// Forward passes
// ---------------------------------------------------------------------------

namespace {

// Multi-head self-attention on one token group (R×d), pre-projected q/k/v.
// Returns the head-concatenated attended values (R×d), before out-projection.
Tensor attend_group(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                    AttentionTrace* trace) {
    const std::size_t d = q.shape()[1], dh = d / heads;
    const real s = 1.0 / std::sqrt(real(dh));
    std::vector<Tensor> outs;
    outs.reserve(heads);
    for (std::size_t h = 0; h < heads; ++h) {
        Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
        Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
        Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
        Tensor a = softmax_rows(scale(matmul(qh, transpose(kh)), s));
        if (trace) {
            Mat w(a.shape()[0], a.shape()[1]);
            w.v = a.data();
            trace->push_back(std::move(w));
        }
        outs.push_back(matmul(a, vh));
    }
    return heads == 1 ? outs[0] : concat_cols(outs);
}

}  // namespace

Tensor Model::block_forward(Tensor x, std::size_t block, std::size_t T, std::size_t kept,
                            AttentionTrace* trace) const {
    const std::string p = "b" + std::to_string(block) + ".";

    // temporal attention: groups share a patch slot, attend over time
    {
        Tensor xl = layernorm_rows(x, param(p + "ln_t.g"), param(p + "ln_t.b"));
        Tensor q = add_bias(matmul(xl, param(p + "attn_t.wq")), param(p + "attn_t.bq"));
        Tensor k = add_bias(matmul(xl, param(p + "attn_t.wk")), param(p + "attn_t.bk"));
        Tensor v = add_bias(matmul(xl, param(p + "attn_t.wv")), param(p + "attn_t.bv"));
        std::vector<Tensor> groups;
        groups.reserve(kept);
        std::vector<std::size_t> idx(T);
        for (std::size_t j = 0; j < kept; ++j) {
            for (std::size_t t = 0; t < T; ++t) idx[t] = t * kept + j;
            groups.push_back(attend_group(gather_rows(q, idx), gather_rows(k, idx),
                                          gather_rows(v, idx), cfg.heads, trace));
        }
        Tensor cat = kept == 1 ? groups[0] : concat_rows(groups);  // patch-major
        std::vector<std::size_t> perm(T * kept);
        for (std::size_t t = 0; t < T; ++t)
            for (std::size_t j = 0; j < kept; ++j) perm[t * kept + j] = j * T + t;
        Tensor att = gather_rows(cat, perm);  // back to time-major
        x = add(x, add_bias(matmul(att, param(p + "attn_t.wo")), param(p + "attn_t.bo")));
    }

    // spatial attention: groups share a frame, attend over patches
    {
        Tensor xl = layernorm_rows(x, param(p + "ln_s.g"), param(p + "ln_s.b"));
        Tensor q = add_bias(matmul(xl, param(p + "attn_s.wq")), param(p + "attn_s.bq"));
        Tensor k = add_bias(matmul(xl, param(p + "attn_s.wk")), param(p + "attn_s.bk"));
        Tensor v = add_bias(matmul(xl, param(p + "attn_s.wv")), param(p + "attn_s.bv"));
        std::vector<Tensor> frames_out;
        frames_out.reserve(T);
        std::vector<std::size_t> idx(kept);
        for (std::size_t t = 0; t < T; ++t) {
            for (std::size_t j = 0; j < kept; ++j) idx[j] = t * kept + j;
            frames_out.push_back(attend_group(gather_rows(q, idx), gather_rows(k, idx),
                                              gather_rows(v, idx), cfg.heads, trace));
        }
        Tensor cat = T == 1 ? frames_out[0] : concat_rows(frames_out);  // already time-major
        x = add(x, add_bias(matmul(cat, param(p + "attn_s.wo")), param(p + "attn_s.bo")));
    }

    // token-wise MLP
    {
        Tensor xl = layernorm_rows(x, param(p + "ln_m.g"), param(p + "ln_m.b"));
        Tensor h = gelu(add_bias(matmul(xl, param(p + "mlp.w1")), param(p + "mlp.b1")));
        x = add(x, add_bias(matmul(h, param(p + "mlp.w2")), param(p + "mlp.b2")));
    }
    return x;
}

EncodeResult Model::encode(const real* frames, std::size_t T, AttentionTrace* trace) const {
    return encode_lite(frames, T, cfg.lite ? cfg.sparsify_stride : 1, trace);
}

EncodeResult Model::encode_lite(const real* frames, std::size_t T, std::size_t stride,
                                AttentionTrace* trace) const {
    const std::size_t N = cfg.n_patches();
    if (stride == 0 || stride >= N)
        throw ContractError("encode: sparsify stride must be in [1, patch count)");
    if (T < 1) throw DimensionError("encode: need at least one frame");
    if (T > cfg.t_max) throw DimensionError("encode: window exceeds temporal positional table");

    std::vector<std::size_t> kept_idx;
    for (std::size_t j = 0; j < N; j += stride) kept_idx.push_back(j);
    const std::size_t kept = kept_idx.size();
    const std::size_t ppc = cfg.patch * cfg.patch * cfg.frame_c;

    // tokenize the kept patches of every frame (time-major rows)
    std::vector<real> xdata(T * kept * ppc);
    for (std::size_t t = 0; t < T; ++t) {
        Mat tokens = patchify(frames + t * cfg.frame_size(), cfg.frame_h, cfg.frame_w,
                              cfg.frame_c, cfg.patch);
        for (std::size_t j = 0; j < kept; ++j)
            std::memcpy(xdata.data() + (t * kept + j) * ppc,
                        tokens.v.data() + kept_idx[j] * ppc, ppc * sizeof(real));
    }
    Tensor x = Tensor::from(std::move(xdata), {T * kept, ppc}, false);

    x = add_bias(matmul(x, param("embed.w")), param("embed.b"));
    Tensor pos_sp = param("pos.spatial");
    if (kept != N) pos_sp = gather_rows(pos_sp, kept_idx);
    x = add_tiled_rows(x, pos_sp);
    std::vector<std::size_t> trange(T);
    for (std::size_t t = 0; t < T; ++t) trange[t] = t;
    x = add_block_rows(x, gather_rows(param("pos.temporal"), trange));

    // skip: mean of the last frame's pre-block patch embeddings
    std::vector<std::size_t> last(kept);
    for (std::size_t j = 0; j < kept; ++j) last[j] = (T - 1) * kept + j;
    Tensor skip = mean_rows_blocks(gather_rows(x, last), kept);

    for (std::size_t i = 0; i < cfg.depth; ++i) x = block_forward(x, i, T, kept, trace);

    Tensor pooled = mean_rows_blocks(x, kept);  // T×d
    Tensor z = add_bias(matmul(pooled, param("head.w")), param("head.b"));
    return {z, skip};
}

Tensor Model::decode(const Tensor& z_row, const Tensor& skip) const {
    Tensor seed = add(add_bias(matmul(z_row, param("dec.fc.w")), param("dec.fc.b")),
                      matmul(skip, param("dec.skip.w")));
    Tensor h = reshape(seed, {cfg.dec_c0, 4, 4});
    h = gelu(conv_transpose2d(h, param("dec.c1.w"), param("dec.c1.b"), 2, 1));
    h = gelu(conv_transpose2d(h, param("dec.c2.w"), param("dec.c2.b"), 2, 1));
    Tensor y = sigmoid(conv_transpose2d(h, param("dec.c3.w"), param("dec.c3.b"), 2, 1));
    return reshape(y, {1, cfg.frame_size()});
}

Tensor Model::transition(const Tensor& z) const {
    Tensor xl = layernorm_rows(z, param("f.ln.g"), param("f.ln.b"));
    Tensor h = gelu(add_bias(matmul(xl, param("f.w1")), param("f.b1")));
    return add(z, add_bias(matmul(h, param("f.w2")), param("f.b2")));
}

std::vector<Tensor> Model::rollout(const Tensor& z_row, std::size_t K) const {
    require(K >= 1, "rollout: K must be >= 1");
    std::vector<Tensor> out;
    out.reserve(K);
    Tensor z = z_row;
    for (std::size_t k = 0; k < K; ++k) {
        z = transition(z);
        out.push_back(z);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Phase 2: selected dims + Lyapunov head
// ---------------------------------------------------------------------------

void Model::init_lyapunov(std::vector<std::size_t> selected_dims) {
    require(!selected_dims.empty(), "init_lyapunov: need at least one selected dim");
    std::unordered_set<std::size_t> seen;
    for (std::size_t d : selected_dims) {
        require(d < cfg.latent, "init_lyapunov: selected dim out of range");
        require(seen.insert(d).second, "init_lyapunov: duplicate selected dim");
    }
    selected_ = std::move(selected_dims);
    const std::size_t m = selected_.size();
    std::vector<real> eye(m * m, 0.0);
    for (std::size_t i = 0; i < m; ++i) eye[i * m + i] = 1.0;
    // replace any previous head (re-selection re-initializes W)
    for (auto it = params_.begin(); it != params_.end(); ++it)
        if (it->first == "lyap.w") {
            params_.erase(it);
            break;
        }
    add_param("lyap.w", Tensor::from(std::move(eye), {m, m}, true));
}

Tensor Model::select(const Tensor& z) const {
    require(!selected_.empty(), "select: no dims selected yet");
    return transpose(gather_rows(transpose(z), selected_));
}

// ---------------------------------------------------------------------------
// Checkpointing
// ---------------------------------------------------------------------------

CheckpointData Model::to_checkpoint(const std::vector<std::pair<std::string, Tensor>>& extra,
                                    const std::string& extra_kv) const {
    CheckpointData ckpt;
    std::ostringstream cfg_os;
    cfg_os << cfg.to_kv();
    if (!selected_.empty()) {
        cfg_os << "selected=";
        for (std::size_t i = 0; i < selected_.size(); ++i)
            cfg_os << (i ? "," : "") << selected_[i];
        cfg_os << "\n";
    }
    cfg_os << extra_kv;
    ckpt.config = cfg_os.str();
    auto dump = [&](const std::string& name, const Tensor& t) {
        NamedTensor nt;
        nt.name = name;
        nt.shape = t.shape();
        nt.values = t.data();
        ckpt.tensors.push_back(std::move(nt));
    };
    for (const auto& [name, t] : params_) dump(name, t);
    for (const auto& [name, t] : extra) dump(name, t);
    return ckpt;
}

Model Model::from_checkpoint(const CheckpointData& ckpt) {
    ModelConfig cfg = ModelConfig::from_kv(ckpt.config);
    Model m = Model::init(cfg, 0);

    auto kv = parse_kv(ckpt.config);
    if (auto it = kv.find("selected"); it != kv.end() && !it->second.empty()) {
        std::vector<std::size_t> sel;
        std::istringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) sel.push_back(std::stoull(tok));
        m.init_lyapunov(std::move(sel));
    }

    for (auto& [name, t] : m.params_) {
        const NamedTensor* nt = ckpt.find(name);
        if (!nt) throw IoError("checkpoint missing tensor " + name);
        if (nt->shape != t.shape()) throw IoError("checkpoint shape mismatch for " + name);
        t.data() = nt->values;
    }
    return m;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

Tensor frame_target(const real* frame, std::size_t n) {
    return Tensor::from(std::vector<real>(frame, frame + n), {1, n}, false);
}

namespace {

Tensor mean_frame_errors(const std::vector<Tensor>& decoded, const real* frames,
                         std::size_t frame_size) {
    require(!decoded.empty(), "loss: need at least one frame");
    Tensor acc = sq_norm(sub(decoded[0], frame_target(frames, frame_size)));
    for (std::size_t t = 1; t < decoded.size(); ++t)
        acc = add(acc, sq_norm(sub(decoded[t], frame_target(frames + t * frame_size, frame_size))));
    return scale(acc, 1.0 / real(decoded.size()));
}

}  // namespace

Tensor loss_rec(const std::vector<Tensor>& decoded, const real* frames, std::size_t frame_size) {
    return mean_frame_errors(decoded, frames, frame_size);
}

Tensor loss_pred(const std::vector<Tensor>& decoded_rollout, const real* future,
                 std::size_t frame_size) {
    return mean_frame_errors(decoded_rollout, future, frame_size);
}

Tensor lyapunov_V(const Tensor& z_sel, const Tensor& w) {
    return sq_norm(matmul(z_sel, transpose(w)));
}

Tensor loss_lyap(const std::vector<Tensor>& z_rollout, const Tensor& w) {
    require(z_rollout.size() >= 2, "loss_lyap: need K+1 rollout latents");
    const std::size_t K = z_rollout.size() - 1;
    Tensor prev_v = lyapunov_V(z_rollout[0], w);
    Tensor acc = Tensor::zeros({1, 1});
    bool first = true;
    for (std::size_t k = 1; k <= K; ++k) {
        Tensor vk = lyapunov_V(z_rollout[k], w);
        Tensor hinge = relu(sub(vk, prev_v));
        acc = first ? hinge : add(acc, hinge);
        first = false;
        prev_v = vk;
    }
    return scale(acc, 1.0 / real(K));
}

Tensor loss_total(const Tensor& l_rec, const Tensor* l_pred, const Tensor* l_lyap,
                  real lambda_pred, real lambda_lyap) {
    Tensor total = l_rec;
    if (l_pred != nullptr && lambda_pred != 0.0) total = add(total, scale(*l_pred, lambda_pred));
    if (l_lyap != nullptr && lambda_lyap != 0.0) total = add(total, scale(*l_lyap, lambda_lyap));
    return total;
}

}  // namespace lyt
