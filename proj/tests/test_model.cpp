#include <cmath>
#include <filesystem>

#include "doctest.h"
#include "lyt/flops.hpp"
#include "lyt/model.hpp"
#include "lyt/rng.hpp"

using namespace lyt;

namespace {

ModelConfig small_config() {
    ModelConfig cfg;
    cfg.t_ctx = 4;
    return cfg;  // 32×32, P=8, d=64, L=2, heads=4, d_z=16
}

std::vector<real> random_frames(std::size_t T, std::size_t n, std::uint64_t seed) {
    Rng rng = Rng::keyed(seed, {1});
    std::vector<real> v(T * n);
    for (real& x : v) x = rng.uniform();
    return v;
}

// Central finite difference of fn at leaf element i.
template <typename Fn>
real fd_at(const Tensor& leaf, std::size_t i, Fn&& fn, real h = 1e-5) {
    NoGrad guard;
    real orig = leaf.data()[i];
    leaf.data()[i] = orig + h;
    real up = fn();
    leaf.data()[i] = orig - h;
    real dn = fn();
    leaf.data()[i] = orig;
    return (up - dn) / (2 * h);
}

real rel_err(real a, real b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1.0}); }

}  // namespace

TEST_CASE("patchify is a lossless row-major tokenizer") {
    auto frame = random_frames(1, 32 * 32, 11);
    Mat tokens = patchify(frame.data(), 32, 32, 1, 8);
    CHECK(tokens.rows == 16);
    CHECK(tokens.cols == 64);
    // row-major patch order: token 1 starts at pixel column 8
    CHECK(tokens(1, 0) == frame[8]);
    // token 4 is the second patch row
    CHECK(tokens(4, 0) == frame[8 * 32]);

    std::vector<real> back(32 * 32, -1);
    unpatchify(tokens, back.data(), 32, 32, 1, 8);
    CHECK(back == frame);

    std::vector<real> flat(32 * 32, 0.25);
    Mat ctok = patchify(flat.data(), 32, 32, 1, 8);
    for (std::size_t r = 1; r < ctok.rows; ++r)
        for (std::size_t c = 0; c < ctok.cols; ++c) CHECK(ctok(r, c) == ctok(0, c));

    CHECK_THROWS_AS(patchify(frame.data(), 30, 32, 1, 8), DimensionError);
}

TEST_CASE("encode produces one latent per frame and is identity-block exact at init") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 42);
    const std::size_t T = 4;
    auto frames = random_frames(T, cfg.frame_size(), 3);
    EncodeResult enc = m.encode(frames.data(), T);
    REQUIRE(enc.z.shape() == std::vector<std::size_t>{T, cfg.latent});
    REQUIRE(enc.skip.shape() == std::vector<std::size_t>{1, cfg.dim});
    CHECK(all_finite(enc.z.data()));

    // with zero-initialized output projections the blocks are exact no-ops:
    // z must equal head(mean(patch projection + positional embeddings))
    std::vector<std::size_t> trange = {0, 1, 2, 3};
    std::vector<real> xdata;
    for (std::size_t t = 0; t < T; ++t) {
        Mat tok = patchify(frames.data() + t * cfg.frame_size(), 32, 32, 1, 8);
        xdata.insert(xdata.end(), tok.v.begin(), tok.v.end());
    }
    NoGrad guard;
    Tensor x = Tensor::from(xdata, {T * 16, 64}, false);
    x = add_bias(matmul(x, m.param("embed.w")), m.param("embed.b"));
    x = add_tiled_rows(x, m.param("pos.spatial"));
    x = add_block_rows(x, gather_rows(m.param("pos.temporal"), trange));
    Tensor z_manual = add_bias(matmul(mean_rows_blocks(x, 16), m.param("head.w")),
                               m.param("head.b"));
    CHECK(enc.z.data() == z_manual.data());  // bit-exact
}

TEST_CASE("attention rows are stochastic at every head and block") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 7);
    // break the zero init so attention actually mixes
    for (auto& [name, t] : m.params())
        if (name.find(".wo") != std::string::npos)
            for (auto& v : t.data()) v = 0.01;
    auto frames = random_frames(4, cfg.frame_size(), 5);
    AttentionTrace trace;
    m.encode(frames.data(), 4, &trace);
    // per block: 16 temporal groups + 4 spatial groups, 4 heads each
    CHECK(trace.size() == cfg.depth * (16 + 4) * cfg.heads);
    for (const Mat& a : trace)
        for (std::size_t r = 0; r < a.rows; ++r) {
            real s = 0;
            for (std::size_t c = 0; c < a.cols; ++c) s += a(r, c);
            CHECK(std::abs(s - 1.0) <= 1e-9);
        }
}

TEST_CASE("permuting patches together with their positional embeddings leaves z unchanged") {
    ModelConfig cfg = small_config();
    Model a = Model::init(cfg, 9);
    Model b = Model::init(cfg, 9);
    // give the blocks real weight so the test exercises attention, not just pooling
    for (Model* m : {&a, &b})
        for (auto& [name, t] : m->params())
            if (name.find(".wo") != std::string::npos || name.find("mlp.w2") != std::string::npos) {
                Rng r = Rng::keyed(77, {fnv1a64(name)});
                for (auto& v : t.data()) v = 0.05 * r.normal();
            }

    const std::size_t T = 3;
    auto frames = random_frames(T, cfg.frame_size(), 13);
    // patch permutation sigma: rotate and swap a few slots
    std::vector<std::size_t> sigma = {5, 0, 3, 2, 1, 4, 7, 6, 9, 8, 11, 10, 13, 12, 15, 14};

    // frames2: patch slot p holds the content of patch sigma(p)
    std::vector<real> frames2(frames.size());
    for (std::size_t t = 0; t < T; ++t) {
        Mat tok = patchify(frames.data() + t * cfg.frame_size(), 32, 32, 1, 8);
        Mat ptok(16, 64);
        for (std::size_t p = 0; p < 16; ++p)
            for (std::size_t c = 0; c < 64; ++c) ptok(p, c) = tok(sigma[p], c);
        unpatchify(ptok, frames2.data() + t * cfg.frame_size(), 32, 32, 1, 8);
    }
    // model b: positional embedding rows permuted the same way
    auto& pos = b.param("pos.spatial").data();
    auto pos_orig = a.param("pos.spatial").data();
    for (std::size_t p = 0; p < 16; ++p)
        for (std::size_t c = 0; c < 64; ++c) pos[p * 64 + c] = pos_orig[sigma[p] * 64 + c];

    EncodeResult za = a.encode(frames.data(), T);
    EncodeResult zb = b.encode(frames2.data(), T);
    for (std::size_t i = 0; i < za.z.size(); ++i)
        CHECK(std::abs(za.z.data()[i] - zb.z.data()[i]) < 1e-6);
}

TEST_CASE("encode_lite: stride 1 is bit-identical, stride 2 halves the tokens") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 21);
    for (auto& [name, t] : m.params())
        if (name.find(".wo") != std::string::npos)
            for (auto& v : t.data()) v = 0.02;
    auto frames = random_frames(4, cfg.frame_size(), 17);

    EncodeResult full = m.encode(frames.data(), 4);
    EncodeResult lite1 = m.encode_lite(frames.data(), 4, 1);
    CHECK(full.z.data() == lite1.z.data());
    CHECK(full.skip.data() == lite1.skip.data());

    AttentionTrace trace;
    EncodeResult lite2 = m.encode_lite(frames.data(), 4, 2, &trace);
    CHECK(lite2.z.shape() == std::vector<std::size_t>{4, cfg.latent});
    // 8 kept patches: temporal groups are 8, spatial matrices are 8×8
    CHECK(trace.size() == cfg.depth * (8 + 4) * cfg.heads);
    bool saw_spatial = false;
    for (const Mat& a : trace)
        if (a.rows == 8) {
            CHECK(a.cols == 8);
            saw_spatial = true;
        }
    CHECK(saw_spatial);

    CHECK_THROWS_AS(m.encode_lite(frames.data(), 4, 16, nullptr), ContractError);
}

TEST_CASE("decode emits one frame in range and responds to z like its finite differences") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 31);
    Rng rng = Rng::keyed(1, {2});
    std::vector<real> zv(cfg.latent);
    for (real& v : zv) v = rng.normal();
    Tensor z = Tensor::from(zv, {1, cfg.latent}, true);
    Tensor skip = Tensor::from(std::vector<real>(cfg.dim, 0.1), {1, cfg.dim}, false);

    Tensor frame = m.decode(z, skip);
    REQUIRE(frame.shape() == std::vector<std::size_t>{1, cfg.frame_size()});
    for (real v : frame.data()) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
    // deterministic
    Tensor frame2 = m.decode(z, skip);
    CHECK(frame.data() == frame2.data());

    // d|decode(z) - x|^2 / dz vs central differences
    auto target = random_frames(1, cfg.frame_size(), 23);
    auto loss_value = [&]() {
        Tensor l = sq_norm(sub(m.decode(z, skip), frame_target(target.data(), target.size())));
        return l.data()[0];
    };
    z.zero_grad();
    Tensor loss = sq_norm(sub(m.decode(z, skip), frame_target(target.data(), target.size())));
    loss.backward();
    for (std::size_t i = 0; i < cfg.latent; ++i)
        CHECK(rel_err(z.grad()[i], fd_at(z, i, loss_value)) < 1e-4);
}

TEST_CASE("transition is a residual MLP: identity at init, FD-consistent gradients") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 55);
    Rng rng = Rng::keyed(4, {4});
    std::vector<real> zv(cfg.latent);
    for (real& v : zv) v = rng.normal();
    Tensor z = Tensor::from(zv, {1, cfg.latent}, true);

    // zero-initialized output layer: exact identity
    Tensor out = m.transition(z);
    CHECK(out.data() == zv);

    // give f real weights, then check dsum(f(z)*r)/dz against finite differences
    for (const char* n : {"f.w2", "f.b2"})
        for (auto& v : m.param(n).data()) v = to_f32_grid(0.1 * rng.normal());
    std::vector<real> rv(cfg.latent);
    for (real& v : rv) v = rng.normal();
    Tensor r = Tensor::from(rv, {1, cfg.latent}, false);
    auto loss_value = [&]() { return sum_all(mul(m.transition(z), r)).data()[0]; };
    z.zero_grad();
    sum_all(mul(m.transition(z), r)).backward();
    for (std::size_t i = 0; i < cfg.latent; ++i)
        CHECK(rel_err(z.grad()[i], fd_at(z, i, loss_value)) < 1e-4);
}

TEST_CASE("rollout chains the transition and backpropagates through all steps") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 70);
    Rng rng = Rng::keyed(9, {1});
    std::vector<real> zv(cfg.latent);
    for (real& v : zv) v = rng.normal();
    Tensor z = Tensor::from(zv, {1, cfg.latent}, true);

    // identity transition at init: every rollout step equals z
    auto ident = m.rollout(z, 3);
    REQUIRE(ident.size() == 3);
    for (const auto& s : ident) CHECK(s.data() == zv);

    for (const char* n : {"f.w2", "f.b2"})
        for (auto& v : m.param(n).data()) v = to_f32_grid(0.05 * rng.normal());

    // K=1 equals a single transition
    CHECK(m.rollout(z, 1)[0].data() == m.transition(z).data());

    // FD through a K=3 rollout loss
    auto loss_value = [&]() {
        auto seq = m.rollout(z, 3);
        Tensor acc = sq_norm(seq[0]);
        for (std::size_t k = 1; k < seq.size(); ++k) acc = add(acc, sq_norm(seq[k]));
        return acc.data()[0];
    };
    z.zero_grad();
    {
        auto seq = m.rollout(z, 3);
        Tensor acc = sq_norm(seq[0]);
        for (std::size_t k = 1; k < seq.size(); ++k) acc = add(acc, sq_norm(seq[k]));
        acc.backward();
    }
    for (std::size_t i = 0; i < cfg.latent; ++i)
        CHECK(rel_err(z.grad()[i], fd_at(z, i, loss_value)) < 1e-4);
}

TEST_CASE("reconstruction and prediction losses follow the per-frame sum convention") {
    // x_hat = x + 0.1 on 2×2 frames, T=2 → (1/2)·Σ_t 4·0.01 = 0.04
    std::vector<real> x = {0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8};
    std::vector<Tensor> dec;
    for (std::size_t t = 0; t < 2; ++t) {
        std::vector<real> f(4);
        for (std::size_t i = 0; i < 4; ++i) f[i] = x[t * 4 + i] + 0.1;
        dec.push_back(Tensor::from(f, {1, 4}, false));
    }
    Tensor l = loss_rec(dec, x.data(), 4);
    CHECK(l.data()[0] == doctest::Approx(0.04).epsilon(1e-12));

    // identical clips → exactly 0
    std::vector<Tensor> same = {frame_target(x.data(), 4), frame_target(x.data() + 4, 4)};
    CHECK(loss_rec(same, x.data(), 4).data()[0] == 0.0);

    // loss_pred shares the convention; K=1 reduces to a one-frame rec term
    std::vector<Tensor> one = {dec[0]};
    CHECK(loss_pred(one, x.data(), 4).data()[0] ==
          doctest::Approx(4 * 0.01).epsilon(1e-12));

    // monotone: a strictly larger error on one pixel increases the loss
    dec[0].data()[0] += 0.2;
    CHECK(loss_rec(dec, x.data(), 4).data()[0] > 0.04);
}

TEST_CASE("Lyapunov energy and hinge loss match the hand examples") {
    std::vector<real> eye = {1, 0, 0, 1};
    Tensor w_id = Tensor::from(eye, {2, 2}, false);
    Tensor z0 = Tensor::from({0.0, 0.0}, {1, 2}, false);
    CHECK(lyapunov_V(z0, w_id).data()[0] == 0.0);
    Tensor z10 = Tensor::from({1.0, 0.0}, {1, 2}, false);
    CHECK(lyapunov_V(z10, w_id).data()[0] == 1.0);
    Tensor w2 = Tensor::from({2.0, 0.0, 0.0, 2.0}, {2, 2}, false);
    Tensor z11 = Tensor::from({1.0, 1.0}, {1, 2}, false);
    CHECK(lyapunov_V(z11, w2).data()[0] == 8.0);

    // contraction f(z)=0.5z → zero hinge
    std::vector<Tensor> contracting = {
        Tensor::from({1.0, 0.0}, {1, 2}, false),
        Tensor::from({0.5, 0.0}, {1, 2}, false),
        Tensor::from({0.25, 0.0}, {1, 2}, false),
    };
    CHECK(loss_lyap(contracting, w_id).data()[0] == 0.0);

    // expansion f(z)=2z from (1,0), K=1 → max(0, 4-1) = 3
    std::vector<Tensor> expanding = {z10, Tensor::from({2.0, 0.0}, {1, 2}, false)};
    CHECK(loss_lyap(expanding, w_id).data()[0] == doctest::Approx(3.0).epsilon(1e-12));

    // identity rollout → 0
    std::vector<Tensor> frozen = {z11, z11, z11};
    CHECK(loss_lyap(frozen, w_id).data()[0] == 0.0);
}

TEST_CASE("loss_total is the exact weighted sum and skips absent terms") {
    Tensor a = Tensor::scalar(1.0), b = Tensor::scalar(2.0), c = Tensor::scalar(3.0);
    CHECK(loss_total(a, &b, &c, 0.5, 0.1).data()[0] == doctest::Approx(2.3).epsilon(1e-12));
    // zero weights recover l_rec exactly (the same value, no arithmetic)
    CHECK(loss_total(a, &b, &c, 0.0, 0.0).data()[0] == 1.0);
    CHECK(loss_total(a, nullptr, nullptr, 1.0, 1.0).data()[0] == 1.0);
}

TEST_CASE("selected dims project latents and install an identity Lyapunov head") {
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 77);
    CHECK_THROWS_AS(m.select(Tensor::zeros({2, cfg.latent})), ContractError);
    m.init_lyapunov({3, 7});
    Tensor w = m.lyapunov_w();
    REQUIRE(w.shape() == std::vector<std::size_t>{2, 2});
    CHECK(w.data() == std::vector<real>{1, 0, 0, 1});

    std::vector<real> zv(2 * cfg.latent);
    for (std::size_t i = 0; i < zv.size(); ++i) zv[i] = real(i);
    Tensor z = Tensor::from(zv, {2, cfg.latent}, false);
    Tensor sel = m.select(z);
    REQUIRE(sel.shape() == std::vector<std::size_t>{2, 2});
    CHECK(sel.data() == std::vector<real>{3, 7, 19, 23});

    CHECK_THROWS_AS(m.init_lyapunov({0, 0}), ContractError);
    CHECK_THROWS_AS(m.init_lyapunov({cfg.latent}), ContractError);
}

TEST_CASE("checkpoints restore the model bit-exactly") {
    namespace fs = std::filesystem;
    ModelConfig cfg = small_config();
    Model m = Model::init(cfg, 123);
    m.init_lyapunov({1, 4, 9});
    // perturb some weights off their init so the test is not trivial
    Rng rng = Rng::keyed(6, {6});
    for (auto& v : m.param("head.w").data()) v = to_f32_grid(v + 0.01 * rng.normal());

    fs::path p = fs::temp_directory_path() / "lyt_model_test.ckpt";
    write_checkpoint(p, m.to_checkpoint({}, "note=test\n"));
    Model back = Model::from_checkpoint(read_checkpoint(p));
    fs::remove(p);

    CHECK(back.cfg.to_kv() == cfg.to_kv());
    CHECK(back.selected_dims() == std::vector<std::size_t>{1, 4, 9});
    REQUIRE(back.params().size() == m.params().size());
    for (std::size_t i = 0; i < m.params().size(); ++i) {
        CHECK(back.params()[i].first == m.params()[i].first);
        CHECK(back.params()[i].second.data() == m.params()[i].second.data());
    }
    auto frames = random_frames(4, cfg.frame_size(), 2);
    CHECK(back.encode(frames.data(), 4).z.data() == m.encode(frames.data(), 4).z.data());
}

TEST_CASE("model config validation and the lite variant") {
    ModelConfig cfg = small_config();
    CHECK_NOTHROW(cfg.validate());
    ModelConfig bad = cfg;
    bad.dim = 65;  // not divisible by heads
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.sparsify_stride = 2;  // without lite
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.latent = 128;
    CHECK_THROWS_AS(bad.validate(), ConfigError);
    bad = cfg;
    bad.horizon = 0;
    CHECK_THROWS_AS(bad.validate(), ConfigError);

    ModelConfig lite = cfg.lite_variant();
    CHECK(lite.lite);
    CHECK(lite.sparsify_stride == 2);
    CHECK(lite.heads == 2);
    CHECK(lite.dim == 32);
    CHECK(lite.n_kept() == 8);

    ModelConfig round = ModelConfig::from_kv(lite.to_kv());
    CHECK(round.to_kv() == lite.to_kv());
    CHECK_THROWS_AS(ModelConfig::from_kv("dim=abc\n"), ConfigError);
}

TEST_CASE("factorized attention scores strictly undercut joint attention") {
    // hand count at the desk shape: 16 patches, 8 frames
    CHECK(score_entries_factorized(16, 8) == 16 * 64 + 8 * 256);
    CHECK(score_entries_joint(16, 8) == 128 * 128);
    // N·T² + T·N² < (N·T)² ⟺ 1/N + 1/T < 1: strict everywhere on the grid
    // except the degenerate corner N=T=2 where both sides equal 16
    CHECK(score_entries_factorized(2, 2) == score_entries_joint(2, 2));
    for (std::size_t n = 2; n <= 64; n *= 2)
        for (std::size_t t = 2; t <= 16; ++t)
            if (n != 2 || t != 2)
                CHECK(score_entries_factorized(n, t) < score_entries_joint(n, t));
}

TEST_CASE("the lite variant costs strictly fewer analytic FLOPs") {
    ModelConfig full = small_config();
    ModelConfig lite = full.lite_variant();
    for (std::size_t T : {2, 4, 8}) {
        CHECK(encode_flops(lite, T) < encode_flops(full, T));
        CHECK(window_forward_flops(lite, T, 4) < window_forward_flops(full, T, 4));
    }
    // sparsification alone (same width) already reduces encoder FLOPs
    ModelConfig strided = full;
    strided.lite = true;
    strided.sparsify_stride = 2;
    CHECK(encode_flops(strided, 8) < encode_flops(full, 8));
    // FLOPs grow monotonically with the window
    CHECK(encode_flops(full, 8) > encode_flops(full, 4));
    CHECK(decode_flops(full) > 0);
    // two d_z <-> 4·d_z linears at 2 FLOPs per MAC: 2·(2·16·64) = 4096
    CHECK(transition_flops(full) == 4096);
}
