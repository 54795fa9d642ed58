#include "lyt/ops.hpp"

#include <cmath>
#include <cstring>

namespace lyt {

namespace {

void check_2d(const Tensor& t, const char* op) {
  if (t.ndim() != 2) throw DimensionError(std::string(op) + ": expected 2-D tensor");
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw DimensionError(std::string(op) + ": shape mismatch");
}

// C[m×n] += A[m×k] · B[k×n], accumulating into c (must be sized/zeroed).
// i-k-j order: the inner loop is a unit-stride axpy over B and C rows.
void mm_acc(const real* a, const real* b, real* c, std::size_t m, std::size_t k, std::size_t n) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* arow = a + i * k;
    real* crow = c + i * n;
    for (std::size_t p = 0; p < k; ++p) {
      real av = arow[p];
      if (av == 0.0) continue;
      const real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×n] += A[k×m]ᵀ · B[k×n]  (i.e. C = AᵀB), unit-stride inner loop.
void mm_at_acc(const real* a, const real* b, real* c, std::size_t k, std::size_t m,
               std::size_t n) {
  for (std::size_t p = 0; p < k; ++p) {
    const real* arow = a + p * m;
    const real* brow = b + p * n;
    for (std::size_t i = 0; i < m; ++i) {
      real av = arow[i];
      if (av == 0.0) continue;
      real* crow = c + i * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m×k] += A[m×n] · B[k×n]ᵀ (i.e. C = ABᵀ): rows of A dotted with rows of B.
void mm_bt_acc(const real* a, const real* b, real* c, std::size_t m, std::size_t n,
               std::size_t k) {
  for (std::size_t i = 0; i < m; ++i) {
    const real* arow = a + i * n;
    real* crow = c + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const real* brow = b + p * n;
      real acc = 0.0;
      for (std::size_t j = 0; j < n; ++j) acc += arow[j] * brow[j];
      crow[p] += acc;
    }
  }
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_2d(a, "matmul");
  check_2d(b, "matmul");
  std::size_t m = a.rows(), k = a.cols(), n = b.cols();
  if (b.rows() != k) throw DimensionError("matmul: inner dimensions disagree");
  std::vector<real> out(m * n, 0.0);
  mm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  return Tensor::make(
      {m, n}, std::move(out), {a, b}, [a, b, m, k, n](const std::vector<real>& g) {
        // dL/dA = dL/dC · Bᵀ ; dL/dB = Aᵀ · dL/dC
        if (a.needs_grad()) mm_bt_acc(g.data(), b.data().data(), a.grad().data(), m, n, k);
        if (b.needs_grad()) mm_at_acc(a.data().data(), g.data(), b.grad().data(), m, k, n);
      });
}

Tensor transpose(const Tensor& a) {
  check_2d(a, "transpose");
  std::size_t m = a.rows(), n = a.cols();
  std::vector<real> out(m * n);
  const auto& src = a.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[j * m + i] = src[i * n + j];
  return Tensor::make({n, m}, std::move(out), {a}, [a, m, n](const std::vector<real>& g) {
    if (!a.needs_grad()) return;
    auto& ga = a.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[j * m + i];
  });
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [a, b](const std::vector<real>& g) {
    if (a.needs_grad()) {
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.needs_grad()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [a, b](const std::vector<real>& g) {
    if (a.needs_grad()) {
      auto& ga = a.grad();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (b.needs_grad()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return Tensor::make(a.shape(), std::move(out), {a, b}, [a, b](const std::vector<real>& g) {
    if (a.needs_grad()) {
      auto& ga = a.grad();
      const auto& bd = b.data();
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bd[i];
    }
    if (b.needs_grad()) {
      auto& gb = b.grad();
      const auto& ad = a.data();
      for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * ad[i];
    }
  });
}

Tensor scale(const Tensor& a, real c) {
  std::vector<real> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * c;
  return Tensor::make(a.shape(), std::move(out), {a}, [a, c](const std::vector<real>& g) {
    if (!a.needs_grad()) return;
    auto& ga = a.grad();
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * c;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& b) {
  check_2d(x, "add_bias");
  check_2d(b, "add_bias");
  std::size_t m = x.rows(), n = x.cols();
  if (b.rows() != 1 || b.cols() != n) throw DimensionError("add_bias: bias must be 1×cols");
  std::vector<real> out(x.data());
  const auto& bd = b.data();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += bd[j];
  return Tensor::make({m, n}, std::move(out), {x, b}, [x, b, m, n](const std::vector<real>& g) {
    if (x.needs_grad()) {
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (b.needs_grad()) {
      auto& gb = b.grad();
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
    }
  });
}

Tensor add_tiled_rows(const Tensor& x, const Tensor& e) {
  check_2d(x, "add_tiled_rows");
  check_2d(e, "add_tiled_rows");
  std::size_t m = x.rows(), n = x.cols(), r = e.rows();
  if (e.cols() != n || r == 0 || m % r != 0)
    throw DimensionError("add_tiled_rows: rows must tile evenly");
  std::vector<real> out(x.data());
  const auto& ed = e.data();
  for (std::size_t i = 0; i < m; ++i) {
    const real* erow = ed.data() + (i % r) * n;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += erow[j];
  }
  return Tensor::make({m, n}, std::move(out), {x, e}, [x, e, m, n, r](const std::vector<real>& g) {
    if (x.needs_grad()) {
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
    }
    if (e.needs_grad()) {
      auto& ge = e.grad();
      for (std::size_t i = 0; i < m; ++i) {
        real* erow = ge.data() + (i % r) * n;
        for (std::size_t j = 0; j < n; ++j) erow[j] += g[i * n + j];
      }
    }
  });
}

Tensor add_block_rows(const Tensor& x, const Tensor& e) {
  check_2d(x, "add_block_rows");
  check_2d(e, "add_block_rows");
  std::size_t m = x.rows(), n = x.cols(), r = e.rows();
  if (e.cols() != n || r == 0 || m % r != 0)
    throw DimensionError("add_block_rows: rows must split into blocks evenly");
  std::size_t block = m / r;
  std::vector<real> out(x.data());
  const auto& ed = e.data();
  for (std::size_t i = 0; i < m; ++i) {
    const real* erow = ed.data() + (i / block) * n;
    for (std::size_t j = 0; j < n; ++j) out[i * n + j] += erow[j];
  }
  return Tensor::make({m, n}, std::move(out), {x, e},
                      [x, e, m, n, block](const std::vector<real>& g) {
                        if (x.needs_grad()) {
                          auto& gx = x.grad();
                          for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
                        }
                        if (e.needs_grad()) {
                          auto& ge = e.grad();
                          for (std::size_t i = 0; i < m; ++i) {
                            real* erow = ge.data() + (i / block) * n;
                            for (std::size_t j = 0; j < n; ++j) erow[j] += g[i * n + j];
                          }
                        }
                      });
}

Tensor softmax_rows(const Tensor& x) {
  check_2d(x, "softmax_rows");
  std::size_t m = x.rows(), n = x.cols();
  std::vector<real> out(m * n);
  const auto& xd = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    const real* row = xd.data() + i * n;
    real* orow = out.data() + i * n;
    real mx = row[0];
    for (std::size_t j = 1; j < n; ++j) mx = std::max(mx, row[j]);
    real sum = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      orow[j] = std::exp(row[j] - mx);
      sum += orow[j];
    }
    for (std::size_t j = 0; j < n; ++j) orow[j] /= sum;
  }
  Tensor result = Tensor::make({m, n}, std::move(out), {x}, nullptr);
  if (result.needs_grad()) {
    // Capture the softmax output values for the backward pass.
    std::vector<real> y = result.data();
    result.node()->backfn = [x, y = std::move(y), m, n](const std::vector<real>& g) {
      if (!x.needs_grad()) return;
      auto& gx = x.grad();
      for (std::size_t i = 0; i < m; ++i) {
        const real* yrow = y.data() + i * n;
        const real* grow = g.data() + i * n;
        real dot = 0.0;
        for (std::size_t j = 0; j < n; ++j) dot += grow[j] * yrow[j];
        real* gxrow = gx.data() + i * n;
        for (std::size_t j = 0; j < n; ++j) gxrow[j] += (grow[j] - dot) * yrow[j];
      }
    };
  }
  return result;
}

Tensor layernorm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias, real eps) {
  check_2d(x, "layernorm_rows");
  std::size_t m = x.rows(), n = x.cols();
  if (gain.rows() != 1 || gain.cols() != n || bias.rows() != 1 || bias.cols() != n)
    throw DimensionError("layernorm_rows: gain/bias must be 1×cols");
  std::vector<real> out(m * n), xhat(m * n), inv_sigma(m);
  const auto& xd = x.data();
  const auto& gd = gain.data();
  const auto& bd = bias.data();
  for (std::size_t i = 0; i < m; ++i) {
    const real* row = xd.data() + i * n;
    real mu = 0.0;
    for (std::size_t j = 0; j < n; ++j) mu += row[j];
    mu /= static_cast<real>(n);
    real var = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      real d = row[j] - mu;
      var += d * d;
    }
    var /= static_cast<real>(n);
    real is = 1.0 / std::sqrt(var + eps);
    inv_sigma[i] = is;
    for (std::size_t j = 0; j < n; ++j) {
      real xh = (row[j] - mu) * is;
      xhat[i * n + j] = xh;
      out[i * n + j] = xh * gd[j] + bd[j];
    }
  }
  return Tensor::make(
      {m, n}, std::move(out), {x, gain, bias},
      [x, gain, bias, xhat = std::move(xhat), inv_sigma = std::move(inv_sigma), m,
       n](const std::vector<real>& g) {
        const auto& gd = gain.data();
        for (std::size_t i = 0; i < m; ++i) {
          const real* grow = g.data() + i * n;
          const real* xhrow = xhat.data() + i * n;
          if (gain.needs_grad()) {
            auto& gg = gain.grad();
            for (std::size_t j = 0; j < n; ++j) gg[j] += grow[j] * xhrow[j];
          }
          if (bias.needs_grad()) {
            auto& gb = bias.grad();
            for (std::size_t j = 0; j < n; ++j) gb[j] += grow[j];
          }
          if (x.needs_grad()) {
            // dx = (1/σ)·(dŷ − mean(dŷ) − x̂·mean(dŷ·x̂)), dŷ = dy·gain
            real mean_dy = 0.0, mean_dyxh = 0.0;
            for (std::size_t j = 0; j < n; ++j) {
              real dyh = grow[j] * gd[j];
              mean_dy += dyh;
              mean_dyxh += dyh * xhrow[j];
            }
            mean_dy /= static_cast<real>(n);
            mean_dyxh /= static_cast<real>(n);
            auto& gx = x.grad();
            real* gxrow = gx.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) {
              real dyh = grow[j] * gd[j];
              gxrow[j] += inv_sigma[i] * (dyh - mean_dy - xhrow[j] * mean_dyxh);
            }
          }
        }
      });
}

Tensor gelu(const Tensor& x) {
  constexpr real inv_sqrt2 = 0.70710678118654752440;
  constexpr real inv_sqrt2pi = 0.39894228040143267794;
  std::vector<real> out(x.size());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i)
    out[i] = 0.5 * xd[i] * (1.0 + std::erf(xd[i] * inv_sqrt2));
  return Tensor::make(x.shape(), std::move(out), {x}, [x](const std::vector<real>& g) {
    if (!x.needs_grad()) return;
    auto& gx = x.grad();
    const auto& xd = x.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      real v = xd[i];
      real cdf = 0.5 * (1.0 + std::erf(v * inv_sqrt2));
      real pdf = inv_sqrt2pi * std::exp(-0.5 * v * v);
      gx[i] += g[i] * (cdf + v * pdf);
    }
  });
}

Tensor sigmoid(const Tensor& x) {
  std::vector<real> out(x.size());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 1.0 / (1.0 + std::exp(-xd[i]));
  Tensor result = Tensor::make(x.shape(), std::move(out), {x}, nullptr);
  if (result.needs_grad()) {
    std::vector<real> y = result.data();
    result.node()->backfn = [x, y = std::move(y)](const std::vector<real>& g) {
      if (!x.needs_grad()) return;
      auto& gx = x.grad();
      for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i] * y[i] * (1.0 - y[i]);
    };
  }
  return result;
}

Tensor relu(const Tensor& x) {
  std::vector<real> out(x.size());
  const auto& xd = x.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xd[i] > 0.0 ? xd[i] : 0.0;
  return Tensor::make(x.shape(), std::move(out), {x}, [x](const std::vector<real>& g) {
    if (!x.needs_grad()) return;
    auto& gx = x.grad();
    const auto& xd = x.data();
    // Subgradient at exactly 0 is taken as 0.
    for (std::size_t i = 0; i < g.size(); ++i)
      if (xd[i] > 0.0) gx[i] += g[i];
  });
}

Tensor sum_all(const Tensor& x) {
  real s = 0.0;
  for (real v : x.data()) s += v;
  return Tensor::make({1, 1}, {s}, {x}, [x](const std::vector<real>& g) {
    if (!x.needs_grad()) return;
    auto& gx = x.grad();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[0];
  });
}

Tensor sq_norm(const Tensor& x) {
  real s = 0.0;
  for (real v : x.data()) s += v * v;
  return Tensor::make({1, 1}, {s}, {x}, [x](const std::vector<real>& g) {
    if (!x.needs_grad()) return;
    auto& gx = x.grad();
    const auto& xd = x.data();
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += 2.0 * g[0] * xd[i];
  });
}

Tensor mean_rows_blocks(const Tensor& x, std::size_t block) {
  check_2d(x, "mean_rows_blocks");
  std::size_t m = x.rows(), n = x.cols();
  if (block == 0 || m % block != 0)
    throw DimensionError("mean_rows_blocks: rows must divide into blocks");
  std::size_t mb = m / block;
  std::vector<real> out(mb * n, 0.0);
  const auto& xd = x.data();
  for (std::size_t i = 0; i < m; ++i) {
    real* orow = out.data() + (i / block) * n;
    const real* row = xd.data() + i * n;
    for (std::size_t j = 0; j < n; ++j) orow[j] += row[j];
  }
  real inv = 1.0 / static_cast<real>(block);
  for (real& v : out) v *= inv;
  return Tensor::make({mb, n}, std::move(out), {x},
                      [x, m, n, block, inv](const std::vector<real>& g) {
                        if (!x.needs_grad()) return;
                        auto& gx = x.grad();
                        for (std::size_t i = 0; i < m; ++i) {
                          const real* grow = g.data() + (i / block) * n;
                          real* gxrow = gx.data() + i * n;
                          for (std::size_t j = 0; j < n; ++j) gxrow[j] += grow[j] * inv;
                        }
                      });
}

Tensor gather_rows(const Tensor& x, std::vector<std::size_t> idx) {
  check_2d(x, "gather_rows");
  std::size_t n = x.cols();
  std::vector<real> out(idx.size() * n);
  const auto& xd = x.data();
  for (std::size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] >= x.rows()) throw DimensionError("gather_rows: row index out of range");
    std::memcpy(out.data() + i * n, xd.data() + idx[i] * n, n * sizeof(real));
  }
  std::size_t m = idx.size();
  return Tensor::make({m, n}, std::move(out), {x},
                      [x, idx = std::move(idx), n](const std::vector<real>& g) {
                        if (!x.needs_grad()) return;
                        auto& gx = x.grad();
                        for (std::size_t i = 0; i < idx.size(); ++i) {
                          real* gxrow = gx.data() + idx[i] * n;
                          const real* grow = g.data() + i * n;
                          for (std::size_t j = 0; j < n; ++j) gxrow[j] += grow[j];
                        }
                      });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_rows: no parts");
  std::size_t n = parts[0].cols(), m = 0;
  for (const Tensor& p : parts) {
    check_2d(p, "concat_rows");
    if (p.cols() != n) throw DimensionError("concat_rows: column mismatch");
    m += p.rows();
  }
  std::vector<real> out;
  out.reserve(m * n);
  for (const Tensor& p : parts) out.insert(out.end(), p.data().begin(), p.data().end());
  return Tensor::make({m, n}, std::move(out), parts, [parts, n](const std::vector<real>& g) {
    std::size_t off = 0;
    for (const Tensor& p : parts) {
      std::size_t len = p.rows() * n;
      if (p.needs_grad()) {
        auto& gp = p.grad();
        for (std::size_t i = 0; i < len; ++i) gp[i] += g[off + i];
      }
      off += len;
    }
  });
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw DimensionError("concat_cols: no parts");
  std::size_t m = parts[0].rows(), n = 0;
  for (const Tensor& p : parts) {
    check_2d(p, "concat_cols");
    if (p.rows() != m) throw DimensionError("concat_cols: row mismatch");
    n += p.cols();
  }
  std::vector<real> out(m * n);
  std::size_t coff = 0;
  for (const Tensor& p : parts) {
    std::size_t pc = p.cols();
    for (std::size_t i = 0; i < m; ++i)
      std::memcpy(out.data() + i * n + coff, p.data().data() + i * pc, pc * sizeof(real));
    coff += pc;
  }
  return Tensor::make({m, n}, std::move(out), parts, [parts, m, n](const std::vector<real>& g) {
    std::size_t coff = 0;
    for (const Tensor& p : parts) {
      std::size_t pc = p.cols();
      if (p.needs_grad()) {
        auto& gp = p.grad();
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < pc; ++j) gp[i * pc + j] += g[i * n + coff + j];
      }
      coff += pc;
    }
  });
}

Tensor slice_cols(const Tensor& x, std::size_t c0, std::size_t c1) {
  check_2d(x, "slice_cols");
  std::size_t m = x.rows(), n = x.cols();
  if (c0 >= c1 || c1 > n) throw DimensionError("slice_cols: invalid column range");
  std::size_t w = c1 - c0;
  std::vector<real> out(m * w);
  const auto& xd = x.data();
  for (std::size_t i = 0; i < m; ++i)
    std::memcpy(out.data() + i * w, xd.data() + i * n + c0, w * sizeof(real));
  return Tensor::make({m, w}, std::move(out), {x}, [x, c0, w, n, m](const std::vector<real>& g) {
    if (!x.needs_grad()) return;
    auto& gx = x.grad();
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < w; ++j) gx[i * n + c0 + j] += g[i * w + j];
  });
}

Tensor reshape(const Tensor& x, std::vector<std::size_t> shape) {
  std::size_t numel = 1;
  for (std::size_t d : shape) numel *= d;
  if (numel != x.size()) throw DimensionError("reshape: element count mismatch");
  std::vector<real> out(x.data());
  return Tensor::make(std::move(shape), std::move(out), {x}, [x](const std::vector<real>& g) {
    if (!x.needs_grad()) return;
    auto& gx = x.grad();
    for (std::size_t i = 0; i < g.size(); ++i) gx[i] += g[i];
  });
}

Tensor conv_transpose2d(const Tensor& x, const Tensor& w, const Tensor& b, std::size_t stride,
                        std::size_t pad) {
  if (x.ndim() != 3 || w.ndim() != 4) throw DimensionError("conv_transpose2d: bad input rank");
  std::size_t cin = x.shape()[0], hin = x.shape()[1], win = x.shape()[2];
  std::size_t cout = w.shape()[1], k = w.shape()[2];
  if (w.shape()[0] != cin || w.shape()[3] != k)
    throw DimensionError("conv_transpose2d: weight shape mismatch");
  if (b.size() != cout) throw DimensionError("conv_transpose2d: bias size mismatch");
  std::size_t hout = (hin - 1) * stride + k - 2 * pad;
  std::size_t wout = (win - 1) * stride + k - 2 * pad;

  std::vector<real> out(cout * hout * wout);
  const auto& bd = b.data();
  for (std::size_t co = 0; co < cout; ++co)
    std::fill(out.begin() + co * hout * wout, out.begin() + (co + 1) * hout * wout, bd[co]);

  const auto& xd = x.data();
  const auto& wd = w.data();
  // Scatter form: each input pixel deposits a k×k stamp into the output.
  for (std::size_t ci = 0; ci < cin; ++ci)
    for (std::size_t iy = 0; iy < hin; ++iy)
      for (std::size_t ix = 0; ix < win; ++ix) {
        real a = xd[(ci * hin + iy) * win + ix];
        if (a == 0.0) continue;
        const real* wbase = wd.data() + ci * cout * k * k;
        for (std::size_t co = 0; co < cout; ++co) {
          const real* wk = wbase + co * k * k;
          real* obase = out.data() + co * hout * wout;
          for (std::size_t ky = 0; ky < k; ++ky) {
            std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * stride + ky) -
                                static_cast<std::ptrdiff_t>(pad);
            if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(hout)) continue;
            for (std::size_t kx = 0; kx < k; ++kx) {
              std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * stride + kx) -
                                  static_cast<std::ptrdiff_t>(pad);
              if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(wout)) continue;
              obase[oy * wout + ox] += a * wk[ky * k + kx];
            }
          }
        }
      }

  return Tensor::make(
      {cout, hout, wout}, std::move(out), {x, w, b},
      [x, w, b, cin, hin, win, cout, k, hout, wout, stride, pad](const std::vector<real>& g) {
        const auto& xd = x.data();
        const auto& wd = w.data();
        if (b.needs_grad()) {
          auto& gb = b.grad();
          for (std::size_t co = 0; co < cout; ++co) {
            real s = 0.0;
            const real* gbase = g.data() + co * hout * wout;
            for (std::size_t i = 0; i < hout * wout; ++i) s += gbase[i];
            gb[co] += s;
          }
        }
        for (std::size_t ci = 0; ci < cin; ++ci)
          for (std::size_t iy = 0; iy < hin; ++iy)
            for (std::size_t ix = 0; ix < win; ++ix) {
              std::size_t xi = (ci * hin + iy) * win + ix;
              real a = xd[xi];
              real gx_acc = 0.0;
              const real* wbase = wd.data() + ci * cout * k * k;
              for (std::size_t co = 0; co < cout; ++co) {
                const real* wk = wbase + co * k * k;
                const real* gbase = g.data() + co * hout * wout;
                for (std::size_t ky = 0; ky < k; ++ky) {
                  std::ptrdiff_t oy = static_cast<std::ptrdiff_t>(iy * stride + ky) -
                                      static_cast<std::ptrdiff_t>(pad);
                  if (oy < 0 || oy >= static_cast<std::ptrdiff_t>(hout)) continue;
                  for (std::size_t kx = 0; kx < k; ++kx) {
                    std::ptrdiff_t ox = static_cast<std::ptrdiff_t>(ix * stride + kx) -
                                        static_cast<std::ptrdiff_t>(pad);
                    if (ox < 0 || ox >= static_cast<std::ptrdiff_t>(wout)) continue;
                    real go = gbase[oy * wout + ox];
                    if (x.needs_grad()) gx_acc += go * wk[ky * k + kx];
                    if (w.needs_grad())
                      w.grad()[(ci * cout + co) * k * k + ky * k + kx] += go * a;
                  }
                }
              }
              if (x.needs_grad()) x.grad()[xi] += gx_acc;
            }
      });
}

}  // namespace lyt
