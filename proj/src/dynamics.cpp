#include "lyt/dynamics.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <istream>
#include <sstream>

namespace lyt {

std::string to_string(SystemKind kind) {
  switch (kind) {
    case SystemKind::CircularMotion: return "circular_motion";
    case SystemKind::SinglePendulum: return "single_pendulum";
    case SystemKind::DoublePendulum: return "double_pendulum";
    case SystemKind::ElasticPendulum: return "elastic_pendulum";
    case SystemKind::ReactionDiffusion: return "reaction_diffusion";
  }
  throw ContractError("to_string: unknown SystemKind");
}

SystemKind system_kind_from_string(const std::string& name) {
  if (name == "circular_motion") return SystemKind::CircularMotion;
  if (name == "single_pendulum") return SystemKind::SinglePendulum;
  if (name == "double_pendulum") return SystemKind::DoublePendulum;
  if (name == "elastic_pendulum") return SystemKind::ElasticPendulum;
  if (name == "reaction_diffusion") return SystemKind::ReactionDiffusion;
  throw ConfigError("unknown system kind: " + name);
}

void SystemSpec::validate() const {
  if (!(dt > 0.0 && dt <= 0.05)) throw ConfigError("SystemSpec: dt must be in (0, 0.05]");
  auto positive = [](real v, const char* name) {
    if (!(v > 0.0)) throw ConfigError(std::string("SystemSpec: ") + name + " must be positive");
  };
  switch (kind) {
    case SystemKind::CircularMotion:
      positive(params.omega, "omega");
      positive(params.radius, "radius");
      break;
    case SystemKind::SinglePendulum:
      positive(params.g, "g");
      positive(params.length, "length");
      break;
    case SystemKind::DoublePendulum:
      positive(params.g, "g");
      positive(params.mass1, "mass1");
      positive(params.mass2, "mass2");
      positive(params.length1, "length1");
      positive(params.length2, "length2");
      break;
    case SystemKind::ElasticPendulum:
      positive(params.g, "g");
      positive(params.mass, "mass");
      positive(params.spring_k, "spring_k");
      positive(params.natural_length, "natural_length");
      break;
    case SystemKind::ReactionDiffusion:
      positive(params.diff_u, "diff_u");
      positive(params.diff_v, "diff_v");
      positive(params.feed, "feed");
      positive(params.kill, "kill");
      positive(params.rd_speed, "rd_speed");
      if (rd_h < 8 || rd_w < 8) throw ConfigError("SystemSpec: RD grid extents must be >= 8");
      break;
  }
}

std::size_t SystemSpec::state_dim() const {
  switch (kind) {
    case SystemKind::CircularMotion: return 2;
    case SystemKind::SinglePendulum: return 2;
    case SystemKind::DoublePendulum: return 4;
    case SystemKind::ElasticPendulum: return 4;
    case SystemKind::ReactionDiffusion: return 2 * rd_h * rd_w;
  }
  throw ContractError("state_dim: unknown SystemKind");
}

std::size_t SystemSpec::ground_truth_dim() const {
  switch (kind) {
    case SystemKind::CircularMotion: return 2;
    case SystemKind::SinglePendulum: return 2;
    case SystemKind::DoublePendulum: return 4;
    case SystemKind::ElasticPendulum: return 6;
    case SystemKind::ReactionDiffusion: return 2;
  }
  throw ContractError("ground_truth_dim: unknown SystemKind");
}

std::array<real, 2> circular_state(real t, real omega, real radius) {
  if (!(radius > 0.0)) throw ContractError("circular_state: radius must be positive");
  return {radius * std::cos(omega * t), radius * std::sin(omega * t)};
}

void single_pendulum_deriv(const real* s, real* ds, real g, real length) {
  ds[0] = s[1];
  ds[1] = -(g / length) * std::sin(s[0]);
}

void double_pendulum_deriv(const real* s, real* ds, const SystemParams& p) {
  const real th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
  const real m1 = p.mass1, m2 = p.mass2, l1 = p.length1, l2 = p.length2, g = p.g;
  const real delta = th1 - th2;
  const real sd = std::sin(delta), cd = std::cos(delta);
  // Denominator 2m1+m2-m2·cos(2Δ) ≥ 2m1 > 0: never singular.
  const real den = 2.0 * m1 + m2 - m2 * std::cos(2.0 * delta);
  ds[0] = w1;
  ds[1] = w2;
  ds[2] = (-g * (2.0 * m1 + m2) * std::sin(th1) - m2 * g * std::sin(th1 - 2.0 * th2) -
           2.0 * sd * m2 * (w2 * w2 * l2 + w1 * w1 * l1 * cd)) /
          (l1 * den);
  ds[3] = (2.0 * sd *
           (w1 * w1 * l1 * (m1 + m2) + g * (m1 + m2) * std::cos(th1) + w2 * w2 * l2 * m2 * cd)) /
          (l2 * den);
}

void elastic_pendulum_deriv(const real* s, real* ds, const SystemParams& p) {
  const real r = s[0], th = s[1], rdot = s[2], thdot = s[3];
  if (!(r > 0.0)) throw SingularityError("elastic_pendulum_deriv: radius reached zero");
  ds[0] = rdot;
  ds[1] = thdot;
  ds[2] = r * thdot * thdot - (p.spring_k / p.mass) * (r - p.natural_length) +
          p.g * std::cos(th);
  ds[3] = -(2.0 * rdot * thdot + p.g * std::sin(th)) / r;
}

void reaction_diffusion_step(std::vector<real>& u, std::vector<real>& v, const SystemParams& p,
                             real dt, std::size_t h, std::size_t w) {
  if (u.size() != h * w || v.size() != h * w)
    throw DimensionError("reaction_diffusion_step: field size does not match grid");
  const real dmax = std::max(p.diff_u, p.diff_v);
  if (!(dt > 0.0) || dt > 1.0 / (4.0 * dmax))
    throw ConfigError("reaction_diffusion_step: dt violates explicit-Euler stability bound");

  static thread_local std::vector<real> un, vn;
  un = u;
  vn = v;
  for (std::size_t y = 0; y < h; ++y) {
    const std::size_t up = (y + h - 1) % h, dn = (y + 1) % h;
    for (std::size_t x = 0; x < w; ++x) {
      const std::size_t lf = (x + w - 1) % w, rt = (x + 1) % w;
      const std::size_t i = y * w + x;
      const real lap_u = un[up * w + x] + un[dn * w + x] + un[y * w + lf] + un[y * w + rt] -
                         4.0 * un[i];
      const real lap_v = vn[up * w + x] + vn[dn * w + x] + vn[y * w + lf] + vn[y * w + rt] -
                         4.0 * vn[i];
      const real uvv = un[i] * vn[i] * vn[i];
      u[i] = un[i] + dt * (p.diff_u * lap_u - uvv + p.feed * (1.0 - un[i]));
      v[i] = vn[i] + dt * (p.diff_v * lap_v + uvv - (p.feed + p.kill) * vn[i]);
    }
  }
}

StateTrajectory integrate_rk4(const SystemSpec& spec, const std::vector<real>& init,
                              std::size_t steps) {
  if (steps < 1) throw ContractError("integrate_rk4: steps must be >= 1");
  const std::size_t dim = spec.state_dim();
  if (init.size() != dim) throw DimensionError("integrate_rk4: initial state has wrong dimension");
  if (spec.kind == SystemKind::ReactionDiffusion)
    throw ContractError("integrate_rk4: use simulate_rd for the reaction-diffusion system");

  auto deriv = [&spec](const real* s, real* ds) {
    switch (spec.kind) {
      case SystemKind::CircularMotion:
        // (x, y)' = (-ω y, ω x): uniform rotation as a linear ODE.
        ds[0] = -spec.params.omega * s[1];
        ds[1] = spec.params.omega * s[0];
        break;
      case SystemKind::SinglePendulum:
        single_pendulum_deriv(s, ds, spec.params.g, spec.params.length);
        break;
      case SystemKind::DoublePendulum:
        double_pendulum_deriv(s, ds, spec.params);
        break;
      case SystemKind::ElasticPendulum:
        elastic_pendulum_deriv(s, ds, spec.params);
        break;
      default:
        throw ContractError("integrate_rk4: unsupported kind");
    }
  };

  StateTrajectory traj;
  traj.dim = dim;
  traj.times.resize(steps + 1);
  traj.states.resize((steps + 1) * dim);
  std::vector<real> s = init;
  for (std::size_t i = 0; i <= steps; ++i) {
    traj.times[i] = static_cast<real>(i) * spec.dt;
    for (std::size_t d = 0; d < dim; ++d) traj.states[i * dim + d] = s[d];
    if (i < steps) {
      rk4_step(deriv, s, spec.dt);
      if (!all_finite(s)) throw NumericError("integrate_rk4: state became non-finite");
    }
  }
  return traj;
}

StateTrajectory simulate_rd(const SystemSpec& spec, const std::vector<real>& init,
                            std::size_t rows, real row_dt) {
  if (spec.kind != SystemKind::ReactionDiffusion)
    throw ContractError("simulate_rd: spec is not a reaction-diffusion system");
  if (rows < 1) throw ContractError("simulate_rd: rows must be >= 1");
  const std::size_t cells = spec.rd_h * spec.rd_w;
  if (init.size() != 2 * cells) throw DimensionError("simulate_rd: bad initial field size");

  // Advance rd_speed·row_dt lattice units per row in unit lattice steps, with
  // one fractional remainder step so arbitrary row_dt values are exact.
  const real lattice_per_row = spec.params.rd_speed * row_dt;
  const std::size_t whole = static_cast<std::size_t>(lattice_per_row);
  const real rem = lattice_per_row - static_cast<real>(whole);

  StateTrajectory traj;
  traj.dim = 2 * cells;
  traj.times.resize(rows);
  traj.states.resize(rows * traj.dim);
  std::vector<real> u(init.begin(), init.begin() + cells);
  std::vector<real> v(init.begin() + cells, init.end());
  for (std::size_t i = 0; i < rows; ++i) {
    traj.times[i] = static_cast<real>(i) * row_dt;
    real* row = traj.states.data() + i * traj.dim;
    for (std::size_t c = 0; c < cells; ++c) row[c] = u[c];
    for (std::size_t c = 0; c < cells; ++c) row[cells + c] = v[c];
    if (i + 1 < rows) {
      for (std::size_t k = 0; k < whole; ++k)
        reaction_diffusion_step(u, v, spec.params, 1.0, spec.rd_h, spec.rd_w);
      if (rem > 1e-12)
        reaction_diffusion_step(u, v, spec.params, rem, spec.rd_h, spec.rd_w);
      if (!all_finite(u) || !all_finite(v))
        throw NumericError("simulate_rd: field became non-finite");
    }
  }
  return traj;
}

real system_energy(const SystemSpec& spec, const real* s) {
  const SystemParams& p = spec.params;
  switch (spec.kind) {
    case SystemKind::SinglePendulum: {
      // Unit bob mass; potential zero at the pivot.
      return 0.5 * p.length * p.length * s[1] * s[1] - p.g * p.length * std::cos(s[0]);
    }
    case SystemKind::DoublePendulum: {
      const real th1 = s[0], th2 = s[1], w1 = s[2], w2 = s[3];
      const real kin = 0.5 * p.mass1 * p.length1 * p.length1 * w1 * w1 +
                       0.5 * p.mass2 *
                           (p.length1 * p.length1 * w1 * w1 + p.length2 * p.length2 * w2 * w2 +
                            2.0 * p.length1 * p.length2 * w1 * w2 * std::cos(th1 - th2));
      const real pot = -(p.mass1 + p.mass2) * p.g * p.length1 * std::cos(th1) -
                       p.mass2 * p.g * p.length2 * std::cos(th2);
      return kin + pot;
    }
    case SystemKind::ElasticPendulum: {
      const real r = s[0], th = s[1], rdot = s[2], thdot = s[3];
      const real stretch = r - p.natural_length;
      return 0.5 * p.mass * (rdot * rdot + r * r * thdot * thdot) +
             0.5 * p.spring_k * stretch * stretch - p.mass * p.g * r * std::cos(th);
    }
    default:
      throw ContractError("system_energy: defined for the pendulum family only");
  }
}

std::vector<real> default_initial_state(const SystemSpec& spec, Rng& rng) {
  switch (spec.kind) {
    case SystemKind::CircularMotion: {
      const real phase = rng.uniform(0.0, 6.283185307179586);
      return {spec.params.radius * std::cos(phase), spec.params.radius * std::sin(phase)};
    }
    case SystemKind::SinglePendulum: {
      const real sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      return {sign * rng.uniform(0.4, 2.2), rng.uniform(-1.0, 1.0)};
    }
    case SystemKind::DoublePendulum:
      return {rng.uniform(-2.2, 2.2), rng.uniform(-2.2, 2.2), 0.0, 0.0};
    case SystemKind::ElasticPendulum: {
      const real rest = spec.params.natural_length + spec.params.mass * spec.params.g /
                                                         spec.params.spring_k;
      const real sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
      return {rest + rng.uniform(-0.25, 0.25), sign * rng.uniform(0.3, 1.2), 0.0,
              rng.uniform(-1.0, 1.0)};
    }
    case SystemKind::ReactionDiffusion: {
      const std::size_t cells = spec.rd_h * spec.rd_w;
      std::vector<real> state(2 * cells, 0.0);
      for (std::size_t c = 0; c < cells; ++c) state[c] = 1.0;  // u=1, v=0 background
      // Seed 2-4 square perturbations at random positions.
      const std::size_t blobs = 2 + rng.below(3);
      for (std::size_t b = 0; b < blobs; ++b) {
        const std::size_t cy = rng.below(spec.rd_h), cx = rng.below(spec.rd_w);
        for (std::ptrdiff_t dy = -2; dy <= 2; ++dy)
          for (std::ptrdiff_t dx = -2; dx <= 2; ++dx) {
            const std::size_t y = (cy + spec.rd_h + dy) % spec.rd_h;
            const std::size_t x = (cx + spec.rd_w + dx) % spec.rd_w;
            state[y * spec.rd_w + x] = 0.50;
            state[cells + y * spec.rd_w + x] = 0.25;
          }
      }
      return state;
    }
  }
  throw ContractError("default_initial_state: unknown SystemKind");
}

StateTrajectory subsample(const StateTrajectory& traj, std::size_t stride) {
  if (stride == 0) throw ContractError("subsample: stride must be >= 1");
  StateTrajectory out;
  out.dim = traj.dim;
  for (std::size_t i = 0; i < traj.length(); i += stride) {
    out.times.push_back(traj.times[i]);
    out.states.insert(out.states.end(), traj.state(i), traj.state(i) + traj.dim);
  }
  return out;
}

void write_trajectory_csv(const StateTrajectory& traj, std::ostream& os) {
  os << "t";
  for (std::size_t d = 0; d < traj.dim; ++d) os << ",s" << d;
  os << "\n";
  char buf[32];
  for (std::size_t i = 0; i < traj.length(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", traj.times[i]);
    os << buf;
    const real* row = traj.state(i);
    for (std::size_t d = 0; d < traj.dim; ++d) {
      std::snprintf(buf, sizeof(buf), "%.17g", row[d]);
      os << ',' << buf;
    }
    os << "\n";
  }
}

StateTrajectory read_trajectory_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw IoError("trajectory CSV: missing header");
  std::size_t dim = 0;
  for (char c : line)
    if (c == ',') ++dim;
  StateTrajectory traj;
  traj.dim = dim;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string cell;
    std::size_t col = 0;
    while (std::getline(ss, cell, ',')) {
      const real v = std::strtod(cell.c_str(), nullptr);
      if (col == 0)
        traj.times.push_back(v);
      else
        traj.states.push_back(v);
      ++col;
    }
    if (col != dim + 1) throw IoError("trajectory CSV: ragged row");
  }
  return traj;
}

}  // namespace lyt
