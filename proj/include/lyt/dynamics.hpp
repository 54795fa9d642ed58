#pragma once
// ============================================================================
// Ground-truth simulators for the five synthetic systems: circular motion,
// single/double/elastic pendulum (fixed-step RK4) and a Gray-Scott
// reaction-diffusion grid (explicit Euler, periodic 5-point Laplacian).
// ============================================================================

#include <array>
#include <cstddef>
#include <ostream>
#include <string>
#include <vector>

#include "lyt/common.hpp"
#include "lyt/rng.hpp"

namespace lyt {

enum class SystemKind {
  CircularMotion,
  SinglePendulum,
  DoublePendulum,
  ElasticPendulum,
  ReactionDiffusion,
};

std::string to_string(SystemKind kind);
SystemKind system_kind_from_string(const std::string& name);

struct SystemParams {
  // circular motion
  real omega = 1.0;    // rad/s
  real radius = 1.0;   // m
  // shared gravity
  real g = 9.81;       // m/s^2
  // single pendulum
  real length = 1.0;   // m
  // double pendulum (equal-mass equal-length defaults)
  real mass1 = 1.0, mass2 = 1.0;     // kg
  real length1 = 1.0, length2 = 1.0; // m
  // elastic pendulum
  real mass = 1.0;            // kg
  real spring_k = 40.0;       // N/m
  real natural_length = 1.0;  // m
  // Gray-Scott reaction-diffusion
  real diff_u = 0.16, diff_v = 0.08;  // lattice diffusion rates
  real feed = 0.037, kill = 0.060;
  real rd_speed = 400.0;  // lattice time units per second of clip time
};

struct SystemSpec {
  SystemKind kind = SystemKind::SinglePendulum;
  SystemParams params;
  real dt = 1e-3;                     // integrator step, seconds
  std::size_t rd_h = 32, rd_w = 32;   // reaction-diffusion grid

  void validate() const;              // throws ConfigError
  std::size_t state_dim() const;      // 2, 2, 4, 4, or 2*rd_h*rd_w
  std::size_t ground_truth_dim() const;  // reported effective dims: 2/2/4/6/2
};

struct StateTrajectory {
  std::vector<real> times;   // N entries, uniform spacing
  std::vector<real> states;  // N×dim row-major
  std::size_t dim = 0;

  std::size_t length() const { return times.size(); }
  const real* state(std::size_t i) const { return states.data() + i * dim; }
  real* state(std::size_t i) { return states.data() + i * dim; }
};

// ---------------------------------------------------------------------------
// Closed forms and derivative fields
// ---------------------------------------------------------------------------
std::array<real, 2> circular_state(real t, real omega, real radius);

void single_pendulum_deriv(const real* s, real* ds, real g, real length);
void double_pendulum_deriv(const real* s, real* ds, const SystemParams& p);
void elastic_pendulum_deriv(const real* s, real* ds, const SystemParams& p);  // pre: r > 0

// One explicit-Euler Gray-Scott update, in place. dt is in lattice time and
// must satisfy dt <= 1/(4·max(Du,Dv)) (grid spacing 1); otherwise ConfigError.
void reaction_diffusion_step(std::vector<real>& u, std::vector<real>& v, const SystemParams& p,
                             real dt, std::size_t h, std::size_t w);

// One classical RK4 step of ds/dt = f(s), in place.
template <typename F>
void rk4_step(F&& f, std::vector<real>& s, real dt) {
  const std::size_t n = s.size();
  std::vector<real> k1(n), k2(n), k3(n), k4(n), tmp(n);
  f(s.data(), k1.data());
  for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k1[i];
  f(tmp.data(), k2.data());
  for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + 0.5 * dt * k2[i];
  f(tmp.data(), k3.data());
  for (std::size_t i = 0; i < n; ++i) tmp[i] = s[i] + dt * k3[i];
  f(tmp.data(), k4.data());
  for (std::size_t i = 0; i < n; ++i)
    s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
}

// Fixed-step RK4 trajectory for the ODE systems (trajectory length steps+1).
// ElasticPendulum throws SingularityError if the radius reaches 0.
StateTrajectory integrate_rk4(const SystemSpec& spec, const std::vector<real>& init,
                              std::size_t steps);

// Reaction-diffusion trajectory: `rows` states spaced row_dt seconds apart,
// each advancing round(rd_speed·row_dt) lattice steps of dt=1. The state rows
// are the concatenated (u, v) fields.
StateTrajectory simulate_rd(const SystemSpec& spec, const std::vector<real>& init,
                            std::size_t rows, real row_dt);

// Total energy for the pendulum family (ContractError for other kinds).
real system_energy(const SystemSpec& spec, const real* state);

// Seeded initial condition for dataset generation.
std::vector<real> default_initial_state(const SystemSpec& spec, Rng& rng);

// Keep every `stride`-th row starting at row 0.
StateTrajectory subsample(const StateTrajectory& traj, std::size_t stride);

// CSV export: header `t,s0,s1,...`, 17 significant digits.
void write_trajectory_csv(const StateTrajectory& traj, std::ostream& os);
StateTrajectory read_trajectory_csv(std::istream& is);

}  // namespace lyt
