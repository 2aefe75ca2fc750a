// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "pdo/field.hpp"
#include "pdo/rng.hpp"

namespace pdo {

// ---------------------------------------------------------------------------
// Shallow water

enum class Boundary { periodic, outflow };
enum class IcFamily { periodic_fourier, dam_break };

struct SweConfig {
  double g = 1.0;
  double cfl = 0.45;
  Boundary boundary = Boundary::periodic;
  IcFamily ic_family = IcFamily::periodic_fourier;

  void validate() const;
};

/// Conserved variables (h, hu) on the cells of one time level.
struct SweState {
  std::vector<double> h;
  std::vector<double> hu;
};

/// Fourier coefficients of the randomized periodic height profile.
/// lambda[k + n_modes] and gamma[k + n_modes] hold the k-th mode, k = -N..N.
struct SweOrigIcParams {
  int n_modes = 3;
  std::vector<double> lambda;
  std::vector<double> gamma;

  static SweOrigIcParams zeros(int n_modes = 3);
  static SweOrigIcParams sample(Rng& rng, int n_modes = 3);
  void validate() const;
};

/// Dam-break style perturbation of a resting or uniformly moving layer.
struct SweInitParams {
  double h_in = 1.2;
  double epsilon = 0.05;
  double x0 = 0.0;
  double sigma = 0.2;
  double hu0 = 0.0;

  static SweInitParams sample(Rng& rng);
  void validate() const;
};

/// Standard grids: x in [-0.5, 0.5], t in [0, 0.128] and x in [-2.5, 2.5], t in [0, 1.28].
Grid swe_orig_grid(int n_space = 64, int n_time = 64);
Grid swe_init_grid(int n_space = 64, int n_time = 64);

/// h(0,x) = 1 + (h~ - min h~)/(max h~ - min h~) with h~ a random trigonometric
/// polynomial; hu = 0. A flat h~ yields h = 1.
SweState swe_orig_initial(const SweOrigIcParams& params, const Grid& grid);

/// h(0,x) = h_in + eps * exp(-(x - x0)^2 / (2 sigma^2)), hu = hu0.
SweState swe_init_initial(const SweInitParams& params, const Grid& grid);

struct SweDiagnostics {
  long steps = 0;
  double mass_initial = 0.0;
  double mass_final = 0.0;
  double momentum_initial = 0.0;
  double momentum_final = 0.0;
};

/// First-order finite-volume solver with the Rusanov flux and forward Euler.
/// Time steps follow the CFL bound and are shortened to land on every output
/// snapshot. Returns channels (h, u).
Field swe_solve(const SweConfig& config, const SweState& initial, const Grid& grid,
                SweDiagnostics* diagnostics = nullptr);

// ---------------------------------------------------------------------------
// Darcy flow

struct DarcyConfig {
  double a_low = 3.0;
  double a_high = 12.0;
  double grf_length_scale = 0.1;
  double forcing = 1.0;
  double cg_tolerance = 1e-8;
  int cg_max_iterations = 20000;

  void validate() const;
};

/// Two-valued coefficient from a Gaussian-smoothed white-noise field thresholded at
/// its median. Returns channel "a".
Field darcy_sample_coefficient(std::uint64_t seed, const DarcyConfig& config, const Grid& grid);

struct DarcySolveInfo {
  int iterations = 0;
  double relative_residual = 0.0;
};

/// Solves div(a grad u) = f on the node grid with u = 0 on the boundary ring, using
/// harmonic-mean face coefficients and Jacobi-preconditioned conjugate gradient.
/// The double-precision solution is returned row-major over (y, x).
std::vector<double> darcy_solve_f64(std::span<const double> a, const DarcyConfig& config,
                                    const Grid& grid, DarcySolveInfo* info = nullptr);

/// Float32 wrapper around darcy_solve_f64. `a` must carry a channel named "a";
/// returns channel "u".
Field darcy_solve(const Field& a, const DarcyConfig& config, const Grid& grid,
                  DarcySolveInfo* info = nullptr);

// ---------------------------------------------------------------------------
// Fixed-bed tubular reactor

/// Dimensionless reactor model on z in [0, 1]:
///   x_a,t = -U x_a,z - alpha(T) r_a,    r_a = theta x_a
///   x_p,t = -U x_p,z - alpha(T) r_p,    r_p = k_p theta x_p
///   T_t   = -beta(x_a, T) U T_z + gamma r_a
///   theta_t = -r_d,                     r_d = k_d theta x_p
/// with alpha(T) = k0 exp(-E / T) and beta(x_a, T) = 1 / (1 + b_a x_a + b_T T).
/// The poison inlet ramps in smoothly over `ramp_time`; the initial profile is the
/// steady state of the unpoisoned reactor.
struct ReactorConfig {
  double U = 1.0;
  double gamma = 0.3;
  double k0 = 14.778112197861301;  // 2 e^2, so alpha(1) = 2
  double activation = 2.0;
  double k_p = 0.5;
  double k_d = 2.0;
  double b_a = 0.5;
  double b_T = 0.2;
  double inlet_x_a = 0.8;
  double inlet_x_p = 0.3;
  double inlet_T = 1.0;
  double theta0 = 1.0;
  double ramp_time = 0.25;
  double cfl = 0.4;

  void validate() const;
  double alpha(double T) const;
  double beta(double x_a, double T) const;
  /// Poison concentration at the inlet at time t.
  double inlet_poison(double t) const;

  static ReactorConfig sample(Rng& rng);
};

/// z in [0, 1], t in [0, 2].
Grid reactor_grid(int n_space = 64, int n_time = 64);

/// Method of lines with first-order upwind transport and SSP-RK2 substeps.
/// Returns channels (x_a, x_p, T, theta).
Field reactor_solve(const ReactorConfig& config, const Grid& grid);

}  // namespace pdo
