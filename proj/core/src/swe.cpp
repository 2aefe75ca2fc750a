// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <numbers>

#include "pdo/error.hpp"
#include "pdo/simulators.hpp"

namespace pdo {

void SweConfig::validate() const {
  if (!(g > 0.0)) throw ConfigError("SWE gravity must be positive");
  if (!(cfl > 0.0 && cfl < 1.0)) throw ConfigError("SWE CFL number must lie in (0, 1)");
}

SweOrigIcParams SweOrigIcParams::zeros(int n_modes) {
  SweOrigIcParams p;
  p.n_modes = n_modes;
  p.lambda.assign(2 * n_modes + 1, 0.0);
  p.gamma.assign(2 * n_modes + 1, 0.0);
  return p;
}

SweOrigIcParams SweOrigIcParams::sample(Rng& rng, int n_modes) {
  SweOrigIcParams p = zeros(n_modes);
  for (int k = 0; k < 2 * n_modes + 1; ++k) {
    p.lambda[k] = rng.normal();
    p.gamma[k] = rng.normal();
  }
  return p;
}

void SweOrigIcParams::validate() const {
  if (n_modes < 0) throw ValidationError("negative Fourier mode count");
  const std::size_t n = 2 * static_cast<std::size_t>(n_modes) + 1;
  if (lambda.size() != n || gamma.size() != n) {
    throw ValidationError("expected 2N+1 Fourier coefficient pairs");
  }
}

SweInitParams SweInitParams::sample(Rng& rng) {
  SweInitParams p;
  p.h_in = rng.uniform(1.2, 5.2);
  p.epsilon = rng.uniform(0.05, 1.0);
  p.x0 = rng.uniform(-1.0, 1.0);
  p.sigma = rng.uniform(0.2, 2.0);
  p.hu0 = rng.uniform(-2.2, 2.2);
  return p;
}

void SweInitParams::validate() const {
  auto in = [](double v, double lo, double hi) { return v >= lo && v <= hi; };
  if (!in(h_in, 1.2, 5.2)) throw ValidationError("h_in outside [1.2, 5.2]");
  if (!in(epsilon, 0.05, 1.0)) throw ValidationError("epsilon outside [0.05, 1]");
  if (!in(x0, -1.0, 1.0)) throw ValidationError("x0 outside [-1, 1]");
  if (!in(sigma, 0.2, 2.0)) throw ValidationError("sigma outside [0.2, 2]");
  if (!in(hu0, -2.2, 2.2)) throw ValidationError("hu0 outside [-2.2, 2.2]");
}

Grid swe_orig_grid(int n_space, int n_time) { return Grid(n_space, n_time, -0.5, 0.5, 0.0, 0.128); }

Grid swe_init_grid(int n_space, int n_time) { return Grid(n_space, n_time, -2.5, 2.5, 0.0, 1.28); }

SweState swe_orig_initial(const SweOrigIcParams& params, const Grid& grid) {
  params.validate();
  const int n = grid.n_space();
  std::vector<double> raw(n, 0.0);
  for (int i = 0; i < n; ++i) {
    const double x = grid.x(i);
    double s = 0.0;
    for (int k = -params.n_modes; k <= params.n_modes; ++k) {
      const double arg = 2.0 * std::numbers::pi * k * x;
      s += params.lambda[k + params.n_modes] * std::cos(arg) +
           params.gamma[k + params.n_modes] * std::sin(arg);
    }
    raw[i] = s;
  }
  const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
  const double span = *hi - *lo;
  SweState state{std::vector<double>(n, 1.0), std::vector<double>(n, 0.0)};
  // A flat profile has no range to rescale; it maps to the lower bound.
  if (span > 1e-12 * std::max(1.0, std::abs(*hi))) {
    for (int i = 0; i < n; ++i) state.h[i] = 1.0 + (raw[i] - *lo) / span;
  }
  return state;
}

SweState swe_init_initial(const SweInitParams& params, const Grid& grid) {
  params.validate();
  const int n = grid.n_space();
  SweState state{std::vector<double>(n), std::vector<double>(n, params.hu0)};
  const double two_s2 = 2.0 * params.sigma * params.sigma;
  for (int i = 0; i < n; ++i) {
    const double d = grid.x(i) - params.x0;
    state.h[i] = params.h_in + params.epsilon * std::exp(-d * d / two_s2);
  }
  return state;
}

namespace {

struct Flux {
  double mass;
  double momentum;
};

inline Flux physical_flux(double h, double hu, double g) {
  const double u = hu / h;
  return {hu, hu * u + 0.5 * g * h * h};
}

inline double wave_speed(double h, double hu, double g) { return std::abs(hu / h) + std::sqrt(g * h); }

inline Flux rusanov(double hl, double qul, double hr, double qur, double g) {
  const Flux fl = physical_flux(hl, qul, g);
  const Flux fr = physical_flux(hr, qur, g);
  const double s = std::max(wave_speed(hl, qul, g), wave_speed(hr, qur, g));
  return {0.5 * (fl.mass + fr.mass) - 0.5 * s * (hr - hl),
          0.5 * (fl.momentum + fr.momentum) - 0.5 * s * (qur - qul)};
}

double total(const std::vector<double>& v, double dx) {
  double s = 0.0;
  for (double x : v) s += x;
  return s * dx;
}

}  // namespace

Field swe_solve(const SweConfig& config, const SweState& initial, const Grid& grid,
                SweDiagnostics* diagnostics) {
  config.validate();
  const int n = grid.n_space();
  if (static_cast<int>(initial.h.size()) != n || static_cast<int>(initial.hu.size()) != n) {
    throw ValidationError("initial SWE state does not match the grid");
  }
  for (double h : initial.h) {
    if (!(h > 0.0)) throw ValidationError("initial water height must be positive");
  }

  const double g = config.g;
  const double dx = grid.dx();
  std::vector<double> h = initial.h;
  std::vector<double> q = initial.hu;
  std::vector<double> fm(n + 1), fq(n + 1);

  Field out(grid, {"h", "u"});
  auto store = [&](int snapshot) {
    for (int i = 0; i < n; ++i) {
      out.at(0, snapshot, i) = static_cast<float>(h[i]);
      out.at(1, snapshot, i) = static_cast<float>(q[i] / h[i]);
    }
  };

  SweDiagnostics diag;
  diag.mass_initial = total(h, dx);
  diag.momentum_initial = total(q, dx);
  store(0);

  double t = grid.t_min();
  long step = 0;
  for (int snapshot = 1; snapshot < grid.n_time(); ++snapshot) {
    const double t_target = grid.t(snapshot);
    while (t < t_target) {
      double smax = 0.0;
      for (int i = 0; i < n; ++i) smax = std::max(smax, wave_speed(h[i], q[i], g));
      double dt = config.cfl * dx / smax;
      bool last = false;
      if (t + dt >= t_target) {
        dt = t_target - t;
        last = true;
      }

      // Interface k sits between cells k-1 and k; ghosts implement the boundary.
      for (int k = 0; k <= n; ++k) {
        int il = k - 1;
        int ir = k;
        if (config.boundary == Boundary::periodic) {
          il = (il + n) % n;
          ir = ir % n;
        } else {
          il = std::max(il, 0);
          ir = std::min(ir, n - 1);
        }
        const Flux f = rusanov(h[il], q[il], h[ir], q[ir], g);
        fm[k] = f.mass;
        fq[k] = f.momentum;
      }
      const double r = dt / dx;
      for (int i = 0; i < n; ++i) {
        h[i] -= r * (fm[i + 1] - fm[i]);
        q[i] -= r * (fq[i + 1] - fq[i]);
      }
      ++step;
      for (int i = 0; i < n; ++i) {
        if (!(h[i] > 0.0) || !std::isfinite(q[i])) {
          throw SimulationError("water height became non-positive at cell " + std::to_string(i),
                                step);
        }
      }
      t = last ? t_target : t + dt;
    }
    store(snapshot);
  }

  diag.steps = step;
  diag.mass_final = total(h, dx);
  diag.momentum_final = total(q, dx);
  if (diagnostics) *diagnostics = diag;
  return out;
}

}  // namespace pdo
