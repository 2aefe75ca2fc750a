// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <array>
#include <cmath>

#include "pdo/error.hpp"
#include "pdo/simulators.hpp"

namespace pdo {

void ReactorConfig::validate() const {
  auto unit = [](double v) { return v >= 0.0 && v <= 1.0; };
  if (!(U > 0.0)) throw ValidationError("reactor velocity must be positive");
  if (gamma < 0.0 || k0 < 0.0 || k_p < 0.0 || k_d < 0.0 || activation < 0.0) {
    throw ValidationError("reactor rate constants must be nonnegative");
  }
  if (b_a < 0.0 || b_T < 0.0) throw ValidationError("reactor beta coefficients must be nonnegative");
  if (!unit(inlet_x_a) || !unit(inlet_x_p)) {
    throw ValidationError("reactor inlet concentrations must lie in [0, 1]");
  }
  if (!(inlet_T > 0.0)) throw ValidationError("reactor inlet temperature must be positive");
  if (!unit(theta0)) throw ValidationError("initial catalyst activity must lie in [0, 1]");
  if (!(ramp_time > 0.0)) throw ValidationError("poison ramp time must be positive");
  if (!(cfl > 0.0 && cfl < 1.0)) throw ValidationError("reactor CFL number must lie in (0, 1)");
}

double ReactorConfig::alpha(double T) const { return k0 * std::exp(-activation / T); }

double ReactorConfig::beta(double x_a, double T) const { return 1.0 / (1.0 + b_a * x_a + b_T * T); }

double ReactorConfig::inlet_poison(double t) const {
  const double r = std::clamp(t / ramp_time, 0.0, 1.0);
  return inlet_x_p * r * r * (3.0 - 2.0 * r);
}

ReactorConfig ReactorConfig::sample(Rng& rng) {
  ReactorConfig c;
  c.inlet_x_a = rng.uniform(0.5, 1.0);
  c.inlet_x_p = rng.uniform(0.1, 0.5);
  c.inlet_T = rng.uniform(0.8, 1.2);
  c.theta0 = rng.uniform(0.7, 1.0);
  return c;
}

Grid reactor_grid(int n_space, int n_time) { return Grid(n_space, n_time, 0.0, 1.0, 0.0, 2.0); }

namespace {

struct ReactorState {
  std::vector<double> xa, xp, T, theta;
};

// Steady profile of the unpoisoned reactor: U xa' = -alpha(T) theta0 xa and
// beta U T' = gamma theta0 xa, integrated with RK4 from the inlet.
ReactorState steady_profile(const ReactorConfig& c, const Grid& grid) {
  const int n = grid.n_space();
  ReactorState s{std::vector<double>(n), std::vector<double>(n, 0.0), std::vector<double>(n),
                 std::vector<double>(n, c.theta0)};
  auto rhs = [&](const std::array<double, 2>& y) -> std::array<double, 2> {
    const double xa = y[0];
    const double T = y[1];
    return {-c.alpha(T) * c.theta0 * xa / c.U, c.gamma * c.theta0 * xa / (c.beta(xa, T) * c.U)};
  };
  std::array<double, 2> y{c.inlet_x_a, c.inlet_T};
  double z = 0.0;
  constexpr int kSub = 16;
  for (int i = 0; i < n; ++i) {
    const double z_target = grid.x(i);
    const double h = (z_target - z) / kSub;
    for (int k = 0; k < kSub; ++k) {
      const auto k1 = rhs(y);
      const auto k2 = rhs({y[0] + 0.5 * h * k1[0], y[1] + 0.5 * h * k1[1]});
      const auto k3 = rhs({y[0] + 0.5 * h * k2[0], y[1] + 0.5 * h * k2[1]});
      const auto k4 = rhs({y[0] + h * k3[0], y[1] + h * k3[1]});
      for (int d = 0; d < 2; ++d) y[d] += h / 6.0 * (k1[d] + 2 * k2[d] + 2 * k3[d] + k4[d]);
    }
    z = z_target;
    s.xa[i] = y[0];
    s.T[i] = y[1];
  }
  return s;
}

void rates(const ReactorConfig& c, double dz, double t, const ReactorState& s, ReactorState& d) {
  const int n = static_cast<int>(s.xa.size());
  const double up = c.U / dz;
  const double xp_in = c.inlet_poison(t);
  for (int i = 0; i < n; ++i) {
    const double xa_w = i == 0 ? c.inlet_x_a : s.xa[i - 1];
    const double xp_w = i == 0 ? xp_in : s.xp[i - 1];
    const double T_w = i == 0 ? c.inlet_T : s.T[i - 1];
    const double alpha = c.alpha(s.T[i]);
    const double ra = s.theta[i] * s.xa[i];
    const double rp = c.k_p * s.theta[i] * s.xp[i];
    const double rd = c.k_d * s.theta[i] * s.xp[i];
    d.xa[i] = -up * (s.xa[i] - xa_w) - alpha * ra;
    d.xp[i] = -up * (s.xp[i] - xp_w) - alpha * rp;
    d.T[i] = -c.beta(s.xa[i], s.T[i]) * up * (s.T[i] - T_w) + c.gamma * ra;
    d.theta[i] = -rd;
  }
}

void axpy(ReactorState& y, const ReactorState& x, double a, const ReactorState& d) {
  const std::size_t n = x.xa.size();
  for (std::size_t i = 0; i < n; ++i) {
    y.xa[i] = x.xa[i] + a * d.xa[i];
    y.xp[i] = x.xp[i] + a * d.xp[i];
    y.T[i] = x.T[i] + a * d.T[i];
    y.theta[i] = x.theta[i] + a * d.theta[i];
  }
}

void check_bounds(const ReactorState& s, long step) {
  constexpr double tol = 1e-12;
  for (std::size_t i = 0; i < s.xa.size(); ++i) {
    if (!(s.xa[i] >= -tol && s.xa[i] <= 1.0 + tol)) {
      throw SimulationError("x_a left [0, 1] at cell " + std::to_string(i), step);
    }
    if (!(s.xp[i] >= -tol && s.xp[i] <= 1.0 + tol)) {
      throw SimulationError("x_p left [0, 1] at cell " + std::to_string(i), step);
    }
    if (!(s.T[i] > 0.0) || !std::isfinite(s.T[i])) {
      throw SimulationError("T became non-positive at cell " + std::to_string(i), step);
    }
    if (!(s.theta[i] >= -tol && s.theta[i] <= 1.0 + tol)) {
      throw SimulationError("theta left [0, 1] at cell " + std::to_string(i), step);
    }
  }
}

}  // namespace

Field reactor_solve(const ReactorConfig& config, const Grid& grid) {
  config.validate();
  const int n = grid.n_space();
  const double dz = grid.dx();

  ReactorState s = steady_profile(config, grid);
  ReactorState stage = s, d1 = s, d2 = s;

  Field out(grid, {"x_a", "x_p", "T", "theta"});
  auto store = [&](int snapshot) {
    for (int i = 0; i < n; ++i) {
      out.at(0, snapshot, i) = static_cast<float>(s.xa[i]);
      out.at(1, snapshot, i) = static_cast<float>(s.xp[i]);
      out.at(2, snapshot, i) = static_cast<float>(s.T[i]);
      out.at(3, snapshot, i) = static_cast<float>(s.theta[i]);
    }
  };
  store(0);

  // Step bounded by transport CFL and by the fastest local reaction rate.
  double t = grid.t_min();
  long step = 0;
  for (int snapshot = 1; snapshot < grid.n_time(); ++snapshot) {
    const double t_target = grid.t(snapshot);
    while (t < t_target) {
      double max_rate = config.k_d;
      for (int i = 0; i < n; ++i) max_rate = std::max(max_rate, config.alpha(s.T[i]) * (1.0 + config.k_p));
      double dt = std::min(config.cfl * dz / config.U, 0.5 / max_rate);
      bool last = false;
      if (t + dt >= t_target) {
        dt = t_target - t;
        last = true;
      }
      // SSP-RK2 (Heun).
      rates(config, dz, t, s, d1);
      axpy(stage, s, dt, d1);
      rates(config, dz, t + dt, stage, d2);
      for (int i = 0; i < n; ++i) {
        s.xa[i] = 0.5 * (s.xa[i] + stage.xa[i] + dt * d2.xa[i]);
        s.xp[i] = 0.5 * (s.xp[i] + stage.xp[i] + dt * d2.xp[i]);
        s.T[i] = 0.5 * (s.T[i] + stage.T[i] + dt * d2.T[i]);
        s.theta[i] = 0.5 * (s.theta[i] + stage.theta[i] + dt * d2.theta[i]);
      }
      ++step;
      check_bounds(s, step);
      t = last ? t_target : t + dt;
    }
    store(snapshot);
  }
  return out;
}

}  // namespace pdo
