// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/residuals.hpp"

#include <cmath>

#include "pdo/error.hpp"

namespace pdo {

double Residual::mean_abs(int channel) const {
  double s = 0.0;
  long count = 0;
  for (int n = t_begin; n < t_end; ++n) {
    for (int i = x_begin; i < x_end; ++i) {
      s += std::abs(static_cast<double>(values.at(channel, n, i)));
      ++count;
    }
  }
  return count > 0 ? s / static_cast<double>(count) : 0.0;
}

double Residual::mean_abs() const {
  double s = 0.0;
  for (int c = 0; c < values.n_channels(); ++c) s += mean_abs(c);
  return values.n_channels() > 0 ? s / values.n_channels() : 0.0;
}

namespace {

double harmonic(double p, double q) { return 2.0 * p * q / (p + q); }

template <typename A, typename U>
double darcy_point(const A& a, const U& u, int j, int i, double idx2, double idy2, double forcing) {
  const double ae = harmonic(a(j, i), a(j, i + 1));
  const double aw = harmonic(a(j, i), a(j, i - 1));
  const double an = harmonic(a(j, i), a(j + 1, i));
  const double as = harmonic(a(j, i), a(j - 1, i));
  const double c = u(j, i);
  const double div = (ae * (u(j, i + 1) - c) - aw * (c - u(j, i - 1))) * idx2 +
                     (an * (u(j + 1, i) - c) - as * (c - u(j - 1, i))) * idy2;
  return div - forcing;
}

void require_same_grid(const Field& a, const Field& b) {
  if (a.grid() != b.grid()) throw ValidationError("residual inputs live on different grids");
}

}  // namespace

Residual darcy_residual(const Field& a, const Field& u, double forcing) {
  require_same_grid(a, u);
  const Grid& g = a.grid();
  const int ca = a.channel_index("a");
  const int cu = u.channel_index("u");
  const int nx = g.n_space(), ny = g.n_time();
  Residual r{Field(g, {"darcy"}), 1, ny - 1, 1, nx - 1};
  auto af = [&](int j, int i) { return static_cast<double>(a.at(ca, j, i)); };
  auto uf = [&](int j, int i) { return static_cast<double>(u.at(cu, j, i)); };
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dt() * g.dt());
  for (int j = 1; j < ny - 1; ++j) {
    for (int i = 1; i < nx - 1; ++i) {
      r.values.at(0, j, i) = static_cast<float>(darcy_point(af, uf, j, i, idx2, idy2, forcing));
    }
  }
  return r;
}

double darcy_residual_mean_f64(std::span<const double> a, std::span<const double> u, double forcing,
                               const Grid& g) {
  if (a.size() != g.points() || u.size() != g.points()) {
    throw ValidationError("residual inputs do not match the grid");
  }
  const int nx = g.n_space(), ny = g.n_time();
  auto af = [&](int j, int i) { return a[static_cast<std::size_t>(j) * nx + i]; };
  auto uf = [&](int j, int i) { return u[static_cast<std::size_t>(j) * nx + i]; };
  const double idx2 = 1.0 / (g.dx() * g.dx());
  const double idy2 = 1.0 / (g.dt() * g.dt());
  double s = 0.0;
  long count = 0;
  for (int j = 1; j < ny - 1; ++j) {
    for (int i = 1; i < nx - 1; ++i) {
      s += std::abs(darcy_point(af, uf, j, i, idx2, idy2, forcing));
      ++count;
    }
  }
  return count > 0 ? s / static_cast<double>(count) : 0.0;
}

Residual swe_residual(const Field& f, double g) {
  const Grid& grid = f.grid();
  const int ch = f.channel_index("h");
  const int cu = f.channel_index("u");
  const int nt = grid.n_time(), nx = grid.n_space();
  Residual r{Field(grid, {"mass", "momentum"}), 0, nt - 1, 1, nx - 1};
  const double idt = 1.0 / grid.dt();
  const double i2dx = 0.5 / grid.dx();
  auto h = [&](int n, int i) { return static_cast<double>(f.at(ch, n, i)); };
  auto u = [&](int n, int i) { return static_cast<double>(f.at(cu, n, i)); };
  auto mom = [&](int n, int i) { return h(n, i) * u(n, i); };
  auto flux = [&](int n, int i) { return h(n, i) * u(n, i) * u(n, i) + 0.5 * g * h(n, i) * h(n, i); };
  for (int n = 0; n + 1 < nt; ++n) {
    for (int i = 1; i + 1 < nx; ++i) {
      const double rm = (h(n + 1, i) - h(n, i)) * idt + (mom(n, i + 1) - mom(n, i - 1)) * i2dx;
      const double rq = (mom(n + 1, i) - mom(n, i)) * idt + (flux(n, i + 1) - flux(n, i - 1)) * i2dx;
      r.values.at(0, n, i) = static_cast<float>(rm);
      r.values.at(1, n, i) = static_cast<float>(rq);
    }
  }
  return r;
}

Residual reactor_residual(const Field& f, const ReactorConfig& c) {
  const Grid& grid = f.grid();
  const int ca = f.channel_index("x_a");
  const int cp = f.channel_index("x_p");
  const int cT = f.channel_index("T");
  const int cth = f.channel_index("theta");
  const int nt = grid.n_time(), nx = grid.n_space();
  Residual r{Field(grid, {"x_a", "x_p", "T", "theta"}), 0, nt - 1, 1, nx};
  const double idt = 1.0 / grid.dt();
  const double up = c.U / grid.dx();
  auto v = [&](int ch, int n, int i) { return static_cast<double>(f.at(ch, n, i)); };
  for (int n = 0; n + 1 < nt; ++n) {
    for (int i = 1; i < nx; ++i) {
      const double xa = v(ca, n, i), xp = v(cp, n, i), T = v(cT, n, i), th = v(cth, n, i);
      const double alpha = c.alpha(T);
      const double ra = th * xa;
      const double rp = c.k_p * th * xp;
      const double rd = c.k_d * th * xp;
      const double r_a = (v(ca, n + 1, i) - xa) * idt + up * (xa - v(ca, n, i - 1)) + alpha * ra;
      const double r_p = (v(cp, n + 1, i) - xp) * idt + up * (xp - v(cp, n, i - 1)) + alpha * rp;
      const double r_T = (v(cT, n + 1, i) - T) * idt + c.beta(xa, T) * up * (T - v(cT, n, i - 1)) - c.gamma * ra;
      const double r_th = (v(cth, n + 1, i) - th) * idt + rd;
      r.values.at(0, n, i) = static_cast<float>(r_a);
      r.values.at(1, n, i) = static_cast<float>(r_p);
      r.values.at(2, n, i) = static_cast<float>(r_T);
      r.values.at(3, n, i) = static_cast<float>(r_th);
    }
  }
  return r;
}

}  // namespace pdo
