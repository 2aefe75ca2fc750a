// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "pdo/error.hpp"
#include "pdo/simulators.hpp"

namespace pdo {

void DarcyConfig::validate() const {
  if (!(a_low > 0.0 && a_low < a_high)) throw ConfigError("Darcy needs 0 < a_low < a_high");
  if (!(grf_length_scale > 0.0)) throw ConfigError("GRF length scale must be positive");
  if (!(cg_tolerance > 0.0) || cg_max_iterations < 1) throw ConfigError("invalid CG settings");
}

namespace {

std::vector<double> gaussian_kernel(double sigma_cells) {
  const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma_cells)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma_cells * sigma_cells));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;
  return k;
}

int reflect(int i, int n) {
  while (i < 0 || i >= n) {
    if (i < 0) i = -i - 1;
    if (i >= n) i = 2 * n - i - 1;
  }
  return i;
}

// Separable blur of a row-major (ny, nx) array with mirrored edges.
std::vector<double> blur(const std::vector<double>& in, int nx, int ny, double sx, double sy) {
  const auto kx = gaussian_kernel(sx);
  const auto ky = gaussian_kernel(sy);
  const int rx = static_cast<int>(kx.size() / 2);
  const int ry = static_cast<int>(ky.size() / 2);
  std::vector<double> tmp(in.size(), 0.0), out(in.size(), 0.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int d = -rx; d <= rx; ++d) s += kx[d + rx] * in[j * nx + reflect(i + d, nx)];
      tmp[j * nx + i] = s;
    }
  }
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i < nx; ++i) {
      double s = 0.0;
      for (int d = -ry; d <= ry; ++d) s += ky[d + ry] * tmp[reflect(j + d, ny) * nx + i];
      out[j * nx + i] = s;
    }
  }
  return out;
}

}  // namespace

Field darcy_sample_coefficient(std::uint64_t seed, const DarcyConfig& config, const Grid& grid) {
  config.validate();
  const int nx = grid.n_space();
  const int ny = grid.n_time();
  const std::size_t total = grid.points();
  const double sx = config.grf_length_scale / grid.dx();
  const double sy = config.grf_length_scale / grid.dt();

  for (int attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, 0xDA2C, attempt));
    std::vector<double> noise(total);
    for (double& v : noise) v = rng.normal();
    const std::vector<double> smooth = blur(noise, nx, ny, sx, sy);

    std::vector<double> sorted = smooth;
    const auto mid = sorted.begin() + static_cast<std::ptrdiff_t>(total / 2);
    std::nth_element(sorted.begin(), mid, sorted.end());
    double median = *mid;
    if (total % 2 == 0) {
      const double below = *std::max_element(sorted.begin(), mid);
      median = 0.5 * (median + below);
    }

    Field a(grid, {"a"});
    std::size_t high = 0;
    auto data = a.data();
    for (std::size_t k = 0; k < total; ++k) {
      const bool is_high = smooth[k] > median;
      data[k] = static_cast<float>(is_high ? config.a_high : config.a_low);
      high += is_high;
    }
    const double frac = static_cast<double>(high) / static_cast<double>(total);
    if (frac >= 0.1 && frac <= 0.9) return a;
  }
  throw NumericalError("could not draw a Darcy coefficient with both phases above 10% occupancy");
}

std::vector<double> darcy_solve_f64(std::span<const double> a, const DarcyConfig& config,
                                    const Grid& grid, DarcySolveInfo* info) {
  config.validate();
  const int nx = grid.n_space();
  const int ny = grid.n_time();
  if (nx < 3 || ny < 3) throw ConfigError("Darcy grid needs an interior");
  if (a.size() != grid.points()) throw ValidationError("coefficient does not match the grid");
  for (double v : a) {
    if (!(v > 0.0)) throw ValidationError("Darcy coefficient must be positive");
  }

  const double idx2 = 1.0 / (grid.dx() * grid.dx());
  const double idy2 = 1.0 / (grid.dt() * grid.dt());
  auto at = [nx](int j, int i) { return static_cast<std::size_t>(j) * nx + i; };
  auto harmonic = [](double p, double q) { return 2.0 * p * q / (p + q); };

  // Face coefficients: east face of node (j, i) and north face of node (j, i).
  std::vector<double> ae(grid.points(), 0.0), an(grid.points(), 0.0), diag(grid.points(), 1.0);
  for (int j = 0; j < ny; ++j) {
    for (int i = 0; i + 1 < nx; ++i) ae[at(j, i)] = harmonic(a[at(j, i)], a[at(j, i + 1)]) * idx2;
  }
  for (int j = 0; j + 1 < ny; ++j) {
    for (int i = 0; i < nx; ++i) an[at(j, i)] = harmonic(a[at(j, i)], a[at(j + 1, i)]) * idy2;
  }
  for (int j = 1; j < ny - 1; ++j) {
    for (int i = 1; i < nx - 1; ++i) {
      diag[at(j, i)] = ae[at(j, i)] + ae[at(j, i - 1)] + an[at(j, i)] + an[at(j - 1, i)];
    }
  }

  // Negated operator -div(a grad u), symmetric positive definite on the interior.
  auto apply = [&](const std::vector<double>& u, std::vector<double>& out) {
    for (int j = 1; j < ny - 1; ++j) {
      for (int i = 1; i < nx - 1; ++i) {
        const std::size_t k = at(j, i);
        out[k] = diag[k] * u[k] - ae[k] * u[k + 1] - ae[k - 1] * u[k - 1] - an[k] * u[k + nx] -
                 an[k - nx] * u[k - nx];
      }
    }
  };
  auto dot = [&](const std::vector<double>& p, const std::vector<double>& q) {
    double s = 0.0;
    for (int j = 1; j < ny - 1; ++j) {
      for (int i = 1; i < nx - 1; ++i) s += p[at(j, i)] * q[at(j, i)];
    }
    return s;
  };

  const std::size_t total = grid.points();
  std::vector<double> u(total, 0.0), r(total, 0.0), z(total, 0.0), p(total, 0.0), ap(total, 0.0);
  for (int j = 1; j < ny - 1; ++j) {
    for (int i = 1; i < nx - 1; ++i) r[at(j, i)] = -config.forcing;
  }
  const double bnorm = std::sqrt(dot(r, r));
  if (bnorm == 0.0) {
    if (info) *info = {0, 0.0};
    return u;
  }
  for (std::size_t k = 0; k < total; ++k) z[k] = r[k] / diag[k];
  p = z;
  double rz = dot(r, z);
  double rel = 1.0;
  int it = 0;
  for (; it < config.cg_max_iterations; ++it) {
    rel = std::sqrt(dot(r, r)) / bnorm;
    if (rel <= config.cg_tolerance) break;
    apply(p, ap);
    const double alpha = rz / dot(p, ap);
    for (int j = 1; j < ny - 1; ++j) {
      for (int i = 1; i < nx - 1; ++i) {
        const std::size_t k = at(j, i);
        u[k] += alpha * p[k];
        r[k] -= alpha * ap[k];
        z[k] = r[k] / diag[k];
      }
    }
    const double rz_new = dot(r, z);
    const double beta = rz_new / rz;
    rz = rz_new;
    for (int j = 1; j < ny - 1; ++j) {
      for (int i = 1; i < nx - 1; ++i) {
        const std::size_t k = at(j, i);
        p[k] = z[k] + beta * p[k];
      }
    }
  }
  if (rel > config.cg_tolerance) {
    throw NumericalError("conjugate gradient did not converge: relative residual " +
                         std::to_string(rel) + " after " + std::to_string(it) + " iterations");
  }
  if (info) *info = {it, rel};
  return u;
}

Field darcy_solve(const Field& a, const DarcyConfig& config, const Grid& grid, DarcySolveInfo* info) {
  if (a.grid() != grid) throw ValidationError("coefficient field lives on a different grid");
  auto src = a.channel(a.channel_index("a"));
  std::vector<double> coeff(src.begin(), src.end());
  const std::vector<double> u = darcy_solve_f64(coeff, config, grid, info);
  Field out(grid, {"u"});
  auto dst = out.data();
  for (std::size_t k = 0; k < u.size(); ++k) dst[k] = static_cast<float>(u[k]);
  return out;
}

}  // namespace pdo
