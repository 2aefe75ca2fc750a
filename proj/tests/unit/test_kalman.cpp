// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>
#include <numbers>
#include <string>

#include "doctest.h"
#include "pdo/error.hpp"
#include "pdo/kalman.hpp"

using namespace pdo;

TEST_CASE("linearized transition conserves the mean deviation") {
  const Grid grid = swe_orig_grid(16, 8);
  const double dt = 0.8 * swe_stable_dt(1.5, 0.0, 1.0, grid);
  const Eigen::MatrixXd A = linearize_swe(1.5, 0.0, 1.0, grid, dt);
  const int n = 16;
  for (int j = 0; j < 2 * n; ++j) {
    CHECK(A.block(0, j, n, 1).sum() == doctest::Approx(j < n ? 1.0 : 0.0));
    CHECK(A.block(n, j, n, 1).sum() == doctest::Approx(j < n ? 0.0 : 1.0));
  }
}

TEST_CASE("Fourier modes follow the Lax-Wendroff amplification") {
  const int n = 32;
  const Grid grid = swe_orig_grid(n, 8);
  const double g = 1.0, h = 1.2;
  const double c = std::sqrt(g * h);
  const double dt = 0.7 * swe_stable_dt(h, 0.0, g, grid);
  const Eigen::MatrixXd A = linearize_swe(h, 0.0, g, grid, dt);
  const double nu = c * dt / grid.dx();
  for (int k : {1, 3, 7}) {
    const double th = 2.0 * std::numbers::pi * k / n;
    // Right-going characteristic h + hu / c per mode.
    Eigen::VectorXcd v(2 * n);
    for (int i = 0; i < n; ++i) {
      const std::complex<double> e = std::polar(1.0, th * i);
      v(i) = e;
      v(n + i) = c * e;
    }
    const Eigen::VectorXcd w = A.cast<std::complex<double>>() * v;
    const std::complex<double> amp(1.0 - nu * nu * (1.0 - std::cos(th)), -nu * std::sin(th));
    CHECK((w - amp * v).norm() < 1e-12 * v.norm());
    CHECK(std::abs(amp) <= 1.0 + 1e-12);
  }
}

TEST_CASE("steps beyond the stable bound are rejected with the bound quoted") {
  const Grid grid = swe_orig_grid(16, 8);
  const double bound = swe_stable_dt(2.0, 0.1, 1.0, grid);
  CHECK(bound == doctest::Approx(grid.dx() / (0.1 + std::sqrt(2.0))));
  CHECK_NOTHROW(linearize_swe(2.0, 0.1, 1.0, grid, bound));
  try {
    linearize_swe(2.0, 0.1, 1.0, grid, 1.01 * bound);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find(std::to_string(bound)) != std::string::npos);
  }
  CHECK_THROWS_AS(linearize_swe(0.0, 0.0, 1.0, grid, 1e-3), ConfigError);
}

TEST_CASE("filter recovers noiseless data from its own linear model") {
  const int n = 12;
  const Grid grid = swe_orig_grid(n, 8);
  const double dt = 0.9 * swe_stable_dt(1.0, 0.0, 1.0, grid);
  const Eigen::MatrixXd A = linearize_swe(1.0, 0.0, 1.0, grid, dt);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, 2 * n);
  for (int i = 0; i < n; ++i) H(i, i) = 1.0;

  Rng rng(11);
  Eigen::VectorXd x(2 * n);
  for (int i = 0; i < 2 * n; ++i) x(i) = 0.1 * rng.normal();
  // The constant and alternating momentum modes never reach h and stay unobservable.
  double mean = 0.0, alt = 0.0;
  for (int i = 0; i < n; ++i) {
    mean += x(n + i) / n;
    alt += (i % 2 ? -1.0 : 1.0) * x(n + i) / n;
  }
  for (int i = 0; i < n; ++i) x(n + i) -= mean + (i % 2 ? -1.0 : 1.0) * alt;
  const int steps = 200;
  Eigen::MatrixXd truth(2 * n, steps), y(n, steps);
  for (int k = 0; k < steps; ++k) {
    if (k > 0) x = A * x;
    truth.col(k) = x;
    y.col(k) = H * x;
  }
  const KfNoise noise{1e-14, 1e-14, 1.0};
  const KfResult r = kalman_filter(A, H, y, noise, Eigen::VectorXd::Zero(2 * n));
  const double err0 = (r.means.col(0) - truth.col(0)).norm();
  const double err = (r.means.col(steps - 1) - truth.col(steps - 1)).norm();
  MESSAGE("error at step 0 " << err0 << ", final " << err);
  CHECK(err < 1e-6 * truth.col(steps - 1).norm());
  CHECK(err < 1e-3 * err0);
  for (double e : r.min_eigenvalue) CHECK(e > -1e-9);
}

TEST_CASE("small-amplitude shallow water beats the constant-mean predictor") {
  const Grid grid = swe_orig_grid(32, 32);
  SweState s0;
  s0.h.resize(32);
  s0.hu.assign(32, 0.0);
  for (int i = 0; i < 32; ++i) s0.h[i] = 1.0 + 0.02 * std::cos(2.0 * std::numbers::pi * (grid.x(i) + 0.5)) +
                                         0.01 * std::sin(4.0 * std::numbers::pi * (grid.x(i) + 0.5));
  const SweConfig cfg;
  const Field truth = swe_solve(cfg, s0, grid);

  KfDiagnostics diag;
  const Field est = kf_reconstruct(truth, 1.0, cfg.g, KfNoise{}, Boundary::periodic, &diag);
  double mean_h = 0.0, mean_u = 0.0;
  for (float v : truth.channel(0)) mean_h += v;
  for (float v : truth.channel(1)) mean_u += v;
  mean_h /= truth.channel(0).size();
  mean_u /= truth.channel(1).size();

  double e_kf = 0.0, e_mean = 0.0;
  for (int c = 0; c < 2; ++c) {
    const double m = c == 0 ? mean_h : mean_u;
    for (std::size_t k = 0; k < truth.channel(c).size(); ++k) {
      e_kf += std::abs(est.channel(c)[k] - truth.channel(c)[k]);
      e_mean += std::abs(m - truth.channel(c)[k]);
    }
  }
  MESSAGE("KF MAE sum " << e_kf << ", mean predictor " << e_mean << ", substeps " << diag.substeps);
  CHECK(e_kf < e_mean);
  for (double e : diag.min_eigenvalue) CHECK(e > -1e-9);
  CHECK(diag.innovation_rms.size() == 32u);
}

TEST_CASE("coarse snapshots are split into stable substeps") {
  const Grid grid(16, 4, 0.0, 1.0, 0.0, 3.0);
  const Field obs(grid, {"h", "u"});
  Field flat = obs;
  for (auto& v : flat.channel(0)) v = 1.0f;
  KfDiagnostics diag;
  const Field est = kf_reconstruct(flat, 1.0, 1.0, KfNoise{}, Boundary::outflow, &diag);
  CHECK(grid.dt() > swe_stable_dt(1.0, 0.0, 1.0, grid));
  CHECK(diag.substeps > 1);
  for (float v : est.channel(0)) CHECK(v == doctest::Approx(1.0));
  for (float v : est.channel(1)) CHECK(v == doctest::Approx(0.0).epsilon(1e-9));
}
