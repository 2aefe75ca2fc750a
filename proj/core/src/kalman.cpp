// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/kalman.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pdo/error.hpp"

namespace pdo {

namespace {

// Neighbour index with periodic wrap or zero-gradient clamping.
int neighbour(int i, int n, Boundary b) {
  if (b == Boundary::periodic) return (i % n + n) % n;
  return std::clamp(i, 0, n - 1);
}

}  // namespace

double swe_stable_dt(double h_bar, double u_bar, double g, const Grid& grid) {
  const double speed = std::abs(u_bar) + std::sqrt(std::max(g * h_bar, 0.0));
  if (speed == 0.0) return std::numeric_limits<double>::infinity();
  return grid.dx() / speed;
}

Eigen::MatrixXd linearize_swe(double h_bar, double u_bar, double g, const Grid& grid, double dt,
                              Boundary boundary) {
  if (!(h_bar > 0.0)) throw ConfigError("linearization depth must be positive");
  if (!(dt > 0.0)) throw ConfigError("linearization step must be positive");
  const double bound = swe_stable_dt(h_bar, u_bar, g, grid);
  if (dt > bound) {
    throw ConfigError("linearized step dt = " + std::to_string(dt) + " exceeds the stable bound " +
                      std::to_string(bound));
  }
  const int n = grid.n_space();
  const double dx = grid.dx();
  Eigen::Matrix2d J;
  J << 0.0, 1.0, g * h_bar - u_bar * u_bar, 2.0 * u_bar;
  const Eigen::Matrix2d J2 = J * J;
  const double a1 = dt / (2.0 * dx);
  const double a2 = dt * dt / (2.0 * dx * dx);

  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (int i = 0; i < n; ++i) {
    const int l = neighbour(i - 1, n, boundary);
    const int r = neighbour(i + 1, n, boundary);
    for (int p = 0; p < 2; ++p) {
      for (int q = 0; q < 2; ++q) {
        const int row = p * n + i;
        // -dt J D1 with D1 u_i = (u_{i+1} - u_{i-1}) / (2 dx)
        A(row, q * n + r) += -a1 * J(p, q);
        A(row, q * n + l) += a1 * J(p, q);
        // dt^2/2 J^2 D2 with D2 u_i = (u_{i+1} - 2 u_i + u_{i-1}) / dx^2
        A(row, q * n + r) += a2 * J2(p, q);
        A(row, q * n + l) += a2 * J2(p, q);
        A(row, q * n + i) += -2.0 * a2 * J2(p, q);
      }
    }
  }
  return A;
}

KfResult kalman_filter(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H, const Eigen::MatrixXd& y,
                       const KfNoise& noise, const Eigen::VectorXd& x0) {
  const Eigen::Index nx = A.rows();
  const Eigen::Index ny = H.rows();
  if (A.cols() != nx || H.cols() != nx || y.rows() != ny || x0.size() != nx) {
    throw ConfigError("Kalman filter dimensions are inconsistent");
  }
  if (noise.q < 0.0 || noise.r < 0.0 || noise.p0 < 0.0) throw ConfigError("noise variances must be non-negative");

  KfResult out;
  out.means.resize(nx, y.cols());
  out.innovations.resize(ny, y.cols());
  Eigen::VectorXd x = x0;
  Eigen::MatrixXd P = noise.p0 * Eigen::MatrixXd::Identity(nx, nx);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(nx, nx);
  const Eigen::MatrixXd R = noise.r * Eigen::MatrixXd::Identity(ny, ny);

  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    if (k > 0) {
      x = A * x;
      P = A * P * A.transpose();
      P.diagonal().array() += noise.q;
    }
    const Eigen::VectorXd innov = y.col(k) - H * x;
    const Eigen::MatrixXd S = H * P * H.transpose() + R;
    const Eigen::LDLT<Eigen::MatrixXd> ldlt(S);
    const Eigen::MatrixXd K = ldlt.solve(H * P).transpose();
    x += K * innov;
    // Joseph form keeps the update symmetric and PSD in floating point.
    const Eigen::MatrixXd IKH = I - K * H;
    P = IKH * P * IKH.transpose() + K * R * K.transpose();
    P = 0.5 * (P + P.transpose());
    const double min_eig = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(P, Eigen::EigenvaluesOnly)
                               .eigenvalues()
                               .minCoeff();
    const double scale = std::max(1.0, P.cwiseAbs().maxCoeff());
    if (min_eig < -1e-9 * scale) {
      throw NumericalError("Kalman covariance lost positive semi-definiteness at step " + std::to_string(k) +
                           " (smallest eigenvalue " + std::to_string(min_eig) + ")");
    }
    out.means.col(k) = x;
    out.innovations.col(k) = innov;
    out.min_eigenvalue.push_back(min_eig);
  }
  out.final_covariance = P;
  return out;
}

Field kf_reconstruct(const Field& observed, double h_bar, double g, const KfNoise& noise, Boundary boundary,
                     KfDiagnostics* diagnostics) {
  const Grid& grid = observed.grid();
  const int ch = observed.channel_index("h");
  const int n = grid.n_space();
  const int nt = grid.n_time();

  const double bound = swe_stable_dt(h_bar, 0.0, g, grid);
  const int substeps = std::max(1, static_cast<int>(std::ceil(grid.dt() / (0.9 * bound))));
  const Eigen::MatrixXd step = linearize_swe(h_bar, 0.0, g, grid, grid.dt() / substeps, boundary);
  Eigen::MatrixXd A = Eigen::MatrixXd::Identity(2 * n, 2 * n);
  for (int s = 0; s < substeps; ++s) A = step * A;

  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(n, 2 * n);
  for (int i = 0; i < n; ++i) H(i, i) = 1.0;
  Eigen::MatrixXd y(n, nt);
  for (int t = 0; t < nt; ++t)
    for (int i = 0; i < n; ++i) y(i, t) = static_cast<double>(observed.at(ch, t, i)) - h_bar;

  const KfResult res = kalman_filter(A, H, y, noise, Eigen::VectorXd::Zero(2 * n));

  Field out(grid, {"h", "u"});
  for (int t = 0; t < nt; ++t) {
    for (int i = 0; i < n; ++i) {
      const double h = h_bar + res.means(i, t);
      const double hu = res.means(n + i, t);
      out.at(0, t, i) = static_cast<float>(h);
      out.at(1, t, i) = static_cast<float>(h > 0.0 ? hu / h : 0.0);
    }
  }
  if (diagnostics) {
    diagnostics->substeps = substeps;
    diagnostics->min_eigenvalue = res.min_eigenvalue;
    diagnostics->innovation_rms.clear();
    for (int t = 0; t < nt; ++t) {
      diagnostics->innovation_rms.push_back(std::sqrt(res.innovations.col(t).squaredNorm() / n));
    }
  }
  return out;
}

}  // namespace pdo
