// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>
#include <vector>

#include "pdo/field.hpp"
#include "pdo/simulators.hpp"

namespace pdo {

/// One-step transition of the shallow-water equations linearized about the constant
/// state (h_bar, u_bar), for the deviation vector [dh; d(hu)] of length 2 n.
/// Lax-Wendroff in space and time: A = I - dt J D1 + dt^2 / 2 J^2 D2.
/// Throws ConfigError, quoting the stable bound, when (|u_bar| + sqrt(g h_bar)) dt / dx > 1.
Eigen::MatrixXd linearize_swe(double h_bar, double u_bar, double g, const Grid& grid, double dt,
                              Boundary boundary = Boundary::periodic);

/// Largest stable step of linearize_swe for the given reference.
double swe_stable_dt(double h_bar, double u_bar, double g, const Grid& grid);

struct KfNoise {
  double q = 1e-4;
  double r = 1e-4;
  /// Prior variance of the initial deviation.
  double p0 = 1e-2;
};

struct KfResult {
  /// Filtered means, one column per step.
  Eigen::MatrixXd means;
  /// Innovations y - H x_pred, one column per step.
  Eigen::MatrixXd innovations;
  /// Smallest covariance eigenvalue after each update.
  std::vector<double> min_eigenvalue;
  Eigen::MatrixXd final_covariance;
};

/// Linear Kalman filter x' = A x + w, y = H x + v with w ~ N(0, q I), v ~ N(0, r I).
/// Step 0 is an update of the prior (x0, p0 I); later steps predict then update.
/// The covariance is symmetrized after every update; an eigenvalue below
/// -1e-9 max(1, |P|) raises NumericalError.
KfResult kalman_filter(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H, const Eigen::MatrixXd& observations,
                       const KfNoise& noise, const Eigen::VectorXd& x0);

struct KfDiagnostics {
  int substeps = 1;
  std::vector<double> min_eigenvalue;
  /// Root-mean-square innovation per snapshot.
  std::vector<double> innovation_rms;
};

/// Reconstructs (h, u) from the observed "h" channel by filtering the linearized
/// SWE about (h_bar, 0). Snapshot intervals are split into equal substeps when the
/// snapshot step exceeds the stable bound.
Field kf_reconstruct(const Field& observed, double h_bar, double g, const KfNoise& noise,
                     Boundary boundary = Boundary::periodic, KfDiagnostics* diagnostics = nullptr);

}  // namespace pdo
