// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "pdo/field.hpp"
#include "pdo/simulators.hpp"
#include "pdo/task_masks.hpp"

namespace pdo {

/// Pointwise discrete residual on the field's grid. Cells outside the valid
/// window [t_begin, t_end) x [x_begin, x_end) hold 0.
struct Residual {
  Field values;
  int t_begin = 0, t_end = 0;
  int x_begin = 0, x_end = 0;

  /// Mean absolute residual over valid cells of every channel.
  double mean_abs() const;
  double mean_abs(int channel) const;
};

/// div(a grad u) - f with harmonic-mean face coefficients, interior nodes only.
/// Expects channel "a" in `a` and channel "u" in `u`.
Residual darcy_residual(const Field& a, const Field& u, double forcing);
/// Double-precision variant on row-major (y, x) arrays; returns mean |residual|.
double darcy_residual_mean_f64(std::span<const double> a, std::span<const double> u, double forcing,
                               const Grid& grid);

/// Forward difference in time, central in space, for mass and momentum
/// (flux h u^2 + g h^2 / 2). Channels "h" and "u" are read by name.
Residual swe_residual(const Field& fields, double g);

/// Forward difference in time, upwind in space, of the four reactor equations.
Residual reactor_residual(const Field& fields, const ReactorConfig& config);

}  // namespace pdo
