// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pdo/field.hpp"
#include "pdo/task_masks.hpp"

namespace pdo {

enum class SelectionStrategy { by_pde, by_points, closest };

std::string to_string(SelectionStrategy s);
SelectionStrategy parse_strategy(const std::string& text);

/// One extra measurement used by the by_points strategy.
struct ObservationPoint {
  int channel = 0;
  int n = 0;
  int i = 0;
  float value = 0.0f;
};

/// Mean absolute PDE residual of one (denormalized) sample.
using ResidualOp = std::function<double(const Field&)>;

struct SampleReport {
  std::string case_id;
  std::vector<double> mae;
  std::vector<double> residual;
  double mean_prediction_mae = 0.0;
  double mean_prediction_residual = 0.0;
  /// Spearman correlation of per-sample MAE and residual; 0 when undefined.
  double spearman = 0.0;
  int selected_by_pde = 0;
  int selected_closest = 0;
  /// Set when extra observation points were supplied.
  std::optional<int> selected_by_points;

  std::size_t sample_count() const { return mae.size(); }
};

/// Mean absolute error over unobserved entries of the mask.
double masked_mae(const Field& prediction, const Field& target, const TaskMask& mask);

/// Rank correlation with average ranks for ties. Returns 0 when either input is constant.
double spearman(std::span<const double> a, std::span<const double> b);

/// Pointwise average of the samples.
Field mean_prediction(std::span<const Field> samples);

/// The two spatial extremes of the first snapshot in the first unobserved channel.
std::vector<ObservationPoint> corner_points(const Field& target, const TaskMask& mask);

/// Per-sample metrics, mean prediction, correlation and the selections.
/// `points` may be empty, in which case by_points is skipped.
SampleReport evaluate_samples(std::span<const Field> samples, const Field& target, const TaskMask& mask,
                              const ResidualOp& residual_op, std::span<const ObservationPoint> points = {},
                              std::string case_id = {});

/// Index chosen by a strategy; ties go to the lowest index.
int select_sample(const SampleReport& report, SelectionStrategy strategy, std::span<const Field> samples,
                  std::span<const ObservationPoint> points = {});

}  // namespace pdo
