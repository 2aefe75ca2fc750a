// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/sample_report.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdo/error.hpp"

namespace pdo {

std::string to_string(SelectionStrategy s) {
  switch (s) {
    case SelectionStrategy::by_pde:
      return "by_pde";
    case SelectionStrategy::by_points:
      return "by_points";
    case SelectionStrategy::closest:
      return "closest";
  }
  return "closest";
}

SelectionStrategy parse_strategy(const std::string& text) {
  if (text == "by_pde") return SelectionStrategy::by_pde;
  if (text == "by_points") return SelectionStrategy::by_points;
  if (text == "closest") return SelectionStrategy::closest;
  throw ConfigError("unknown selection strategy '" + text + "'");
}

namespace {

void check_congruent(const Field& f, const TaskMask& mask) {
  if (f.size() != mask.mask.size()) throw ValidationError("field is not congruent with the task mask");
}

std::vector<double> ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[order[k]] = avg;
    i = j + 1;
  }
  return r;
}

int argmin(std::span<const double> v) {
  int best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] < v[best]) best = static_cast<int>(i);
  }
  return best;
}

std::vector<double> point_errors(std::span<const Field> samples, std::span<const ObservationPoint> points) {
  if (points.empty()) throw ConfigError("by_points selection needs at least one observation point");
  std::vector<double> err(samples.size(), 0.0);
  for (std::size_t s = 0; s < samples.size(); ++s) {
    for (const auto& p : points) {
      err[s] += std::abs(static_cast<double>(samples[s].at(p.channel, p.n, p.i)) - p.value);
    }
  }
  return err;
}

}  // namespace

double masked_mae(const Field& prediction, const Field& target, const TaskMask& mask) {
  check_congruent(prediction, mask);
  check_congruent(target, mask);
  auto p = prediction.data();
  auto t = target.data();
  double s = 0.0;
  std::size_t count = 0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    if (mask.mask[k] != 0.0f) continue;
    s += std::abs(static_cast<double>(p[k]) - t[k]);
    ++count;
  }
  return count > 0 ? s / static_cast<double>(count) : 0.0;
}

double spearman(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ValidationError("correlation inputs differ in length");
  if (a.size() < 2) return 0.0;
  const auto ra = ranks(a);
  const auto rb = ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return 0.0;
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

Field mean_prediction(std::span<const Field> samples) {
  if (samples.empty()) throw ValidationError("mean prediction of an empty sample set");
  std::vector<double> acc(samples[0].size(), 0.0);
  for (const Field& s : samples) {
    if (s.grid() != samples[0].grid() || s.channels() != samples[0].channels()) {
      throw ValidationError("samples differ in grid or channels");
    }
    auto d = s.data();
    for (std::size_t k = 0; k < acc.size(); ++k) acc[k] += d[k];
  }
  std::vector<float> out(acc.size());
  const double inv = 1.0 / static_cast<double>(samples.size());
  for (std::size_t k = 0; k < acc.size(); ++k) out[k] = static_cast<float>(acc[k] * inv);
  return Field(samples[0].grid(), samples[0].channels(), std::move(out));
}

std::vector<ObservationPoint> corner_points(const Field& target, const TaskMask& mask) {
  check_congruent(target, mask);
  const Grid& g = target.grid();
  for (int c = 0; c < target.n_channels(); ++c) {
    for (int n = 0; n < g.n_time(); ++n) {
      const std::size_t row = (static_cast<std::size_t>(c) * g.n_time() + n) * g.n_space();
      const std::size_t last = row + g.n_space() - 1;
      if (mask.mask[row] == 0.0f && mask.mask[last] == 0.0f) {
        return {ObservationPoint{c, n, 0, target.at(c, n, 0)},
                ObservationPoint{c, n, g.n_space() - 1, target.at(c, n, g.n_space() - 1)}};
      }
    }
  }
  return {};
}

SampleReport evaluate_samples(std::span<const Field> samples, const Field& target, const TaskMask& mask,
                              const ResidualOp& residual_op, std::span<const ObservationPoint> points,
                              std::string case_id) {
  if (samples.empty()) throw ValidationError("no samples to evaluate");
  SampleReport r;
  r.case_id = std::move(case_id);
  for (const Field& s : samples) {
    r.mae.push_back(masked_mae(s, target, mask));
    r.residual.push_back(residual_op ? residual_op(s) : 0.0);
  }
  const Field mean = mean_prediction(samples);
  r.mean_prediction_mae = masked_mae(mean, target, mask);
  r.mean_prediction_residual = residual_op ? residual_op(mean) : 0.0;
  r.spearman = spearman(r.mae, r.residual);
  r.selected_by_pde = argmin(r.residual);
  r.selected_closest = argmin(r.mae);
  if (!points.empty()) r.selected_by_points = argmin(point_errors(samples, points));
  return r;
}

int select_sample(const SampleReport& report, SelectionStrategy strategy, std::span<const Field> samples,
                  std::span<const ObservationPoint> points) {
  switch (strategy) {
    case SelectionStrategy::by_pde:
      return argmin(report.residual);
    case SelectionStrategy::closest:
      return argmin(report.mae);
    case SelectionStrategy::by_points:
      return argmin(point_errors(samples, points));
  }
  return 0;
}

}  // namespace pdo
