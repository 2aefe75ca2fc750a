// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "pdo/error.hpp"
#include "pdo/sample_report.hpp"

using namespace pdo;

namespace {

const Grid kGrid(8, 4, 0.0, 1.0, 0.0, 1.0);

Field target_field() {
  Field f(kGrid, {"h", "u"});
  int k = 0;
  for (auto& v : f.data()) v = static_cast<float>((k++ % 13) / 8.0);
  return f;
}

Field shifted(const Field& f, float delta) {
  Field out = f;
  for (auto& v : out.data()) v += delta;
  return out;
}

const TaskMask kMask = mask_for_task(TaskId::task1, {2, 4, 8}, 1.0f);

}  // namespace

TEST_CASE("samples equal to the target have zero error") {
  const Field t = target_field();
  const std::vector<Field> s{t, t, t};
  const auto r = evaluate_samples(s, t, kMask, {});
  for (double m : r.mae) CHECK(m == 0.0);
  CHECK(r.mean_prediction_mae == 0.0);
  CHECK(r.sample_count() == 3);
}

TEST_CASE("symmetric samples cancel in the mean prediction") {
  const Field t = target_field();
  const std::vector<Field> s{shifted(t, 0.25f), shifted(t, -0.25f)};
  const auto r = evaluate_samples(s, t, kMask, {});
  CHECK(r.mae[0] == doctest::Approx(0.25));
  CHECK(r.mae[1] == doctest::Approx(0.25));
  CHECK(r.mean_prediction_mae == 0.0);
}

TEST_CASE("MAE ignores observed entries") {
  const Field t = target_field();
  Field p = shifted(t, 0.5f);
  const double before = masked_mae(p, t, kMask);
  for (auto& v : p.channel(0)) v = 100.0f;
  CHECK(masked_mae(p, t, kMask) == before);
  CHECK(before == doctest::Approx(0.5));
}

TEST_CASE("selection strategies") {
  const Field t = target_field();
  const std::vector<Field> s{shifted(t, 0.3f), shifted(t, 0.1f), shifted(t, -0.2f)};
  const ResidualOp residual = [](const Field& f) { return f.data()[0] == 0.0f ? 0.0 : std::abs(f.data()[0]); };
  const auto r = evaluate_samples(s, t, kMask, residual);
  CHECK(r.selected_closest == 1);
  CHECK(select_sample(r, SelectionStrategy::closest, s) == 1);
  CHECK(r.residual[2] == doctest::Approx(0.2));

  // One sample with zero residual is picked by the PDE strategy.
  std::vector<Field> z{shifted(t, 0.3f), shifted(t, 0.1f), shifted(t, 0.0f)};
  const auto rz = evaluate_samples(z, t, kMask, residual);
  CHECK(rz.residual[2] == 0.0);
  CHECK(rz.selected_by_pde == 2);
  CHECK(select_sample(rz, SelectionStrategy::by_pde, z) == 2);

  const std::vector<ObservationPoint> pts{{1, 0, 0, t.at(1, 0, 0) - 0.2f}, {1, 0, 7, t.at(1, 0, 7) - 0.2f}};
  CHECK(select_sample(r, SelectionStrategy::by_points, s, pts) == 2);
  const auto rp = evaluate_samples(s, t, kMask, residual, pts);
  REQUIRE(rp.selected_by_points.has_value());
  CHECK(*rp.selected_by_points == 2);
  CHECK_THROWS_AS(select_sample(r, SelectionStrategy::by_points, s, {}), ConfigError);
}

TEST_CASE("points where all samples agree fall back to the first sample") {
  const Field t = target_field();
  std::vector<Field> s{shifted(t, 0.3f), shifted(t, 0.1f)};
  for (auto& f : s) f.at(1, 2, 3) = 5.0f;
  const std::vector<ObservationPoint> pts{{1, 2, 3, 4.0f}};
  const auto r = evaluate_samples(s, t, kMask, {});
  CHECK(select_sample(r, SelectionStrategy::by_points, s, pts) == 0);
}

TEST_CASE("Spearman correlation matches reference values") {
  const std::vector<double> a{1, 2, 3, 4, 5}, b{5, 6, 7, 8, 7};
  CHECK(spearman(a, b) == doctest::Approx(0.8207826816681233).epsilon(1e-12));
  const std::vector<double> c{3, 1, 4, 1, 5, 9, 2, 6}, d{2, 7, 1, 8, 2, 8, 1, 8};
  CHECK(spearman(c, d) == doctest::Approx(0.19885368120992467).epsilon(1e-12));
  const std::vector<double> up{1, 2, 3}, down{3, 2, 1}, flat{1, 1, 1};
  CHECK(spearman(up, up) == doctest::Approx(1.0));
  CHECK(spearman(up, down) == doctest::Approx(-1.0));
  CHECK(spearman(up, flat) == 0.0);
}

TEST_CASE("sample metrics are permutation invariant") {
  const Field t = target_field();
  std::vector<Field> s;
  Rng rng(4);
  for (int k = 0; k < 6; ++k) s.push_back(shifted(t, static_cast<float>(rng.uniform(-1.0, 1.0))));
  const ResidualOp residual = [](const Field& f) { return std::abs(f.data()[3]) + 0.1 * f.data()[9]; };
  const auto a = evaluate_samples(s, t, kMask, residual);
  std::vector<Field> p(s.rbegin(), s.rend());
  const auto b = evaluate_samples(p, t, kMask, residual);
  auto sa = a.mae, sb = b.mae;
  std::sort(sa.begin(), sa.end());
  std::sort(sb.begin(), sb.end());
  CHECK(sa == sb);
  CHECK(a.spearman == doctest::Approx(b.spearman));
  CHECK(a.mean_prediction_mae == doctest::Approx(b.mean_prediction_mae).epsilon(1e-6));
  CHECK(a.spearman >= -1.0);
  CHECK(a.spearman <= 1.0);
  CHECK(a.mae[a.selected_closest] == b.mae[b.selected_closest]);
}

TEST_CASE("corner points sit at the spatial extremes of the first generated channel") {
  const Field t = target_field();
  const auto pts = corner_points(t, kMask);
  REQUIRE(pts.size() == 2);
  CHECK(pts[0].channel == 1);
  CHECK(pts[0].n == 0);
  CHECK(pts[0].i == 0);
  CHECK(pts[1].i == 7);
  CHECK(pts[1].value == t.at(1, 0, 7));
  const auto m3 = mask_for_task(TaskId::task3, {2, 4, 8}, 0.5f);
  const auto p3 = corner_points(t, m3);
  REQUIRE(p3.size() == 2);
  CHECK(p3[0].channel == 0);
  CHECK(p3[0].n == 2);
}

TEST_CASE("strategy names") {
  CHECK(parse_strategy("by_pde") == SelectionStrategy::by_pde);
  CHECK(to_string(SelectionStrategy::by_points) == "by_points");
  CHECK_THROWS_AS(parse_strategy("best"), ConfigError);
}
