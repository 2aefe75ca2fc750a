// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>

#include "pdo/diffusion.hpp"
#include "pdo/error.hpp"

namespace pdo {

DdpmSchedule DdpmSchedule::linear(int steps, double beta_start, double beta_end) {
  if (steps < 2) throw ConfigError("DDPM schedule needs at least two steps");
  DdpmSchedule s;
  s.steps = steps;
  s.betas.resize(steps);
  s.alpha_bars.resize(steps);
  double prod = 1.0;
  for (int i = 0; i < steps; ++i) {
    s.betas[i] = beta_start + (beta_end - beta_start) * i / (steps - 1);
    prod *= 1.0 - s.betas[i];
    s.alpha_bars[i] = prod;
  }
  s.validate();
  return s;
}

double DdpmSchedule::sigma(int t) const {
  const double ab = alpha_bar(t);
  return std::sqrt((1.0 - ab) / ab);
}

double DdpmSchedule::step_for_sigma(double s) const {
  if (s <= sigma(1)) return 1.0;
  if (s >= sigma(steps)) return static_cast<double>(steps);
  int lo = 1, hi = steps;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    (sigma(mid) <= s ? lo : hi) = mid;
  }
  const double a = std::log(sigma(lo));
  const double b = std::log(sigma(hi));
  return lo + (std::log(s) - a) / (b - a);
}

void DdpmSchedule::validate() const {
  if (steps < 2 || static_cast<int>(betas.size()) != steps ||
      static_cast<int>(alpha_bars.size()) != steps) {
    throw ConfigError("DDPM schedule arrays are inconsistent");
  }
  if (!(betas.front() > 0.0 && betas.front() < betas.back() && betas.back() < 1.0)) {
    throw ConfigError("DDPM betas must satisfy 0 < beta_1 < beta_T < 1");
  }
  for (int i = 1; i < steps; ++i) {
    if (!(alpha_bars[i] < alpha_bars[i - 1])) throw ConfigError("alpha_bar must decrease strictly");
  }
  if (!(alpha_bars.back() < 1e-4)) {
    throw ConfigError("final alpha_bar must fall below 1e-4 so the last step is almost pure noise");
  }
}

void EdmConfig::validate() const {
  if (!(sigma_min > 0.0 && sigma_min < sigma_max)) throw ConfigError("EDM needs 0 < sigma_min < sigma_max");
  if (!(rho >= 1.0)) throw ConfigError("EDM rho must be at least 1");
  if (!(sigma_data > 0.0)) throw ConfigError("EDM sigma_data must be positive");
  if (!(p_std > 0.0)) throw ConfigError("EDM P_std must be positive");
}

Preconditioning edm_precondition(double sigma, const EdmConfig& config) {
  if (!(sigma > 0.0)) throw ConfigError("preconditioning needs sigma > 0");
  const double sd2 = config.sigma_data * config.sigma_data;
  const double s2 = sigma * sigma;
  const double root = std::sqrt(s2 + sd2);
  return {sd2 / (s2 + sd2), sigma * config.sigma_data / root, 1.0 / root, std::log(sigma) / 4.0};
}

double edm_loss_weight(double sigma, const EdmConfig& config) {
  const double sd = config.sigma_data;
  return (sigma * sigma + sd * sd) / ((sigma * sd) * (sigma * sd));
}

std::vector<double> karras_sigma_steps(int n, const EdmConfig& config) {
  config.validate();
  if (n < 1) throw ConfigError("need at least one sampling step");
  std::vector<double> s(n + 1, 0.0);
  if (n == 1) {
    s[0] = config.sigma_max;
    return s;
  }
  const double a = std::pow(config.sigma_max, 1.0 / config.rho);
  const double b = std::pow(config.sigma_min, 1.0 / config.rho);
  for (int i = 0; i < n; ++i) s[i] = std::pow(a + static_cast<double>(i) / (n - 1) * (b - a), config.rho);
  s[0] = config.sigma_max;
  s[n - 1] = config.sigma_min;
  return s;
}

void SamplerConfig::validate() const {
  if (mode == SamplerMode::heun_conditional && n_steps < 2) {
    throw ConfigError("Heun sampling needs at least two steps");
  }
  if (mode == SamplerMode::repaint) {
    if (repaint_steps < 1 || jump_length < 1 || resample_count < 1) {
      throw ConfigError("RePaint needs positive steps, jump length and resample count");
    }
  }
}

void fill_normal(Tensor& t, Rng& rng) {
  for (float& v : t.data()) v = static_cast<float>(rng.normal());
}

Tensor ddpm_forward(const Tensor& x0, std::span<const int> steps, const Tensor& noise,
                    const DdpmSchedule& schedule, const TaskMask* mask) {
  if (!x0.same_shape(noise)) throw ConfigError("noise and data differ in shape");
  if (steps.size() != 1 && static_cast<int>(steps.size()) != x0.n()) {
    throw ConfigError("need one diffusion step per batch or per sample");
  }
  if (mask && mask->mask.size() != x0.sample_size()) throw ConfigError("mask is not congruent with data");
  Tensor out = x0;
  const std::size_t per = x0.sample_size();
  for (int i = 0; i < x0.n(); ++i) {
    const int t = steps.size() == 1 ? steps[0] : steps[i];
    if (t < 1 || t > schedule.steps) {
      throw ConfigError("diffusion step " + std::to_string(t) + " outside [1, " +
                        std::to_string(schedule.steps) + "]");
    }
    const double a = std::sqrt(schedule.alpha_bar(t));
    const double b = std::sqrt(1.0 - schedule.alpha_bar(t));
    auto x = x0.sample(i);
    auto z = noise.sample(i);
    auto o = out.sample(i);
    for (std::size_t k = 0; k < per; ++k) {
      if (mask && mask->mask[k] != 0.0f) continue;
      o[k] = static_cast<float>(a * x[k] + b * z[k]);
    }
  }
  return out;
}

}  // namespace pdo
