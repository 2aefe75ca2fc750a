// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <algorithm>
#include <cmath>
#include <map>

#include "pdo/diffusion.hpp"
#include "pdo/error.hpp"

namespace pdo {

namespace {

void check_mask(const Tensor& t, const TaskMask& mask) {
  if (t.sample_size() != mask.mask.size() || t.c() != mask.shape.channels) {
    throw ConfigError("batch is not congruent with the task mask");
  }
}

// Resets observed entries of x to the conditioning values.
void project(Tensor& x, const Tensor& cond, const TaskMask& mask) {
  const std::size_t per = x.sample_size();
  for (int i = 0; i < x.n(); ++i) {
    auto xs = x.sample(i);
    auto cs = cond.sample(i);
    for (std::size_t k = 0; k < per; ++k) {
      if (mask.mask[k] != 0.0f) xs[k] = cs[k];
    }
  }
}

void require_finite(const Tensor& t, const char* what, int step) {
  for (float v : t.data()) {
    if (!std::isfinite(v)) {
      throw NumericalError(std::string(what) + " produced a non-finite value at sampling step " +
                           std::to_string(step));
    }
  }
}

Tensor network_input(const Tensor& cond, const Tensor& state, const TaskMask& mask, InputLayout layout,
                     double state_scale) {
  Tensor input = layout.conditional ? assemble_input(cond, state, mask, layout.include_mask_channels)
                                    : state;
  if (state_scale != 1.0) {
    const float s = static_cast<float>(state_scale);
    const std::size_t per = state.sample_size();
    for (int i = 0; i < input.n(); ++i) {
      auto o = input.sample(i);
      for (std::size_t k = 0; k < per; ++k) o[k] *= s;
    }
  }
  return input;
}

}  // namespace

DenoiserFn edm_network_denoiser(NetworkFn net, Tensor conditioning, TaskMask mask, EdmConfig config,
                                InputLayout layout) {
  check_mask(conditioning, mask);
  return [net = std::move(net), cond = std::move(conditioning), mask = std::move(mask), config,
          layout](const Tensor& x, double sigma) {
    const Preconditioning c = edm_precondition(sigma, config);
    const Tensor input = network_input(cond, x, mask, layout, c.c_in);
    const std::vector<float> nc(x.n(), static_cast<float>(c.c_noise));
    const Tensor f = net(input, nc);
    Tensor d = x;
    auto dd = d.data();
    auto ff = f.data();
    auto xx = x.data();
    for (std::size_t k = 0; k < dd.size(); ++k) {
      dd[k] = static_cast<float>(c.c_skip * xx[k] + c.c_out * ff[k]);
    }
    return d;
  };
}

DenoiserFn ddpm_network_denoiser(NetworkFn net, Tensor conditioning, TaskMask mask, DdpmSchedule schedule,
                                 InputLayout layout) {
  check_mask(conditioning, mask);
  return [net = std::move(net), cond = std::move(conditioning), mask = std::move(mask),
          schedule = std::move(schedule), layout](const Tensor& x, double sigma) {
    const double scale = 1.0 / std::sqrt(1.0 + sigma * sigma);
    // Observed entries are clean in the variance-preserving frame as well.
    Tensor x_vp = x;
    const std::size_t per = x.sample_size();
    for (int i = 0; i < x.n(); ++i) {
      auto s = x_vp.sample(i);
      for (std::size_t k = 0; k < per; ++k) {
        if (mask.mask[k] == 0.0f) s[k] = static_cast<float>(s[k] * scale);
      }
    }
    const Tensor input = network_input(cond, x_vp, mask, layout, 1.0);
    const std::vector<float> nc(x.n(), static_cast<float>(schedule.step_for_sigma(sigma)));
    const Tensor eps = net(input, nc);
    Tensor d = x;
    auto dd = d.data();
    auto ee = eps.data();
    for (std::size_t k = 0; k < dd.size(); ++k) dd[k] = static_cast<float>(dd[k] - sigma * ee[k]);
    return d;
  };
}

EpsFn ddpm_network_eps(NetworkFn net, Tensor conditioning, TaskMask mask, InputLayout layout) {
  check_mask(conditioning, mask);
  return [net = std::move(net), cond = std::move(conditioning), mask = std::move(mask), layout](
             const Tensor& x_t, int t) {
    const Tensor input = network_input(cond, x_t, mask, layout, 1.0);
    const std::vector<float> nc(x_t.n(), static_cast<float>(t));
    return net(input, nc);
  };
}

Tensor heun_sample(const DenoiserFn& denoiser, const Tensor& conditioning, const TaskMask& mask,
                   const SamplerConfig& sampler, const EdmConfig& config, Rng& rng) {
  Tensor noise(conditioning.n(), conditioning.c(), conditioning.h(), conditioning.w());
  fill_normal(noise, rng);
  return heun_sample_from(denoiser, conditioning, mask, sampler, config, std::move(noise));
}

Tensor heun_sample_from(const DenoiserFn& denoiser, const Tensor& conditioning, const TaskMask& mask,
                        const SamplerConfig& sampler, const EdmConfig& config, Tensor unit_noise) {
  sampler.validate();
  check_mask(conditioning, mask);
  if (!unit_noise.same_shape(conditioning)) throw ConfigError("noise and conditioning differ in shape");
  if (mask.all_one()) return conditioning;

  const std::vector<double> sigmas = karras_sigma_steps(sampler.n_steps, config);
  Tensor x = std::move(unit_noise);
  for (float& v : x.data()) v = static_cast<float>(v * sigmas[0]);
  project(x, conditioning, mask);

  const std::size_t total = x.size();
  std::vector<float> slope(total);
  for (int i = 0; i < sampler.n_steps; ++i) {
    const double s = sigmas[i];
    const double s_next = sigmas[i + 1];
    const Tensor den = denoiser(x, s);
    require_finite(den, "denoiser", i);
    auto xd = x.data();
    auto dd = den.data();
    Tensor x_next = x;
    auto xn = x_next.data();
    for (std::size_t k = 0; k < total; ++k) {
      slope[k] = static_cast<float>((xd[k] - dd[k]) / s);
      xn[k] = static_cast<float>(xd[k] + (s_next - s) * slope[k]);
    }
    project(x_next, conditioning, mask);
    if (s_next > 0.0) {
      const Tensor den2 = denoiser(x_next, s_next);
      require_finite(den2, "denoiser", i);
      auto d2 = den2.data();
      for (std::size_t k = 0; k < total; ++k) {
        const double slope2 = (xn[k] - d2[k]) / s_next;
        xn[k] = static_cast<float>(xd[k] + (s_next - s) * 0.5 * (slope[k] + slope2));
      }
      project(x_next, conditioning, mask);
    }
    x = std::move(x_next);
  }
  return x;
}

std::vector<int> repaint_levels(int steps, int jump_length, int resample_count) {
  if (steps < 1 || jump_length < 1 || resample_count < 1) {
    throw ConfigError("invalid resampling schedule parameters");
  }
  // Walk zero-based model indices, then shift by one so level 0 is clean data.
  std::map<int, int> jumps;
  for (int j = 0; j < steps - jump_length; j += jump_length) jumps[j] = resample_count - 1;
  std::vector<int> levels;
  int t = steps;
  while (t >= 1) {
    t -= 1;
    levels.push_back(t);
    auto it = jumps.find(t);
    if (it != jumps.end() && it->second > 0) {
      --it->second;
      for (int k = 0; k < jump_length; ++k) {
        t += 1;
        levels.push_back(t);
      }
    }
  }
  levels.push_back(-1);
  for (int& l : levels) l += 1;
  return levels;
}

Tensor repaint_sample(const EpsFn& eps, const Tensor& known, const TaskMask& mask,
                      const SamplerConfig& sampler, const DdpmSchedule& schedule, Rng& rng) {
  sampler.validate();
  check_mask(known, mask);
  if (mask.all_one()) return known;

  const int levels_n = std::min(sampler.repaint_steps, schedule.steps);
  // Respaced schedule: level k uses training step tau[k]; level 0 is clean data.
  std::vector<int> tau(levels_n + 1, 0);
  std::vector<double> abar(levels_n + 1, 1.0), beta(levels_n + 1, 0.0);
  for (int k = 1; k <= levels_n; ++k) {
    tau[k] = std::max(1, static_cast<int>(std::lround(static_cast<double>(k) * schedule.steps / levels_n)));
    abar[k] = schedule.alpha_bar(tau[k]);
    beta[k] = 1.0 - abar[k] / abar[k - 1];
  }

  const std::size_t per = known.sample_size();
  const std::size_t total = known.size();
  Tensor x(known.n(), known.c(), known.h(), known.w());
  fill_normal(x, rng);
  Tensor z(known.n(), known.c(), known.h(), known.w());

  const std::vector<int> levels = repaint_levels(levels_n, sampler.jump_length, sampler.resample_count);
  for (std::size_t s = 0; s + 1 < levels.size(); ++s) {
    const int cur = levels[s];
    const int next = levels[s + 1];
    if (next < cur) {
      const Tensor e = eps(x, tau[cur]);
      require_finite(e, "noise predictor", static_cast<int>(s));
      const double ab = abar[cur], ab_prev = abar[next], b = beta[cur];
      const double c0 = std::sqrt(ab_prev) * b / (1.0 - ab);
      const double c1 = std::sqrt(1.0 - b) * (1.0 - ab_prev) / (1.0 - ab);
      const double sd = next > 0 ? std::sqrt(b * (1.0 - ab_prev) / (1.0 - ab)) : 0.0;
      fill_normal(z, rng);
      auto xd = x.data();
      auto ed = e.data();
      auto zd = z.data();
      for (std::size_t k = 0; k < total; ++k) {
        const double x0 = (xd[k] - std::sqrt(1.0 - ab) * ed[k]) / std::sqrt(ab);
        xd[k] = static_cast<float>(c0 * x0 + c1 * xd[k] + sd * zd[k]);
      }
      // Known entries re-noised to the new level.
      fill_normal(z, rng);
      const double ka = std::sqrt(ab_prev);
      const double kb = next > 0 ? std::sqrt(1.0 - ab_prev) : 0.0;
      for (int i = 0; i < x.n(); ++i) {
        auto xs = x.sample(i);
        auto ks = known.sample(i);
        auto zs = z.sample(i);
        for (std::size_t k = 0; k < per; ++k) {
          if (mask.mask[k] != 0.0f) xs[k] = static_cast<float>(ka * ks[k] + kb * zs[k]);
        }
      }
    } else {
      const double b = beta[next];
      fill_normal(z, rng);
      auto xd = x.data();
      auto zd = z.data();
      for (std::size_t k = 0; k < total; ++k) {
        xd[k] = static_cast<float>(std::sqrt(1.0 - b) * xd[k] + std::sqrt(b) * zd[k]);
      }
    }
  }
  project(x, known, mask);
  return x;
}

}  // namespace pdo
