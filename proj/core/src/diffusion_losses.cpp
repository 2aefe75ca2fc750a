// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include <cmath>

#include "pdo/diffusion.hpp"
#include "pdo/error.hpp"

namespace pdo {

namespace {

// Network input for a noisy batch; the state block is multiplied by state_scale[i].
Tensor build_input(const Tensor& clean, const Tensor& noisy, const TaskMask& mask, InputLayout layout,
                   std::span<const double> state_scale) {
  Tensor input;
  if (layout.conditional) {
    input = assemble_input(clean, noisy, mask, layout.include_mask_channels);
  } else {
    input = noisy;
  }
  const std::size_t per = clean.sample_size();
  for (int i = 0; i < input.n(); ++i) {
    const float s = static_cast<float>(state_scale.size() == 1 ? state_scale[0] : state_scale[i]);
    if (s == 1.0f) continue;
    auto o = input.sample(i);
    for (std::size_t k = 0; k < per; ++k) o[k] *= s;
  }
  return input;
}

void check_batch(const Tensor& clean, const TaskMask& mask) {
  if (clean.sample_size() != mask.mask.size() || clean.c() != mask.shape.channels) {
    throw ConfigError("batch is not congruent with the task mask");
  }
}

}  // namespace

LossAndGrad evaluate_problem(const DenoisingProblem& p, const Tensor& output) {
  if (!output.same_shape(p.target)) throw ConfigError("network output has the wrong shape");
  LossAndGrad r;
  r.grad = Tensor(output.n(), output.c(), output.h(), output.w());
  const std::size_t free = p.mask.unobserved();
  if (free == 0) {
    r.degenerate = true;
    return r;
  }
  const double norm = 1.0 / (static_cast<double>(free) * output.n());
  const std::size_t per = output.sample_size();
  double sum = 0.0;
  for (int i = 0; i < output.n(); ++i) {
    auto f = output.sample(i);
    auto x = p.noisy.sample(i);
    auto y = p.target.sample(i);
    auto g = r.grad.sample(i);
    const double skip = p.skip[i], out = p.out_scale[i], w = p.weight[i];
    for (std::size_t k = 0; k < per; ++k) {
      if (p.mask.mask[k] != 0.0f) continue;
      const double d = skip * x[k] + out * f[k] - y[k];
      sum += w * d * d;
      g[k] = static_cast<float>(2.0 * w * out * d * norm);
    }
  }
  r.loss = sum * norm;
  return r;
}

DenoisingProblem ddpm_training_problem(const Tensor& clean, const TaskMask& mask,
                                       const DdpmSchedule& schedule, InputLayout layout, Rng& rng) {
  check_batch(clean, mask);
  const int n = clean.n();
  DenoisingProblem p;
  p.mask = mask;
  std::vector<int> steps(n);
  for (int i = 0; i < n; ++i) steps[i] = 1 + static_cast<int>(rng.uniform_index(schedule.steps));
  Tensor noise(n, clean.c(), clean.h(), clean.w());
  fill_normal(noise, rng);
  p.noisy = ddpm_forward(clean, steps, noise, schedule, &mask);
  const double one = 1.0;
  p.input = build_input(clean, p.noisy, mask, layout, std::span<const double>(&one, 1));
  p.noise_cond.resize(n);
  for (int i = 0; i < n; ++i) p.noise_cond[i] = static_cast<float>(steps[i]);
  p.target = std::move(noise);
  p.skip.assign(n, 0.0);
  p.out_scale.assign(n, 1.0);
  p.weight.assign(n, 1.0);
  return p;
}

DenoisingProblem edm_training_problem(const Tensor& clean, const TaskMask& mask,
                                      const EdmConfig& config, InputLayout layout, Rng& rng) {
  check_batch(clean, mask);
  config.validate();
  const int n = clean.n();
  DenoisingProblem p;
  p.mask = mask;
  p.noisy = clean;
  std::vector<double> c_in(n);
  p.noise_cond.resize(n);
  p.skip.resize(n);
  p.out_scale.resize(n);
  p.weight.resize(n);
  const std::size_t per = clean.sample_size();
  for (int i = 0; i < n; ++i) {
    const double sigma = std::exp(config.p_mean + config.p_std * rng.normal());
    const Preconditioning c = edm_precondition(sigma, config);
    auto x = p.noisy.sample(i);
    for (std::size_t k = 0; k < per; ++k) {
      const double z = rng.normal();
      if (mask.mask[k] == 0.0f) x[k] = static_cast<float>(x[k] + sigma * z);
    }
    c_in[i] = c.c_in;
    p.noise_cond[i] = static_cast<float>(c.c_noise);
    p.skip[i] = c.c_skip;
    p.out_scale[i] = c.c_out;
    p.weight[i] = edm_loss_weight(sigma, config);
  }
  p.input = build_input(clean, p.noisy, mask, layout, c_in);
  p.target = clean;
  return p;
}

double ddpm_loss(const NetworkFn& net, const Tensor& clean, const TaskMask& mask,
                 const DdpmSchedule& schedule, Rng& rng, InputLayout layout) {
  const DenoisingProblem p = ddpm_training_problem(clean, mask, schedule, layout, rng);
  return evaluate_problem(p, net(p.input, p.noise_cond)).loss;
}

double edm_loss(const NetworkFn& net, const Tensor& clean, const TaskMask& mask, const EdmConfig& config,
                Rng& rng, InputLayout layout) {
  const DenoisingProblem p = edm_training_problem(clean, mask, config, layout, rng);
  return evaluate_problem(p, net(p.input, p.noise_cond)).loss;
}

}  // namespace pdo
