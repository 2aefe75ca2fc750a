// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

#include "pdo/rng.hpp"
#include "pdo/task_masks.hpp"
#include "pdo/tensor.hpp"

namespace pdo {

// ---------------------------------------------------------------------------
// Schedules

/// Discrete variance-preserving schedule; step t runs from 1 to T.
struct DdpmSchedule {
  int steps = 0;
  std::vector<double> betas;       // betas[t - 1]
  std::vector<double> alpha_bars;  // alpha_bars[t - 1] = prod_{s <= t} (1 - beta_s)

  static DdpmSchedule linear(int steps = 1000, double beta_start = 1e-4, double beta_end = 0.02);

  double beta(int t) const { return betas.at(t - 1); }
  double alpha_bar(int t) const { return alpha_bars.at(t - 1); }
  /// Noise-to-signal ratio sqrt((1 - abar_t) / abar_t) of step t.
  double sigma(int t) const;
  /// Continuous step index whose sigma equals `s`, interpolated in log-sigma and
  /// clamped to [1, T].
  double step_for_sigma(double s) const;

  void validate() const;
};

struct EdmConfig {
  double sigma_min = 0.002;
  double sigma_max = 80.0;
  double rho = 7.0;
  double sigma_data = 0.5;
  double p_mean = -1.2;
  double p_std = 1.2;

  void validate() const;
};

struct Preconditioning {
  double c_skip;
  double c_out;
  double c_in;
  double c_noise;
};

Preconditioning edm_precondition(double sigma, const EdmConfig& config);

/// lambda(sigma) = (sigma^2 + sigma_data^2) / (sigma sigma_data)^2.
double edm_loss_weight(double sigma, const EdmConfig& config);

/// sigma_i = (smax^(1/rho) + i/(n-1) (smin^(1/rho) - smax^(1/rho)))^rho for i < n, then 0.
std::vector<double> karras_sigma_steps(int n, const EdmConfig& config);

// ---------------------------------------------------------------------------
// Forward process and training losses

/// x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) noise. `steps` holds one step for the
/// whole batch or one per sample. With a mask, observed entries keep x0.
Tensor ddpm_forward(const Tensor& x0, std::span<const int> steps, const Tensor& noise,
                    const DdpmSchedule& schedule, const TaskMask* mask = nullptr);

/// Raw network: assembled input batch and per-sample noise conditioning in,
/// C output channels out.
using NetworkFn = std::function<Tensor(const Tensor& input, std::span<const float> noise_cond)>;

/// How the network input is built from a batch.
struct InputLayout {
  /// Conditioning and mask blocks are present (false for unconditional models).
  bool conditional = true;
  bool include_mask_channels = true;

  int blocks() const { return conditional ? (include_mask_channels ? 3 : 2) : 1; }
};

/// One training step's denoising regression, independent of the network.
/// The denoised estimate is D = skip[i] * noisy + out_scale[i] * F and the loss is
/// mean over unobserved entries of weight[i] * (D - target)^2.
struct DenoisingProblem {
  TaskMask mask;
  Tensor noisy;
  Tensor input;
  std::vector<float> noise_cond;
  Tensor target;
  std::vector<double> skip;
  std::vector<double> out_scale;
  std::vector<double> weight;
};

struct LossAndGrad {
  double loss = 0.0;
  bool degenerate = false;
  /// dLoss/dF, zero on observed entries.
  Tensor grad;
};

LossAndGrad evaluate_problem(const DenoisingProblem& problem, const Tensor& network_output);

/// Uniform step, noise on unobserved entries, target = injected noise.
DenoisingProblem ddpm_training_problem(const Tensor& clean, const TaskMask& mask,
                                       const DdpmSchedule& schedule, InputLayout layout, Rng& rng);

/// Log-normal sigma, preconditioned input, lambda-weighted loss against clean data.
DenoisingProblem edm_training_problem(const Tensor& clean, const TaskMask& mask,
                                      const EdmConfig& config, InputLayout layout, Rng& rng);

double ddpm_loss(const NetworkFn& net, const Tensor& clean, const TaskMask& mask,
                 const DdpmSchedule& schedule, Rng& rng, InputLayout layout = {});
double edm_loss(const NetworkFn& net, const Tensor& clean, const TaskMask& mask,
                const EdmConfig& config, Rng& rng, InputLayout layout = {});

// ---------------------------------------------------------------------------
// Sampling

/// D(x; sigma): estimate of the clean batch from a noisy one.
using DenoiserFn = std::function<Tensor(const Tensor& x, double sigma)>;
/// eps(x_t, t): noise prediction of a DDPM-trained model at step t.
using EpsFn = std::function<Tensor(const Tensor& x_t, int t)>;

enum class SamplerMode { heun_conditional, repaint };

struct SamplerConfig {
  int n_steps = 32;
  SamplerMode mode = SamplerMode::heun_conditional;
  int repaint_steps = 250;
  int jump_length = 10;
  int resample_count = 5;

  void validate() const;
};

/// Wraps an EDM-preconditioned network into D(x; sigma) for one conditioning batch.
DenoiserFn edm_network_denoiser(NetworkFn net, Tensor conditioning, TaskMask mask,
                                EdmConfig config, InputLayout layout = {});

/// Wraps a noise-predicting network into D(x; sigma) = x - sigma eps(sqrt(abar) x, t(sigma)).
DenoiserFn ddpm_network_denoiser(NetworkFn net, Tensor conditioning, TaskMask mask,
                                 DdpmSchedule schedule, InputLayout layout = {});

/// Wraps a noise-predicting network into eps(x_t, t) for RePaint.
EpsFn ddpm_network_eps(NetworkFn net, Tensor conditioning, TaskMask mask, InputLayout layout);

/// Deterministic probability-flow sampler: Euler predictor with Heun correction on
/// the Karras schedule, last step Euler-only. Observed entries are reset to the
/// conditioning after every step, and the result matches them bit-exactly.
Tensor heun_sample(const DenoiserFn& denoiser, const Tensor& conditioning, const TaskMask& mask,
                   const SamplerConfig& sampler, const EdmConfig& config, Rng& rng);

/// Same, starting from a caller-supplied unit-Gaussian draw.
Tensor heun_sample_from(const DenoiserFn& denoiser, const Tensor& conditioning, const TaskMask& mask,
                        const SamplerConfig& sampler, const EdmConfig& config, Tensor unit_noise);

/// Level sequence of the resampling schedule over `steps` respaced levels,
/// starting at `steps` and ending at 0.
std::vector<int> repaint_levels(int steps, int jump_length, int resample_count);

/// Ancestral sampling with known entries re-noised at every level and the
/// jump-back resampling loop.
Tensor repaint_sample(const EpsFn& eps, const Tensor& known, const TaskMask& mask,
                      const SamplerConfig& sampler, const DdpmSchedule& schedule, Rng& rng);

/// Fills a tensor with standard normal draws.
void fill_normal(Tensor& t, Rng& rng);

}  // namespace pdo
