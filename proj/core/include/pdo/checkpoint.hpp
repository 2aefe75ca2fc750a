// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "pdo/diffusion.hpp"
#include "pdo/field.hpp"
#include "pdo/unet.hpp"

namespace pdo {

/// ddpm and edm train conditional models; unconditional is DDPM without
/// conditioning blocks (used with the resampling sampler).
enum class DiffusionMode { ddpm, edm, unconditional };

std::string to_string(DiffusionMode mode);
DiffusionMode parse_diffusion_mode(std::string_view text);

struct TrainConfig {
  int batch_size = 16;
  double learning_rate = 2e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;
  long iterations = 2000;
  double ema_decay = 0.999;
  double grad_clip = 1.0;
  /// Telemetry period in iterations.
  int log_every = 10;
  /// Linear learning-rate warmup length; 0 disables it.
  long warmup = 0;

  void validate() const;
};

struct Checkpoint {
  static constexpr int kFormatVersion = 1;

  NetConfig net_config;
  TrainConfig train_config;
  DiffusionMode mode = DiffusionMode::edm;
  EdmConfig edm;
  int ddpm_steps = 1000;
  double ddpm_beta_start = 1e-4;
  double ddpm_beta_end = 0.02;
  std::array<double, 5> task_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::vector<int> group_a;
  long iteration = 0;
  NormStats stats;
  std::vector<Param<float>> params;
  std::vector<std::vector<float>> ema;

  DdpmSchedule schedule() const {
    return DdpmSchedule::linear(ddpm_steps, ddpm_beta_start, ddpm_beta_end);
  }
  InputLayout layout() const;
};

/// Network rebuilt from a checkpoint, with EMA weights unless `use_ema` is false.
UNet<float> load_network(const Checkpoint& ckpt, bool use_ema = true);

/// Directory with checkpoint.json plus params/<name>.f32 and ema/<name>.f32.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace pdo
