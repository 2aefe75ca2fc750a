// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "pdo/checkpoint.hpp"
#include "pdo/dataset_io.hpp"
#include "pdo/diffusion.hpp"
#include "pdo/kalman.hpp"
#include "pdo/sample_report.hpp"
#include "pdo/task_masks.hpp"

namespace pdo {

/// Everything a command needs; read from one JSON document.
struct ExperimentConfig {
  /// swe_orig, swe_init, darcy or reactor.
  std::string system = "swe_orig";
  int n_space = 64;
  int n_time = 64;
  int n_train = 500;
  int n_val = 10;
  int n_test = 30;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = "run";
  /// Defaults: <out_dir>/data and <out_dir>/ckpt.
  std::optional<std::filesystem::path> data_dir;
  std::optional<std::filesystem::path> ckpt_dir;
  /// Fixed generator parameters, e.g. {"x0": 0} for SWE-init or {"inlet_x_a": 0.9} for the reactor.
  std::map<std::string, double> overrides;
  /// Group A channel indices; empty selects the system default.
  std::vector<int> group_a;

  /// mixed, conditional:<task> or unconditional.
  std::string train_mode = "mixed";
  DiffusionMode diffusion = DiffusionMode::edm;
  std::array<double, 5> task_weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::pair<double, double> prefix_range{0.25, 0.75};
  NetConfig net;
  TrainConfig train;
  EdmConfig edm;
  SamplerConfig sampler;

  std::vector<TaskId> eval_tasks{TaskId::task1};
  int eval_samples = 100;
  /// Number of test cases to evaluate; 0 means the whole test split.
  int eval_cases = 0;
  float eval_prefix = 0.5f;
  int sample_batch = 25;
  bool use_ema = true;
  bool kalman = false;
  KfNoise kf;
  /// Test-case position whose samples are written to the trajectory CSV.
  int flag_case = 0;

  static ExperimentConfig from_json_text(const std::string& text);
  static ExperimentConfig load(const std::filesystem::path& path);
  /// Materialized configuration including every default.
  std::string to_json_text() const;
  void validate() const;

  std::filesystem::path data_path() const { return data_dir.value_or(out_dir / "data"); }
  std::filesystem::path ckpt_path() const { return ckpt_dir.value_or(out_dir / "ckpt"); }
  /// Effective per-task weights for the training mode.
  std::array<double, 5> effective_task_weights() const;
  DiffusionMode effective_diffusion() const;
};

/// Channel names and default group A of a system.
std::vector<std::string> system_channels(const std::string& system);
ChannelSplit system_split(const std::string& system, const std::vector<int>& group_a);
Grid system_grid(const std::string& system, int n_space, int n_time);

/// Simulates instance `index` of the configured system with its derived seed.
/// `params` receives the generator parameters actually used.
Field simulate_instance(const ExperimentConfig& config, int index, std::map<std::string, double>* params);

/// Mean absolute PDE residual of a denormalized field of the system.
double system_residual(const std::string& system, const Field& field);

struct RunOptions {
  int workers = 0;
  std::ostream* log = nullptr;
};

Dataset run_generate(const ExperimentConfig& config, const RunOptions& options);
Checkpoint run_train(const ExperimentConfig& config, const RunOptions& options);

/// Draws `count` samples for one normalized target field. Sample s of a case uses
/// noise seeded by derive_seed(seed, s) (Heun) or by its batch (RePaint), so the
/// result does not depend on the worker count. Returned samples are denormalized.
std::vector<Field> draw_samples(const Checkpoint& ckpt, const UNet<float>& net, const Field& target,
                                const TaskMask& mask, const SamplerConfig& sampler, int count, int batch,
                                std::uint64_t seed, int workers);

struct CaseResult {
  int index = 0;
  SampleReport report;
  double by_pde_mae = 0.0;
  double closest_mae = 0.0;
  std::optional<double> by_points_mae;
  double training_mean_mae = 0.0;
  std::optional<double> kf_mae;
  std::optional<double> kf_residual;
  double target_residual = 0.0;
};

struct TaskEvaluation {
  TaskId task = TaskId::task1;
  float prefix_fraction = 0.5f;
  bool cross_task = false;
  std::vector<CaseResult> cases;
};

struct EvaluationResult {
  std::vector<TaskEvaluation> tasks;
};

/// Samples and scores the test split; writes report.json and the CSVs into out_dir.
EvaluationResult run_evaluate(const ExperimentConfig& config, const RunOptions& options);
/// Writes per-case samples as raw float32 [S, C, T, X] files under out_dir/samples.
void run_sample(const ExperimentConfig& config, const RunOptions& options);
/// Reads report.json and writes summary.csv; returns the summary text.
std::string run_report(const ExperimentConfig& config, const RunOptions& options);

/// Seed streams used for derivation.
inline constexpr std::uint64_t kGenerateStream = 0x6E4E;
inline constexpr std::uint64_t kTrainSeedStream = 0x7A17;
inline constexpr std::uint64_t kSampleStream = 0x5A3B;

}  // namespace pdo
