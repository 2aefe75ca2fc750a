// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "pdo/checkpoint.hpp"
#include "pdo/error.hpp"
#include "pdo/task_masks.hpp"

namespace pdo {

struct TrainSetup {
  NetConfig net;
  TrainConfig train;
  DiffusionMode mode = DiffusionMode::edm;
  EdmConfig edm;
  TaskSamplingConfig tasks;
  std::optional<ChannelSplit> split;
  NormStats stats;
  std::uint64_t seed = 0;
};

struct TelemetryRecord {
  long iteration = 0;
  TaskId task = TaskId::task1;
  /// False for unconditional training, where no task applies.
  bool has_task = true;
  float prefix_fraction = 1.0f;
  double loss = 0.0;
  double grad_norm = 0.0;
};

std::string to_json_line(const TelemetryRecord& record);

/// Called for every iteration; `log_every` only throttles what callers persist.
using TelemetrySink = std::function<void(const TelemetryRecord&)>;

/// Raised when the loss turns non-finite; carries the last finite state.
class TrainingAborted : public NumericalError {
 public:
  TrainingAborted(long iteration, std::shared_ptr<const Checkpoint> last_good)
      : NumericalError("non-finite loss at iteration " + std::to_string(iteration)),
        iteration_(iteration),
        last_good_(std::move(last_good)) {}
  long iteration() const noexcept { return iteration_; }
  const Checkpoint& last_good() const noexcept { return *last_good_; }

 private:
  long iteration_;
  std::shared_ptr<const Checkpoint> last_good_;
};

/// Runs the training loop on a normalized batch [N, C, T, X] and returns the final
/// checkpoint. Each iteration draws a task, a mini-batch, noise levels and noise,
/// then takes one Adam step and updates the EMA weights.
Checkpoint train(const Tensor& data, const TrainSetup& setup, const TelemetrySink& sink = {});

/// EMA decay used at step `iteration` (zero-based): min(decay, (1 + i) / (10 + i)).
double ema_decay_at(double decay, long iteration);

}  // namespace pdo
