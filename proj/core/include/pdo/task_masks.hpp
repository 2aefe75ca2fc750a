// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "pdo/rng.hpp"
#include "pdo/tensor.hpp"

namespace pdo {

/// The five conditioning patterns. Channels are split into group A and group B.
///   task1: A observed, B generated (forward problem)
///   task2: B observed, A generated (inverse problem)
///   task3: every channel observed on a time prefix, the future generated
///   task4: A observed on a time prefix, everything else generated
///   task5: B observed on a time prefix, everything else generated
enum class TaskId { task1 = 1, task2, task3, task4, task5 };

inline constexpr std::array<TaskId, 5> kAllTasks{TaskId::task1, TaskId::task2, TaskId::task3,
                                                 TaskId::task4, TaskId::task5};

std::string to_string(TaskId task);
/// Accepts "task1".."task5" or "1".."5".
TaskId parse_task(std::string_view text);
inline int task_index(TaskId t) { return static_cast<int>(t) - 1; }

/// Extent of one field: channels x time x space.
struct FieldShape {
  int channels = 0;
  int n_time = 0;
  int n_space = 0;

  std::size_t size() const noexcept {
    return static_cast<std::size_t>(channels) * n_time * n_space;
  }
  bool operator==(const FieldShape&) const = default;
};

/// Which channels form group A; the rest form group B.
/// The default puts the first ceil(C/2) channels into A.
struct ChannelSplit {
  std::vector<bool> group_a;

  static ChannelSplit first_half(int channels);
  static ChannelSplit from_indices(int channels, std::span<const int> group_a_indices);
  bool in_a(int c) const { return group_a.at(c); }
};

/// Binary observation mask congruent to one field (1 = observed, 0 = generate).
struct TaskMask {
  TaskId task = TaskId::task1;
  FieldShape shape;
  float prefix_fraction = 1.0f;
  std::vector<float> mask;

  std::size_t observed() const;
  std::size_t unobserved() const { return mask.size() - observed(); }
  /// True when nothing is observed (unconditional generation).
  bool all_zero() const { return observed() == 0; }
  bool all_one() const { return unobserved() == 0; }
};

/// Number of observed leading snapshots for a prefix fraction: round(f * n_time),
/// clamped to [1, n_time].
int prefix_length(float prefix_fraction, int n_time);

TaskMask mask_for_task(TaskId task, FieldShape shape, float prefix_fraction,
                       const std::optional<ChannelSplit>& split = std::nullopt);

/// Mask with every entry unobserved; used for unconditional training and RePaint.
TaskMask unconditional_mask(FieldShape shape);

/// Checks that `mask` equals the reconstruction from its task and prefix.
bool satisfies_structure(const TaskMask& mask, const std::optional<ChannelSplit>& split = std::nullopt);

struct TaskSamplingConfig {
  std::array<double, 5> weights{1.0, 1.0, 1.0, 1.0, 1.0};
  std::pair<double, double> prefix_range{0.25, 0.75};

  void validate() const;
};

/// Draws one task (per mini-batch) and its prefix fraction; tasks 1-2 get 1.
std::pair<TaskId, float> sample_task(Rng& rng, const TaskSamplingConfig& config);

/// Builds the model input of shape [n, k*C, T, X]: the state block
/// mask*clean + (1-mask)*noisy, the conditioning block mask*clean and, optionally,
/// the binary mask block.
Tensor assemble_input(const Tensor& clean, const Tensor& noisy, const TaskMask& mask,
                      bool include_mask_channels);

struct MaskedLoss {
  double value = 0.0;
  /// Set when the mask has no unobserved entries; value is then 0.
  bool degenerate = false;
};

/// Mean squared error over entries with mask = 0, averaged over the batch.
MaskedLoss masked_loss(const Tensor& prediction, const Tensor& target, const TaskMask& mask);

}  // namespace pdo
