// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/task_masks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pdo/error.hpp"

namespace pdo {

std::string to_string(TaskId task) { return "task" + std::to_string(static_cast<int>(task)); }

TaskId parse_task(std::string_view text) {
  std::string_view digits = text;
  if (digits.starts_with("task")) digits.remove_prefix(4);
  if (digits.size() == 1 && digits[0] >= '1' && digits[0] <= '5') {
    return static_cast<TaskId>(digits[0] - '0');
  }
  throw ConfigError("unknown task '" + std::string(text) + "'");
}

ChannelSplit ChannelSplit::first_half(int channels) {
  ChannelSplit s;
  s.group_a.assign(channels, false);
  for (int c = 0; c < (channels + 1) / 2; ++c) s.group_a[c] = true;
  return s;
}

ChannelSplit ChannelSplit::from_indices(int channels, std::span<const int> group_a_indices) {
  ChannelSplit s;
  s.group_a.assign(channels, false);
  for (int c : group_a_indices) {
    if (c < 0 || c >= channels) throw ConfigError("channel split index out of range");
    s.group_a[c] = true;
  }
  return s;
}

std::size_t TaskMask::observed() const {
  return static_cast<std::size_t>(std::count(mask.begin(), mask.end(), 1.0f));
}

int prefix_length(float prefix_fraction, int n_time) {
  const long n = std::lround(static_cast<double>(prefix_fraction) * n_time);
  return static_cast<int>(std::clamp<long>(n, 1, n_time));
}

TaskMask mask_for_task(TaskId task, FieldShape shape, float prefix_fraction,
                       const std::optional<ChannelSplit>& split) {
  if (shape.channels < 1 || shape.n_time < 1 || shape.n_space < 1) {
    throw ConfigError("mask shape must be non-empty");
  }
  if (!(prefix_fraction > 0.0f && prefix_fraction <= 1.0f)) {
    throw ConfigError("prefix fraction must lie in (0, 1]");
  }
  const ChannelSplit groups = split.value_or(ChannelSplit::first_half(shape.channels));
  if (static_cast<int>(groups.group_a.size()) != shape.channels) {
    throw ConfigError("channel split does not match the channel count");
  }
  const bool needs_split = task != TaskId::task3;
  const int n_a = static_cast<int>(std::count(groups.group_a.begin(), groups.group_a.end(), true));
  if (needs_split && (n_a == 0 || n_a == shape.channels)) {
    throw ConfigError(to_string(task) + " needs channels in both groups; got " +
                      std::to_string(shape.channels) + " channel(s)");
  }

  TaskMask m;
  m.task = task;
  m.shape = shape;
  m.prefix_fraction = (task == TaskId::task1 || task == TaskId::task2) ? 1.0f : prefix_fraction;
  m.mask.assign(shape.size(), 0.0f);
  const int prefix = prefix_length(m.prefix_fraction, shape.n_time);
  const std::size_t plane = static_cast<std::size_t>(shape.n_time) * shape.n_space;

  for (int c = 0; c < shape.channels; ++c) {
    const bool a = groups.in_a(c);
    int observed_steps = 0;
    switch (task) {
      case TaskId::task1: observed_steps = a ? shape.n_time : 0; break;
      case TaskId::task2: observed_steps = a ? 0 : shape.n_time; break;
      case TaskId::task3: observed_steps = prefix; break;
      case TaskId::task4: observed_steps = a ? prefix : 0; break;
      case TaskId::task5: observed_steps = a ? 0 : prefix; break;
    }
    auto begin = m.mask.begin() + static_cast<std::ptrdiff_t>(c * plane);
    std::fill(begin, begin + static_cast<std::ptrdiff_t>(observed_steps) * shape.n_space, 1.0f);
  }
  return m;
}

TaskMask unconditional_mask(FieldShape shape) {
  TaskMask m;
  m.task = TaskId::task1;
  m.shape = shape;
  m.prefix_fraction = 1.0f;
  m.mask.assign(shape.size(), 0.0f);
  return m;
}

bool satisfies_structure(const TaskMask& mask, const std::optional<ChannelSplit>& split) {
  const TaskMask rebuilt = mask_for_task(mask.task, mask.shape, mask.prefix_fraction, split);
  return rebuilt.mask == mask.mask && mask.unobserved() > 0;
}

void TaskSamplingConfig::validate() const {
  double total = 0.0;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("task weights must be nonnegative");
    total += w;
  }
  if (!(total > 0.0)) throw ConfigError("task weights must not all be zero");
  const auto [lo, hi] = prefix_range;
  if (!(lo > 0.0 && lo <= hi && hi <= 1.0)) throw ConfigError("prefix range must satisfy 0 < lo <= hi <= 1");
}

std::pair<TaskId, float> sample_task(Rng& rng, const TaskSamplingConfig& config) {
  config.validate();
  const double total = std::accumulate(config.weights.begin(), config.weights.end(), 0.0);
  const double u = rng.uniform() * total;
  double acc = 0.0;
  int pick = 4;
  for (int k = 0; k < 5; ++k) {
    acc += config.weights[k];
    if (u < acc && config.weights[k] > 0.0) {
      pick = k;
      break;
    }
  }
  // Rounding can leave u == total; fall back to the last task with weight.
  while (config.weights[pick] == 0.0) --pick;
  const TaskId task = kAllTasks[pick];
  float prefix = 1.0f;
  if (task == TaskId::task3 || task == TaskId::task4 || task == TaskId::task5) {
    prefix = static_cast<float>(rng.uniform(config.prefix_range.first, config.prefix_range.second));
  }
  return {task, prefix};
}

namespace {

void check_congruent(const Tensor& t, const TaskMask& mask, const char* what) {
  if (t.c() != mask.shape.channels || t.h() != mask.shape.n_time || t.w() != mask.shape.n_space) {
    throw ConfigError(std::string(what) + " is not congruent with the task mask");
  }
}

}  // namespace

Tensor assemble_input(const Tensor& clean, const Tensor& noisy, const TaskMask& mask,
                      bool include_mask_channels) {
  if (!clean.same_shape(noisy)) throw ConfigError("clean and noisy batches differ in shape");
  check_congruent(clean, mask, "clean batch");
  const int blocks = include_mask_channels ? 3 : 2;
  const int nc = clean.c();
  Tensor out(clean.n(), blocks * nc, clean.h(), clean.w());
  const std::size_t per = clean.sample_size();
  for (int i = 0; i < clean.n(); ++i) {
    auto c = clean.sample(i);
    auto z = noisy.sample(i);
    auto o = out.sample(i);
    for (std::size_t k = 0; k < per; ++k) {
      const bool obs = mask.mask[k] != 0.0f;
      o[k] = obs ? c[k] : z[k];
      o[per + k] = obs ? c[k] : 0.0f;
      if (include_mask_channels) o[2 * per + k] = mask.mask[k];
    }
  }
  return out;
}

MaskedLoss masked_loss(const Tensor& prediction, const Tensor& target, const TaskMask& mask) {
  if (!prediction.same_shape(target)) throw ConfigError("prediction and target differ in shape");
  check_congruent(prediction, mask, "prediction");
  const std::size_t per = prediction.sample_size();
  const std::size_t free = mask.unobserved();
  if (free == 0) return {0.0, true};
  double sum = 0.0;
  for (int i = 0; i < prediction.n(); ++i) {
    auto p = prediction.sample(i);
    auto t = target.sample(i);
    for (std::size_t k = 0; k < per; ++k) {
      if (mask.mask[k] == 0.0f) {
        const double d = static_cast<double>(p[k]) - t[k];
        sum += d * d;
      }
    }
  }
  return {sum / (static_cast<double>(free) * prediction.n()), false};
}

}  // namespace pdo
