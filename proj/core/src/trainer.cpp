// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "json.hpp"
#include "pdo/rng.hpp"

namespace pdo {

namespace {

constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kTrainStream = 0x7124;

std::string format_double(double v) {
  nlohmann::json j = v;
  return j.dump();
}

Tensor gather(const Tensor& data, std::span<const int> indices) {
  Tensor out(static_cast<int>(indices.size()), data.c(), data.h(), data.w());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    auto src = data.sample(indices[i]);
    std::copy(src.begin(), src.end(), out.sample(static_cast<int>(i)).begin());
  }
  return out;
}

Checkpoint snapshot(const TrainSetup& setup, const UNet<float>& net, const std::vector<std::vector<float>>& ema,
                    long iteration) {
  Checkpoint c;
  c.net_config = net.config();
  c.train_config = setup.train;
  c.mode = setup.mode;
  c.edm = setup.edm;
  c.task_weights = setup.tasks.weights;
  if (setup.split) {
    for (std::size_t k = 0; k < setup.split->group_a.size(); ++k) {
      if (setup.split->group_a[k]) c.group_a.push_back(static_cast<int>(k));
    }
  }
  c.iteration = iteration;
  c.stats = setup.stats;
  c.params = net.params();
  for (auto& p : c.params) std::fill(p.grad.begin(), p.grad.end(), 0.0f);
  c.ema = ema;
  return c;
}

}  // namespace

std::string to_json_line(const TelemetryRecord& r) {
  std::string line = "{\"iteration\":" + std::to_string(r.iteration);
  line += ",\"task\":";
  line += r.has_task ? "\"" + to_string(r.task) + "\"" : std::string("null");
  line += ",\"prefix_fraction\":" + format_double(r.prefix_fraction);
  line += ",\"loss\":" + format_double(r.loss);
  line += ",\"grad_norm\":" + format_double(r.grad_norm) + "}";
  return line;
}

double ema_decay_at(double decay, long iteration) {
  return std::min(decay, (1.0 + static_cast<double>(iteration)) / (10.0 + static_cast<double>(iteration)));
}

Checkpoint train(const Tensor& data, const TrainSetup& setup, const TelemetrySink& sink) {
  setup.train.validate();
  setup.edm.validate();
  setup.tasks.validate();
  if (data.n() < 1) throw ConfigError("training set is empty");

  NetConfig net_config = setup.net;
  net_config.channels = data.c();
  const bool conditional = setup.mode != DiffusionMode::unconditional;
  InputLayout layout;
  layout.conditional = conditional;
  layout.include_mask_channels = true;
  net_config.input_blocks = layout.blocks();
  net_config.check_spatial(data.h(), data.w());

  const FieldShape shape{data.c(), data.h(), data.w()};
  const DdpmSchedule schedule = DdpmSchedule::linear();
  UNet<float> net(net_config, derive_seed(setup.seed, kInitStream));
  std::vector<std::vector<float>> ema;
  for (const auto& p : net.params()) ema.push_back(p.value);
  std::vector<std::vector<float>> m1, m2;
  for (const auto& p : net.params()) {
    m1.emplace_back(p.value.size(), 0.0f);
    m2.emplace_back(p.value.size(), 0.0f);
  }

  Rng rng(derive_seed(setup.seed, kTrainStream));
  const TrainConfig& tc = setup.train;
  std::vector<int> indices(tc.batch_size);
  UNetCache<float> cache;

  for (long it = 0; it < tc.iterations; ++it) {
    TelemetryRecord rec;
    rec.iteration = it;
    TaskMask mask;
    if (conditional) {
      const auto [task, prefix] = sample_task(rng, setup.tasks);
      mask = mask_for_task(task, shape, prefix, setup.split);
      rec.task = task;
      rec.prefix_fraction = mask.prefix_fraction;
    } else {
      mask = unconditional_mask(shape);
      rec.has_task = false;
    }
    for (int& i : indices) i = static_cast<int>(rng.uniform_index(static_cast<std::uint64_t>(data.n())));
    const Tensor clean = gather(data, indices);

    const DenoisingProblem problem = setup.mode == DiffusionMode::edm
                                         ? edm_training_problem(clean, mask, setup.edm, layout, rng)
                                         : ddpm_training_problem(clean, mask, schedule, layout, rng);
    const Tensor out = net.forward(problem.input, problem.noise_cond, cache);
    const LossAndGrad lg = evaluate_problem(problem, out);
    rec.loss = lg.loss;
    if (!std::isfinite(lg.loss)) {
      throw TrainingAborted(it, std::make_shared<const Checkpoint>(snapshot(setup, net, ema, it)));
    }
    if (lg.degenerate) {
      if (sink) sink(rec);
      continue;
    }

    net.zero_grad();
    net.backward(cache, lg.grad);
    double sq = 0.0;
    for (const auto& p : net.params())
      for (float g : p.grad) sq += static_cast<double>(g) * g;
    const double norm = std::sqrt(sq);
    rec.grad_norm = norm;
    if (!std::isfinite(norm)) {
      throw TrainingAborted(it, std::make_shared<const Checkpoint>(snapshot(setup, net, ema, it)));
    }
    const double clip = norm > tc.grad_clip ? tc.grad_clip / norm : 1.0;

    const double step = static_cast<double>(it + 1);
    double lr = tc.learning_rate;
    if (tc.warmup > 0) lr *= std::min(1.0, step / static_cast<double>(tc.warmup));
    const double bc1 = 1.0 - std::pow(tc.beta1, step);
    const double bc2 = 1.0 - std::pow(tc.beta2, step);
    const double decay = ema_decay_at(tc.ema_decay, it);
    auto& params = net.params();
    for (std::size_t p = 0; p < params.size(); ++p) {
      auto& v = params[p].value;
      const auto& g = params[p].grad;
      for (std::size_t k = 0; k < v.size(); ++k) {
        const double gk = g[k] * clip;
        m1[p][k] = static_cast<float>(tc.beta1 * m1[p][k] + (1.0 - tc.beta1) * gk);
        m2[p][k] = static_cast<float>(tc.beta2 * m2[p][k] + (1.0 - tc.beta2) * gk * gk);
        const double mhat = m1[p][k] / bc1;
        const double vhat = m2[p][k] / bc2;
        v[k] = static_cast<float>(v[k] - lr * mhat / (std::sqrt(vhat) + tc.adam_epsilon));
        ema[p][k] = static_cast<float>(decay * ema[p][k] + (1.0 - decay) * v[k]);
      }
    }
    if (sink) sink(rec);
  }
  return snapshot(setup, net, ema, tc.iterations);
}

}  // namespace pdo
