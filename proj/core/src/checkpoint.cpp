// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/checkpoint.hpp"

#include "json_io.hpp"
#include "pdo/dataset_io.hpp"
#include "pdo/error.hpp"

namespace pdo {

using detail::json;

std::string to_string(DiffusionMode mode) {
  switch (mode) {
    case DiffusionMode::ddpm:
      return "ddpm";
    case DiffusionMode::edm:
      return "edm";
    case DiffusionMode::unconditional:
      return "unconditional";
  }
  return "edm";
}

DiffusionMode parse_diffusion_mode(std::string_view text) {
  if (text == "ddpm") return DiffusionMode::ddpm;
  if (text == "edm") return DiffusionMode::edm;
  if (text == "unconditional") return DiffusionMode::unconditional;
  throw ConfigError("unknown diffusion mode '" + std::string(text) + "'");
}

void TrainConfig::validate() const {
  if (batch_size < 1) throw ConfigError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ConfigError("Adam moment decays must lie in (0, 1)");
  }
  if (!(adam_epsilon > 0.0)) throw ConfigError("adam_epsilon must be positive");
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (!(ema_decay > 0.0 && ema_decay < 1.0)) throw ConfigError("ema_decay must lie in (0, 1)");
  if (!(grad_clip > 0.0)) throw ConfigError("grad_clip must be positive");
  if (log_every < 1) throw ConfigError("log_every must be positive");
  if (warmup < 0) throw ConfigError("warmup must be non-negative");
}

InputLayout Checkpoint::layout() const {
  InputLayout l;
  l.conditional = mode != DiffusionMode::unconditional;
  l.include_mask_channels = net_config.input_blocks == 3;
  return l;
}

UNet<float> load_network(const Checkpoint& ckpt, bool use_ema) {
  UNet<float> net;
  net.init_layout(ckpt.net_config);
  auto& params = net.params();
  if (params.size() != ckpt.params.size()) {
    throw ValidationError("checkpoint holds " + std::to_string(ckpt.params.size()) +
                          " tensors, network expects " + std::to_string(params.size()));
  }
  for (std::size_t p = 0; p < params.size(); ++p) {
    const auto& src = use_ema && !ckpt.ema.empty() ? ckpt.ema.at(p) : ckpt.params[p].value;
    if (params[p].name != ckpt.params[p].name || src.size() != params[p].value.size()) {
      throw ValidationError("tensor '" + ckpt.params[p].name + "' does not match the network layout");
    }
    params[p].value = src;
  }
  return net;
}

namespace {

json train_config_to_json(const TrainConfig& t) {
  return json{{"batch_size", t.batch_size},   {"learning_rate", t.learning_rate}, {"beta1", t.beta1},
              {"beta2", t.beta2},             {"adam_epsilon", t.adam_epsilon},   {"iterations", t.iterations},
              {"ema_decay", t.ema_decay},     {"grad_clip", t.grad_clip},         {"log_every", t.log_every},
              {"warmup", t.warmup}};
}

TrainConfig train_config_from_json(const json& j) {
  const std::string ctx = "train config";
  TrainConfig t;
  t.batch_size = detail::require_as<int>(j, "batch_size", ctx);
  t.learning_rate = detail::require_as<double>(j, "learning_rate", ctx);
  t.beta1 = detail::require_as<double>(j, "beta1", ctx);
  t.beta2 = detail::require_as<double>(j, "beta2", ctx);
  t.adam_epsilon = detail::require_as<double>(j, "adam_epsilon", ctx);
  t.iterations = detail::require_as<long>(j, "iterations", ctx);
  t.ema_decay = detail::require_as<double>(j, "ema_decay", ctx);
  t.grad_clip = detail::require_as<double>(j, "grad_clip", ctx);
  t.log_every = detail::require_as<int>(j, "log_every", ctx);
  t.warmup = detail::value_or<long>(j, "warmup", 0);
  return t;
}

json net_config_to_json(const NetConfig& n) {
  return json{{"channels", n.channels},     {"input_blocks", n.input_blocks}, {"base_width", n.base_width},
              {"depth", n.depth},           {"embedding_dim", n.embedding_dim}};
}

NetConfig net_config_from_json(const json& j) {
  const std::string ctx = "network config";
  NetConfig n;
  n.channels = detail::require_as<int>(j, "channels", ctx);
  n.input_blocks = detail::require_as<int>(j, "input_blocks", ctx);
  n.base_width = detail::require_as<int>(j, "base_width", ctx);
  n.depth = detail::require_as<int>(j, "depth", ctx);
  n.embedding_dim = detail::require_as<int>(j, "embedding_dim", ctx);
  n.validate();
  return n;
}

json edm_to_json(const EdmConfig& e) {
  return json{{"sigma_min", e.sigma_min},   {"sigma_max", e.sigma_max}, {"rho", e.rho},
              {"sigma_data", e.sigma_data}, {"p_mean", e.p_mean},       {"p_std", e.p_std}};
}

EdmConfig edm_from_json(const json& j) {
  const std::string ctx = "edm config";
  EdmConfig e;
  e.sigma_min = detail::require_as<double>(j, "sigma_min", ctx);
  e.sigma_max = detail::require_as<double>(j, "sigma_max", ctx);
  e.rho = detail::require_as<double>(j, "rho", ctx);
  e.sigma_data = detail::require_as<double>(j, "sigma_data", ctx);
  e.p_mean = detail::require_as<double>(j, "p_mean", ctx);
  e.p_std = detail::require_as<double>(j, "p_std", ctx);
  return e;
}

std::size_t element_count(const std::vector<int>& shape) {
  std::size_t n = 1;
  for (int d : shape) n *= static_cast<std::size_t>(d);
  return n;
}

std::vector<float> read_tensor(const std::filesystem::path& path, const std::string& name, std::size_t count) {
  try {
    return read_f32_file(path, count);
  } catch (const CorruptionError& e) {
    throw CorruptionError("tensor '" + name + "' has the wrong shape: " + e.what());
  } catch (const IoError& e) {
    throw IoError("tensor '" + name + "': " + e.what());
  }
}

}  // namespace

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "params", ec);
  fs::create_directories(dir / "ema", ec);
  if (ec) throw IoError("cannot create checkpoint directory " + dir.string() + ": " + ec.message());
  if (!ckpt.ema.empty() && ckpt.ema.size() != ckpt.params.size()) {
    throw ValidationError("EMA tensor count differs from parameter count");
  }

  json tensors = json::array();
  for (std::size_t p = 0; p < ckpt.params.size(); ++p) {
    const auto& param = ckpt.params[p];
    if (param.value.size() != element_count(param.shape)) {
      throw ValidationError("tensor '" + param.name + "' disagrees with its shape");
    }
    write_f32_file(dir / "params" / (param.name + ".f32"), param.value);
    if (!ckpt.ema.empty()) write_f32_file(dir / "ema" / (param.name + ".f32"), ckpt.ema[p]);
    tensors.push_back(json{{"name", param.name}, {"shape", param.shape}});
  }

  json j;
  j["format_version"] = Checkpoint::kFormatVersion;
  j["net"] = net_config_to_json(ckpt.net_config);
  j["train"] = train_config_to_json(ckpt.train_config);
  j["mode"] = to_string(ckpt.mode);
  j["edm"] = edm_to_json(ckpt.edm);
  j["ddpm"] = json{{"steps", ckpt.ddpm_steps}, {"beta_start", ckpt.ddpm_beta_start},
                   {"beta_end", ckpt.ddpm_beta_end}};
  j["task_weights"] = ckpt.task_weights;
  j["group_a"] = ckpt.group_a;
  j["iteration"] = ckpt.iteration;
  j["stats"] = detail::stats_to_json(ckpt.stats);
  j["has_ema"] = !ckpt.ema.empty();
  j["tensors"] = tensors;
  write_text_file(dir / "checkpoint.json", j.dump(2) + "\n");
}

Checkpoint load_checkpoint(const std::filesystem::path& dir) {
  const auto manifest = dir / "checkpoint.json";
  if (!std::filesystem::exists(manifest)) throw IoError("missing checkpoint manifest " + manifest.string());
  const std::string ctx = "checkpoint " + dir.string();
  const json j = detail::parse_json_text(read_text_file(manifest), ctx);
  const int version = detail::require_as<int>(j, "format_version", ctx);
  if (version != Checkpoint::kFormatVersion) {
    throw ValidationError(ctx + ": format version " + std::to_string(version) + " is not supported (expected " +
                          std::to_string(Checkpoint::kFormatVersion) + ")");
  }
  Checkpoint ckpt;
  ckpt.net_config = net_config_from_json(detail::require(j, "net", ctx));
  ckpt.train_config = train_config_from_json(detail::require(j, "train", ctx));
  ckpt.mode = parse_diffusion_mode(detail::require_as<std::string>(j, "mode", ctx));
  ckpt.edm = edm_from_json(detail::require(j, "edm", ctx));
  const json& dd = detail::require(j, "ddpm", ctx);
  ckpt.ddpm_steps = detail::require_as<int>(dd, "steps", ctx);
  ckpt.ddpm_beta_start = detail::require_as<double>(dd, "beta_start", ctx);
  ckpt.ddpm_beta_end = detail::require_as<double>(dd, "beta_end", ctx);
  ckpt.task_weights = detail::require_as<std::array<double, 5>>(j, "task_weights", ctx);
  ckpt.group_a = detail::require_as<std::vector<int>>(j, "group_a", ctx);
  ckpt.iteration = detail::require_as<long>(j, "iteration", ctx);
  ckpt.stats = detail::stats_from_json(detail::require(j, "stats", ctx), ctx);
  const bool has_ema = detail::require_as<bool>(j, "has_ema", ctx);

  // The layout defines the expected names and shapes; the manifest must agree.
  UNet<float> reference;
  reference.init_layout(ckpt.net_config);
  const json& tensors = detail::require(j, "tensors", ctx);
  if (!tensors.is_array() || tensors.size() != reference.params().size()) {
    throw ValidationError(ctx + ": tensor list does not match the network layout");
  }
  for (std::size_t p = 0; p < tensors.size(); ++p) {
    auto expected = reference.params()[p];
    const auto name = detail::require_as<std::string>(tensors[p], "name", ctx);
    const auto shape = detail::require_as<std::vector<int>>(tensors[p], "shape", ctx);
    if (name != expected.name || shape != expected.shape) {
      throw CorruptionError(ctx + ": tensor '" + name + "' has an unexpected name or shape");
    }
    const std::size_t count = element_count(shape);
    expected.value = read_tensor(dir / "params" / (name + ".f32"), name, count);
    std::fill(expected.grad.begin(), expected.grad.end(), 0.0f);
    ckpt.params.push_back(std::move(expected));
    if (has_ema) ckpt.ema.push_back(read_tensor(dir / "ema" / (name + ".f32"), name, count));
  }
  return ckpt;
}

}  // namespace pdo
