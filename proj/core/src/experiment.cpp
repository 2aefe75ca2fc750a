// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

#include "pdo/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json_io.hpp"
#include "pdo/error.hpp"
#include "pdo/parallel.hpp"
#include "pdo/residuals.hpp"
#include "pdo/simulators.hpp"
#include "pdo/trainer.hpp"

namespace pdo {

using detail::json;

namespace {

constexpr int kReportSchemaVersion = 1;
constexpr std::uint64_t kRepaintStream = 0x8E9A;

const std::vector<std::string>& known_systems() {
  static const std::vector<std::string> s{"swe_orig", "swe_init", "darcy", "reactor"};
  return s;
}

bool is_swe(const std::string& system) { return system == "swe_orig" || system == "swe_init"; }

std::string sampler_mode_name(SamplerMode m) { return m == SamplerMode::repaint ? "repaint" : "heun"; }

SamplerMode parse_sampler_mode(const std::string& s) {
  if (s == "heun") return SamplerMode::heun_conditional;
  if (s == "repaint") return SamplerMode::repaint;
  throw ConfigError("unknown sampler mode '" + s + "'");
}

double override_or(const std::map<std::string, double>& o, const char* key, double fallback) {
  auto it = o.find(key);
  return it == o.end() ? fallback : it->second;
}

void check_override_keys(const std::string& system, const std::map<std::string, double>& o) {
  std::vector<std::string> allowed;
  if (system == "swe_init") allowed = {"h_in", "epsilon", "x0", "sigma", "hu0"};
  if (system == "reactor") allowed = {"inlet_x_a", "inlet_x_p", "inlet_T", "theta0"};
  if (system == "darcy") allowed = {"a_low", "a_high", "forcing"};
  for (const auto& [k, v] : o) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("override '" + k + "' is not supported for system " + system);
    }
  }
}

ReactorConfig reactor_with_overrides(ReactorConfig c, const std::map<std::string, double>& o) {
  c.inlet_x_a = override_or(o, "inlet_x_a", c.inlet_x_a);
  c.inlet_x_p = override_or(o, "inlet_x_p", c.inlet_x_p);
  c.inlet_T = override_or(o, "inlet_T", c.inlet_T);
  c.theta0 = override_or(o, "theta0", c.theta0);
  return c;
}

SweInitParams swe_init_with_overrides(SweInitParams p, const std::map<std::string, double>& o) {
  p.h_in = override_or(o, "h_in", p.h_in);
  p.epsilon = override_or(o, "epsilon", p.epsilon);
  p.x0 = override_or(o, "x0", p.x0);
  p.sigma = override_or(o, "sigma", p.sigma);
  p.hu0 = override_or(o, "hu0", p.hu0);
  return p;
}

DarcyConfig darcy_with_overrides(const std::map<std::string, double>& o) {
  DarcyConfig c;
  c.a_low = override_or(o, "a_low", c.a_low);
  c.a_high = override_or(o, "a_high", c.a_high);
  c.forcing = override_or(o, "forcing", c.forcing);
  return c;
}

Field combine(const Field& a, const Field& b) {
  std::vector<std::string> ch = a.channels();
  ch.insert(ch.end(), b.channels().begin(), b.channels().end());
  std::vector<float> data(a.data().begin(), a.data().end());
  data.insert(data.end(), b.data().begin(), b.data().end());
  return Field(a.grid(), std::move(ch), std::move(data));
}

std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot open " + p.string() + " for writing");
  return f;
}

std::string num(double v) { return json(v).dump(); }

void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

void log_line(const RunOptions& o, const std::string& s) {
  if (o.log) *o.log << s << '\n';
}

void write_materialized_config(const ExperimentConfig& config) {
  ensure_dir(config.out_dir);
  write_text_file(config.out_dir / "config.json", config.to_json_text());
}

ChannelSplit checkpoint_split(const Checkpoint& ckpt) {
  const int c = static_cast<int>(ckpt.stats.channels.size());
  if (ckpt.group_a.empty()) return ChannelSplit::first_half(c);
  return ChannelSplit::from_indices(c, ckpt.group_a);
}

}  // namespace

// ---------------------------------------------------------------------------
// Configuration

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  const json j = detail::parse_json_text(text, "experiment config");
  ExperimentConfig c;
  const std::string ctx = "experiment config";
  c.system = detail::require_as<std::string>(j, "system", ctx);
  if (!j.contains("seed")) throw ConfigError("experiment config: 'seed' is required");
  c.seed = detail::require_as<std::uint64_t>(j, "seed", ctx);
  c.out_dir = detail::value_or<std::string>(j, "out_dir", c.out_dir.string());
  if (j.contains("data_dir") && !j["data_dir"].is_null()) c.data_dir = j["data_dir"].get<std::string>();
  if (j.contains("ckpt_dir") && !j["ckpt_dir"].is_null()) c.ckpt_dir = j["ckpt_dir"].get<std::string>();
  c.overrides = detail::value_or<std::map<std::string, double>>(j, "overrides", {});
  c.group_a = detail::value_or<std::vector<int>>(j, "group_a", {});

  if (j.contains("grid")) {
    const json& g = j["grid"];
    c.n_space = detail::value_or<int>(g, "n_space", c.n_space);
    c.n_time = detail::value_or<int>(g, "n_time", c.n_time);
  }
  if (j.contains("dataset")) {
    const json& d = j["dataset"];
    c.n_train = detail::value_or<int>(d, "train", c.n_train);
    c.n_val = detail::value_or<int>(d, "val", c.n_val);
    c.n_test = detail::value_or<int>(d, "test", c.n_test);
  }
  if (j.contains("train")) {
    const json& t = j["train"];
    c.train_mode = detail::value_or<std::string>(t, "mode", c.train_mode);
    c.diffusion = parse_diffusion_mode(detail::value_or<std::string>(t, "diffusion", to_string(c.diffusion)));
    c.task_weights = detail::value_or<std::array<double, 5>>(t, "task_weights", c.task_weights);
    c.prefix_range = detail::value_or<std::pair<double, double>>(t, "prefix_range", c.prefix_range);
    TrainConfig& tc = c.train;
    tc.batch_size = detail::value_or<int>(t, "batch_size", tc.batch_size);
    tc.learning_rate = detail::value_or<double>(t, "learning_rate", tc.learning_rate);
    tc.beta1 = detail::value_or<double>(t, "beta1", tc.beta1);
    tc.beta2 = detail::value_or<double>(t, "beta2", tc.beta2);
    tc.adam_epsilon = detail::value_or<double>(t, "adam_epsilon", tc.adam_epsilon);
    tc.iterations = detail::value_or<long>(t, "iterations", tc.iterations);
    tc.ema_decay = detail::value_or<double>(t, "ema_decay", tc.ema_decay);
    tc.grad_clip = detail::value_or<double>(t, "grad_clip", tc.grad_clip);
    tc.log_every = detail::value_or<int>(t, "log_every", tc.log_every);
    tc.warmup = detail::value_or<long>(t, "warmup", tc.warmup);
  }
  if (j.contains("net")) {
    const json& n = j["net"];
    c.net.base_width = detail::value_or<int>(n, "base_width", c.net.base_width);
    c.net.depth = detail::value_or<int>(n, "depth", c.net.depth);
    c.net.embedding_dim = detail::value_or<int>(n, "embedding_dim", c.net.embedding_dim);
  }
  if (j.contains("edm")) {
    const json& e = j["edm"];
    c.edm.sigma_min = detail::value_or<double>(e, "sigma_min", c.edm.sigma_min);
    c.edm.sigma_max = detail::value_or<double>(e, "sigma_max", c.edm.sigma_max);
    c.edm.rho = detail::value_or<double>(e, "rho", c.edm.rho);
    c.edm.sigma_data = detail::value_or<double>(e, "sigma_data", c.edm.sigma_data);
    c.edm.p_mean = detail::value_or<double>(e, "p_mean", c.edm.p_mean);
    c.edm.p_std = detail::value_or<double>(e, "p_std", c.edm.p_std);
  }
  if (j.contains("sampler")) {
    const json& s = j["sampler"];
    c.sampler.mode = parse_sampler_mode(detail::value_or<std::string>(s, "mode", "heun"));
    c.sampler.n_steps = detail::value_or<int>(s, "n_steps", c.sampler.n_steps);
    c.sampler.repaint_steps = detail::value_or<int>(s, "repaint_steps", c.sampler.repaint_steps);
    c.sampler.jump_length = detail::value_or<int>(s, "jump_length", c.sampler.jump_length);
    c.sampler.resample_count = detail::value_or<int>(s, "resample_count", c.sampler.resample_count);
  }
  if (j.contains("evaluate")) {
    const json& e = j["evaluate"];
    if (e.contains("tasks")) {
      c.eval_tasks.clear();
      for (const auto& t : e["tasks"]) c.eval_tasks.push_back(parse_task(t.get<std::string>()));
    }
    c.eval_samples = detail::value_or<int>(e, "samples", c.eval_samples);
    c.eval_cases = detail::value_or<int>(e, "cases", c.eval_cases);
    c.eval_prefix = detail::value_or<float>(e, "prefix_fraction", c.eval_prefix);
    c.sample_batch = detail::value_or<int>(e, "batch", c.sample_batch);
    c.use_ema = detail::value_or<bool>(e, "use_ema", c.use_ema);
    c.kalman = detail::value_or<bool>(e, "kalman", c.kalman);
    c.flag_case = detail::value_or<int>(e, "flag_case", c.flag_case);
    if (e.contains("kf")) {
      c.kf.q = detail::value_or<double>(e["kf"], "q", c.kf.q);
      c.kf.r = detail::value_or<double>(e["kf"], "r", c.kf.r);
      c.kf.p0 = detail::value_or<double>(e["kf"], "p0", c.kf.p0);
    }
  }
  c.validate();
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) throw ConfigError("config file " + path.string() + " does not exist");
  return from_json_text(read_text_file(path));
}

std::string ExperimentConfig::to_json_text() const {
  json j;
  j["system"] = system;
  j["seed"] = seed;
  j["out_dir"] = out_dir.string();
  j["data_dir"] = data_path().string();
  j["ckpt_dir"] = ckpt_path().string();
  j["overrides"] = overrides;
  j["group_a"] = group_a;
  j["grid"] = json{{"n_space", n_space}, {"n_time", n_time}};
  j["dataset"] = json{{"train", n_train}, {"val", n_val}, {"test", n_test}};
  j["train"] = json{{"mode", train_mode},
                    {"diffusion", to_string(diffusion)},
                    {"task_weights", task_weights},
                    {"prefix_range", prefix_range},
                    {"batch_size", train.batch_size},
                    {"learning_rate", train.learning_rate},
                    {"beta1", train.beta1},
                    {"beta2", train.beta2},
                    {"adam_epsilon", train.adam_epsilon},
                    {"iterations", train.iterations},
                    {"ema_decay", train.ema_decay},
                    {"grad_clip", train.grad_clip},
                    {"log_every", train.log_every},
                    {"warmup", train.warmup}};
  j["net"] = json{{"base_width", net.base_width}, {"depth", net.depth}, {"embedding_dim", net.embedding_dim}};
  j["edm"] = json{{"sigma_min", edm.sigma_min},   {"sigma_max", edm.sigma_max}, {"rho", edm.rho},
                  {"sigma_data", edm.sigma_data}, {"p_mean", edm.p_mean},       {"p_std", edm.p_std}};
  j["sampler"] = json{{"mode", sampler_mode_name(sampler.mode)},
                      {"n_steps", sampler.n_steps},
                      {"repaint_steps", sampler.repaint_steps},
                      {"jump_length", sampler.jump_length},
                      {"resample_count", sampler.resample_count}};
  json tasks = json::array();
  for (TaskId t : eval_tasks) tasks.push_back(to_string(t));
  j["evaluate"] = json{{"tasks", tasks},
                       {"samples", eval_samples},
                       {"cases", eval_cases},
                       {"prefix_fraction", eval_prefix},
                       {"batch", sample_batch},
                       {"use_ema", use_ema},
                       {"kalman", kalman},
                       {"flag_case", flag_case},
                       {"kf", json{{"q", kf.q}, {"r", kf.r}, {"p0", kf.p0}}}};
  return j.dump(2) + "\n";
}

void ExperimentConfig::validate() const {
  if (std::find(known_systems().begin(), known_systems().end(), system) == known_systems().end()) {
    throw ConfigError("unknown system '" + system + "'");
  }
  if (n_space < 3 || n_time < 3) throw ConfigError("grid needs at least 3 points per axis");
  if (system == "darcy" && n_space != n_time) throw ConfigError("Darcy grid must be square");
  if (n_train < 0 || n_val < 0 || n_test < 0 || n_train + n_val + n_test < 1) {
    throw ConfigError("dataset split sizes must be non-negative with a positive total");
  }
  check_override_keys(system, overrides);
  if (system == "reactor") reactor_with_overrides(ReactorConfig{}, overrides).validate();
  if (system == "swe_init") swe_init_with_overrides(SweInitParams{}, overrides).validate();
  if (system == "darcy") darcy_with_overrides(overrides).validate();
  effective_task_weights();
  TaskSamplingConfig{effective_task_weights(), prefix_range}.validate();
  train.validate();
  edm.validate();
  sampler.validate();
  NetConfig n = net;
  n.channels = static_cast<int>(system_channels(system).size());
  n.validate();
  n.check_spatial(n_time, n_space);
  if (!group_a.empty()) ChannelSplit::from_indices(n.channels, group_a);
  if (eval_tasks.empty()) throw ConfigError("at least one evaluation task is required");
  if (eval_samples < 1) throw ConfigError("evaluation sample count must be positive");
  if (eval_cases < 0) throw ConfigError("evaluation case count must be non-negative");
  if (!(eval_prefix > 0.0f && eval_prefix <= 1.0f)) throw ConfigError("prefix_fraction must lie in (0, 1]");
  if (sample_batch < 1) throw ConfigError("sample batch must be positive");
  if (kf.q < 0.0 || kf.r < 0.0 || kf.p0 < 0.0) throw ConfigError("Kalman noise variances must be non-negative");
}

std::array<double, 5> ExperimentConfig::effective_task_weights() const {
  if (train_mode == "mixed" || train_mode == "unconditional") return task_weights;
  const std::string prefix = "conditional:";
  if (train_mode.rfind(prefix, 0) == 0) {
    const TaskId t = parse_task(train_mode.substr(prefix.size()));
    std::array<double, 5> w{};
    w[task_index(t)] = 1.0;
    return w;
  }
  throw ConfigError("unknown training mode '" + train_mode + "'");
}

DiffusionMode ExperimentConfig::effective_diffusion() const {
  if (train_mode == "unconditional") return DiffusionMode::unconditional;
  if (diffusion == DiffusionMode::unconditional) {
    throw ConfigError("diffusion 'unconditional' requires train mode 'unconditional'");
  }
  return diffusion;
}

// ---------------------------------------------------------------------------
// Systems

std::vector<std::string> system_channels(const std::string& system) {
  if (is_swe(system)) return {"h", "u"};
  if (system == "darcy") return {"a", "u"};
  if (system == "reactor") return {"x_a", "x_p", "T", "theta"};
  throw ConfigError("unknown system '" + system + "'");
}

ChannelSplit system_split(const std::string& system, const std::vector<int>& group_a) {
  const int c = static_cast<int>(system_channels(system).size());
  if (!group_a.empty()) return ChannelSplit::from_indices(c, group_a);
  if (system == "reactor") {
    const std::array<int, 2> a{1, 2};
    return ChannelSplit::from_indices(c, a);
  }
  return ChannelSplit::first_half(c);
}

Grid system_grid(const std::string& system, int n_space, int n_time) {
  if (system == "swe_orig") return swe_orig_grid(n_space, n_time);
  if (system == "swe_init") return swe_init_grid(n_space, n_time);
  if (system == "reactor") return reactor_grid(n_space, n_time);
  if (system == "darcy") return unit_square_grid(n_space);
  throw ConfigError("unknown system '" + system + "'");
}

Field simulate_instance(const ExperimentConfig& config, int index, std::map<std::string, double>* params) {
  const std::uint64_t seed = derive_seed(config.seed, kGenerateStream, static_cast<std::uint64_t>(index));
  Rng rng(seed);
  const Grid grid = system_grid(config.system, config.n_space, config.n_time);
  std::map<std::string, double> used;
  Field out;
  if (config.system == "swe_orig") {
    const SweOrigIcParams p = SweOrigIcParams::sample(rng);
    for (int k = 0; k < p.n_modes; ++k) {
      used["lambda_" + std::to_string(k + 1)] = p.lambda[k];
      used["gamma_" + std::to_string(k + 1)] = p.gamma[k];
    }
    SweConfig cfg;
    cfg.boundary = Boundary::periodic;
    out = swe_solve(cfg, swe_orig_initial(p, grid), grid);
  } else if (config.system == "swe_init") {
    const SweInitParams p = swe_init_with_overrides(SweInitParams::sample(rng), config.overrides);
    used = {{"h_in", p.h_in}, {"epsilon", p.epsilon}, {"x0", p.x0}, {"sigma", p.sigma}, {"hu0", p.hu0}};
    SweConfig cfg;
    cfg.boundary = Boundary::outflow;
    out = swe_solve(cfg, swe_init_initial(p, grid), grid);
  } else if (config.system == "darcy") {
    const DarcyConfig cfg = darcy_with_overrides(config.overrides);
    const Field a = darcy_sample_coefficient(seed, cfg, grid);
    out = combine(a, darcy_solve(a, cfg, grid));
  } else {
    const ReactorConfig cfg = reactor_with_overrides(ReactorConfig::sample(rng), config.overrides);
    used = {{"inlet_x_a", cfg.inlet_x_a}, {"inlet_x_p", cfg.inlet_x_p}, {"inlet_T", cfg.inlet_T},
            {"theta0", cfg.theta0}};
    out = reactor_solve(cfg, grid);
  }
  if (params) *params = std::move(used);
  return out;
}

double system_residual(const std::string& system, const Field& field) {
  if (is_swe(system)) return swe_residual(field, SweConfig{}.g).mean_abs();
  if (system == "reactor") return reactor_residual(field, ReactorConfig{}).mean_abs();
  if (system == "darcy") {
    Field a = field.select(std::array<int, 1>{field.channel_index("a")});
    for (float& v : a.data()) v = std::max(v, 1e-6f);
    const Field u = field.select(std::array<int, 1>{field.channel_index("u")});
    return darcy_residual(a, u, DarcyConfig{}.forcing).mean_abs();
  }
  throw ConfigError("unknown system '" + system + "'");
}

// ---------------------------------------------------------------------------
// Commands

Dataset run_generate(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const int count = config.n_train + config.n_val + config.n_test;
  std::vector<Field> instances(count);
  std::vector<std::map<std::string, double>> params(count);
  parallel_for(count, resolve_workers(options.workers), [&](int i) {
    try {
      instances[i] = simulate_instance(config, i, &params[i]);
    } catch (const ValidationError&) {
      throw;
    } catch (const Error& e) {
      throw NumericalError("instance " + std::to_string(i) + ": " + e.what());
    }
  });

  Dataset ds;
  DatasetManifest& m = ds.manifest;
  m.system = config.system;
  m.grid = instances.front().grid();
  m.channels = instances.front().channels();
  m.count = count;
  m.splits = SplitIndices::sequential(config.n_train, config.n_val, config.n_test);
  m.stats = training_stats(instances, m.splits);
  m.master_seed = config.seed;
  m.instance_params = params;
  write_materialized_config(config);
  write_dataset(instances, m, config.data_path());
  ds.instances = std::move(instances);

  std::ostringstream s;
  s << "generated " << count << " " << config.system << " instances (" << m.grid.n_time() << "x"
    << m.grid.n_space() << ", channels";
  for (std::size_t c = 0; c < m.channels.size(); ++c) {
    s << " " << m.channels[c] << "[mean " << m.stats.mean[c] << ", std " << m.stats.std[c] << "]";
  }
  s << ") -> " << config.data_path().string();
  log_line(options, s.str());
  return ds;
}

Checkpoint run_train(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  const Dataset ds = read_dataset(config.data_path());
  if (ds.manifest.system != config.system) {
    throw ConfigError("dataset holds system '" + ds.manifest.system + "', config names '" + config.system + "'");
  }
  const auto& train_idx = ds.manifest.splits.train;
  if (train_idx.empty()) throw ConfigError("dataset has an empty training split");
  std::vector<Field> normalized;
  normalized.reserve(train_idx.size());
  for (int i : train_idx) normalized.push_back(normalize(ds.instances.at(i), ds.manifest.stats));
  const Tensor data = stack_fields(normalized);

  TrainSetup setup;
  setup.net = config.net;
  setup.train = config.train;
  setup.mode = config.effective_diffusion();
  setup.edm = config.edm;
  setup.tasks.weights = config.effective_task_weights();
  setup.tasks.prefix_range = config.prefix_range;
  setup.split = system_split(config.system, config.group_a);
  setup.stats = ds.manifest.stats;
  setup.seed = derive_seed(config.seed, kTrainSeedStream);

  write_materialized_config(config);
  auto telemetry = open_out(config.out_dir / "telemetry.jsonl");
  const int every = config.train.log_every;
  auto sink = [&](const TelemetryRecord& r) {
    if (r.iteration % every == 0 || r.iteration + 1 == config.train.iterations) {
      telemetry << to_json_line(r) << '\n';
      if (options.log) *options.log << to_json_line(r) << '\n';
    }
  };
  Checkpoint ckpt;
  try {
    ckpt = train(data, setup, sink);
  } catch (const TrainingAborted& e) {
    telemetry.flush();
    const auto dir = config.out_dir / "ckpt_last_good";
    save_checkpoint(e.last_good(), dir);
    log_line(options, std::string(e.what()) + "; last good checkpoint saved to " + dir.string());
    throw;
  }
  telemetry.flush();
  save_checkpoint(ckpt, config.ckpt_path());
  log_line(options, "trained " + std::to_string(ckpt.iteration) + " iterations -> " + config.ckpt_path().string());
  return ckpt;
}

std::vector<Field> draw_samples(const Checkpoint& ckpt, const UNet<float>& net, const Field& target,
                                const TaskMask& mask, const SamplerConfig& sampler, int count, int batch,
                                std::uint64_t seed, int workers) {
  if (count < 1 || batch < 1) throw ConfigError("sample count and batch must be positive");
  const Field norm = normalize(target, ckpt.stats);
  const Grid& grid = target.grid();
  const InputLayout layout = ckpt.layout();
  if (sampler.mode == SamplerMode::repaint && ckpt.mode == DiffusionMode::edm) {
    throw ConfigError("the resampling sampler needs a noise-predicting (ddpm or unconditional) checkpoint");
  }
  const NetworkFn fn = [&net](const Tensor& in, std::span<const float> nc) { return net.forward(in, nc); };

  const int n_batches = (count + batch - 1) / batch;
  std::vector<Field> out(count);
  parallel_for(n_batches, workers, [&](int b) {
    const int first = b * batch;
    const int nb = std::min(batch, count - first);
    const Tensor cond = repeat_field(norm, nb);
    Tensor x;
    if (sampler.mode == SamplerMode::heun_conditional) {
      Tensor noise(nb, cond.c(), cond.h(), cond.w());
      for (int s = 0; s < nb; ++s) {
        Rng r(derive_seed(seed, static_cast<std::uint64_t>(first + s)));
        for (float& v : noise.sample(s)) v = static_cast<float>(r.normal());
      }
      const DenoiserFn d = ckpt.mode == DiffusionMode::edm
                               ? edm_network_denoiser(fn, cond, mask, ckpt.edm, layout)
                               : ddpm_network_denoiser(fn, cond, mask, ckpt.schedule(), layout);
      x = heun_sample_from(d, cond, mask, sampler, ckpt.edm, std::move(noise));
    } else {
      Rng r(derive_seed(seed, kRepaintStream, static_cast<std::uint64_t>(b)));
      const EpsFn eps = ddpm_network_eps(fn, cond, mask, layout);
      x = repaint_sample(eps, cond, mask, sampler, ckpt.schedule(), r);
    }
    for (int s = 0; s < nb; ++s) {
      out[first + s] = denormalize(unstack_field(x, s, grid, target.channels()), ckpt.stats);
    }
  });
  return out;
}

namespace {

struct EvalContext {
  Checkpoint ckpt;
  UNet<float> net;
  Dataset ds;
  std::vector<int> cases;
  Field training_mean;
  ChannelSplit split;
};

EvalContext prepare_evaluation(const ExperimentConfig& config) {
  EvalContext ctx;
  ctx.ckpt = load_checkpoint(config.ckpt_path());
  ctx.net = load_network(ctx.ckpt, config.use_ema);
  ctx.ds = read_dataset(config.data_path());
  if (ctx.ds.manifest.channels != ctx.ckpt.stats.channels) {
    throw ConfigError("dataset channels do not match the checkpoint");
  }
  if (ctx.ckpt.mode != DiffusionMode::unconditional &&
      ctx.ckpt.net_config.channels != static_cast<int>(ctx.ds.manifest.channels.size())) {
    throw ConfigError("checkpoint channel count does not match the dataset");
  }
  ctx.cases = ctx.ds.manifest.splits.test;
  if (ctx.cases.empty()) throw ConfigError("dataset has an empty test split");
  if (config.eval_cases > 0 && config.eval_cases < static_cast<int>(ctx.cases.size())) {
    ctx.cases.resize(config.eval_cases);
  }
  const auto& tr = ctx.ds.manifest.splits.train;
  if (!tr.empty()) {
    const std::vector<Field> train = ctx.ds.subset(tr);
    ctx.training_mean = mean_prediction(train);
  } else {
    // No training split here: fall back to the per-channel training means of the checkpoint.
    ctx.training_mean = Field(ctx.ds.manifest.grid, ctx.ds.manifest.channels);
    for (int c = 0; c < ctx.training_mean.n_channels(); ++c) {
      auto ch = ctx.training_mean.channel(c);
      std::fill(ch.begin(), ch.end(), static_cast<float>(ctx.ckpt.stats.mean[c]));
    }
  }
  ctx.split = checkpoint_split(ctx.ckpt);
  return ctx;
}

std::uint64_t case_seed(const ExperimentConfig& config, TaskId task, int case_index) {
  return derive_seed(config.seed, kSampleStream,
                     static_cast<std::uint64_t>(task_index(task)) * 1000003ull + static_cast<std::uint64_t>(case_index));
}

bool is_cross_task(const Checkpoint& ckpt, TaskId task) {
  return ckpt.mode != DiffusionMode::unconditional && ckpt.task_weights[task_index(task)] == 0.0;
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

double mean_of(const std::vector<double>& v) {
  if (v.empty()) return 0.0;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double median_of(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

json aggregate(const TaskEvaluation& te) {
  std::vector<double> mean_mae, sample_mae, pde, points, closest, trmean, kf, rho;
  int closest_wins = 0, pde_wins = 0;
  for (const auto& c : te.cases) {
    mean_mae.push_back(c.report.mean_prediction_mae);
    sample_mae.push_back(mean_of(c.report.mae));
    pde.push_back(c.by_pde_mae);
    closest.push_back(c.closest_mae);
    if (c.by_points_mae) points.push_back(*c.by_points_mae);
    trmean.push_back(c.training_mean_mae);
    if (c.kf_mae) kf.push_back(*c.kf_mae);
    rho.push_back(c.report.spearman);
    closest_wins += c.closest_mae < c.report.mean_prediction_mae ? 1 : 0;
    pde_wins += c.by_pde_mae < c.report.mean_prediction_mae ? 1 : 0;
  }
  const double n = static_cast<double>(std::max<std::size_t>(te.cases.size(), 1));
  json a;
  a["cases"] = te.cases.size();
  a["mean_prediction_mae"] = mean_of(mean_mae);
  a["sample_mae"] = mean_of(sample_mae);
  a["by_pde_mae"] = mean_of(pde);
  a["by_points_mae"] = points.empty() ? json(nullptr) : json(mean_of(points));
  a["closest_mae"] = mean_of(closest);
  a["training_mean_mae"] = mean_of(trmean);
  a["kf_mae"] = kf.empty() ? json(nullptr) : json(mean_of(kf));
  a["median_spearman"] = median_of(rho);
  a["closest_beats_mean_fraction"] = closest_wins / n;
  a["by_pde_beats_mean_fraction"] = pde_wins / n;
  return a;
}

}  // namespace

EvaluationResult run_evaluate(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  EvalContext ctx = prepare_evaluation(config);
  const int workers = resolve_workers(options.workers);
  const Grid& grid = ctx.ds.manifest.grid;
  const FieldShape shape{static_cast<int>(ctx.ds.manifest.channels.size()), grid.n_time(), grid.n_space()};
  const std::string& system = ctx.ds.manifest.system;
  const ResidualOp residual_op = [&system](const Field& f) { return system_residual(system, f); };

  ensure_dir(config.out_dir);
  write_materialized_config(config);
  EvaluationResult result;
  json report;
  report["schema_version"] = kReportSchemaVersion;
  report["system"] = system;
  report["checkpoint"] = json{{"mode", to_string(ctx.ckpt.mode)},
                              {"iteration", ctx.ckpt.iteration},
                              {"task_weights", ctx.ckpt.task_weights},
                              {"use_ema", config.use_ema}};
  report["samples"] = config.eval_samples;
  report["sampler"] = json{{"mode", sampler_mode_name(config.sampler.mode)},
                           {"n_steps", config.sampler.n_steps},
                           {"repaint_steps", config.sampler.repaint_steps},
                           {"jump_length", config.sampler.jump_length},
                           {"resample_count", config.sampler.resample_count}};
  report["tasks"] = json::array();

  for (TaskId task : config.eval_tasks) {
    TaskEvaluation te;
    te.task = task;
    const TaskMask mask = mask_for_task(task, shape, config.eval_prefix, ctx.split);
    te.prefix_fraction = mask.prefix_fraction;
    te.cross_task = is_cross_task(ctx.ckpt, task);
    const std::string tname = to_string(task);
    if (te.cross_task) {
      log_line(options, "warning: checkpoint was not trained on " + tname +
                            "; evaluating it cross-task, expect degraded accuracy");
    }

    auto scatter = open_out(config.out_dir / ("scatter_" + tname + ".csv"));
    scatter << "case_id,sample,mae,pde_residual\n";
    auto traj = open_out(config.out_dir / ("trajectories_" + tname + ".csv"));
    traj << "case_id,source,channel,t_index,x_index,value\n";
    auto resid = open_out(config.out_dir / ("residuals_" + tname + ".csv"));
    resid << "case_id,model,pde_residual\n";

    for (std::size_t k = 0; k < ctx.cases.size(); ++k) {
      const int idx = ctx.cases[k];
      const Field& target = ctx.ds.instances.at(idx);
      const std::vector<Field> samples =
          draw_samples(ctx.ckpt, ctx.net, target, mask, config.sampler, config.eval_samples, config.sample_batch,
                       case_seed(config, task, idx), workers);
      const std::vector<ObservationPoint> points = corner_points(target, mask);
      CaseResult cr;
      cr.index = idx;
      cr.report = evaluate_samples(samples, target, mask, residual_op, points, instance_file_name(idx));
      cr.by_pde_mae = cr.report.mae[cr.report.selected_by_pde];
      cr.closest_mae = cr.report.mae[cr.report.selected_closest];
      if (cr.report.selected_by_points) cr.by_points_mae = cr.report.mae[*cr.report.selected_by_points];
      cr.training_mean_mae = masked_mae(ctx.training_mean, target, mask);
      cr.target_residual = system_residual(system, target);
      if (config.kalman && is_swe(system)) {
        const double h_bar = ctx.ckpt.stats.mean[ctx.ds.instances.at(idx).channel_index("h")];
        const Field kf = kf_reconstruct(target, h_bar, SweConfig{}.g, config.kf,
                                        system == "swe_init" ? Boundary::outflow : Boundary::periodic);
        cr.kf_mae = masked_mae(kf, target, mask);
        cr.kf_residual = system_residual(system, kf);
      }

      const std::string id = cr.report.case_id;
      for (std::size_t s = 0; s < samples.size(); ++s) {
        scatter << id << ',' << s << ',' << num(cr.report.mae[s]) << ',' << num(cr.report.residual[s]) << '\n';
        resid << id << ",diffusion_sample," << num(cr.report.residual[s]) << '\n';
      }
      resid << id << ",mean_prediction," << num(cr.report.mean_prediction_residual) << '\n';
      resid << id << ",ground_truth," << num(cr.target_residual) << '\n';
      if (cr.kf_residual) resid << id << ",kalman_filter," << num(*cr.kf_residual) << '\n';

      if (static_cast<int>(k) == config.flag_case) {
        const Field mean = mean_prediction(samples);
        auto dump = [&](const std::string& source, const Field& f) {
          for (int c = 0; c < f.n_channels(); ++c)
            for (int n = 0; n < grid.n_time(); ++n)
              for (int i = 0; i < grid.n_space(); ++i)
                traj << id << ',' << source << ',' << f.channels()[c] << ',' << n << ',' << i << ','
                     << num(f.at(c, n, i)) << '\n';
        };
        dump("target", target);
        dump("mean_prediction", mean);
        const std::size_t shown = std::min<std::size_t>(samples.size(), 8);
        for (std::size_t s = 0; s < shown; ++s) dump("sample_" + std::to_string(s), samples[s]);
      }
      log_line(options, tname + " " + id + ": mean-prediction MAE " + num(cr.report.mean_prediction_mae) +
                            ", closest " + num(cr.closest_mae) + ", spearman " + num(cr.report.spearman));
      te.cases.push_back(std::move(cr));
    }

    auto cases_csv = open_out(config.out_dir / ("cases_" + tname + ".csv"));
    cases_csv << "case_id,mean_prediction_mae,mean_prediction_pde,sample_mae_mean,by_pde_mae,by_points_mae,"
                 "closest_mae,training_mean_mae,kf_mae,spearman\n";
    auto corr_csv = open_out(config.out_dir / ("correlation_" + tname + ".csv"));
    corr_csv << "case_id,spearman\n";
    json tj;
    tj["task"] = tname;
    tj["prefix_fraction"] = te.prefix_fraction;
    tj["cross_task"] = te.cross_task;
    tj["cases"] = json::array();
    for (const auto& c : te.cases) {
      const auto& r = c.report;
      cases_csv << r.case_id << ',' << num(r.mean_prediction_mae) << ',' << num(r.mean_prediction_residual) << ','
                << num(mean_of(r.mae)) << ',' << num(c.by_pde_mae) << ','
                << (c.by_points_mae ? num(*c.by_points_mae) : "") << ',' << num(c.closest_mae) << ','
                << num(c.training_mean_mae) << ',' << (c.kf_mae ? num(*c.kf_mae) : "") << ',' << num(r.spearman)
                << '\n';
      corr_csv << r.case_id << ',' << num(r.spearman) << '\n';
      tj["cases"].push_back(json{{"case_id", r.case_id},
                                 {"index", c.index},
                                 {"mae", r.mae},
                                 {"pde_residual", r.residual},
                                 {"mean_prediction_mae", r.mean_prediction_mae},
                                 {"mean_prediction_pde", r.mean_prediction_residual},
                                 {"spearman", r.spearman},
                                 {"selected", json{{"by_pde", r.selected_by_pde},
                                                   {"closest", r.selected_closest},
                                                   {"by_points", r.selected_by_points
                                                                     ? json(*r.selected_by_points)
                                                                     : json(nullptr)}}},
                                 {"by_pde_mae", c.by_pde_mae},
                                 {"by_points_mae", optional_json(c.by_points_mae)},
                                 {"closest_mae", c.closest_mae},
                                 {"training_mean_mae", c.training_mean_mae},
                                 {"kf_mae", optional_json(c.kf_mae)},
                                 {"kf_pde", optional_json(c.kf_residual)},
                                 {"target_pde", c.target_residual}});
    }
    tj["aggregate"] = aggregate(te);
    report["tasks"].push_back(std::move(tj));
    result.tasks.push_back(std::move(te));
  }
  write_text_file(config.out_dir / "report.json", report.dump(2) + "\n");
  return result;
}

void run_sample(const ExperimentConfig& config, const RunOptions& options) {
  config.validate();
  EvalContext ctx = prepare_evaluation(config);
  const int workers = resolve_workers(options.workers);
  const Grid& grid = ctx.ds.manifest.grid;
  const FieldShape shape{static_cast<int>(ctx.ds.manifest.channels.size()), grid.n_time(), grid.n_space()};
  write_materialized_config(config);
  for (TaskId task : config.eval_tasks) {
    const TaskMask mask = mask_for_task(task, shape, config.eval_prefix, ctx.split);
    const std::string tname = to_string(task);
    if (is_cross_task(ctx.ckpt, task)) {
      log_line(options, "warning: checkpoint was not trained on " + tname + "; sampling it cross-task");
    }
    const auto dir = config.out_dir / "samples" / tname;
    ensure_dir(dir);
    json files = json::array();
    for (int idx : ctx.cases) {
      const std::vector<Field> samples =
          draw_samples(ctx.ckpt, ctx.net, ctx.ds.instances.at(idx), mask, config.sampler, config.eval_samples,
                       config.sample_batch, case_seed(config, task, idx), workers);
      std::vector<float> flat;
      flat.reserve(samples.size() * samples.front().size());
      for (const Field& f : samples) flat.insert(flat.end(), f.data().begin(), f.data().end());
      const std::string name = "case_" + instance_file_name(idx);
      write_f32_file(dir / name, flat);
      files.push_back(json{{"case_index", idx}, {"file", name}});
    }
    json m;
    m["task"] = tname;
    m["prefix_fraction"] = mask.prefix_fraction;
    m["shape"] = {config.eval_samples, shape.channels, shape.n_time, shape.n_space};
    m["channels"] = ctx.ds.manifest.channels;
    m["mask"] = mask.mask;
    m["files"] = files;
    write_text_file(dir / "samples.json", m.dump(2) + "\n");
    log_line(options, "wrote " + std::to_string(ctx.cases.size()) + " sample files -> " + dir.string());
  }
}

std::string run_report(const ExperimentConfig& config, const RunOptions& options) {
  const auto path = config.out_dir / "report.json";
  if (!std::filesystem::exists(path)) throw IoError("missing report " + path.string() + "; run evaluate first");
  const json r = detail::parse_json_text(read_text_file(path), "report");
  const int version = detail::require_as<int>(r, "schema_version", "report");
  if (version != kReportSchemaVersion) throw ValidationError("unsupported report schema version");
  std::ostringstream csv;
  csv << "task,cross_task,cases,mean_prediction_mae,sample_mae,by_pde_mae,by_points_mae,closest_mae,"
         "training_mean_mae,kf_mae,median_spearman\n";
  std::ostringstream text;
  text << "system " << r.at("system").get<std::string>() << ", checkpoint "
       << r.at("checkpoint").at("mode").get<std::string>() << "\n";
  auto cell = [](const json& v) { return v.is_null() ? std::string() : v.dump(); };
  for (const auto& t : r.at("tasks")) {
    const json& a = t.at("aggregate");
    csv << t.at("task").get<std::string>() << ',' << (t.at("cross_task").get<bool>() ? 1 : 0) << ','
        << a.at("cases").dump() << ',' << cell(a.at("mean_prediction_mae")) << ',' << cell(a.at("sample_mae"))
        << ',' << cell(a.at("by_pde_mae")) << ',' << cell(a.at("by_points_mae")) << ','
        << cell(a.at("closest_mae")) << ',' << cell(a.at("training_mean_mae")) << ',' << cell(a.at("kf_mae"))
        << ',' << cell(a.at("median_spearman")) << '\n';
    text << t.at("task").get<std::string>() << (t.at("cross_task").get<bool>() ? " (cross-task)" : "")
         << ": mean-prediction MAE " << cell(a.at("mean_prediction_mae")) << ", closest "
         << cell(a.at("closest_mae")) << ", by_pde " << cell(a.at("by_pde_mae")) << ", training-mean "
         << cell(a.at("training_mean_mae")) << ", median spearman " << cell(a.at("median_spearman")) << "\n";
  }
  write_text_file(config.out_dir / "summary.csv", csv.str());
  log_line(options, text.str());
  return text.str();
}

}  // namespace pdo
