// SPDX-FileCopyrightText: 2026 pdo authors
// SPDX-License-Identifier: Apache-2.0

// pdo: generate datasets, train denoisers, sample, evaluate and summarize.

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pdo/error.hpp"
#include "pdo/experiment.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitNumerical = 3;
constexpr int kExitOther = 1;

struct Flags {
  std::string config;
  int workers = 0;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
};

void add_common(CLI::App* cmd, Flags& f) {
  cmd->add_option("--config", f.config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  cmd->add_option("--workers", f.workers, "Worker threads (default: available cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--seed", f.seed, "Override the master seed");
  cmd->add_option("--out", f.out, "Override the output directory");
}

pdo::ExperimentConfig load(const Flags& f) {
  pdo::ExperimentConfig c = pdo::ExperimentConfig::load(f.config);
  if (f.seed) c.seed = *f.seed;
  if (f.out) c.out_dir = *f.out;
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion models as PDE neural operators: data, training and evaluation"};
  app.require_subcommand(1);
  Flags flags;
  auto* gen = app.add_subcommand("generate", "Simulate a dataset");
  auto* train = app.add_subcommand("train", "Train a denoiser on the training split");
  auto* sample = app.add_subcommand("sample", "Draw samples for the test split");
  auto* eval = app.add_subcommand("evaluate", "Sample and score the test split");
  auto* report = app.add_subcommand("report", "Summarize report.json into summary.csv");
  for (auto* c : {gen, train, sample, eval, report}) add_common(c, flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitValidation;
  }

  try {
    const pdo::ExperimentConfig config = load(flags);
    pdo::RunOptions opts;
    opts.workers = flags.workers;
    opts.log = &std::cout;
    if (gen->parsed()) pdo::run_generate(config, opts);
    if (train->parsed()) pdo::run_train(config, opts);
    if (sample->parsed()) pdo::run_sample(config, opts);
    if (eval->parsed()) pdo::run_evaluate(config, opts);
    if (report->parsed()) pdo::run_report(config, opts);
  } catch (const pdo::NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const pdo::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const std::exception& e) {
    std::cerr << "unexpected failure: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOk;
}
