// Copyright 2026 The csidt Authors
// SPDX-License-Identifier: Apache-2.0

// csidt: generate corpora, train and fine-tune the feedback autoencoder,
// evaluate against the Type II codebook and aggregate report tables.
//
//   csidt generate --config configs/corridor.conf --out run
//   csidt train    --out run
//   csidt finetune --out run
//   csidt eval     --out run
//   csidt report   --out run
//   csidt config   [--config FILE]   print the effective configuration
//
// Exit codes: 0 success, 2 configuration error, 3 missing input,
// 4 numerical failure, 1 anything else.

#include <filesystem>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "csidt/experiment.hpp"

namespace {

enum Exit { kOk = 0, kOther = 1, kConfig = 2, kMissing = 3, kNumerical = 4 };

struct Options {
  std::string config;
  std::string out = "run";
  std::optional<std::uint64_t> seed;
  int jobs = 1;
  bool verbose = false;
};

csidt::ExperimentConfig resolve_config(const Options& o) {
  std::string path = o.config;
  if (path.empty()) path = o.out + "/config.txt";
  if (!std::filesystem::exists(path)) {
    throw csidt::MissingInput("config file '" + path + "' not found (pass --config or run generate first)");
  }
  auto cfg = csidt::load_experiment_config(path);
  if (o.seed) cfg.seed = *o.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Digital-twin CSI feedback experiments"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub, bool needs_config) {
    sub->add_option("--config", o.config, needs_config ? "experiment config file"
                                                       : "experiment config (default <out>/config.txt)");
    sub->add_option("--out", o.out, "run directory")->capture_default_str();
    sub->add_option("--seed", o.seed, "override experiment.seed");
    sub->add_option("--jobs", o.jobs, "worker threads")->capture_default_str()->check(CLI::Range(1, 256));
    sub->add_flag("-v,--verbose", o.verbose, "print progress");
  };
  auto* gen = app.add_subcommand("generate", "build DT, RW-proxy, cluster and outdoor corpora");
  add_common(gen, true);
  auto* tr = app.add_subcommand("train", "train the indoor, outdoor and cluster autoencoders");
  add_common(tr, false);
  auto* ft = app.add_subcommand("finetune", "decoder-only online learning on RW-proxy data");
  add_common(ft, false);
  auto* ev = app.add_subcommand("eval", "Table II and Table III analog CSVs");
  add_common(ev, false);
  auto* rep = app.add_subcommand("report", "aggregate tables and heatmap of a run directory");
  rep->add_option("--out", o.out, "run directory")->capture_default_str();
  rep->add_flag("-v,--verbose", o.verbose, "print progress");
  auto* conf = app.add_subcommand("config", "print the effective configuration (defaults without --config)");
  conf->add_option("--config", o.config, "experiment config file");
  conf->add_option("--seed", o.seed, "override experiment.seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  auto log = [&](const std::string& msg) {
    if (o.verbose) std::cerr << "csidt: " << msg << '\n';
  };
  try {
    if (gen->parsed()) {
      if (o.config.empty()) throw csidt::ConfigError("generate requires --config");
      const auto cfg = resolve_config(o);
      log("generating corpora in " + o.out);
      csidt::cmd_generate(cfg, o.out, o.jobs);
    } else if (tr->parsed()) {
      const auto cfg = resolve_config(o);
      log("training");
      csidt::cmd_train(cfg, o.out);
    } else if (ft->parsed()) {
      const auto cfg = resolve_config(o);
      log("fine-tuning decoders");
      csidt::cmd_finetune(cfg, o.out);
    } else if (ev->parsed()) {
      const auto cfg = resolve_config(o);
      log("evaluating");
      csidt::cmd_eval(cfg, o.out, o.jobs);
    } else if (conf->parsed()) {
      auto cfg = o.config.empty() ? csidt::parse_experiment_config("") : resolve_config(o);
      if (o.seed) cfg.seed = *o.seed;
      std::cout << csidt::format_experiment_config(cfg);
    } else if (rep->parsed()) {
      log("reporting");
      csidt::cmd_report(o.out);
    }
  } catch (const csidt::ConfigError& e) {
    std::cerr << "csidt: " << e.what() << '\n';
    return kConfig;
  } catch (const csidt::MissingInput& e) {
    std::cerr << "csidt: " << e.what() << '\n';
    return kMissing;
  } catch (const csidt::NumericalError& e) {
    std::cerr << "csidt: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const csidt::ConvergenceError& e) {
    std::cerr << "csidt: numerical failure: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "csidt: " << e.what() << '\n';
    return kOther;
  }
  return kOk;
}
