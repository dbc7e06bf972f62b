/*
 * Copyright 2026 The maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// maskfed: command-line driver for the train, attack, analyze and gradcheck
// experiments. Exit codes: 0 ok, 1 check failed, 2 configuration, 3 I/O.

#include "maskfed/config.hpp"
#include "maskfed/error.hpp"
#include "maskfed/experiments.hpp"
#include "maskfed/io.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <iostream>
#include <map>
#include <optional>

namespace {

using namespace maskfed;

enum Exit { kOk = 0, kFailed = 1, kConfig = 2, kIo = 3 };

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  std::optional<std::string> policy;
  std::optional<std::string> zero_prob;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> clients;
  std::vector<std::string> set;
};

void add_flags(CLI::App &cmd, Flags &f) {
  cmd.add_option("--config", f.config, "Experiment config file (key = value lines)");
  cmd.add_option("--seed", f.seed, "Root seed");
  cmd.add_option("--out", f.out, "Output directory");
  cmd.add_option("--policy", f.policy, "Mask policy or comma list: none, per_epoch, locked, fixed_position");
  cmd.add_option("--zero-prob", f.zero_prob, "Zero probability R, or a comma list");
  cmd.add_option("--epochs", f.epochs, "Epochs m");
  cmd.add_option("--clients", f.clients, "Clients n");
  cmd.add_option("--set", f.set, "Override any config key: --set key=value (repeatable)");
}

ExperimentConfig resolve(const Flags &f) {
  ConfigEntries file;
  if (!f.config.empty()) file = read_config_file(f.config);
  ConfigEntries flags;
  for (const auto &kv : f.set) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + kv + "'", "--set");
    flags[kv.substr(0, eq)] = kv.substr(eq + 1);
  }
  // Named flags take precedence over --set.
  if (f.seed) flags["seed"] = std::to_string(*f.seed);
  if (f.out) flags["out"] = *f.out;
  if (f.policy) flags["federation.policy"] = *f.policy;
  if (f.zero_prob) flags["federation.zero_prob"] = *f.zero_prob;
  if (f.epochs) flags["federation.epochs"] = std::to_string(*f.epochs);
  if (f.clients) flags["federation.clients"] = std::to_string(*f.clients);
  return resolve_config(file, flags);
}

int cmd_train(const ExperimentConfig &cfg) {
  for (const auto &run : train_experiment(cfg)) {
    const auto &h = run.result.state.history;
    std::cout << run.spec.label << ": ";
    if (h.empty()) std::cout << "no epochs\n";
    else
      std::cout << "final test_accuracy=" << format_double(h.back().test_accuracy)
                << " mean_train_loss=" << format_double(h.back().mean_train_loss) << "\n";
  }
  std::cout << "wrote " << (cfg.out / "train").string() << "\n";
  return kOk;
}

int cmd_attack(const ExperimentConfig &cfg) {
  const auto cases = attack_experiment(cfg);
  std::map<std::pair<std::string, double>, std::vector<double>> psnr;
  std::map<std::pair<std::string, double>, std::size_t> degenerate;
  for (const auto &c : cases) {
    psnr[{c.policy, c.zero_prob}].push_back(c.result.psnr);
    degenerate[{c.policy, c.zero_prob}] += c.result.degenerate ? 1 : 0;
  }
  for (auto &[key, v] : psnr) {
    std::sort(v.begin(), v.end());
    const double med = v.size() % 2 ? v[v.size() / 2] : 0.5 * (v[v.size() / 2 - 1] + v[v.size() / 2]);
    std::cout << key.first << " R=" << format_double(key.second)
              << ": median psnr=" << format_double(med) << " degenerate=" << degenerate[key]
              << "/" << v.size() << "\n";
  }
  std::cout << "wrote " << cases.size() << " rows to " << (cfg.out / "attack" / "report.csv").string()
            << "\n";
  return kOk;
}

int cmd_analyze(const ExperimentConfig &cfg) {
  for (const auto &c : analyze_experiment(cfg)) {
    std::cout << c.policy << " R=" << format_double(c.zero_prob)
              << ": mean=" << format_double(c.analytic.mean())
              << " tv_distance=" << format_double(c.tv_distance) << "\n";
  }
  std::cout << "wrote " << (cfg.out / "analysis").string() << "\n";
  return kOk;
}

int cmd_gradcheck(const ExperimentConfig &cfg) {
  const auto res = gradcheck_experiment(cfg);
  for (const auto &e : res.report.entries)
    std::cout << e.name << " " << format_double(e.rel_error) << "\n";
  std::cout << "parameters=" << res.param_count
            << " max_rel_error=" << format_double(res.report.max_rel_error)
            << " worst=" << res.report.worst_param << "\n";
  if (!res.passed) {
    std::cerr << "gradcheck FAILED: " << res.report.worst_param << " has relative error "
              << format_double(res.report.max_rel_error) << " >= "
              << format_double(cfg.gradcheck.tolerance) << "\n";
    return kFailed;
  }
  std::cout << "gradcheck passed\n";
  return kOk;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"maskfed: federated ViT training with random gradient masks"};
  app.require_subcommand(1);
  Flags flags;
  std::map<std::string, int (*)(const ExperimentConfig &)> handlers = {
      {"train", cmd_train},
      {"attack", cmd_attack},
      {"analyze", cmd_analyze},
      {"gradcheck", cmd_gradcheck}};
  const std::map<std::string, std::string> help = {
      {"train", "Federated training, one metrics CSV per policy"},
      {"attack", "Gradient inversion attack on single client updates"},
      {"analyze", "Update-count distributions, analytic vs Monte Carlo"},
      {"gradcheck", "Analytic vs finite-difference gradients"}};
  for (const auto &[name, text] : help) add_flags(*app.add_subcommand(name, text), flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kConfig;
  }

  const std::string name = app.get_subcommands().front()->get_name();
  try {
    return handlers.at(name)(resolve(flags));
  } catch (const ConfigError &e) {
    std::cerr << "configuration error: " << e.what() << "\n";
    return kConfig;
  } catch (const IoError &e) {
    std::cerr << "I/O error: " << e.what() << "\n";
    return kIo;
  } catch (const FormatError &e) {
    std::cerr << "format error: " << e.what() << "\n";
    return kIo;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kFailed;
  }
}
