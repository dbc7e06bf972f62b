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

#pragma once

#include "maskfed/april.hpp"
#include "maskfed/datasets.hpp"
#include "maskfed/federation.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace maskfed {

enum class DatasetKind { Synth, Cifar10 };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::Synth;
  // Synthetic set: `synth.per_class` training samples per class, followed by
  // `test_per_class` test samples drawn from the same templates.
  SynthSpec synth;
  std::size_t test_per_class = 50;
  // CIFAR-10: a directory in the standard layout, or two explicit record
  // files (any number of records) when train_file/test_file are set.
  std::filesystem::path path;
  std::filesystem::path train_file;
  std::filesystem::path test_file;
  // Keep only the first N records of each split; 0 keeps all.
  std::size_t train_limit = 0;
  std::size_t test_limit = 0;
};

struct AttackConfig {
  ReconstructionMode mode = ReconstructionMode::PseudoInverse;
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  // Run the attack against model.attack_exact().
  bool exact = true;
};

struct GradcheckConfig {
  double fd_step = 1e-5;
  double tolerance = 1e-4;
  std::size_t batch = 2;
  std::size_t max_params = 100000;
  // Test hook, see GradCheckOptions::sabotage.
  std::string sabotage;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  std::filesystem::path out = "out";
  // Model, client count, epochs, batch size, learning rate and telemetry.
  // The policy field is filled per run from `policies` x `zero_probs`.
  FederationConfig federation;
  std::vector<std::string> policies = {"none", "per_epoch"};
  std::vector<double> zero_probs = {0.2, 0.5, 0.8};
  std::map<std::string, double> zero_prob_overrides;
  DatasetConfig dataset;
  AttackConfig attack;
  std::size_t analysis_trials = 100000;
  GradcheckConfig gradcheck;

  // Every key, resolved, one `key=value` line each in a fixed order.
  std::string canonical() const;
  // FNV-1a of canonical() with `out` cleared, so the output location does
  // not change the hash.
  std::uint64_t hash() const;
  // Throws ConfigError with the key path of the first violation.
  void validate() const;
};

using ConfigEntries = std::map<std::string, std::string, std::less<>>;

/// Parses `key = value` lines. Blank lines and lines starting with '#' are
/// skipped; keys may not repeat. Errors name the source and line.
ConfigEntries parse_config_text(std::string_view text, std::string_view source = "config");
ConfigEntries read_config_file(const std::filesystem::path &path);

/// Defaults, then `file`, then `flags`. Unknown keys and unparsable values
/// throw ConfigError naming the key. The result is validated.
ExperimentConfig resolve_config(const ConfigEntries &file, const ConfigEntries &flags = {});

// Sorted list of every accepted key (override keys excepted).
std::vector<std::string> config_keys();

} // namespace maskfed
