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

#include "maskfed/analysis.hpp"
#include "maskfed/april.hpp"
#include "maskfed/config.hpp"
#include "maskfed/federation.hpp"

#include <filesystem>
#include <string>
#include <vector>

namespace maskfed {

// Experiment drivers behind the CLI subcommands. Each writes only under
// cfg.out and throws the module error types on failure.

struct ExperimentData {
  Dataset train;
  Dataset test;
};

// Synthetic split or CIFAR-10 records, resized to the model's image size
// when it differs from 32x32.
ExperimentData load_experiment_data(const ExperimentConfig &cfg);

struct RunSpec {
  std::string label; // e.g. "none", "per_epoch_R0.5"
  MaskPolicy policy;
};

/// One run per non-random policy and one per (random policy, R). NoMask is
/// prepended when several runs are compared and it is not already listed.
std::vector<RunSpec> train_runs(const ExperimentConfig &cfg);

struct TrainRun {
  RunSpec spec;
  FederationResult result;
};

// Writes train/metrics_<label>.csv and train/params_<label>.bin, plus
// update-count histograms when telemetry is on.
std::vector<TrainRun> train_experiment(const ExperimentConfig &cfg);

struct AttackCase {
  std::uint64_t seed = 0;
  std::string policy; // "none", "fixed_position" or "per_epoch"
  double zero_prob = 0.0;
  AttackResult result;
};

/// For each seed: fresh parameters init_params(model, seed), one training
/// image picked by the seed, and one client update per policy in
/// {none, fixed_position, per_epoch at each R}. Writes attack/report.csv and
/// PPM + MFIMG dumps of every reconstruction and of the ground truth.
std::vector<AttackCase> attack_experiment(const ExperimentConfig &cfg);

struct AnalysisCase {
  std::string policy; // "per_epoch" or "locked"
  double zero_prob = 0.0;
  UpdateCountPmf analytic;
  std::vector<double> empirical;
  double tv_distance = 0.0;
};

// m = federation.epochs, n = federation.clients, R over federation.zero_prob.
// Writes analysis/update_counts_<policy>_R<R>.csv and analysis/summary.csv.
std::vector<AnalysisCase> analyze_experiment(const ExperimentConfig &cfg);

struct GradcheckOutcome {
  GradCheckReport report;
  std::size_t param_count = 0;
  bool passed = false;
};

// Throws ConfigError when the model exceeds gradcheck.max_params.
GradcheckOutcome gradcheck_experiment(const ExperimentConfig &cfg);

} // namespace maskfed
