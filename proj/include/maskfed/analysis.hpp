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

#include "maskfed/federation.hpp"
#include "maskfed/masking.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace maskfed {

// Distribution of the number of epochs f in [0, m] in which one scalar
// parameter receives an update.
struct UpdateCountPmf {
  std::size_t epochs = 0;
  std::size_t clients = 0;
  double zero_prob = 0.0;
  std::vector<double> p; // size epochs + 1

  double mean() const;
  double variance() const;
  std::vector<double> cdf() const;
};

/// Per-epoch random masks: an entry is updated in an epoch unless all n
/// clients drew a zero, so f ~ Binomial(m, 1 - R^n), i.e.
/// P(f) = C(m, f) (1 - R^n)^f (R^n)^(m - f).
UpdateCountPmf update_count_pmf(std::size_t epochs, std::size_t clients, double zero_prob);

// Locked masks: all-or-nothing, P(0) = R^n and P(m) = 1 - R^n.
UpdateCountPmf locked_update_count_pmf(std::size_t epochs, std::size_t clients,
                                       double zero_prob);

struct EmpiricalUpdateCounts {
  std::vector<double> pmf;
  // FixedPosition only: distribution for positional-embedding entries.
  std::vector<double> positional_pmf;
  std::size_t trials = 0;
};

/// Monte Carlo over single scalar parameters. Trials run in fixed-size
/// chunks with per-chunk derived streams, so the result does not depend on
/// the worker count.
EmpiricalUpdateCounts simulate_update_counts(PolicyKind policy, std::size_t epochs,
                                             std::size_t clients, double zero_prob,
                                             std::size_t trials, std::uint64_t seed);

double total_variation(std::span<const double> a, std::span<const double> b);

struct UpdateHistogram {
  std::size_t epochs = 0;
  std::size_t steps = 0;
  // by_epoch[f]: scalar parameters updated in exactly f epochs.
  std::vector<std::size_t> by_epoch;
  // by_step[f]: scalar parameters updated in exactly f rounds.
  std::vector<std::size_t> by_step;
  // Same as by_epoch restricted to E_pos entries.
  std::vector<std::size_t> positional_by_epoch;

  std::vector<double> epoch_pmf() const;
};

// Throws ConfigError when the run was made without telemetry.
UpdateHistogram empirical_update_counts_from_run(const FederationResult &run);

} // namespace maskfed
