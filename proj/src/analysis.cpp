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

#include "maskfed/analysis.hpp"

#include "maskfed/error.hpp"
#include "maskfed/random.hpp"
#include "maskfed/vit.hpp"

#include <cmath>
#include <thread>

namespace maskfed {

namespace {

void check_args(std::size_t clients, double zero_prob) {
  if (clients < 1) throw ContractError("update count: need at least one client");
  if (!(zero_prob >= 0.0 && zero_prob <= 1.0)) {
    throw ContractError("update count: zero probability " + std::to_string(zero_prob) +
                        " outside [0, 1]");
  }
}

constexpr std::size_t kTrialsPerChunk = 4096;

} // namespace

double UpdateCountPmf::mean() const {
  double m = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) m += static_cast<double>(f) * p[f];
  return m;
}

double UpdateCountPmf::variance() const {
  const double mu = mean();
  double v = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) {
    const double d = static_cast<double>(f) - mu;
    v += d * d * p[f];
  }
  return v;
}

std::vector<double> UpdateCountPmf::cdf() const {
  std::vector<double> c(p.size());
  double acc = 0.0;
  for (std::size_t f = 0; f < p.size(); ++f) c[f] = acc += p[f];
  return c;
}

UpdateCountPmf update_count_pmf(std::size_t epochs, std::size_t clients, double zero_prob) {
  check_args(clients, zero_prob);
  const double all_zero = std::pow(zero_prob, static_cast<double>(clients));
  const double updated = 1.0 - all_zero;
  UpdateCountPmf out{epochs, clients, zero_prob, std::vector<double>(epochs + 1)};
  double binom = 1.0; // C(m, f), built incrementally
  for (std::size_t f = 0; f <= epochs; ++f) {
    if (f > 0) binom = binom * static_cast<double>(epochs - f + 1) / static_cast<double>(f);
    // std::pow(0, 0) == 1 covers the R = 0 and R = 1 endpoints.
    out.p[f] = binom * std::pow(updated, static_cast<double>(f)) *
               std::pow(all_zero, static_cast<double>(epochs - f));
  }
  return out;
}

UpdateCountPmf locked_update_count_pmf(std::size_t epochs, std::size_t clients,
                                       double zero_prob) {
  check_args(clients, zero_prob);
  const double all_zero = std::pow(zero_prob, static_cast<double>(clients));
  UpdateCountPmf out{epochs, clients, zero_prob, std::vector<double>(epochs + 1, 0.0)};
  if (epochs == 0) {
    out.p[0] = 1.0;
  } else {
    out.p[0] = all_zero;
    out.p[epochs] = 1.0 - all_zero;
  }
  return out;
}

EmpiricalUpdateCounts simulate_update_counts(PolicyKind policy, std::size_t epochs,
                                             std::size_t clients, double zero_prob,
                                             std::size_t trials, std::uint64_t seed) {
  check_args(clients, zero_prob);
  if (trials < 1) throw ContractError("simulate_update_counts: trials must be at least 1");
  const std::size_t chunks = (trials + kTrialsPerChunk - 1) / kTrialsPerChunk;
  std::vector<std::vector<std::size_t>> counts(chunks, std::vector<std::size_t>(epochs + 1, 0));
  const RandomStream root = RandomStream(seed).derive("update_counts");
  const double p_one = 1.0 - zero_prob;

  auto any_client_kept = [&](RandomStream &s) {
    bool kept = false;
    // Draw every client's bit so the stream position does not depend on
    // earlier outcomes.
    for (std::size_t n = 0; n < clients; ++n) kept |= bernoulli_draw(s, p_one) == 1;
    return kept;
  };

  auto run_chunk = [&](std::size_t c) {
    RandomStream stream = root.derive(c);
    const std::size_t begin = c * kTrialsPerChunk;
    const std::size_t end = std::min(trials, begin + kTrialsPerChunk);
    for (std::size_t t = begin; t < end; ++t) {
      std::size_t f = 0;
      switch (policy) {
      case PolicyKind::NoMask:
      case PolicyKind::FixedPosition:
        f = epochs;
        break;
      case PolicyKind::LockedRandom:
        f = any_client_kept(stream) ? epochs : 0;
        break;
      case PolicyKind::PerEpochRandom:
        for (std::size_t m = 0; m < epochs; ++m) f += any_client_kept(stream) ? 1 : 0;
        break;
      }
      ++counts[c][f];
    }
  };

  const std::size_t workers = std::min(chunks, worker_threads());
  if (workers <= 1) {
    for (std::size_t c = 0; c < chunks; ++c) run_chunk(c);
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t c = w; c < chunks; c += workers) run_chunk(c);
      });
    }
  }

  EmpiricalUpdateCounts out;
  out.trials = trials;
  out.pmf.assign(epochs + 1, 0.0);
  std::vector<std::size_t> total(epochs + 1, 0);
  for (const auto &chunk : counts)
    for (std::size_t f = 0; f <= epochs; ++f) total[f] += chunk[f];
  for (std::size_t f = 0; f <= epochs; ++f)
    out.pmf[f] = static_cast<double>(total[f]) / static_cast<double>(trials);
  if (policy == PolicyKind::FixedPosition) {
    out.positional_pmf.assign(epochs + 1, 0.0);
    out.positional_pmf[0] = 1.0;
  }
  return out;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("total_variation: length mismatch");
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += std::abs(a[i] - b[i]);
  return 0.5 * acc;
}

std::vector<double> UpdateHistogram::epoch_pmf() const {
  std::size_t total = 0;
  for (auto c : by_epoch) total += c;
  std::vector<double> out(by_epoch.size(), 0.0);
  if (total == 0) return out;
  for (std::size_t f = 0; f < by_epoch.size(); ++f)
    out[f] = static_cast<double>(by_epoch[f]) / static_cast<double>(total);
  return out;
}

UpdateHistogram empirical_update_counts_from_run(const FederationResult &run) {
  if (!run.telemetry) {
    throw ConfigError("run was made without update telemetry", "federation.telemetry");
  }
  const UpdateTelemetry &tel = *run.telemetry;
  UpdateHistogram h;
  h.epochs = tel.epochs;
  h.steps = tel.steps;
  h.by_epoch.assign(tel.epochs + 1, 0);
  h.by_step.assign(tel.steps + 1, 0);
  h.positional_by_epoch.assign(tel.epochs + 1, 0);
  for (std::size_t i = 0; i < tel.epoch_counts.count(); ++i) {
    const bool positional = tel.epoch_counts.name(i) == param_names::kPosEmbed;
    for (double v : tel.epoch_counts[i].data()) {
      const auto f = static_cast<std::size_t>(v);
      ++h.by_epoch[f];
      if (positional) ++h.positional_by_epoch[f];
    }
    for (double v : tel.step_counts[i].data()) ++h.by_step[static_cast<std::size_t>(v)];
  }
  return h;
}

} // namespace maskfed
