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

#include "helpers.hpp"

#include "maskfed/analysis.hpp"
#include "maskfed/datasets.hpp"
#include "maskfed/error.hpp"

#include <doctest.h>

#include <cmath>
#include <numeric>

using namespace maskfed;

namespace {

// Binomial probability through log-gamma, independent of the library's
// incremental coefficient.
double binom_oracle(std::size_t m, std::size_t f, double q) {
  if (q == 0.0) return f == 0 ? 1.0 : 0.0;
  if (q == 1.0) return f == m ? 1.0 : 0.0;
  const double lc = std::lgamma(m + 1.0) - std::lgamma(f + 1.0) - std::lgamma(m - f + 1.0);
  return std::exp(lc + f * std::log(q) + (m - f) * std::log1p(-q));
}

} // namespace

TEST_CASE("pmf matches a log-gamma binomial oracle") {
  for (std::size_t m : {1u, 5u, 10u, 37u})
    for (std::size_t n : {1u, 3u, 5u})
      for (double r : {0.1, 0.5, 0.9}) {
        const UpdateCountPmf pmf = update_count_pmf(m, n, r);
        const double q = 1.0 - std::pow(r, static_cast<double>(n));
        REQUIRE(pmf.p.size() == m + 1);
        for (std::size_t f = 0; f <= m; ++f)
          REQUIRE(pmf.p[f] == doctest::Approx(binom_oracle(m, f, q)).epsilon(1e-11));
      }
  // m = 10 epochs, 5 clients, R = 0.5: (31/32)^10.
  CHECK(update_count_pmf(10, 5, 0.5).p[10] == doctest::Approx(0.7281).epsilon(1e-4));
}

TEST_CASE("pmf endpoints") {
  const UpdateCountPmf none = update_count_pmf(8, 4, 0.0);
  CHECK(none.p[8] == 1.0);
  CHECK(std::accumulate(none.p.begin(), none.p.end() - 1, 0.0) == 0.0);
  const UpdateCountPmf all = update_count_pmf(8, 4, 1.0);
  CHECK(all.p[0] == 1.0);
  CHECK(all.p[8] == 0.0);
  CHECK(update_count_pmf(0, 3, 0.5).p == std::vector<double>{1.0});
  CHECK_THROWS_AS(update_count_pmf(5, 0, 0.5), ContractError);
  CHECK_THROWS_AS(update_count_pmf(5, 2, 1.5), ContractError);
}

TEST_CASE("pmf normalizes and has the binomial mean and variance across a grid") {
  for (std::size_t m = 1; m <= 64; m += 7)
    for (std::size_t n = 1; n <= 16; n += 3)
      for (int k = 0; k <= 20; ++k) {
        const double r = 0.05 * k;
        const UpdateCountPmf pmf = update_count_pmf(m, n, r);
        const double q = 1.0 - std::pow(r, static_cast<double>(n));
        REQUIRE(std::abs(std::accumulate(pmf.p.begin(), pmf.p.end(), 0.0) - 1.0) < 1e-12);
        REQUIRE(std::abs(pmf.mean() - m * q) < 1e-10);
        REQUIRE(std::abs(pmf.variance() - m * q * (1.0 - q)) < 1e-9);
        REQUIRE(pmf.cdf().back() == doctest::Approx(1.0).epsilon(1e-12));
      }
}

TEST_CASE("more clients or a lower zero probability shift mass upward") {
  // First-order stochastic dominance: cdf is pointwise no larger.
  const auto few = update_count_pmf(10, 2, 0.5).cdf();
  const auto many = update_count_pmf(10, 8, 0.5).cdf();
  const auto high_r = update_count_pmf(10, 4, 0.8).cdf();
  const auto low_r = update_count_pmf(10, 4, 0.2).cdf();
  for (std::size_t f = 0; f <= 10; ++f) {
    CHECK(many[f] <= few[f] + 1e-15);
    CHECK(low_r[f] <= high_r[f] + 1e-15);
  }
}

TEST_CASE("locked masks are all-or-nothing with the same mean and larger variance") {
  const UpdateCountPmf lk = locked_update_count_pmf(10, 3, 0.6);
  const UpdateCountPmf pe = update_count_pmf(10, 3, 0.6);
  CHECK(lk.p[0] == doctest::Approx(std::pow(0.6, 3)));
  CHECK(lk.p[10] == doctest::Approx(1.0 - std::pow(0.6, 3)));
  for (std::size_t f = 1; f < 10; ++f) CHECK(lk.p[f] == 0.0);
  CHECK(lk.mean() == doctest::Approx(pe.mean()));
  CHECK(lk.variance() > pe.variance());
}

TEST_CASE("Monte Carlo counts agree with the analytic pmf") {
  for (double r : {0.2, 0.5, 0.8}) {
    const auto pe = simulate_update_counts(PolicyKind::PerEpochRandom, 10, 5, r, 100000, 3);
    CHECK(pe.trials == 100000);
    CHECK(total_variation(pe.pmf, update_count_pmf(10, 5, r).p) < 0.01);

    const auto lk = simulate_update_counts(PolicyKind::LockedRandom, 10, 5, r, 100000, 3);
    const double q = std::pow(r, 5.0);
    const double sigma = std::sqrt(q * (1.0 - q) / 100000.0);
    CHECK(std::abs(lk.pmf[0] - q) <= 3.0 * sigma + 1e-12);
    CHECK(lk.pmf[0] + lk.pmf[10] == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("simulation edge cases") {
  const auto one = simulate_update_counts(PolicyKind::PerEpochRandom, 4, 2, 0.0, 1, 1);
  CHECK(one.pmf == std::vector<double>{0, 0, 0, 0, 1});
  const auto none = simulate_update_counts(PolicyKind::NoMask, 4, 2, 0.9, 1000, 1);
  CHECK(none.pmf[4] == 1.0);
  const auto fixed = simulate_update_counts(PolicyKind::FixedPosition, 4, 2, 0.0, 1000, 1);
  CHECK(fixed.pmf[4] == 1.0);
  REQUIRE(fixed.positional_pmf.size() == 5);
  CHECK(fixed.positional_pmf[0] == 1.0);
  CHECK(simulate_update_counts(PolicyKind::PerEpochRandom, 6, 3, 0.5, 9000, 8).pmf ==
        simulate_update_counts(PolicyKind::PerEpochRandom, 6, 3, 0.5, 9000, 8).pmf);
  CHECK_THROWS_AS(simulate_update_counts(PolicyKind::PerEpochRandom, 4, 2, 0.5, 0, 1),
                  ContractError);
  CHECK_THROWS_AS(simulate_update_counts(PolicyKind::PerEpochRandom, 4, 0, 0.5, 10, 1),
                  ContractError);
  CHECK_THROWS_AS(simulate_update_counts(PolicyKind::PerEpochRandom, 4, 2, -0.5, 10, 1),
                  ContractError);
}

TEST_CASE("total variation") {
  const std::vector<double> a{0.5, 0.5, 0.0}, b{0.0, 0.5, 0.5};
  CHECK(total_variation(a, b) == 0.5);
  CHECK(total_variation(a, a) == 0.0);
  CHECK_THROWS_AS(total_variation(a, std::vector<double>{1.0}), ContractError);
}

TEST_CASE("histograms from a federated run") {
  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = 6;
  spec.height = 8;
  spec.width = 8;
  spec.seed = 2;
  const Dataset data = synth_dataset(spec);
  FederationConfig f;
  f.model = testutil::tiny_model();
  f.num_clients = 3;
  f.epochs = 4;
  f.batch_size = 3;
  f.learning_rate = 0.01;
  f.policy = MaskPolicy::fixed_position();
  f.telemetry = true;
  const auto run = run_federation(f, data, data);
  const UpdateHistogram h = empirical_update_counts_from_run(run);
  const std::size_t total = make_layout(f.model)->scalar_count();
  const std::size_t pos = f.model.tokens() * f.model.embed_dim;
  CHECK(h.epochs == 4);
  CHECK(h.steps == 8);
  REQUIRE(h.by_epoch.size() == 5);
  CHECK(h.by_epoch[4] == total - pos);
  CHECK(h.by_epoch[0] == pos);
  CHECK(h.by_step[8] == total - pos);
  CHECK(h.positional_by_epoch[0] == pos);
  CHECK(h.epoch_pmf()[0] == doctest::Approx(double(pos) / total));

  f.telemetry = false;
  try {
    empirical_update_counts_from_run(run_federation(f, data, data));
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.key() == "federation.telemetry");
  }
}
