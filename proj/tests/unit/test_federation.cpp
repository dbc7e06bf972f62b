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

#include "maskfed/datasets.hpp"
#include "maskfed/error.hpp"
#include "maskfed/federation.hpp"

#include <doctest.h>

#include <algorithm>
#include <cstdlib>
#include <set>

using namespace maskfed;
using testutil::tiny_model;

namespace {

std::shared_ptr<const ParamLayout> scalar_layout(std::size_t n) {
  auto l = std::make_shared<ParamLayout>();
  l->add("w", {1, n});
  return l;
}

ClientUpdate make_update(const std::shared_ptr<const ParamLayout> &layout, std::size_t client,
                         std::vector<double> grad, std::vector<double> bits) {
  ClientUpdate u;
  u.client = client;
  u.masked_grads = GradSet(layout);
  u.mask.bits = NamedMatrices(layout, 1.0);
  for (std::size_t k = 0; k < grad.size(); ++k) {
    u.mask.bits[0].data()[k] = bits[k];
    u.masked_grads[0].data()[k] = bits[k] * grad[k];
  }
  return u;
}

ServerState server_with(const std::shared_ptr<const ParamLayout> &layout,
                        std::vector<double> w) {
  ServerState s;
  s.params = ParamSet(layout);
  for (std::size_t k = 0; k < w.size(); ++k) s.params[0].data()[k] = w[k];
  return s;
}

Dataset small_synth(std::size_t per_class) {
  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = per_class;
  spec.height = 8;
  spec.width = 8;
  spec.channels = 3;
  spec.seed = 5;
  return synth_dataset(spec);
}

FederationConfig small_fed(MaskPolicy policy, std::size_t epochs) {
  FederationConfig f;
  f.model = tiny_model();
  f.num_clients = 3;
  f.epochs = epochs;
  f.batch_size = 4;
  f.learning_rate = 0.05;
  f.policy = std::move(policy);
  f.root_seed = 17;
  return f;
}

} // namespace

TEST_CASE("partition shuffles deterministically into near-equal shards") {
  Dataset data;
  for (int i = 0; i < 23; ++i) data.push_back({Matrix(1, 1, static_cast<double>(i)), i % 3});
  const auto shards = partition_dataset(data, 5, 9);
  REQUIRE(shards.size() == 5);
  std::multiset<double> seen;
  std::size_t lo = 99, hi = 0;
  for (const auto &s : shards) {
    lo = std::min(lo, s.size());
    hi = std::max(hi, s.size());
    for (const auto &x : s) seen.insert(x.image(0, 0));
  }
  CHECK(hi - lo <= 1);
  CHECK(seen.size() == 23);
  CHECK(std::set<double>(seen.begin(), seen.end()).size() == 23);

  const auto again = partition_dataset(data, 5, 9);
  const auto other = partition_dataset(data, 5, 10);
  bool same = true, differs = false;
  for (std::size_t n = 0; n < 5; ++n)
    for (std::size_t k = 0; k < shards[n].size(); ++k) {
      same &= shards[n][k].image == again[n][k].image;
      differs |= !(shards[n][k].image == other[n][k].image);
    }
  CHECK(same);
  CHECK(differs);
  CHECK_THROWS_AS(partition_dataset(data, 24, 0), ConfigError);
  CHECK_THROWS_AS(partition_dataset(data, 0, 0), ConfigError);
}

TEST_CASE("plain aggregation subtracts the learning rate times the mean") {
  const auto layout = scalar_layout(2);
  const std::vector<ClientUpdate> ups = {make_update(layout, 0, {2.0, -1.0}, {1, 1}),
                                         make_update(layout, 1, {4.0, 3.0}, {1, 1})};
  const ServerState out = aggregate_plain(server_with(layout, {1.0, 0.0}), ups, 0.5);
  CHECK(out.params[0](0, 0) == 1.0 - 0.5 * 3.0);
  CHECK(out.params[0](0, 1) == 0.0 - 0.5 * 1.0);
  CHECK(out.step == 1);
}

TEST_CASE("masked aggregation divides by contributors and skips d = 0") {
  const auto layout = scalar_layout(3);
  // Entry 0: all three contribute. Entry 1: only client 2. Entry 2: nobody.
  const std::vector<ClientUpdate> ups = {make_update(layout, 0, {1.0, 5.0, 7.0}, {1, 0, 0}),
                                         make_update(layout, 1, {2.0, 5.0, 7.0}, {1, 0, 0}),
                                         make_update(layout, 2, {6.0, 8.0, 7.0}, {1, 1, 0})};
  NamedMatrices d;
  const double w2 = 0.123456789;
  const ServerState out = aggregate_masked(server_with(layout, {0.0, 1.0, w2}), ups, 0.1, &d);
  CHECK(out.params[0](0, 0) == doctest::Approx(-0.1 * 3.0));
  CHECK(out.params[0](0, 1) == doctest::Approx(1.0 - 0.1 * 8.0));
  CHECK(out.params[0](0, 2) == w2);
  CHECK(d[0] == Matrix{{3.0, 1.0, 0.0}});
}

TEST_CASE("aggregation is independent of update order") {
  const auto layout = scalar_layout(4);
  std::vector<ClientUpdate> ups;
  for (std::size_t c = 0; c < 5; ++c) {
    const Matrix g = testutil::random_matrix(1, 4, c);
    ups.push_back(make_update(layout, c, {g(0, 0), g(0, 1), g(0, 2), g(0, 3)},
                              {1, double(c % 2), 1, double((c + 1) % 2)}));
  }
  const auto base = server_with(layout, {0.1, 0.2, 0.3, 0.4});
  const ServerState a = aggregate_masked(base, ups, 0.3);
  std::reverse(ups.begin(), ups.end());
  std::rotate(ups.begin(), ups.begin() + 2, ups.end());
  const ServerState b = aggregate_masked(base, ups, 0.3);
  CHECK(a.params == b.params);
}

TEST_CASE("masked aggregation with all-ones masks equals plain aggregation bit for bit") {
  const auto layout = scalar_layout(6);
  std::vector<ClientUpdate> ups;
  for (std::size_t c = 0; c < 3; ++c) {
    const Matrix g = testutil::random_matrix(1, 6, 40 + c);
    ups.push_back(make_update(layout, c, {g.data().begin(), g.data().end()},
                              std::vector<double>(6, 1.0)));
  }
  const auto base = server_with(layout, {1, 2, 3, 4, 5, 6});
  CHECK(aggregate_masked(base, ups, 0.01).params == aggregate_plain(base, ups, 0.01).params);
}

TEST_CASE("aggregation preconditions") {
  const auto layout = scalar_layout(2);
  const auto base = server_with(layout, {0, 0});
  CHECK_THROWS_AS(aggregate_plain(base, std::vector<ClientUpdate>{}, 0.1), ContractError);
  const std::vector<ClientUpdate> masked = {make_update(layout, 0, {1, 1}, {1, 0})};
  CHECK_THROWS_AS(aggregate_plain(base, masked, 0.1), ContractError);
  std::vector<ClientUpdate> rounds = {make_update(layout, 0, {1, 1}, {1, 1}),
                                      make_update(layout, 1, {1, 1}, {1, 1})};
  rounds[1].step = 3;
  CHECK_THROWS_AS(aggregate_masked(base, rounds, 0.1), ContractError);
  const std::vector<ClientUpdate> wrong = {make_update(scalar_layout(3), 0, {1, 1, 1}, {1, 1, 1})};
  CHECK_THROWS_AS(aggregate_masked(base, wrong, 0.1), ContractError);
}

TEST_CASE("client step masks the exact batch gradient") {
  const ModelConfig c = tiny_model();
  const ParamSet p = init_params(c, 1);
  const auto batch = testutil::random_batch(c, 2, 3);
  const auto pol = MaskPolicy::per_epoch(0.5);
  const ClientUpdate u = client_train_step(p, batch, pol, 2, 4, 9, c, 11);
  const LossGrad lg = loss_and_grad(batch, p, c);
  const BinaryMask m = generate_mask(pol, p.layout_ptr(), 2, 4, 9);
  CHECK(u.masked_grads == apply_mask(lg.grads, m));
  CHECK(u.mask.bits == m.bits);
  CHECK(u.loss == lg.loss);
  CHECK(u.client == 2);
  CHECK(u.epoch == 4);
  CHECK(u.step == 11);
}

TEST_CASE("R = 0 reproduces the NoMask trajectory bit for bit") {
  const Dataset data = small_synth(10);
  const auto none = run_federation(small_fed(MaskPolicy::none(), 3), data, data);
  const auto zero = run_federation(small_fed(MaskPolicy::per_epoch(0.0), 3), data, data);
  CHECK(none.state.params == zero.state.params);
  REQUIRE(none.state.history.size() == 3);
  for (std::size_t e = 0; e < 3; ++e) {
    CHECK(none.state.history[e].mean_train_loss == zero.state.history[e].mean_train_loss);
    CHECK(none.state.history[e].test_accuracy == zero.state.history[e].test_accuracy);
  }
  CHECK_FALSE(none.state.params == init_params(tiny_model(), 17));
}

TEST_CASE("FixedPosition leaves E_pos at its initial value") {
  const Dataset data = small_synth(10);
  const auto res = run_federation(small_fed(MaskPolicy::fixed_position(), 2), data, data);
  const ParamSet init = init_params(tiny_model(), 17);
  CHECK(res.state.params.at("E_pos") == init.at("E_pos"));
  CHECK_FALSE(res.state.params.at("E") == init.at("E"));
}

TEST_CASE("history and telemetry bookkeeping") {
  const Dataset data = small_synth(10); // 30 samples, 10 per client, 3 rounds per epoch
  FederationConfig f = small_fed(MaskPolicy::none(), 2);
  f.telemetry = true;
  const auto res = run_federation(f, data, data);
  REQUIRE(res.telemetry);
  CHECK(res.telemetry->steps == 6);
  CHECK(res.state.step == 6);
  CHECK(res.state.history[0].epoch == 1);
  CHECK(res.state.history[1].step == 6);
  for (const auto &m : res.telemetry->step_counts)
    for (double v : m.data()) REQUIRE(v == 6.0);
  for (const auto &m : res.telemetry->epoch_counts)
    for (double v : m.data()) REQUIRE(v == 2.0);

  f.policy = MaskPolicy::fixed_position();
  const auto fixed = run_federation(f, data, data);
  CHECK(max_abs(fixed.telemetry->step_counts.at("E_pos")) == 0.0);
  CHECK(fixed.telemetry->step_counts.at("E")(0, 0) == 6.0);

  f.telemetry = false;
  CHECK_FALSE(run_federation(f, data, data).telemetry);
}

TEST_CASE("zero epochs leave the parameters untouched") {
  const Dataset data = small_synth(4);
  const auto res = run_federation(small_fed(MaskPolicy::per_epoch(0.5), 0), data, data);
  CHECK(res.state.history.empty());
  CHECK(res.state.params == init_params(tiny_model(), 17));
}

TEST_CASE("results do not depend on the worker count") {
  const Dataset data = small_synth(10);
  const auto cfg = small_fed(MaskPolicy::per_epoch(0.5), 2);
  setenv("MASKFED_THREADS", "1", 1);
  const auto serial = run_federation(cfg, data, data);
  setenv("MASKFED_THREADS", "4", 1);
  const auto parallel = run_federation(cfg, data, data);
  unsetenv("MASKFED_THREADS");
  CHECK(serial.state.params == parallel.state.params);
}

TEST_CASE("divergence is reported with its epoch and step") {
  const Dataset data = small_synth(10);
  FederationConfig f = small_fed(MaskPolicy::none(), 20);
  f.learning_rate = 1e300;
  try {
    run_federation(f, data, data);
    FAIL("expected NumericError");
  } catch (const NumericError &e) {
    CHECK(std::string(e.what()).find("epoch") != std::string::npos);
  }
}

TEST_CASE("federation config validation") {
  FederationConfig f = small_fed(MaskPolicy::none(), 1);
  f.num_clients = 0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = small_fed(MaskPolicy::none(), 1);
  f.learning_rate = -1.0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = small_fed(MaskPolicy::per_epoch(2.0), 1);
  CHECK_THROWS_AS(f.validate(), ConfigError);
  f = small_fed(MaskPolicy::none(), 1);
  f.batch_size = 0;
  CHECK_THROWS_AS(f.validate(), ConfigError);
}
