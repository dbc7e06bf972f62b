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

#include "maskfed/federation.hpp"

#include "maskfed/error.hpp"
#include "maskfed/random.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <numeric>
#include <thread>

namespace maskfed {

void FederationConfig::validate() const {
  if (num_clients < 1) throw ConfigError("need at least one client", "federation.clients");
  if (batch_size < 1) throw ConfigError("must be at least 1", "federation.batch_size");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("must be positive", "federation.learning_rate");
  }
  model.validate();
  const auto layout = make_layout(model);
  policy.validate(layout.get());
}

std::size_t worker_threads() {
  std::size_t n = std::max(1u, std::thread::hardware_concurrency());
  if (const char *env = std::getenv("MASKFED_THREADS")) {
    char *end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (end != env && v > 0) n = v;
  }
  return n;
}

std::vector<Dataset> partition_dataset(const Dataset &data, std::size_t num_clients,
                                       std::uint64_t seed) {
  if (num_clients == 0) throw ConfigError("need at least one client", "federation.clients");
  if (data.size() < num_clients) {
    throw ConfigError("dataset has " + std::to_string(data.size()) +
                          " items, fewer than the " + std::to_string(num_clients) + " clients",
                      "federation.clients");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  RandomStream stream = RandomStream(seed).derive("partition");
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[stream.below(i)]);
  }
  std::vector<Dataset> shards(num_clients);
  const std::size_t base = data.size() / num_clients;
  const std::size_t extra = data.size() % num_clients;
  std::size_t pos = 0;
  for (std::size_t n = 0; n < num_clients; ++n) {
    const std::size_t len = base + (n < extra ? 1 : 0);
    shards[n].reserve(len);
    for (std::size_t k = 0; k < len; ++k) shards[n].push_back(data[order[pos++]]);
  }
  return shards;
}

ClientUpdate client_train_step(const ParamSet &global, std::span<const LabeledImage> batch,
                               const MaskPolicy &policy, std::size_t client, std::size_t epoch,
                               std::uint64_t seed, const ModelConfig &cfg, std::size_t step) {
  LossGrad lg = loss_and_grad(batch, global, cfg);
  BinaryMask mask = generate_mask(policy, global.layout_ptr(), client, epoch, seed);
  GradSet masked = apply_mask(lg.grads, mask);
  return {client, epoch, step, std::move(masked), std::move(mask), lg.loss};
}

namespace {

void require_common_round(std::span<const ClientUpdate> updates, const ServerState &server,
                          const char *what) {
  if (updates.empty()) throw ContractError(std::string(what) + ": no client updates");
  for (const auto &u : updates) {
    if (u.step != updates.front().step || u.epoch != updates.front().epoch) {
      throw ContractError(std::string(what) + ": updates come from different rounds (step " +
                          std::to_string(updates.front().step) + " vs " +
                          std::to_string(u.step) + ")");
    }
    require_congruent(server.params, u.masked_grads, what);
    require_congruent(server.params, u.mask.bits, what);
  }
}

std::vector<const ClientUpdate *> canonical_order(std::span<const ClientUpdate> updates) {
  std::vector<const ClientUpdate *> order;
  order.reserve(updates.size());
  for (const auto &u : updates) order.push_back(&u);
  std::stable_sort(order.begin(), order.end(),
                   [](const ClientUpdate *a, const ClientUpdate *b) { return a->client < b->client; });
  return order;
}

} // namespace

ServerState aggregate_plain(ServerState server, std::span<const ClientUpdate> updates,
                            double learning_rate) {
  require_common_round(updates, server, "aggregate_plain");
  for (const auto &u : updates) {
    if (u.mask.zero_count() != 0) {
      throw ContractError("aggregate_plain: update from client " + std::to_string(u.client) +
                          " is masked; use aggregate_masked");
    }
  }
  const auto order = canonical_order(updates);
  const double count = static_cast<double>(updates.size());
  for (std::size_t i = 0; i < server.params.count(); ++i) {
    auto w = server.params[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      double sum = 0.0;
      for (const ClientUpdate *u : order) sum += u->masked_grads[i].data()[k];
      w[k] -= learning_rate * (sum / count);
    }
  }
  ++server.step;
  return server;
}

ServerState aggregate_masked(ServerState server, std::span<const ClientUpdate> updates,
                             double learning_rate, NamedMatrices *contributors) {
  require_common_round(updates, server, "aggregate_masked");
  const auto order = canonical_order(updates);
  if (contributors) *contributors = NamedMatrices(server.params.layout_ptr());
  for (std::size_t i = 0; i < server.params.count(); ++i) {
    auto w = server.params[i].data();
    for (std::size_t k = 0; k < w.size(); ++k) {
      double sum = 0.0;
      double count = 0.0;
      for (const ClientUpdate *u : order) {
        sum += u->masked_grads[i].data()[k];
        count += u->mask.bits[i].data()[k];
      }
      if (contributors) (*contributors)[i].data()[k] = count;
      if (count > 0.0) w[k] -= learning_rate * (sum / count);
    }
  }
  ++server.step;
  return server;
}

namespace {

template <typename Fn> void parallel_for(std::size_t n, Fn &&fn) {
  const std::size_t workers = std::min(n, worker_threads());
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      try {
        for (std::size_t i = w; i < n; i += workers) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (auto &e : errors)
    if (e) std::rethrow_exception(e);
}

} // namespace

FederationResult run_federation(const FederationConfig &cfg, const Dataset &train,
                                const Dataset &test, const std::optional<ParamSet> &initial) {
  cfg.validate();
  FederationResult result;
  ServerState &server = result.state;
  server.params = initial ? *initial : init_params(cfg.model, cfg.root_seed);
  if (server.params.layout() != *make_layout(cfg.model)) {
    throw ContractError("run_federation: initial parameters do not match the model config");
  }
  const auto shards = partition_dataset(train, cfg.num_clients, cfg.root_seed);
  std::size_t longest = 0;
  for (const auto &s : shards) longest = std::max(longest, s.size());
  const std::size_t steps_per_epoch = (longest + cfg.batch_size - 1) / cfg.batch_size;
  const bool plain = cfg.policy.kind == PolicyKind::NoMask;

  if (cfg.telemetry) {
    result.telemetry = UpdateTelemetry{NamedMatrices(server.params.layout_ptr()),
                                       NamedMatrices(server.params.layout_ptr()), cfg.epochs,
                                       cfg.epochs * steps_per_epoch};
  }

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    double loss_sum = 0.0;
    std::size_t loss_count = 0;
    NamedMatrices touched_this_epoch;
    if (cfg.telemetry) touched_this_epoch = NamedMatrices(server.params.layout_ptr());

    for (std::size_t s = 0; s < steps_per_epoch; ++s) {
      std::vector<std::size_t> active;
      for (std::size_t n = 0; n < cfg.num_clients; ++n)
        if (s * cfg.batch_size < shards[n].size()) active.push_back(n);

      // Steps 1-4: every client computes its masked gradient at the
      // current global parameters.
      std::vector<ClientUpdate> updates(active.size());
      parallel_for(active.size(), [&](std::size_t i) {
        const std::size_t n = active[i];
        const Dataset &shard = shards[n];
        const std::size_t begin = s * cfg.batch_size;
        const std::size_t end = std::min(shard.size(), begin + cfg.batch_size);
        updates[i] = client_train_step(
            server.params, std::span<const LabeledImage>(shard).subspan(begin, end - begin),
            cfg.policy, n, epoch, cfg.root_seed, cfg.model, server.step);
      });
      for (const auto &u : updates) {
        if (!std::isfinite(u.loss)) {
          throw NumericError("non-finite training loss at epoch " + std::to_string(epoch + 1) +
                             ", step " + std::to_string(s + 1) + " (client " +
                             std::to_string(u.client) + ")");
        }
        loss_sum += u.loss;
        ++loss_count;
      }

      // Step 5: integration.
      NamedMatrices contributors;
      if (plain) {
        server = aggregate_plain(std::move(server), updates, cfg.learning_rate);
        if (cfg.telemetry) {
          contributors = NamedMatrices(server.params.layout_ptr(),
                                       static_cast<double>(updates.size()));
        }
      } else {
        server = aggregate_masked(std::move(server), updates, cfg.learning_rate,
                                  cfg.telemetry ? &contributors : nullptr);
      }
      for (std::size_t i = 0; i < server.params.count(); ++i) {
        if (!server.params[i].all_finite()) {
          throw NumericError("non-finite parameter " + server.params.name(i) + " at epoch " +
                             std::to_string(epoch + 1) + ", step " + std::to_string(s + 1));
        }
      }
      if (cfg.telemetry) {
        for (std::size_t i = 0; i < contributors.count(); ++i) {
          auto d = contributors[i].data();
          auto steps = result.telemetry->step_counts[i].data();
          auto touched = touched_this_epoch[i].data();
          for (std::size_t k = 0; k < d.size(); ++k) {
            if (d[k] > 0.0) {
              steps[k] += 1.0;
              touched[k] = 1.0;
            }
          }
        }
      }
    }
    if (cfg.telemetry) {
      for (std::size_t i = 0; i < touched_this_epoch.count(); ++i)
        result.telemetry->epoch_counts[i] += touched_this_epoch[i];
    }
    EpochMetrics row;
    row.epoch = epoch + 1;
    row.step = server.step;
    row.mean_train_loss = loss_count ? loss_sum / static_cast<double>(loss_count) : 0.0;
    row.test_accuracy = accuracy(test, server.params, cfg.model);
    server.history.push_back(row);
  }
  return result;
}

} // namespace maskfed
