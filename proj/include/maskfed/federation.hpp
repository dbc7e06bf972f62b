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

#include "maskfed/masking.hpp"
#include "maskfed/param_tree.hpp"
#include "maskfed/sample.hpp"
#include "maskfed/vit.hpp"

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace maskfed {

struct FederationConfig {
  std::size_t num_clients = 5;
  std::size_t epochs = 10;
  std::size_t batch_size = 8;
  double learning_rate = 1e-4;
  MaskPolicy policy;
  std::uint64_t root_seed = 0;
  ModelConfig model;
  // Record per-entry update counts (rounds where at least one client
  // contributed).
  bool telemetry = false;

  void validate() const;
};

struct ClientUpdate {
  std::size_t client = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;
  GradSet masked_grads;
  BinaryMask mask;
  double loss = 0.0;
};

struct EpochMetrics {
  std::size_t epoch = 0; // 1-based
  std::size_t step = 0;  // global rounds completed so far
  double mean_train_loss = 0.0;
  double test_accuracy = 0.0;
};

struct ServerState {
  ParamSet params;
  std::size_t step = 0;
  std::vector<EpochMetrics> history;
};

// Seeded shuffle, then contiguous shards whose sizes differ by at most one.
std::vector<Dataset> partition_dataset(const Dataset &data, std::size_t num_clients,
                                       std::uint64_t seed);

/// One FedSGD client step: gradient of the batch loss at the global
/// parameters, masked by the client's mask for this epoch.
ClientUpdate client_train_step(const ParamSet &global, std::span<const LabeledImage> batch,
                               const MaskPolicy &policy, std::size_t client, std::size_t epoch,
                               std::uint64_t seed, const ModelConfig &cfg, std::size_t step = 0);

// w <- w - lr * sum(theta) / N. Requires all-ones masks and a common step.
ServerState aggregate_plain(ServerState server, std::span<const ClientUpdate> updates,
                            double learning_rate);

/// Mask-aware integration. Per entry, d = sum of mask bits over clients;
/// d > 0 gives w <- w - lr * sum(theta') / d, d = 0 leaves w untouched.
/// Sums run in ascending client id order regardless of input order. When
/// `contributors` is non-null it receives the per-entry d.
ServerState aggregate_masked(ServerState server, std::span<const ClientUpdate> updates,
                             double learning_rate, NamedMatrices *contributors = nullptr);

struct UpdateTelemetry {
  // Number of rounds in which each entry was updated (d > 0).
  NamedMatrices step_counts;
  // Number of epochs in which each entry was updated at least once.
  NamedMatrices epoch_counts;
  std::size_t epochs = 0;
  std::size_t steps = 0;
};

struct FederationResult {
  ServerState state;
  std::optional<UpdateTelemetry> telemetry;
};

/// Runs `epochs` epochs of the five-step protocol. Each epoch has
/// ceil(max shard / batch_size) rounds; in each round every client with
/// data left contributes one batch. Test accuracy is recorded at the end of
/// every epoch. Initial parameters default to init_params(model, root_seed).
FederationResult run_federation(const FederationConfig &cfg, const Dataset &train,
                                const Dataset &test,
                                const std::optional<ParamSet> &initial = std::nullopt);

// Worker count for client-parallel work: MASKFED_THREADS if set, otherwise
// the hardware concurrency.
std::size_t worker_threads();

} // namespace maskfed
