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

#include "maskfed/param_tree.hpp"

#include <cstdint>
#include <map>
#include <memory>
#include <string>

namespace maskfed {

enum class PolicyKind { NoMask, PerEpochRandom, LockedRandom, FixedPosition };

/// How a client zeroes gradient entries before sending them.
///
/// `zero_prob` is the probability R that a mask entry is 0. `overrides` maps
/// parameter entry names to a per-entry R (random policies only).
struct MaskPolicy {
  PolicyKind kind = PolicyKind::NoMask;
  double zero_prob = 0.0;
  std::map<std::string, double> overrides;

  static MaskPolicy none() { return {}; }
  static MaskPolicy per_epoch(double r, std::map<std::string, double> overrides = {}) {
    return {PolicyKind::PerEpochRandom, r, std::move(overrides)};
  }
  static MaskPolicy locked(double r, std::map<std::string, double> overrides = {}) {
    return {PolicyKind::LockedRandom, r, std::move(overrides)};
  }
  static MaskPolicy fixed_position() { return {PolicyKind::FixedPosition, 0.0, {}}; }

  // Accepts "none", "per_epoch", "locked", "fixed_position".
  static MaskPolicy parse(const std::string &name, double zero_prob);

  bool is_random() const {
    return kind == PolicyKind::PerEpochRandom || kind == PolicyKind::LockedRandom;
  }
  // Short name as accepted by parse().
  std::string name() const;
  // R for the given entry, honoring overrides.
  double zero_prob_for(const std::string &entry) const;

  // Throws ConfigError on probabilities outside [0, 1] or override keys that
  // are not entries of `layout` (when given).
  void validate(const ParamLayout *layout = nullptr) const;
};

struct MaskProvenance {
  std::size_t client = 0;
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
};

// {0, 1}-valued tree congruent to the gradient tree it is applied to.
struct BinaryMask {
  NamedMatrices bits;
  MaskProvenance provenance;

  std::size_t zero_count() const;
};

/// Mask for client `client` in epoch `epoch`. Random policies draw entry
/// bits from a stream keyed by (seed, client, epoch, entry name), so masks
/// can be regenerated anywhere without being stored. LockedRandom always
/// uses the epoch-0 key.
BinaryMask generate_mask(const MaskPolicy &policy, std::shared_ptr<const ParamLayout> layout,
                         std::size_t client, std::size_t epoch, std::uint64_t seed);

// Elementwise product. Masked entries become exactly +0.0; kept entries are
// copied bit for bit.
GradSet apply_mask(const GradSet &grads, const BinaryMask &mask);

} // namespace maskfed
