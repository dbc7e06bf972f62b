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

#include "maskfed/masking.hpp"

#include "maskfed/error.hpp"
#include "maskfed/random.hpp"
#include "maskfed/vit.hpp"

namespace maskfed {

namespace {

bool valid_probability(double p) { return p >= 0.0 && p <= 1.0; }

} // namespace

MaskPolicy MaskPolicy::parse(const std::string &name, double zero_prob) {
  if (name == "none") return none();
  if (name == "per_epoch") return per_epoch(zero_prob);
  if (name == "locked") return locked(zero_prob);
  if (name == "fixed_position") return fixed_position();
  throw ConfigError("unknown mask policy '" + name +
                        "' (expected none, per_epoch, locked, fixed_position)",
                    "federation.policy");
}

std::string MaskPolicy::name() const {
  switch (kind) {
  case PolicyKind::NoMask: return "none";
  case PolicyKind::PerEpochRandom: return "per_epoch";
  case PolicyKind::LockedRandom: return "locked";
  case PolicyKind::FixedPosition: return "fixed_position";
  }
  return "unknown";
}

double MaskPolicy::zero_prob_for(const std::string &entry) const {
  auto it = overrides.find(entry);
  return it == overrides.end() ? zero_prob : it->second;
}

void MaskPolicy::validate(const ParamLayout *layout) const {
  if (!valid_probability(zero_prob)) {
    throw ConfigError("zero probability " + std::to_string(zero_prob) + " outside [0, 1]",
                      "federation.zero_prob");
  }
  if (!overrides.empty() && !is_random()) {
    throw ConfigError("per-layer overrides require a random policy",
                      "federation.zero_prob_overrides");
  }
  for (const auto &[entry, r] : overrides) {
    if (!valid_probability(r)) {
      throw ConfigError("zero probability " + std::to_string(r) + " outside [0, 1]",
                        "federation.zero_prob_overrides." + entry);
    }
    if (layout && !layout->contains(entry)) {
      throw ConfigError("no parameter entry named '" + entry + "'",
                        "federation.zero_prob_overrides." + entry);
    }
  }
  if (kind == PolicyKind::FixedPosition && layout &&
      !layout->contains(param_names::kPosEmbed)) {
    throw ConfigError("fixed_position needs an E_pos entry", "federation.policy");
  }
}

std::size_t BinaryMask::zero_count() const {
  std::size_t n = 0;
  for (const auto &m : bits)
    for (double v : m.data()) n += v == 0.0 ? 1 : 0;
  return n;
}

BinaryMask generate_mask(const MaskPolicy &policy, std::shared_ptr<const ParamLayout> layout,
                         std::size_t client, std::size_t epoch, std::uint64_t seed) {
  policy.validate(layout.get());
  BinaryMask mask{NamedMatrices(std::move(layout), 1.0), {client, epoch, seed}};
  switch (policy.kind) {
  case PolicyKind::NoMask:
    break;
  case PolicyKind::FixedPosition:
    for (double &v : mask.bits.at(param_names::kPosEmbed).data()) v = 0.0;
    break;
  case PolicyKind::PerEpochRandom:
  case PolicyKind::LockedRandom: {
    const std::size_t key_epoch = policy.kind == PolicyKind::LockedRandom ? 0 : epoch;
    const RandomStream base =
        RandomStream(seed).derive("mask").derive(client).derive(key_epoch);
    for (std::size_t i = 0; i < mask.bits.count(); ++i) {
      const std::string &entry = mask.bits.name(i);
      const double p_one = 1.0 - policy.zero_prob_for(entry);
      RandomStream stream = base.derive(entry);
      for (double &v : mask.bits[i].data()) v = bernoulli_draw(stream, p_one);
    }
    break;
  }
  }
  return mask;
}

GradSet apply_mask(const GradSet &grads, const BinaryMask &mask) {
  require_congruent(grads, mask.bits, "apply_mask");
  GradSet out = grads;
  for (std::size_t i = 0; i < out.count(); ++i) {
    auto g = out[i].data();
    auto b = mask.bits[i].data();
    for (std::size_t k = 0; k < g.size(); ++k)
      if (b[k] == 0.0) g[k] = 0.0;
  }
  return out;
}

} // namespace maskfed
