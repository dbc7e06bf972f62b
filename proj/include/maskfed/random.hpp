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

#include <cstdint>
#include <string_view>

namespace maskfed {

std::uint64_t splitmix64(std::uint64_t x) noexcept;
std::uint64_t fnv1a64(std::string_view s) noexcept;

/// Counter-based random stream.
///
/// Draw k of a stream with key K is splitmix64(K + (k+1) * golden), so the
/// sequence depends only on the key and never on the order in which other
/// streams were consumed. Child streams are derived by hashing labels into
/// the key, which is how per-(client, epoch, layer) masks stay reproducible
/// without storing them.
class RandomStream {
public:
  explicit RandomStream(std::uint64_t seed) noexcept;

  RandomStream derive(std::uint64_t label) const noexcept;
  RandomStream derive(std::string_view label) const noexcept;

  std::uint64_t next_u64() noexcept;
  // Uniform on [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept;
  // Standard normal via Box-Muller (no cached second value, so each call
  // consumes exactly two draws).
  double normal() noexcept;
  std::uint64_t below(std::uint64_t bound) noexcept;

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t position() const noexcept { return position_; }

private:
  RandomStream(std::uint64_t key, int) noexcept : key_(key) {}
  std::uint64_t key_;
  std::uint64_t position_ = 0;
};

// Returns 1 with probability p_one. Throws ContractError for p_one outside
// [0, 1].
int bernoulli_draw(RandomStream &stream, double p_one);

} // namespace maskfed
