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

#include "maskfed/random.hpp"

#include "maskfed/error.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace maskfed {

namespace {
constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
}

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t fnv1a64(std::string_view s) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RandomStream::RandomStream(std::uint64_t seed) noexcept : key_(splitmix64(seed ^ kGolden)) {}

RandomStream RandomStream::derive(std::uint64_t label) const noexcept {
  // Mix the parent key before combining so derive(a).derive(b) differs from
  // derive(b).derive(a).
  return RandomStream(splitmix64(splitmix64(key_) + splitmix64(label + kGolden)), 0);
}

RandomStream RandomStream::derive(std::string_view label) const noexcept {
  return derive(fnv1a64(label));
}

std::uint64_t RandomStream::next_u64() noexcept {
  ++position_;
  return splitmix64(key_ + position_ * kGolden);
}

double RandomStream::uniform() noexcept {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double RandomStream::uniform(double lo, double hi) noexcept {
  return lo + (hi - lo) * uniform();
}

double RandomStream::normal() noexcept {
  const double u1 = 1.0 - uniform(); // (0, 1]
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

std::uint64_t RandomStream::below(std::uint64_t bound) noexcept {
  if (bound == 0) return 0;
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

int bernoulli_draw(RandomStream &stream, double p_one) {
  if (!(p_one >= 0.0 && p_one <= 1.0)) {
    throw ContractError("bernoulli_draw: probability " + std::to_string(p_one) +
                        " outside [0, 1]");
  }
  return stream.uniform() < p_one ? 1 : 0;
}

} // namespace maskfed
