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

#include "maskfed/error.hpp"
#include "maskfed/masking.hpp"
#include "maskfed/vit.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>

using namespace maskfed;

namespace {

std::shared_ptr<const ParamLayout> big_layout() {
  auto l = std::make_shared<ParamLayout>();
  l->add("E_pos", {17, 16});
  l->add("w", {300, 400});
  return l;
}

double zero_fraction(const BinaryMask &m) {
  return static_cast<double>(m.zero_count()) / static_cast<double>(m.bits.scalar_count());
}

} // namespace

TEST_CASE("policy parsing and names round trip") {
  for (const char *name : {"none", "per_epoch", "locked", "fixed_position"})
    CHECK(MaskPolicy::parse(name, 0.5).name() == name);
  CHECK(MaskPolicy::parse("per_epoch", 0.3).zero_prob == 0.3);
  try {
    MaskPolicy::parse("sometimes", 0.5);
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.key() == "federation.policy");
  }
}

TEST_CASE("policy validation reports key paths") {
  const auto layout = make_layout(ModelConfig{});
  try {
    MaskPolicy::per_epoch(1.2).validate(layout.get());
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.key() == "federation.zero_prob");
  }
  try {
    MaskPolicy::per_epoch(0.5, {{"nope", 0.1}}).validate(layout.get());
    FAIL("expected ConfigError");
  } catch (const ConfigError &e) {
    CHECK(e.key() == "federation.zero_prob_overrides.nope");
  }
  CHECK_THROWS_AS(MaskPolicy::per_epoch(0.5, {{"E", -0.1}}).validate(layout.get()), ConfigError);
  MaskPolicy fixed = MaskPolicy::fixed_position();
  fixed.overrides["E"] = 0.5;
  CHECK_THROWS_AS(fixed.validate(layout.get()), ConfigError);
  auto no_pos = std::make_shared<ParamLayout>();
  no_pos->add("w", {2, 2});
  CHECK_THROWS_AS(MaskPolicy::fixed_position().validate(no_pos.get()), ConfigError);
  CHECK_NOTHROW(MaskPolicy::locked(0.0, {{"E", 1.0}}).validate(layout.get()));
}

TEST_CASE("NoMask is all ones and FixedPosition zeroes exactly E_pos") {
  const auto layout = make_layout(ModelConfig{});
  const BinaryMask none = generate_mask(MaskPolicy::none(), layout, 2, 3, 4);
  CHECK(none.zero_count() == 0);
  const BinaryMask fixed = generate_mask(MaskPolicy::fixed_position(), layout, 2, 3, 4);
  CHECK(fixed.zero_count() == layout->shape(layout->index_of("E_pos")).rows *
                                  layout->shape(layout->index_of("E_pos")).cols);
  CHECK(max_abs(fixed.bits.at("E_pos")) == 0.0);
  CHECK(fixed.provenance.client == 2);
  CHECK(fixed.provenance.epoch == 3);
  CHECK(fixed.provenance.seed == 4);
}

TEST_CASE("random masks hit the requested zero fraction") {
  const auto layout = big_layout(); // 120272 entries
  for (double r : {0.2, 0.5, 0.8}) {
    const BinaryMask m = generate_mask(MaskPolicy::per_epoch(r), layout, 0, 0, 1);
    CHECK(std::abs(zero_fraction(m) - r) < 0.01);
    for (const auto &mat : m.bits)
      for (double v : mat.data()) REQUIRE((v == 0.0 || v == 1.0));
  }
  CHECK(generate_mask(MaskPolicy::per_epoch(0.0), layout, 0, 0, 1).zero_count() == 0);
  CHECK(generate_mask(MaskPolicy::per_epoch(1.0), layout, 0, 0, 1).zero_count() ==
        layout->scalar_count());
}

TEST_CASE("per-epoch masks change with epoch and client; locked masks do not change with epoch") {
  const auto layout = big_layout();
  const auto pe = MaskPolicy::per_epoch(0.5);
  const auto lk = MaskPolicy::locked(0.5);
  CHECK_FALSE(generate_mask(pe, layout, 0, 0, 1).bits == generate_mask(pe, layout, 0, 1, 1).bits);
  CHECK_FALSE(generate_mask(pe, layout, 0, 0, 1).bits == generate_mask(pe, layout, 1, 0, 1).bits);
  CHECK(generate_mask(pe, layout, 3, 5, 1).bits == generate_mask(pe, layout, 3, 5, 1).bits);
  for (std::size_t e = 1; e < 5; ++e)
    CHECK(generate_mask(lk, layout, 0, 0, 1).bits == generate_mask(lk, layout, 0, e, 1).bits);
  CHECK_FALSE(generate_mask(lk, layout, 0, 0, 1).bits == generate_mask(lk, layout, 1, 0, 1).bits);
  CHECK_FALSE(generate_mask(pe, layout, 0, 0, 1).bits == generate_mask(pe, layout, 0, 0, 2).bits);
}

TEST_CASE("per-entry overrides change only the named entry") {
  const auto layout = big_layout();
  const BinaryMask m =
      generate_mask(MaskPolicy::per_epoch(0.0, {{"E_pos", 1.0}}), layout, 0, 0, 1);
  CHECK(max_abs(m.bits.at("E_pos")) == 0.0);
  for (double v : m.bits.at("w").data()) REQUIRE(v == 1.0);
}

TEST_CASE("applying a mask zeroes masked entries and copies the rest bit for bit") {
  const auto layout = make_layout(testutil::tiny_model());
  GradSet g(layout);
  for (std::size_t i = 0; i < g.count(); ++i)
    g[i] = testutil::random_matrix(g[i].rows(), g[i].cols(), 100 + i);
  g[0](0, 0) = -3.5;
  const BinaryMask m = generate_mask(MaskPolicy::per_epoch(0.5), layout, 1, 1, 7);
  const GradSet out = apply_mask(g, m);
  for (std::size_t i = 0; i < g.count(); ++i) {
    for (std::size_t k = 0; k < g[i].size(); ++k) {
      const double v = out[i].data()[k];
      if (m.bits[i].data()[k] == 0.0) {
        REQUIRE(v == 0.0);
        REQUIRE_FALSE(std::signbit(v));
      } else {
        const double orig = g[i].data()[k];
        REQUIRE(std::memcmp(&v, &orig, sizeof v) == 0);
      }
    }
  }
  CHECK(apply_mask(g, generate_mask(MaskPolicy::none(), layout, 0, 0, 0)) == g);

  auto other = std::make_shared<ParamLayout>();
  other->add("w", {1, 1});
  CHECK_THROWS_AS(apply_mask(GradSet(other), m), ContractError);
}
