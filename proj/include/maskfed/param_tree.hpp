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

#include "maskfed/matrix.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace maskfed {

struct Shape {
  std::size_t rows = 0;
  std::size_t cols = 0;
  friend bool operator==(const Shape &, const Shape &) = default;
};

/// Ordered list of named matrix shapes. The order is canonical: masks,
/// aggregation and serialization all walk entries in this order.
class ParamLayout {
public:
  void add(std::string name, Shape shape);

  std::size_t count() const noexcept { return names_.size(); }
  const std::string &name(std::size_t i) const { return names_[i]; }
  Shape shape(std::size_t i) const { return shapes_[i]; }
  bool contains(std::string_view name) const;
  // Throws ContractError for unknown names.
  std::size_t index_of(std::string_view name) const;
  std::size_t scalar_count() const noexcept;

  friend bool operator==(const ParamLayout &a, const ParamLayout &b) {
    return a.names_ == b.names_ && a.shapes_ == b.shapes_;
  }

private:
  std::vector<std::string> names_;
  std::vector<Shape> shapes_;
  std::unordered_map<std::string, std::size_t> index_;
};

/// A tree of named matrices conforming to a shared ParamLayout. Used for
/// parameters, gradients and binary masks alike.
class NamedMatrices {
public:
  NamedMatrices() = default;
  explicit NamedMatrices(std::shared_ptr<const ParamLayout> layout, double fill = 0.0);

  const ParamLayout &layout() const { return *layout_; }
  const std::shared_ptr<const ParamLayout> &layout_ptr() const { return layout_; }

  std::size_t count() const noexcept { return values_.size(); }
  const std::string &name(std::size_t i) const { return layout_->name(i); }

  Matrix &operator[](std::size_t i) { return values_[i]; }
  const Matrix &operator[](std::size_t i) const { return values_[i]; }
  Matrix &at(std::string_view name) { return values_[layout_->index_of(name)]; }
  const Matrix &at(std::string_view name) const { return values_[layout_->index_of(name)]; }

  auto begin() { return values_.begin(); }
  auto end() { return values_.end(); }
  auto begin() const { return values_.begin(); }
  auto end() const { return values_.end(); }

  // Same layout (names and shapes, in order) and matching value shapes.
  bool congruent(const NamedMatrices &o) const;
  std::size_t scalar_count() const noexcept;

  friend bool operator==(const NamedMatrices &a, const NamedMatrices &b) {
    return a.values_ == b.values_ &&
           (a.layout_ == b.layout_ || (a.layout_ && b.layout_ && *a.layout_ == *b.layout_));
  }

private:
  std::shared_ptr<const ParamLayout> layout_;
  std::vector<Matrix> values_;
};

using ParamSet = NamedMatrices;
using GradSet = NamedMatrices;

// Throws ContractError naming `what` when a and b are not congruent.
void require_congruent(const NamedMatrices &a, const NamedMatrices &b, const char *what);

double max_abs_diff(const NamedMatrices &a, const NamedMatrices &b);

} // namespace maskfed
