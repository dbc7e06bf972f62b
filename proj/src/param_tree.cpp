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

#include "maskfed/param_tree.hpp"

#include "maskfed/error.hpp"

#include <algorithm>

namespace maskfed {

void ParamLayout::add(std::string name, Shape shape) {
  if (index_.contains(name)) throw ContractError("ParamLayout: duplicate entry " + name);
  index_.emplace(name, names_.size());
  names_.push_back(std::move(name));
  shapes_.push_back(shape);
}

bool ParamLayout::contains(std::string_view name) const {
  return index_.contains(std::string(name));
}

std::size_t ParamLayout::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) throw ContractError("unknown parameter '" + std::string(name) + "'");
  return it->second;
}

std::size_t ParamLayout::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto &s : shapes_) n += s.rows * s.cols;
  return n;
}

NamedMatrices::NamedMatrices(std::shared_ptr<const ParamLayout> layout, double fill)
    : layout_(std::move(layout)) {
  values_.reserve(layout_->count());
  for (std::size_t i = 0; i < layout_->count(); ++i) {
    const Shape s = layout_->shape(i);
    values_.emplace_back(s.rows, s.cols, fill);
  }
}

bool NamedMatrices::congruent(const NamedMatrices &o) const {
  if (!layout_ || !o.layout_ || values_.size() != o.values_.size()) return false;
  if (layout_ != o.layout_ && !(*layout_ == *o.layout_)) return false;
  for (std::size_t i = 0; i < values_.size(); ++i)
    if (!values_[i].same_shape(o.values_[i])) return false;
  return true;
}

std::size_t NamedMatrices::scalar_count() const noexcept {
  std::size_t n = 0;
  for (const auto &m : values_) n += m.size();
  return n;
}

void require_congruent(const NamedMatrices &a, const NamedMatrices &b, const char *what) {
  if (!a.congruent(b)) {
    throw ContractError(std::string(what) + ": parameter trees are not shape-congruent");
  }
}

double max_abs_diff(const NamedMatrices &a, const NamedMatrices &b) {
  require_congruent(a, b, "max_abs_diff");
  double m = 0.0;
  for (std::size_t i = 0; i < a.count(); ++i) m = std::max(m, max_abs_diff(a[i], b[i]));
  return m;
}

} // namespace maskfed
