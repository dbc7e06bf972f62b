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

#include "maskfed/linalg.hpp"

#include "maskfed/error.hpp"

#include <Eigen/Dense>

namespace maskfed {

namespace {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Map<const RowMajor> view(const Matrix &m) {
  return {m.data().data(), static_cast<Eigen::Index>(m.rows()),
          static_cast<Eigen::Index>(m.cols())};
}

} // namespace

Matrix least_squares(const Matrix &a, const Matrix &b) {
  if (a.rows() == 0 || a.cols() == 0) {
    throw ContractError("least_squares: empty system matrix " + a.shape_str());
  }
  if (a.rows() != b.rows()) {
    throw ContractError("least_squares: row counts differ, " + a.shape_str() + " vs " +
                        b.shape_str());
  }
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(view(a));
  RowMajor x = cod.solve(view(b));
  Matrix out(a.cols(), b.cols());
  std::copy(x.data(), x.data() + x.size(), out.data().begin());
  return out;
}

} // namespace maskfed
