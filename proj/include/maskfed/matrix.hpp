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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace maskfed {

// Dense row-major matrix of doubles. Every quantity in the model (images,
// parameters, activations, gradients) is carried as one of these.
class Matrix {
public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);
  Matrix(std::initializer_list<std::initializer_list<double>> rows);

  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double &operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  bool same_shape(const Matrix &o) const noexcept {
    return rows_ == o.rows_ && cols_ == o.cols_;
  }
  std::string shape_str() const;

  bool all_finite() const noexcept;

  Matrix &operator+=(const Matrix &o);
  Matrix &operator-=(const Matrix &o);
  Matrix &operator*=(double s);

  friend bool operator==(const Matrix &a, const Matrix &b) {
    return a.rows_ == b.rows_ && a.cols_ == b.cols_ && a.data_ == b.data_;
  }

private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix operator+(Matrix a, const Matrix &b);
Matrix operator-(Matrix a, const Matrix &b);
Matrix operator*(Matrix a, double s);

Matrix matmul(const Matrix &a, const Matrix &b);
// a^T * b without materializing the transpose.
Matrix matmul_tn(const Matrix &a, const Matrix &b);
// a * b^T without materializing the transpose.
Matrix matmul_nt(const Matrix &a, const Matrix &b);
Matrix transpose(const Matrix &a);
Matrix hadamard(const Matrix &a, const Matrix &b);

// Column sums as a 1 x cols row.
Matrix col_sum(const Matrix &a);
// Rows [begin, end).
Matrix slice_rows(const Matrix &a, std::size_t begin, std::size_t end);
// Columns [begin, end).
Matrix slice_cols(const Matrix &a, std::size_t begin, std::size_t end);
void set_cols(Matrix &dst, std::size_t begin, const Matrix &src);

double frobenius_norm(const Matrix &a);
double max_abs(const Matrix &a);
double max_abs_diff(const Matrix &a, const Matrix &b);

} // namespace maskfed
