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
#include "maskfed/param_tree.hpp"

#include <cstdint>
#include <filesystem>
#include <initializer_list>
#include <string>
#include <string_view>

namespace maskfed {

// Writes to a sibling temporary file, then renames it over `path`. Creates
// parent directories. Throws IoError.
void write_file_atomic(const std::filesystem::path &path, std::string_view bytes);
std::string read_file(const std::filesystem::path &path);

// Shortest round-trip decimal form; "inf", "-inf" and "nan" for non-finite.
std::string format_double(double v);

/// Accumulates a CSV document in memory. Every file starts with a comment
/// line `# config_hash=<hex> root_seed=<n>`.
class CsvWriter {
public:
  CsvWriter(std::uint64_t config_hash, std::uint64_t root_seed);

  void comment(std::string_view text);
  void header(std::initializer_list<std::string_view> columns);
  CsvWriter &cell(std::string_view v);
  CsvWriter &cell(double v);
  CsvWriter &cell(std::uint64_t v);
  void end_row();

  const std::string &str() const { return buf_; }
  void save(const std::filesystem::path &path) const { write_file_atomic(path, buf_); }

private:
  std::string buf_;
  bool row_open_ = false;
};

std::string hex64(std::uint64_t v);

// Binary PPM (P6 for 3 channels, P5 for 1) of an H x (W*C) image, min-max
// normalized to 8 bits; a flat image maps to mid grey.
std::string encode_ppm(const Matrix &image, std::size_t channels);

/// Raw image dump: "MFIMG\0", u32 H, u32 W, u16 C (16 bytes, little
/// endian), then H*W*C doubles in row-major H x (W*C) order.
std::string encode_mfimg(const Matrix &image, std::size_t channels);
struct RawImage {
  Matrix image;
  std::size_t channels = 0;
};
RawImage decode_mfimg(std::string_view bytes);

/// Parameter dump: "MFPRM\0\0\0", u32 entry count, then per entry u32 name
/// length, name bytes, u32 rows, u32 cols, doubles row-major.
std::string encode_params(const NamedMatrices &params);
NamedMatrices decode_params(std::string_view bytes);

} // namespace maskfed
