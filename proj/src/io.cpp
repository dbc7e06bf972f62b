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

#include "maskfed/io.hpp"

#include "maskfed/error.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <memory>
#include <system_error>

namespace maskfed {

static_assert(std::endian::native == std::endian::little,
              "binary dumps assume a little-endian host");

void write_file_atomic(const std::filesystem::path &path, std::string_view bytes) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create " + path.parent_path().string() + ": " + ec.message());
  }
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) throw IoError("write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::filesystem::remove(tmp);
    throw IoError("cannot rename onto " + path.string() + ": " + ec.message());
  }
}

std::string read_file(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return {buf, res.ptr};
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  auto res = std::to_chars(buf, buf + 16, v, 16);
  std::string s(buf, res.ptr);
  return std::string(16 - s.size(), '0') + s;
}

CsvWriter::CsvWriter(std::uint64_t config_hash, std::uint64_t root_seed) {
  buf_ = "# config_hash=" + hex64(config_hash) + " root_seed=" + std::to_string(root_seed) + "\n";
}

void CsvWriter::comment(std::string_view text) {
  buf_ += "# ";
  buf_ += text;
  buf_ += '\n';
}

void CsvWriter::header(std::initializer_list<std::string_view> columns) {
  bool first = true;
  for (auto c : columns) {
    if (!first) buf_ += ',';
    buf_ += c;
    first = false;
  }
  buf_ += '\n';
}

CsvWriter &CsvWriter::cell(std::string_view v) {
  if (row_open_) buf_ += ',';
  buf_ += v;
  row_open_ = true;
  return *this;
}

CsvWriter &CsvWriter::cell(double v) { return cell(std::string_view(format_double(v))); }

CsvWriter &CsvWriter::cell(std::uint64_t v) { return cell(std::string_view(std::to_string(v))); }

void CsvWriter::end_row() {
  buf_ += '\n';
  row_open_ = false;
}

namespace {

void check_image(const Matrix &image, std::size_t channels, const char *what) {
  if (channels == 0 || image.cols() % channels != 0 || image.rows() == 0) {
    throw ContractError(std::string(what) + ": image " + image.shape_str() +
                        " does not hold whole pixels of " + std::to_string(channels) +
                        " channels");
  }
}

template <class T> void put(std::string &out, T v) {
  char raw[sizeof(T)];
  std::memcpy(raw, &v, sizeof(T));
  out.append(raw, sizeof(T));
}

class Reader {
public:
  Reader(std::string_view bytes, const char *what) : bytes_(bytes), what_(what) {}

  template <class T> T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }

private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) {
      throw FormatError(std::string(what_) + ": truncated at byte " + std::to_string(pos_) +
                        " of " + std::to_string(bytes_.size()));
    }
  }
  std::string_view bytes_;
  const char *what_;
  std::size_t pos_ = 0;
};

constexpr std::string_view kImageMagic{"MFIMG\0", 6};
constexpr std::string_view kParamMagic{"MFPRM\0\0\0", 8};

void put_doubles(std::string &out, const Matrix &m) {
  const auto d = m.data();
  out.append(reinterpret_cast<const char *>(d.data()), d.size() * sizeof(double));
}

Matrix get_matrix(Reader &r, std::size_t rows, std::size_t cols) {
  auto raw = r.take(rows * cols * sizeof(double));
  std::vector<double> v(rows * cols);
  std::memcpy(v.data(), raw.data(), raw.size());
  for (double x : v)
    if (!std::isfinite(x)) throw FormatError("non-finite value in stored matrix");
  return Matrix(rows, cols, std::move(v));
}

} // namespace

std::string encode_ppm(const Matrix &image, std::size_t channels) {
  check_image(image, channels, "encode_ppm");
  if (channels != 1 && channels != 3) throw ContractError("encode_ppm: need 1 or 3 channels");
  const std::size_t h = image.rows(), w = image.cols() / channels;
  double lo = INFINITY, hi = -INFINITY;
  for (double v : image.data()) {
    if (std::isfinite(v)) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  std::string out = (channels == 3 ? "P6\n" : "P5\n") + std::to_string(w) + " " +
                    std::to_string(h) + "\n255\n";
  for (double v : image.data()) {
    double t = 0.5;
    if (!std::isfinite(v)) t = 0.0;
    else if (hi > lo) t = (v - lo) / (hi - lo);
    out += static_cast<char>(static_cast<std::uint8_t>(std::lround(std::clamp(t, 0.0, 1.0) * 255.0)));
  }
  return out;
}

std::string encode_mfimg(const Matrix &image, std::size_t channels) {
  check_image(image, channels, "encode_mfimg");
  std::string out(kImageMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.rows()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(image.cols() / channels));
  put<std::uint16_t>(out, static_cast<std::uint16_t>(channels));
  put_doubles(out, image);
  return out;
}

RawImage decode_mfimg(std::string_view bytes) {
  Reader r(bytes, "MFIMG");
  if (r.take(kImageMagic.size()) != kImageMagic) throw FormatError("MFIMG: bad magic");
  const std::size_t h = r.get<std::uint32_t>();
  const std::size_t w = r.get<std::uint32_t>();
  const std::size_t c = r.get<std::uint16_t>();
  if (h == 0 || w == 0 || c == 0) throw FormatError("MFIMG: zero dimension in header");
  RawImage out{get_matrix(r, h, w * c), c};
  if (!r.done()) throw FormatError("MFIMG: trailing bytes after pixel data");
  return out;
}

std::string encode_params(const NamedMatrices &params) {
  std::string out(kParamMagic);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(params.count()));
  for (std::size_t i = 0; i < params.count(); ++i) {
    const std::string &name = params.name(i);
    put<std::uint32_t>(out, static_cast<std::uint32_t>(name.size()));
    out += name;
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params[i].rows()));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(params[i].cols()));
    put_doubles(out, params[i]);
  }
  return out;
}

NamedMatrices decode_params(std::string_view bytes) {
  Reader r(bytes, "MFPRM");
  if (r.take(kParamMagic.size()) != kParamMagic) throw FormatError("MFPRM: bad magic");
  const std::size_t count = r.get<std::uint32_t>();
  auto layout = std::make_shared<ParamLayout>();
  std::vector<Matrix> values;
  for (std::size_t i = 0; i < count; ++i) {
    std::string name(r.take(r.get<std::uint32_t>()));
    const std::size_t rows = r.get<std::uint32_t>();
    const std::size_t cols = r.get<std::uint32_t>();
    if (layout->contains(name)) throw FormatError("MFPRM: duplicate entry " + name);
    layout->add(name, {rows, cols});
    values.push_back(get_matrix(r, rows, cols));
  }
  if (!r.done()) throw FormatError("MFPRM: trailing bytes after last entry");
  NamedMatrices out(layout);
  for (std::size_t i = 0; i < count; ++i) out[i] = std::move(values[i]);
  return out;
}

} // namespace maskfed
