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

#include "maskfed/datasets.hpp"
#include "maskfed/error.hpp"

#include <doctest.h>

#include <array>
#include <cstdlib>
#include <fstream>
#include <iterator>

using namespace maskfed;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> handmade_record() {
  std::vector<std::uint8_t> rec(3073);
  rec[0] = 7;
  for (int r = 0; r < 32; ++r)
    for (int c = 0; c < 32; ++c) {
      rec[1 + r * 32 + c] = 255;                          // R
      rec[1 + 1024 + r * 32 + c] = static_cast<std::uint8_t>(r); // G
      rec[1 + 2048 + r * 32 + c] = static_cast<std::uint8_t>(c); // B
    }
  rec[1 + 1] = 10; // R at row 0, column 1
  return rec;
}

std::vector<std::uint8_t> file_bytes(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

} // namespace

TEST_CASE("records decode channel-planar bytes into interleaved pixels") {
  const LabeledImage s = decode_cifar10_record(handmade_record());
  CHECK(s.label == 7);
  REQUIRE(s.image.rows() == 32);
  REQUIRE(s.image.cols() == 96);
  CHECK(s.image(5, 3 * 3 + 0) == 1.0);
  CHECK(s.image(0, 1 * 3 + 0) == 10.0 / 255.0);
  CHECK(s.image(9, 4 * 3 + 1) == 9.0 / 255.0);
  CHECK(s.image(9, 4 * 3 + 2) == 4.0 / 255.0);

  const LabeledImage zero = decode_cifar10_record(std::vector<std::uint8_t>(3073, 0));
  CHECK(zero.label == 0);
  CHECK(max_abs(zero.image) == 0.0);
  CHECK_THROWS_AS(decode_cifar10_record(std::vector<std::uint8_t>(3072)), FormatError);
}

TEST_CASE("records round trip byte for byte") {
  const auto rec = handmade_record();
  CHECK(encode_cifar10_record(decode_cifar10_record(rec)) == rec);
  LabeledImage bad{Matrix(32, 96), 300};
  CHECK_THROWS_AS(encode_cifar10_record(bad), ContractError);
  CHECK_THROWS_AS(encode_cifar10_record({Matrix(16, 48), 1}), ContractError);
}

TEST_CASE("files round trip and wrong sizes are rejected") {
  const fs::path dir = testutil::scratch_dir("cifar_files");
  Dataset data;
  for (std::uint8_t k = 0; k < 3; ++k) {
    auto rec = handmade_record();
    rec[0] = k;
    rec[100] = k;
    data.push_back(decode_cifar10_record(rec));
  }
  write_cifar10_file(dir / "a.bin", data);
  CHECK(fs::file_size(dir / "a.bin") == 3 * 3073);
  const Dataset back = read_cifar10_file(dir / "a.bin", 3);
  REQUIRE(back.size() == 3);
  for (std::size_t i = 0; i < 3; ++i) {
    CHECK(back[i].label == data[i].label);
    CHECK(back[i].image == data[i].image);
  }

  auto bytes = file_bytes(dir / "a.bin");
  bytes.pop_back();
  std::ofstream(dir / "short.bin", std::ios::binary)
      .write(reinterpret_cast<const char *>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  try {
    read_cifar10_file(dir / "short.bin", 3);
    FAIL("expected FormatError");
  } catch (const FormatError &e) {
    const std::string msg = e.what();
    CHECK(msg.find("expected 9219 bytes, got 9218") != std::string::npos);
  }
  CHECK_THROWS_AS(read_cifar10_file(dir / "short.bin"), FormatError);
  CHECK_THROWS_AS(read_cifar10_file(dir / "missing.bin"), IoError);
}

TEST_CASE("directory loader insists on full-size files") {
  const fs::path dir = testutil::scratch_dir("cifar_dir");
  const Dataset one{decode_cifar10_record(handmade_record())};
  write_cifar10_file(dir / "test_batch.bin", one);
  CHECK_THROWS_AS(load_cifar10_binary(dir, Split::Test), FormatError);
  CHECK_THROWS_AS(load_cifar10_binary(dir, Split::Train), IoError);
}

TEST_CASE("synthetic data is deterministic, class-major and in range") {
  SynthSpec spec;
  spec.classes = 3;
  spec.per_class = 4;
  spec.height = 8;
  spec.width = 6;
  spec.seed = 11;
  const Dataset a = synth_dataset(spec), b = synth_dataset(spec);
  REQUIRE(a.size() == 12);
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].label == static_cast<int>(i / 4));
    CHECK(a[i].image == b[i].image);
    CHECK(a[i].image.rows() == 8);
    CHECK(a[i].image.cols() == 18);
    for (double v : a[i].image.data()) REQUIRE((v >= 0.0 && v <= 1.0));
  }
  CHECK_FALSE(a[0].image == a[1].image);

  spec.seed = 12;
  CHECK_FALSE(synth_dataset(spec)[0].image == a[0].image);
}

TEST_CASE("zero noise gives the class template and first_index shifts samples") {
  SynthSpec spec;
  spec.classes = 2;
  spec.per_class = 3;
  spec.noise = 0.0;
  const Dataset clean = synth_dataset(spec);
  CHECK(clean[0].image == clean[2].image);
  CHECK_FALSE(clean[0].image == clean[3].image);

  spec.noise = 0.2;
  spec.per_class = 4;
  const Dataset full = synth_dataset(spec);
  spec.per_class = 2;
  spec.first_index = 2;
  const Dataset tail = synth_dataset(spec);
  CHECK(tail[0].image == full[2].image);
  CHECK(tail[3].image == full[7].image);
  CHECK(tail[2].label == 1);

  spec.classes = 1;
  CHECK_THROWS_AS(synth_dataset(spec), ConfigError);
}

TEST_CASE("bilinear resize") {
  const Matrix img = testutil::random_matrix(5, 15, 4);
  CHECK(resize_bilinear(img, 3, 5, 5) == img);
  const Matrix flat(4, 8, 0.3);
  const Matrix up = resize_bilinear(flat, 2, 7, 9);
  REQUIRE(up.rows() == 7);
  REQUIRE(up.cols() == 18);
  for (double v : up.data()) CHECK(v == doctest::Approx(0.3).epsilon(1e-15));

  // 2x2 checkerboard upsampled to 3x3: the centre is the mean of all four.
  const Matrix board{{0.0, 1.0}, {1.0, 0.0}};
  const Matrix mid = resize_bilinear(board, 1, 3, 3);
  CHECK(mid(1, 1) == doctest::Approx(0.5));
  CHECK(mid(0, 0) == 0.0);
  CHECK(mid(0, 2) == 1.0);
  CHECK(mid(0, 1) == doctest::Approx(0.5));
  CHECK_THROWS_AS(resize_bilinear(Matrix(2, 5), 2, 3, 3), ContractError);
  CHECK_THROWS_AS(resize_bilinear(board, 1, 0, 3), ContractError);
}

TEST_CASE("real CIFAR-10 test split, when available") {
  const char *dir = std::getenv("MASKFED_CIFAR10_DIR");
  if (dir == nullptr) {
    MESSAGE("MASKFED_CIFAR10_DIR not set; skipping");
    return;
  }
  const Dataset test = load_cifar10_binary(dir, Split::Test);
  REQUIRE(test.size() == 10000);
  std::array<int, 10> counts{};
  for (const auto &s : test) ++counts.at(static_cast<std::size_t>(s.label));
  for (int c : counts) CHECK(c == 1000);
  // Independent read of the first record straight from the file.
  const auto bytes = file_bytes(fs::path(dir) / "test_batch.bin");
  CHECK(test[0].label == bytes[0]);
  CHECK(test[0].image(0, 0) == bytes[1] / 255.0);
  CHECK(test[0].image(31, 31 * 3 + 2) == bytes[3072] / 255.0);
}
