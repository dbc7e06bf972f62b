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

#include "maskfed/datasets.hpp"

#include "maskfed/error.hpp"
#include "maskfed/random.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>

namespace maskfed {

LabeledImage decode_cifar10_record(std::span<const std::uint8_t> record) {
  using namespace cifar10;
  if (record.size() != kRecordBytes) {
    throw FormatError("CIFAR-10 record: expected " + std::to_string(kRecordBytes) +
                      " bytes, got " + std::to_string(record.size()));
  }
  LabeledImage out{Matrix(kSide, kSide * kChannels), record[0]};
  const std::size_t plane = kSide * kSide;
  for (std::size_t ch = 0; ch < kChannels; ++ch)
    for (std::size_t r = 0; r < kSide; ++r)
      for (std::size_t c = 0; c < kSide; ++c)
        out.image(r, c * kChannels + ch) = record[1 + ch * plane + r * kSide + c] / 255.0;
  return out;
}

std::vector<std::uint8_t> encode_cifar10_record(const LabeledImage &sample) {
  using namespace cifar10;
  if (sample.image.rows() != kSide || sample.image.cols() != kSide * kChannels) {
    throw ContractError("encode_cifar10_record: image is " + sample.image.shape_str() +
                        ", expected 32x96");
  }
  if (sample.label < 0 || sample.label > 255) {
    throw ContractError("encode_cifar10_record: label does not fit in a byte");
  }
  std::vector<std::uint8_t> rec(kRecordBytes);
  rec[0] = static_cast<std::uint8_t>(sample.label);
  const std::size_t plane = kSide * kSide;
  for (std::size_t ch = 0; ch < kChannels; ++ch)
    for (std::size_t r = 0; r < kSide; ++r)
      for (std::size_t c = 0; c < kSide; ++c) {
        const double v = std::clamp(sample.image(r, c * kChannels + ch), 0.0, 1.0);
        rec[1 + ch * plane + r * kSide + c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
      }
  return rec;
}

Dataset read_cifar10_file(const std::filesystem::path &file, std::size_t expected_records) {
  using namespace cifar10;
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot open " + file.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  if (expected_records != 0 && bytes.size() != expected_records * kRecordBytes) {
    throw FormatError(file.string() + ": expected " +
                      std::to_string(expected_records * kRecordBytes) + " bytes, got " +
                      std::to_string(bytes.size()));
  }
  if (bytes.empty() || bytes.size() % kRecordBytes != 0) {
    throw FormatError(file.string() + ": size " + std::to_string(bytes.size()) +
                      " is not a positive multiple of the " + std::to_string(kRecordBytes) +
                      "-byte record");
  }
  Dataset out;
  out.reserve(bytes.size() / kRecordBytes);
  for (std::size_t off = 0; off < bytes.size(); off += kRecordBytes) {
    out.push_back(decode_cifar10_record(std::span(bytes).subspan(off, kRecordBytes)));
  }
  return out;
}

void write_cifar10_file(const std::filesystem::path &file, std::span<const LabeledImage> data) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + file.string());
  for (const auto &s : data) {
    const auto rec = encode_cifar10_record(s);
    out.write(reinterpret_cast<const char *>(rec.data()), static_cast<std::streamsize>(rec.size()));
  }
  if (!out) throw IoError("write failed for " + file.string());
}

Dataset load_cifar10_binary(const std::filesystem::path &dir, Split which) {
  using namespace cifar10;
  Dataset out;
  if (which == Split::Test) return read_cifar10_file(dir / "test_batch.bin", kRecordsPerFile);
  out.reserve(kTrainRecords);
  for (int i = 1; i <= 5; ++i) {
    Dataset part =
        read_cifar10_file(dir / ("data_batch_" + std::to_string(i) + ".bin"), kRecordsPerFile);
    std::move(part.begin(), part.end(), std::back_inserter(out));
  }
  return out;
}

Dataset synth_dataset(const SynthSpec &spec) {
  if (spec.classes < 2) throw ConfigError("need at least two classes", "dataset.classes");
  if (spec.height == 0 || spec.width == 0 || spec.channels == 0) {
    throw ConfigError("image dimensions must be positive", "dataset.height");
  }
  constexpr int kWaves = 3;
  struct Wave {
    double fx, fy, phase, amp;
  };
  const RandomStream root = RandomStream(spec.seed).derive("synth");
  Dataset out;
  out.reserve(spec.classes * spec.per_class);
  for (std::size_t k = 0; k < spec.classes; ++k) {
    RandomStream tmpl = root.derive("template").derive(k);
    std::vector<std::vector<Wave>> waves(spec.channels);
    std::vector<double> offset(spec.channels);
    for (std::size_t ch = 0; ch < spec.channels; ++ch) {
      offset[ch] = tmpl.uniform(0.3, 0.7);
      for (int w = 0; w < kWaves; ++w) {
        Wave wave{};
        do {
          wave.fx = static_cast<double>(tmpl.below(3));
          wave.fy = static_cast<double>(tmpl.below(3));
        } while (wave.fx == 0.0 && wave.fy == 0.0);
        wave.phase = tmpl.uniform(0.0, 2.0 * std::numbers::pi);
        wave.amp = tmpl.uniform(0.05, 0.15);
        waves[ch].push_back(wave);
      }
    }
    Matrix base(spec.height, spec.width * spec.channels);
    for (std::size_t r = 0; r < spec.height; ++r)
      for (std::size_t c = 0; c < spec.width; ++c)
        for (std::size_t ch = 0; ch < spec.channels; ++ch) {
          const double y = static_cast<double>(r) / static_cast<double>(spec.height);
          const double x = static_cast<double>(c) / static_cast<double>(spec.width);
          double v = offset[ch];
          for (const Wave &w : waves[ch])
            v += w.amp * std::sin(2.0 * std::numbers::pi * (w.fx * x + w.fy * y) + w.phase);
          base(r, c * spec.channels + ch) = v;
        }
    for (std::size_t i = 0; i < spec.per_class; ++i) {
      RandomStream noise = root.derive("sample").derive(k).derive(spec.first_index + i);
      Matrix img = base;
      for (double &v : img.data()) {
        const double n = spec.noise * (2.0 * noise.uniform() - 1.0);
        v = std::clamp(v + n, 0.0, 1.0);
      }
      out.push_back({std::move(img), static_cast<int>(k)});
    }
  }
  return out;
}

Matrix resize_bilinear(const Matrix &image, std::size_t channels, std::size_t new_h,
                       std::size_t new_w) {
  if (channels == 0 || image.cols() % channels != 0) {
    throw ContractError("resize_bilinear: width " + std::to_string(image.cols()) +
                        " is not a multiple of the channel count");
  }
  if (new_h == 0 || new_w == 0) throw ContractError("resize_bilinear: target size must be positive");
  const std::size_t h = image.rows(), w = image.cols() / channels;
  auto source = [](std::size_t i, std::size_t n_out, std::size_t n_in) {
    if (n_out == 1 || n_in == 1) return 0.0;
    return static_cast<double>(i) * static_cast<double>(n_in - 1) /
           static_cast<double>(n_out - 1);
  };
  Matrix out(new_h, new_w * channels);
  for (std::size_t i = 0; i < new_h; ++i) {
    const double sy = source(i, new_h, h);
    const std::size_t y0 = std::min(static_cast<std::size_t>(sy), h - 1);
    const std::size_t y1 = std::min(y0 + 1, h - 1);
    const double fy = sy - static_cast<double>(y0);
    for (std::size_t j = 0; j < new_w; ++j) {
      const double sx = source(j, new_w, w);
      const std::size_t x0 = std::min(static_cast<std::size_t>(sx), w - 1);
      const std::size_t x1 = std::min(x0 + 1, w - 1);
      const double fx = sx - static_cast<double>(x0);
      for (std::size_t ch = 0; ch < channels; ++ch) {
        const double v00 = image(y0, x0 * channels + ch), v01 = image(y0, x1 * channels + ch);
        const double v10 = image(y1, x0 * channels + ch), v11 = image(y1, x1 * channels + ch);
        const double top = v00 * (1.0 - fx) + v01 * fx;
        const double bottom = v10 * (1.0 - fx) + v11 * fx;
        out(i, j * channels + ch) = top * (1.0 - fy) + bottom * fy;
      }
    }
  }
  return out;
}

} // namespace maskfed
