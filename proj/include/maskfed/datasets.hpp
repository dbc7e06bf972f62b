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

#include "maskfed/sample.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace maskfed {

namespace cifar10 {
inline constexpr std::size_t kSide = 32;
inline constexpr std::size_t kChannels = 3;
inline constexpr std::size_t kPixelBytes = kSide * kSide * kChannels;
inline constexpr std::size_t kRecordBytes = 1 + kPixelBytes;
inline constexpr std::size_t kRecordsPerFile = 10000;
inline constexpr std::size_t kTrainRecords = 50000;
inline constexpr std::size_t kTestRecords = 10000;
} // namespace cifar10

enum class Split { Train, Test };

// Decodes one 3073-byte record: label byte, then channel-planar R, G, B
// planes of 32x32 bytes. Pixels are scaled by 1/255 and interleaved.
LabeledImage decode_cifar10_record(std::span<const std::uint8_t> record);
// Inverse of decode_cifar10_record for images whose pixels are k/255.
std::vector<std::uint8_t> encode_cifar10_record(const LabeledImage &sample);

// Reads a file of whole records. `expected_records` of 0 accepts any count.
// Throws FormatError when the size is not what was expected.
Dataset read_cifar10_file(const std::filesystem::path &file, std::size_t expected_records = 0);
void write_cifar10_file(const std::filesystem::path &file, std::span<const LabeledImage> data);

/// Standard layout directory: data_batch_1.bin .. data_batch_5.bin for the
/// training split, test_batch.bin for the test split, 10000 records each.
Dataset load_cifar10_binary(const std::filesystem::path &dir, Split which);

struct SynthSpec {
  std::size_t classes = 4;
  std::size_t per_class = 50;
  std::size_t height = 16;
  std::size_t width = 16;
  std::size_t channels = 3;
  double noise = 0.1;
  std::uint64_t seed = 0;
  // Index of the first sample drawn per class. Disjoint index ranges under
  // one seed share class templates but not noise, e.g. a train/test split.
  std::size_t first_index = 0;
};

/// Each class is a smooth low-frequency template drawn from a class-keyed
/// stream; samples add uniform noise of amplitude `noise` and are clipped to
/// [0, 1]. Samples are ordered class-major.
Dataset synth_dataset(const SynthSpec &spec);

/// Corner-aligned bilinear resize of an H x (W*C) image.
Matrix resize_bilinear(const Matrix &image, std::size_t channels, std::size_t new_h,
                       std::size_t new_w);

} // namespace maskfed
