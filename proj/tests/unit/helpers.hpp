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
#include "maskfed/random.hpp"
#include "maskfed/sample.hpp"
#include "maskfed/vit.hpp"

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

namespace testutil {

// Test data comes from std::mt19937_64, independent of the library's own
// streams.
inline maskfed::Matrix random_matrix(std::size_t r, std::size_t c, std::uint64_t seed,
                                     double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(lo, hi);
  maskfed::Matrix m(r, c);
  for (double &v : m.data()) v = dist(gen);
  return m;
}

inline maskfed::Dataset random_batch(const maskfed::ModelConfig &cfg, std::size_t n,
                                     std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> pix(0.0, 1.0);
  std::uniform_int_distribution<int> lab(0, static_cast<int>(cfg.classes) - 1);
  maskfed::Dataset out;
  for (std::size_t i = 0; i < n; ++i) {
    maskfed::Matrix img(cfg.image_h, cfg.image_w * cfg.channels);
    for (double &v : img.data()) v = pix(gen);
    out.push_back({std::move(img), lab(gen)});
  }
  return out;
}

// Small model for fast structural tests.
inline maskfed::ModelConfig tiny_model() {
  maskfed::ModelConfig c;
  c.image_h = 8;
  c.image_w = 8;
  c.channels = 3;
  c.patch = 4;
  c.embed_dim = 8;
  c.heads = 2;
  c.blocks = 2;
  c.mlp_hidden = 12;
  c.classes = 3;
  return c;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string &name) {
  auto dir = std::filesystem::temp_directory_path() / ("maskfed_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

} // namespace testutil
