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

#include <vector>

namespace maskfed {

// Image stored as H x (W*C): pixel (r, c, ch) lives at (r, c*C + ch). Pixel
// values are in [0, 1].
struct LabeledImage {
  Matrix image;
  int label = 0;
};

using Dataset = std::vector<LabeledImage>;

} // namespace maskfed
