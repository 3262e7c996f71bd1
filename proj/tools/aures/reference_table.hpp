/*
 * Copyright 2026 The Aures Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

// The published Slowfast NFNet-F0 stage table for a 400 x 128 spectrogram.

#ifndef AURES_TOOLS_REFERENCE_TABLE_HPP_
#define AURES_TOOLS_REFERENCE_TABLE_HPP_

#include <cstddef>

namespace aures::tools {

struct ReferenceRow {
  const char* stage;
  std::size_t slow_t, slow_f, fast_t, fast_f;
  std::size_t slow_channels, fast_channels;
};

inline constexpr ReferenceRow kReferenceRows[] = {
    {"data layer", 100, 128, 400, 128, 1, 1},
    {"stem1", 50, 64, 200, 64, 16, 2},
    {"stem2", 50, 64, 200, 64, 32, 4},
    {"stem3", 50, 64, 200, 64, 64, 8},
    {"stem4", 25, 32, 100, 32, 128, 16},
    {"block1", 25, 32, 100, 32, 256, 32},
    {"block2", 25, 16, 100, 16, 512, 64},
    {"block3", 25, 8, 100, 8, 1536, 192},
    {"block4", 25, 4, 100, 4, 1536, 192},
};

inline constexpr std::size_t kReferenceFeatureDim = 1728;

}  // namespace aures::tools

#endif  // AURES_TOOLS_REFERENCE_TABLE_HPP_
