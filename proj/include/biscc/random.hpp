// Copyright 2026 The biscc Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BISCC_RANDOM_HPP_
#define BISCC_RANDOM_HPP_

#include <cstdint>
#include <random>

namespace biscc {

using Rng = std::mt19937_64;

// Independent streams derived from one seed. Every consumer of randomness
// owns its stream so that enabling one feature never shifts another's draws.
enum RngStream : std::uint32_t {
  kStreamSignatures = 1,
  kStreamTrainSplit = 2,
  kStreamTestSplit = 3,
  kStreamInitOriginal = 10,
  kStreamInitAugmented = 11,
  kStreamBatches = 12,
  kStreamAugment = 13,
  kStreamReport = 20,
};

inline Rng make_rng(std::uint64_t seed, std::uint32_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed),
                    static_cast<std::uint32_t>(seed >> 32), stream,
                    0x42534343u};
  return Rng(seq);
}

/// Uniform integer in [lo, hi].
inline int uniform_int(Rng& rng, int lo, int hi) {
  return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace biscc

#endif  // BISCC_RANDOM_HPP_
