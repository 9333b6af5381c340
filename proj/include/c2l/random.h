// Copyright 2026 The c2l Authors. All Rights Reserved.
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

#ifndef C2L_RANDOM_H_
#define C2L_RANDOM_H_

#include <cstdint>
#include <random>
#include <vector>

namespace c2l {

// splitmix64 finalizer; mixes a stream id into a seed.
uint64_t MixSeed(uint64_t seed, uint64_t stream);

// Seeded generator. The engine is std::mt19937_64, whose output sequence is
// fixed by the standard; the distributions below are implemented here rather
// than with <random> distributions so draws are identical on every platform.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}
  Rng(uint64_t seed, uint64_t stream) : engine_(MixSeed(seed, stream)) {}

  uint64_t Next() { return engine_(); }
  // Uniform on [0, 1).
  double Uniform();
  // Uniform integer on [0, n).
  int64_t UniformInt(int64_t n);
  double Normal();
  std::vector<int64_t> Permutation(int64_t n);

 private:
  std::mt19937_64 engine_;
};

}  // namespace c2l

#endif  // C2L_RANDOM_H_
