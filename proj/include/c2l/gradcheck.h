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

#ifndef C2L_GRADCHECK_H_
#define C2L_GRADCHECK_H_

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "c2l/tensor.h"

namespace c2l {

struct NamedTensor {
  std::string name;
  Tensor tensor;
};

struct GradCheckOptions {
  double step = 1e-5;
  // Coordinates checked per tensor; 0 checks every coordinate. When fewer
  // than all are checked they are picked evenly spread with a seeded offset.
  int64_t max_coords_per_tensor = 0;
  uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_tensor;
  int64_t worst_index = -1;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  int64_t coords_checked = 0;
};

// Compares the tape gradient of `f` with central differences
//   (f(x + h e_i) - f(x - h e_i)) / 2h
// over the listed leaf tensors. Error per coordinate is
// |analytic - numeric| / max(1, |analytic|). `f` receives a tape (or null
// for the perturbed evaluations) and must return a scalar.
//
// Throws OracleError when f is non-finite at a perturbed point, ConfigError
// when the step lies outside [1e-7, 1e-3].
GradCheckResult FiniteDiffCheck(const std::function<Tensor(Tape*)>& f,
                                const std::vector<NamedTensor>& params,
                                const GradCheckOptions& options = {});

}  // namespace c2l

#endif  // C2L_GRADCHECK_H_
