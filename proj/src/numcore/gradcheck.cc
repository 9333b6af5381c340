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

#include "c2l/gradcheck.h"

#include <algorithm>
#include <cmath>

#include "c2l/errors.h"

namespace c2l {
namespace {

double Evaluate(const std::function<Tensor(Tape*)>& f) {
  Tensor y = f(nullptr);
  if (y.size() != 1) throw ContractError("gradient check needs a scalar f");
  const double v = y.item();
  if (!std::isfinite(v)) {
    throw OracleError("function is not finite at a perturbed point");
  }
  return v;
}

std::vector<int64_t> PickCoords(int64_t size, int64_t limit, uint64_t seed) {
  std::vector<int64_t> coords;
  if (limit <= 0 || limit >= size) {
    coords.resize(size);
    for (int64_t i = 0; i < size; ++i) coords[i] = i;
    return coords;
  }
  const int64_t stride = size / limit;
  const int64_t offset = static_cast<int64_t>(seed % static_cast<uint64_t>(stride));
  for (int64_t i = 0; i < limit; ++i) coords.push_back(offset + i * stride);
  return coords;
}

}  // namespace

GradCheckResult FiniteDiffCheck(const std::function<Tensor(Tape*)>& f,
                                const std::vector<NamedTensor>& params,
                                const GradCheckOptions& options) {
  const double h = options.step;
  if (!(h >= 1e-7 && h <= 1e-3)) {
    throw ConfigError("finite-difference step must lie in [1e-7, 1e-3]");
  }
  std::vector<Tensor> leaves;
  for (const auto& p : params) {
    Tensor t = p.tensor;
    t.clear_grad();
    t.set_requires_grad(true);
    leaves.push_back(t);
  }

  Tape tape;
  Tensor loss = f(&tape);
  if (loss.requires_grad()) Backward(loss, tape);

  GradCheckResult result;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor t = leaves[pi];
    std::vector<double> analytic(t.size(), 0.0);
    if (t.has_grad()) {
      std::copy(t.grad().begin(), t.grad().end(), analytic.begin());
    }
    for (int64_t idx :
         PickCoords(t.size(), options.max_coords_per_tensor, options.seed + pi)) {
      double& x = t.mutable_data()[idx];
      const double saved = x;
      x = saved + h;
      const double plus = Evaluate(f);
      x = saved - h;
      const double minus = Evaluate(f);
      x = saved;
      const double numeric = (plus - minus) / (2.0 * h);
      const double err = std::abs(analytic[idx] - numeric) /
                         std::max(1.0, std::abs(analytic[idx]));
      ++result.coords_checked;
      if (result.worst_index < 0 || err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_tensor = params[pi].name;
        result.worst_index = idx;
        result.worst_analytic = analytic[idx];
        result.worst_numeric = numeric;
      }
    }
    t.clear_grad();
  }
  return result;
}

}  // namespace c2l
