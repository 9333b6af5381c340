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

#ifndef C2L_TESTS_TEST_UTIL_H_
#define C2L_TESTS_TEST_UTIL_H_

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "c2l/random.h"
#include "c2l/tensor.h"

namespace c2l::test {

inline Tensor RandomTensor(Rng& rng, Shape shape, double stddev = 1.0,
                           bool requires_grad = true) {
  std::vector<double> data(NumElements(shape));
  for (double& v : data) v = stddev * rng.Normal();
  return Tensor::FromData(std::move(shape), std::move(data), requires_grad);
}

// Random rows of unit norm.
inline Tensor RandomUnitRows(Rng& rng, int64_t rows, int64_t cols,
                             bool requires_grad = false) {
  std::vector<double> data(rows * cols);
  for (int64_t i = 0; i < rows; ++i) {
    double ss = 0.0;
    for (int64_t j = 0; j < cols; ++j) {
      data[i * cols + j] = rng.Normal();
      ss += data[i * cols + j] * data[i * cols + j];
    }
    const double n = std::sqrt(ss);
    for (int64_t j = 0; j < cols; ++j) data[i * cols + j] /= n;
  }
  return Tensor::FromData({rows, cols}, std::move(data), requires_grad);
}

inline std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

// Fresh scratch directory under the system temp dir.
inline std::filesystem::path ScratchDir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("c2l_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace c2l::test

#endif  // C2L_TESTS_TEST_UTIL_H_
