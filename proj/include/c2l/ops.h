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

// Differentiable tensor operations.
//
// Every op takes a nullable Tape*. When the tape is null, or when no input
// requires a gradient, nothing is recorded and the result is a plain value.
// Matrices are rank-2 row-major tensors; "rows" helpers also accept rank-1
// tensors as a single row.

#ifndef C2L_OPS_H_
#define C2L_OPS_H_

#include <cstdint>
#include <span>
#include <vector>

#include "c2l/tensor.h"

namespace c2l {

// Half-open row interval [begin, end).
struct RowRange {
  int64_t begin = 0;
  int64_t end = 0;
  int64_t size() const { return end - begin; }
  bool operator==(const RowRange&) const = default;
};

// C = op(A) * op(B) where op transposes when the matching flag is set.
Tensor MatMul(Tape* tape, const Tensor& a, const Tensor& b,
              bool transpose_a = false, bool transpose_b = false);

Tensor Add(Tape* tape, const Tensor& a, const Tensor& b);
Tensor Sub(Tape* tape, const Tensor& a, const Tensor& b);
Tensor Mul(Tape* tape, const Tensor& a, const Tensor& b);
// x[m x n] + bias[n] broadcast over rows.
Tensor AddBias(Tape* tape, const Tensor& x, const Tensor& bias);
Tensor Scale(Tape* tape, const Tensor& x, double factor);
// x * s and x + s for a scalar tensor s.
Tensor MulScalar(Tape* tape, const Tensor& x, const Tensor& s);
Tensor AddScalar(Tape* tape, const Tensor& x, const Tensor& s);

Tensor Exp(Tape* tape, const Tensor& x);
// log(sigmoid(x)), evaluated without overflow for large |x|.
Tensor LogSigmoid(Tape* tape, const Tensor& x);
// tanh approximation of GELU.
Tensor Gelu(Tape* tape, const Tensor& x);

// Row-wise softmax with per-row max subtraction.
Tensor SoftmaxRows(Tape* tape, const Tensor& x);

inline constexpr double kLayerNormEpsilon = 1e-5;
Tensor LayerNorm(Tape* tape, const Tensor& x, const Tensor& gain,
                 const Tensor& bias, double epsilon = kLayerNormEpsilon);

// Divides each row by its Euclidean norm.
Tensor L2NormalizeRows(Tape* tape, const Tensor& x);

// Sum of all elements, returned as a rank-0 tensor.
Tensor Sum(Tape* tape, const Tensor& x);
// Per-row dot product of two equally shaped matrices; result is [m].
Tensor RowDot(Tape* tape, const Tensor& a, const Tensor& b);
// out[i] = table[indices[i]]; used for embedding lookups and replication.
Tensor GatherRows(Tape* tape, const Tensor& table,
                  std::span<const int64_t> indices);
// Mean of the rows of x in each range; result has one row per range.
Tensor SegmentMean(Tape* tape, const Tensor& x,
                   std::span<const RowRange> segments);
Tensor Reshape(Tape* tape, const Tensor& x, Shape shape);

// Multi-head scaled dot-product attention over ragged key sets.
//
// Query row i attends to key/value rows key_ranges[i]. When key_mask is
// non-empty, keys with key_mask[r] == 0 are skipped entirely, so masked rows
// cannot influence any output bit. Heads split the feature dimension evenly.
struct AttentionSpec {
  std::vector<RowRange> key_ranges;  // one per query row
  std::vector<uint8_t> key_mask;     // empty or one per key row
  int64_t num_heads = 1;
  double scale = 1.0;
};
Tensor Attention(Tape* tape, const Tensor& queries, const Tensor& keys,
                 const Tensor& values, const AttentionSpec& spec);

// Attention probabilities of Attention(), forward only. Result is one vector
// per (query, head), ordered query-major; masked keys get weight 0.
std::vector<std::vector<double>> AttentionWeights(const Tensor& queries,
                                                  const Tensor& keys,
                                                  const AttentionSpec& spec);

namespace testing {
// Flips the sign of the MatMul gradient with respect to its right operand.
// Used only as a negative control for the gradient checker.
void SetCorruptMatMulBackward(bool corrupt);
}  // namespace testing

}  // namespace c2l

#endif  // C2L_OPS_H_
