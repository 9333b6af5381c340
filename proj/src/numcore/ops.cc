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

#include "c2l/ops.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "c2l/errors.h"

namespace c2l {
namespace {

std::atomic<bool> corrupt_matmul_backward{false};

bool NeedsTape(Tape* tape, std::initializer_list<const Tensor*> inputs) {
  if (tape == nullptr) return false;
  for (const Tensor* t : inputs) {
    if (t->requires_grad()) return true;
  }
  return false;
}

void RequireMatrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw ShapeError(std::string(op) + " expects a matrix, got " +
                     ShapeToString(t.shape()));
  }
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw ShapeError(std::string(op) + ": shape mismatch " +
                     ShapeToString(a.shape()) + " vs " +
                     ShapeToString(b.shape()));
  }
}

void RequireScalar(const Tensor& t, const char* op) {
  if (t.size() != 1) {
    throw ShapeError(std::string(op) + " expects a scalar, got " +
                     ShapeToString(t.shape()));
  }
}

// out (cols x rows) = transpose of in (rows x cols).
std::vector<double> Transposed(const double* in, int64_t rows, int64_t cols) {
  std::vector<double> out(rows * cols);
  for (int64_t r = 0; r < rows; ++r) {
    for (int64_t c = 0; c < cols; ++c) out[c * rows + r] = in[r * cols + c];
  }
  return out;
}

// C[m x n] += op(A) * op(B), with op(A) m x k and op(B) k x n. A is stored
// k x m when transposed, B is stored n x k when transposed.
void Gemm(bool ta, bool tb, int64_t m, int64_t n, int64_t k, const double* a,
          const double* b, double* c) {
  std::vector<double> b_storage;
  if (tb) {
    b_storage = Transposed(b, n, k);
    b = b_storage.data();
  }
  if (!ta) {
    for (int64_t i = 0; i < m; ++i) {
      double* crow = c + i * n;
      const double* arow = a + i * k;
      for (int64_t p = 0; p < k; ++p) {
        const double av = arow[p];
        const double* brow = b + p * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  } else {
    for (int64_t p = 0; p < k; ++p) {
      const double* arow = a + p * m;
      const double* brow = b + p * n;
      for (int64_t i = 0; i < m; ++i) {
        const double av = arow[i];
        double* crow = c + i * n;
        for (int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
      }
    }
  }
}

double StableSigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2 / pi)
constexpr double kGeluA = 0.044715;

}  // namespace

namespace testing {
void SetCorruptMatMulBackward(bool corrupt) {
  corrupt_matmul_backward.store(corrupt);
}
}  // namespace testing

Tensor MatMul(Tape* tape, const Tensor& a, const Tensor& b, bool transpose_a,
              bool transpose_b) {
  RequireMatrix(a, "MatMul");
  RequireMatrix(b, "MatMul");
  const int64_t m = transpose_a ? a.dim(1) : a.dim(0);
  const int64_t k = transpose_a ? a.dim(0) : a.dim(1);
  const int64_t kb = transpose_b ? b.dim(1) : b.dim(0);
  const int64_t n = transpose_b ? b.dim(0) : b.dim(1);
  if (k != kb) {
    throw ShapeError("MatMul inner dimensions differ: " +
                     ShapeToString(a.shape()) + " x " +
                     ShapeToString(b.shape()));
  }
  Tensor out = Tensor::Zeros({m, n});
  Gemm(transpose_a, transpose_b, m, n, k, a.data().data(), b.data().data(),
       out.mutable_data().data());
  if (NeedsTape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->Record(out, [a, b, out, transpose_a, transpose_b, m, n, k]() mutable {
      const double* dc = out.grad().data();
      if (a.requires_grad()) {
        double* da = a.mutable_grad().data();
        if (!transpose_a) {
          Gemm(false, !transpose_b, m, k, n, dc, b.data().data(), da);
        } else {
          Gemm(transpose_b, true, k, m, n, b.data().data(), dc, da);
        }
      }
      if (b.requires_grad()) {
        std::vector<double> db(k * n, 0.0);
        if (!transpose_b) {
          Gemm(!transpose_a, false, k, n, m, a.data().data(), dc, db.data());
        } else {
          db.assign(n * k, 0.0);
          Gemm(true, transpose_a, n, k, m, dc, a.data().data(), db.data());
        }
        const double sign = corrupt_matmul_backward.load() ? -1.0 : 1.0;
        auto g = b.mutable_grad();
        for (size_t i = 0; i < db.size(); ++i) g[i] += sign * db[i];
      }
    });
  }
  return out;
}

Tensor Add(Tape* tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "Add");
  std::vector<double> y(a.size());
  for (int64_t i = 0; i < a.size(); ++i) y[i] = a.data()[i] + b.data()[i];
  Tensor out = Tensor::FromData(a.shape(), std::move(y));
  if (NeedsTape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->Record(out, [a, b, out]() mutable {
      auto dy = out.grad();
      for (const Tensor* t : {&a, &b}) {
        if (!t->requires_grad()) continue;
        auto g = t->mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
      }
    });
  }
  return out;
}

Tensor Sub(Tape* tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "Sub");
  std::vector<double> y(a.size());
  for (int64_t i = 0; i < a.size(); ++i) y[i] = a.data()[i] - b.data()[i];
  Tensor out = Tensor::FromData(a.shape(), std::move(y));
  if (NeedsTape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->Record(out, [a, b, out]() mutable {
      auto dy = out.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] -= dy[i];
      }
    });
  }
  return out;
}

Tensor Mul(Tape* tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "Mul");
  std::vector<double> y(a.size());
  for (int64_t i = 0; i < a.size(); ++i) y[i] = a.data()[i] * b.data()[i];
  Tensor out = Tensor::FromData(a.shape(), std::move(y));
  if (NeedsTape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->Record(out, [a, b, out]() mutable {
      auto dy = out.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * b.data()[i];
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * a.data()[i];
      }
    });
  }
  return out;
}

Tensor AddBias(Tape* tape, const Tensor& x, const Tensor& bias) {
  RequireMatrix(x, "AddBias");
  const int64_t m = x.dim(0), n = x.dim(1);
  if (bias.size() != n) {
    throw ShapeError("AddBias: bias " + ShapeToString(bias.shape()) +
                     " does not match " + ShapeToString(x.shape()));
  }
  std::vector<double> y(x.data().begin(), x.data().end());
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) y[i * n + j] += bias.data()[j];
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x, &bias})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, bias, out, m, n]() mutable {
      auto dy = out.grad();
      if (x.requires_grad()) {
        auto g = x.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
      }
      if (bias.requires_grad()) {
        auto g = bias.mutable_grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) g[j] += dy[i * n + j];
        }
      }
    });
  }
  return out;
}

Tensor Scale(Tape* tape, const Tensor& x, double factor) {
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = x.data()[i] * factor;
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out, factor]() mutable {
      auto dy = out.grad();
      auto g = x.mutable_grad();
      for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * factor;
    });
  }
  return out;
}

Tensor MulScalar(Tape* tape, const Tensor& x, const Tensor& s) {
  RequireScalar(s, "MulScalar");
  const double sv = s.item();
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = x.data()[i] * sv;
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x, &s})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, s, out, sv]() mutable {
      auto dy = out.grad();
      if (x.requires_grad()) {
        auto g = x.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * sv;
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (size_t i = 0; i < dy.size(); ++i) acc += dy[i] * x.data()[i];
        s.mutable_grad()[0] += acc;
      }
    });
  }
  return out;
}

Tensor AddScalar(Tape* tape, const Tensor& x, const Tensor& s) {
  RequireScalar(s, "AddScalar");
  const double sv = s.item();
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = x.data()[i] + sv;
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x, &s})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, s, out]() mutable {
      auto dy = out.grad();
      if (x.requires_grad()) {
        auto g = x.mutable_grad();
        for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
      }
      if (s.requires_grad()) {
        double acc = 0.0;
        for (double d : dy) acc += d;
        s.mutable_grad()[0] += acc;
      }
    });
  }
  return out;
}

Tensor Exp(Tape* tape, const Tensor& x) {
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < x.size(); ++i) y[i] = std::exp(x.data()[i]);
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out]() mutable {
      auto dy = out.grad();
      auto g = x.mutable_grad();
      for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i] * out.data()[i];
    });
  }
  return out;
}

Tensor LogSigmoid(Tape* tape, const Tensor& x) {
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    y[i] = std::min(v, 0.0) - std::log1p(std::exp(-std::abs(v)));
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out]() mutable {
      auto dy = out.grad();
      auto g = x.mutable_grad();
      for (size_t i = 0; i < dy.size(); ++i) {
        g[i] += dy[i] * StableSigmoid(-x.data()[i]);
      }
    });
  }
  return out;
}

Tensor Gelu(Tape* tape, const Tensor& x) {
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double v = x.data()[i];
    y[i] = 0.5 * v * (1.0 + std::tanh(kGeluC * (v + kGeluA * v * v * v)));
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out]() mutable {
      auto dy = out.grad();
      auto g = x.mutable_grad();
      for (size_t i = 0; i < dy.size(); ++i) {
        const double v = x.data()[i];
        const double t = std::tanh(kGeluC * (v + kGeluA * v * v * v));
        const double dt = kGeluC * (1.0 + 3.0 * kGeluA * v * v);
        g[i] += dy[i] * (0.5 * (1.0 + t) + 0.5 * v * (1.0 - t * t) * dt);
      }
    });
  }
  return out;
}

Tensor SoftmaxRows(Tape* tape, const Tensor& x) {
  const int64_t m = x.rows(), n = x.cols();
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    double* yrow = y.data() + i * n;
    const double mx = *std::max_element(row, row + n);
    double total = 0.0;
    for (int64_t j = 0; j < n; ++j) {
      yrow[j] = std::exp(row[j] - mx);
      total += yrow[j];
    }
    for (int64_t j = 0; j < n; ++j) yrow[j] /= total;
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out, m, n]() mutable {
      auto dy = out.grad();
      auto yv = out.data();
      auto g = x.mutable_grad();
      for (int64_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += dy[i * n + j] * yv[i * n + j];
        for (int64_t j = 0; j < n; ++j) {
          g[i * n + j] += yv[i * n + j] * (dy[i * n + j] - dot);
        }
      }
    });
  }
  return out;
}

Tensor LayerNorm(Tape* tape, const Tensor& x, const Tensor& gain,
                 const Tensor& bias, double epsilon) {
  const int64_t m = x.rows(), n = x.cols();
  if (n < 2) throw ShapeError("LayerNorm needs at least 2 features per row");
  if (gain.size() != n || bias.size() != n) {
    throw ShapeError("LayerNorm: affine parameters must have " +
                     std::to_string(n) + " elements");
  }
  std::vector<double> xhat(x.size());
  std::vector<double> inv_std(m);
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < m; ++i) {
    const double* row = x.data().data() + i * n;
    double mean = 0.0;
    for (int64_t j = 0; j < n; ++j) mean += row[j];
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (int64_t j = 0; j < n; ++j) var += (row[j] - mean) * (row[j] - mean);
    var /= static_cast<double>(n);
    inv_std[i] = 1.0 / std::sqrt(var + epsilon);
    for (int64_t j = 0; j < n; ++j) {
      xhat[i * n + j] = (row[j] - mean) * inv_std[i];
      y[i * n + j] = xhat[i * n + j] * gain.data()[j] + bias.data()[j];
    }
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x, &gain, &bias})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, gain, bias, out, m, n, xhat = std::move(xhat),
                       inv_std = std::move(inv_std)]() mutable {
      auto dy = out.grad();
      if (gain.requires_grad()) {
        auto g = gain.mutable_grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) g[j] += dy[i * n + j] * xhat[i * n + j];
        }
      }
      if (bias.requires_grad()) {
        auto g = bias.mutable_grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) g[j] += dy[i * n + j];
        }
      }
      if (x.requires_grad()) {
        auto g = x.mutable_grad();
        std::vector<double> dxhat(n);
        for (int64_t i = 0; i < m; ++i) {
          double mean_d = 0.0, mean_dx = 0.0;
          for (int64_t j = 0; j < n; ++j) {
            dxhat[j] = dy[i * n + j] * gain.data()[j];
            mean_d += dxhat[j];
            mean_dx += dxhat[j] * xhat[i * n + j];
          }
          mean_d /= static_cast<double>(n);
          mean_dx /= static_cast<double>(n);
          for (int64_t j = 0; j < n; ++j) {
            g[i * n + j] +=
                inv_std[i] * (dxhat[j] - mean_d - xhat[i * n + j] * mean_dx);
          }
        }
      }
    });
  }
  return out;
}

Tensor L2NormalizeRows(Tape* tape, const Tensor& x) {
  const int64_t m = x.rows(), n = x.cols();
  std::vector<double> norms(m);
  std::vector<double> y(x.size());
  for (int64_t i = 0; i < m; ++i) {
    double ss = 0.0;
    for (int64_t j = 0; j < n; ++j) ss += x.data()[i * n + j] * x.data()[i * n + j];
    norms[i] = std::sqrt(ss);
    if (!(norms[i] > 0.0) || !std::isfinite(norms[i])) {
      throw NumericError("L2NormalizeRows: row " + std::to_string(i) +
                         " has norm " + std::to_string(norms[i]));
    }
    for (int64_t j = 0; j < n; ++j) y[i * n + j] = x.data()[i * n + j] / norms[i];
  }
  Tensor out = Tensor::FromData(x.shape(), std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out, m, n, norms = std::move(norms)]() mutable {
      auto dy = out.grad();
      auto yv = out.data();
      auto g = x.mutable_grad();
      for (int64_t i = 0; i < m; ++i) {
        double dot = 0.0;
        for (int64_t j = 0; j < n; ++j) dot += dy[i * n + j] * yv[i * n + j];
        for (int64_t j = 0; j < n; ++j) {
          g[i * n + j] += (dy[i * n + j] - yv[i * n + j] * dot) / norms[i];
        }
      }
    });
  }
  return out;
}

Tensor Sum(Tape* tape, const Tensor& x) {
  double total = 0.0;
  for (double v : x.data()) total += v;
  Tensor out = Tensor::Scalar(total);
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out]() mutable {
      const double d = out.grad()[0];
      for (double& g : x.mutable_grad()) g += d;
    });
  }
  return out;
}

Tensor RowDot(Tape* tape, const Tensor& a, const Tensor& b) {
  RequireSameShape(a, b, "RowDot");
  const int64_t m = a.rows(), n = a.cols();
  std::vector<double> y(m, 0.0);
  for (int64_t i = 0; i < m; ++i) {
    for (int64_t j = 0; j < n; ++j) y[i] += a.data()[i * n + j] * b.data()[i * n + j];
  }
  Tensor out = Tensor::FromData({m}, std::move(y));
  if (NeedsTape(tape, {&a, &b})) {
    out.set_requires_grad(true);
    tape->Record(out, [a, b, out, m, n]() mutable {
      auto dy = out.grad();
      if (a.requires_grad()) {
        auto g = a.mutable_grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) g[i * n + j] += dy[i] * b.data()[i * n + j];
        }
      }
      if (b.requires_grad()) {
        auto g = b.mutable_grad();
        for (int64_t i = 0; i < m; ++i) {
          for (int64_t j = 0; j < n; ++j) g[i * n + j] += dy[i] * a.data()[i * n + j];
        }
      }
    });
  }
  return out;
}

Tensor GatherRows(Tape* tape, const Tensor& table,
                  std::span<const int64_t> indices) {
  const int64_t rows = table.rows(), n = table.cols();
  if (indices.empty()) throw ShapeError("GatherRows with no indices");
  std::vector<double> y(indices.size() * n);
  for (size_t i = 0; i < indices.size(); ++i) {
    const int64_t r = indices[i];
    if (r < 0 || r >= rows) {
      throw ShapeError("GatherRows: index " + std::to_string(r) +
                       " out of range for " + std::to_string(rows) + " rows");
    }
    std::copy_n(table.data().data() + r * n, n, y.data() + i * n);
  }
  Tensor out = Tensor::FromData({static_cast<int64_t>(indices.size()), n},
                                std::move(y));
  if (NeedsTape(tape, {&table})) {
    out.set_requires_grad(true);
    std::vector<int64_t> idx(indices.begin(), indices.end());
    tape->Record(out, [table, out, n, idx = std::move(idx)]() mutable {
      auto dy = out.grad();
      auto g = table.mutable_grad();
      for (size_t i = 0; i < idx.size(); ++i) {
        for (int64_t j = 0; j < n; ++j) g[idx[i] * n + j] += dy[i * n + j];
      }
    });
  }
  return out;
}

Tensor SegmentMean(Tape* tape, const Tensor& x,
                   std::span<const RowRange> segments) {
  const int64_t rows = x.rows(), n = x.cols();
  if (segments.empty()) throw ShapeError("SegmentMean with no segments");
  std::vector<double> y(segments.size() * n, 0.0);
  for (size_t s = 0; s < segments.size(); ++s) {
    const RowRange seg = segments[s];
    if (seg.begin < 0 || seg.end > rows || seg.begin >= seg.end) {
      throw ShapeError("SegmentMean: invalid segment [" +
                       std::to_string(seg.begin) + "," +
                       std::to_string(seg.end) + ") for " +
                       std::to_string(rows) + " rows");
    }
    for (int64_t r = seg.begin; r < seg.end; ++r) {
      for (int64_t j = 0; j < n; ++j) y[s * n + j] += x.data()[r * n + j];
    }
    const double inv = 1.0 / static_cast<double>(seg.size());
    for (int64_t j = 0; j < n; ++j) y[s * n + j] *= inv;
  }
  Tensor out = Tensor::FromData({static_cast<int64_t>(segments.size()), n},
                                std::move(y));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    std::vector<RowRange> segs(segments.begin(), segments.end());
    tape->Record(out, [x, out, n, segs = std::move(segs)]() mutable {
      auto dy = out.grad();
      auto g = x.mutable_grad();
      for (size_t s = 0; s < segs.size(); ++s) {
        const double inv = 1.0 / static_cast<double>(segs[s].size());
        for (int64_t r = segs[s].begin; r < segs[s].end; ++r) {
          for (int64_t j = 0; j < n; ++j) g[r * n + j] += dy[s * n + j] * inv;
        }
      }
    });
  }
  return out;
}

Tensor Reshape(Tape* tape, const Tensor& x, Shape shape) {
  if (NumElements(shape) != x.size()) {
    throw ShapeError("Reshape " + ShapeToString(x.shape()) + " to " +
                     ShapeToString(shape));
  }
  Tensor out = Tensor::FromData(
      std::move(shape), std::vector<double>(x.data().begin(), x.data().end()));
  if (NeedsTape(tape, {&x})) {
    out.set_requires_grad(true);
    tape->Record(out, [x, out]() mutable {
      auto dy = out.grad();
      auto g = x.mutable_grad();
      for (size_t i = 0; i < dy.size(); ++i) g[i] += dy[i];
    });
  }
  return out;
}

namespace {

struct AttentionDims {
  int64_t num_queries, num_keys, dk, dv, head_dk, head_dv;
};

AttentionDims CheckAttention(const Tensor& q, const Tensor& k,
                             const Tensor* v, const AttentionSpec& spec) {
  RequireMatrix(q, "Attention");
  RequireMatrix(k, "Attention");
  AttentionDims d{};
  d.num_queries = q.dim(0);
  d.num_keys = k.dim(0);
  d.dk = q.dim(1);
  if (k.dim(1) != d.dk) throw ShapeError("Attention: query/key width differs");
  d.dv = d.dk;
  if (v != nullptr) {
    RequireMatrix(*v, "Attention");
    if (v->dim(0) != d.num_keys) {
      throw ShapeError("Attention: keys and values differ in row count");
    }
    d.dv = v->dim(1);
  }
  if (spec.num_heads < 1 || d.dk % spec.num_heads != 0 ||
      d.dv % spec.num_heads != 0) {
    throw ShapeError("Attention: width not divisible by head count");
  }
  d.head_dk = d.dk / spec.num_heads;
  d.head_dv = d.dv / spec.num_heads;
  if (static_cast<int64_t>(spec.key_ranges.size()) != d.num_queries) {
    throw ShapeError("Attention: need one key range per query");
  }
  if (!spec.key_mask.empty() &&
      static_cast<int64_t>(spec.key_mask.size()) != d.num_keys) {
    throw ShapeError("Attention: key mask length differs from key count");
  }
  for (const RowRange& r : spec.key_ranges) {
    if (r.begin < 0 || r.end > d.num_keys || r.begin >= r.end) {
      throw ContractError("Attention: empty or out-of-range key set");
    }
  }
  return d;
}

bool KeyActive(const AttentionSpec& spec, int64_t r) {
  return spec.key_mask.empty() || spec.key_mask[r] != 0;
}

// Probabilities for one (query, head), laid out over the key range with
// zeros at masked keys.
void HeadProbs(const double* qrow, const Tensor& k, const AttentionSpec& spec,
               const AttentionDims& d, int64_t query, int64_t head,
               double* probs) {
  const RowRange range = spec.key_ranges[query];
  const int64_t off = head * d.head_dk;
  double mx = -std::numeric_limits<double>::infinity();
  bool any = false;
  for (int64_t r = range.begin; r < range.end; ++r) {
    double& s = probs[r - range.begin];
    if (!KeyActive(spec, r)) {
      s = 0.0;
      continue;
    }
    const double* krow = k.data().data() + r * d.dk + off;
    double dot = 0.0;
    for (int64_t j = 0; j < d.head_dk; ++j) dot += qrow[off + j] * krow[j];
    s = dot * spec.scale;
    mx = std::max(mx, s);
    any = true;
  }
  if (!any) throw ContractError("Attention: every key of a query is masked");
  double total = 0.0;
  for (int64_t r = range.begin; r < range.end; ++r) {
    if (!KeyActive(spec, r)) continue;
    double& s = probs[r - range.begin];
    s = std::exp(s - mx);
    total += s;
  }
  for (int64_t r = range.begin; r < range.end; ++r) {
    if (KeyActive(spec, r)) probs[r - range.begin] /= total;
  }
}

}  // namespace

std::vector<std::vector<double>> AttentionWeights(const Tensor& queries,
                                                  const Tensor& keys,
                                                  const AttentionSpec& spec) {
  const AttentionDims d = CheckAttention(queries, keys, nullptr, spec);
  std::vector<std::vector<double>> out;
  out.reserve(d.num_queries * spec.num_heads);
  for (int64_t i = 0; i < d.num_queries; ++i) {
    const double* qrow = queries.data().data() + i * d.dk;
    for (int64_t h = 0; h < spec.num_heads; ++h) {
      std::vector<double> probs(spec.key_ranges[i].size());
      HeadProbs(qrow, keys, spec, d, i, h, probs.data());
      out.push_back(std::move(probs));
    }
  }
  return out;
}

Tensor Attention(Tape* tape, const Tensor& queries, const Tensor& keys,
                 const Tensor& values, const AttentionSpec& spec) {
  const AttentionDims d = CheckAttention(queries, keys, &values, spec);
  const int64_t heads = spec.num_heads;
  // probs for (i, h) start at offsets[i] * heads + h * range_size(i).
  std::vector<int64_t> offsets(d.num_queries + 1, 0);
  for (int64_t i = 0; i < d.num_queries; ++i) {
    offsets[i + 1] = offsets[i] + spec.key_ranges[i].size() * heads;
  }
  std::vector<double> probs(offsets.back());
  std::vector<double> y(d.num_queries * d.dv, 0.0);
  for (int64_t i = 0; i < d.num_queries; ++i) {
    const RowRange range = spec.key_ranges[i];
    const double* qrow = queries.data().data() + i * d.dk;
    for (int64_t h = 0; h < heads; ++h) {
      double* p = probs.data() + offsets[i] + h * range.size();
      HeadProbs(qrow, keys, spec, d, i, h, p);
      double* yrow = y.data() + i * d.dv + h * d.head_dv;
      for (int64_t r = range.begin; r < range.end; ++r) {
        if (!KeyActive(spec, r)) continue;
        const double w = p[r - range.begin];
        const double* vrow = values.data().data() + r * d.dv + h * d.head_dv;
        for (int64_t j = 0; j < d.head_dv; ++j) yrow[j] += w * vrow[j];
      }
    }
  }
  Tensor out = Tensor::FromData({d.num_queries, d.dv}, std::move(y));
  if (NeedsTape(tape, {&queries, &keys, &values})) {
    out.set_requires_grad(true);
    tape->Record(out, [queries, keys, values, out, spec, d,
                       offsets = std::move(offsets),
                       probs = std::move(probs)]() mutable {
      auto dy = out.grad();
      const int64_t heads = spec.num_heads;
      double* dq = queries.requires_grad() ? queries.mutable_grad().data()
                                           : nullptr;
      double* dk = keys.requires_grad() ? keys.mutable_grad().data() : nullptr;
      double* dvals =
          values.requires_grad() ? values.mutable_grad().data() : nullptr;
      std::vector<double> dscore;
      for (int64_t i = 0; i < d.num_queries; ++i) {
        const RowRange range = spec.key_ranges[i];
        dscore.assign(range.size(), 0.0);
        for (int64_t h = 0; h < heads; ++h) {
          const double* p = probs.data() + offsets[i] + h * range.size();
          const double* dyrow = dy.data() + i * d.dv + h * d.head_dv;
          // dP_r = dy . v_r ; dV_r += p_r dy
          double weighted = 0.0;
          for (int64_t r = range.begin; r < range.end; ++r) {
            const int64_t rr = r - range.begin;
            if (!KeyActive(spec, r)) {
              dscore[rr] = 0.0;
              continue;
            }
            const double* vrow =
                values.data().data() + r * d.dv + h * d.head_dv;
            double dp = 0.0;
            for (int64_t j = 0; j < d.head_dv; ++j) dp += dyrow[j] * vrow[j];
            dscore[rr] = dp;
            weighted += p[rr] * dp;
            if (dvals != nullptr) {
              double* dvrow = dvals + r * d.dv + h * d.head_dv;
              for (int64_t j = 0; j < d.head_dv; ++j) dvrow[j] += p[rr] * dyrow[j];
            }
          }
          const int64_t off = h * d.head_dk;
          const double* qrow = queries.data().data() + i * d.dk + off;
          for (int64_t r = range.begin; r < range.end; ++r) {
            if (!KeyActive(spec, r)) continue;
            const int64_t rr = r - range.begin;
            const double ds = p[rr] * (dscore[rr] - weighted) * spec.scale;
            const double* krow = keys.data().data() + r * d.dk + off;
            if (dq != nullptr) {
              double* dqrow = dq + i * d.dk + off;
              for (int64_t j = 0; j < d.head_dk; ++j) dqrow[j] += ds * krow[j];
            }
            if (dk != nullptr) {
              double* dkrow = dk + r * d.dk + off;
              for (int64_t j = 0; j < d.head_dk; ++j) dkrow[j] += ds * qrow[j];
            }
          }
        }
      }
    });
  }
  return out;
}

}  // namespace c2l
