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

// Pairwise sigmoid objectives.
//
// Every loss here has the form
//
//   L = -(1/N) sum_ij log sigmoid(z_ij * (scale * s_ij + bias))
//
// over a similarity matrix s with a +-1 indicator z. The image-caption loss
// uses N = |B| and z = 2I - 1. The concept losses score images against all
// K concepts of the batch, normalized by K: the npc loss with s_ij = v_i.c_j
// and the xac loss with s_ij = vhat_i(c_j).c_j, where vhat_i(c_j) is the
// concept-conditioned cross attention over image i's patch tokens.

#ifndef C2L_LOSS_H_
#define C2L_LOSS_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

#include "c2l/chunker.h"
#include "c2l/model.h"
#include "c2l/ops.h"
#include "c2l/tensor.h"

namespace c2l {

// z' of shape |B| x K: +1 where concept column j belongs to caption i.
struct ConceptIndicator {
  int64_t batch_size = 0;
  std::vector<int64_t> owner;   // per column
  std::vector<int64_t> counts;  // K_i per caption
  std::vector<int8_t> z;        // row-major |B| x K

  int64_t num_concepts() const { return static_cast<int64_t>(owner.size()); }
  int8_t at(int64_t i, int64_t j) const { return z[i * num_concepts() + j]; }
  // As a [|B| x K] tensor; undefined when K = 0.
  Tensor AsTensor() const;
};

// Throws ContractError for an owner outside [0, batch_size).
ConceptIndicator BuildConceptIndicator(std::span<const int64_t> owners,
                                       int64_t batch_size);
// The image-caption indicator z: owners 0..n-1.
ConceptIndicator PairIndicator(int64_t batch_size);

struct LossValue {
  Tensor value;  // rank-0
  // True when the batch had no concepts; value is then 0.
  bool skipped = false;
};

// Unit-norm tolerance for loss inputs.
inline constexpr double kUnitNormTolerance = 1e-6;

// -(1/normalizer) sum_ij log sigmoid(z_ij * (scale * sims_ij + bias)) for
// a [|B| x K] similarity matrix. The shared core of all three losses.
Tensor PairwiseSigmoidLoss(Tape* tape, const Tensor& sims,
                           const ConceptIndicator& z, const LossScalars& scalars,
                           double normalizer);

// The (lambda_npc, lambda_xac) pairs of the sensitivity grid.
inline constexpr std::pair<double, double> kLambdaGrid[] = {
    {0.5, 0.5}, {0.5, 0.1}, {0.5, 0.01}, {1.0, 0.5}, {1.0, 0.01}};

// Throws ContractError when v and t differ in shape or are not unit rows.
Tensor ContrastiveSigmoid(Tape* tape, const Tensor& v, const Tensor& t,
                          const LossScalars& scalars);

// `concepts` may be undefined when the indicator has no columns.
LossValue NpcLoss(Tape* tape, const Tensor& v, const Tensor& concepts,
                  const ConceptIndicator& z, const LossScalars& scalars);

// `image_tokens` are the encoder outputs V of every image, one segment per
// image. All |B| x K (image, concept) pairs are scored in one batched pass.
LossValue XacLoss(Tape* tape, const ModelParams& params,
                  const Tensor& image_tokens,
                  std::span<const RowRange> image_segments,
                  const Tensor& concepts, const ConceptIndicator& z,
                  const LossScalars& scalars);

enum class AblationMode { kContrastiveOnly, kPlusNpc, kFull };

std::string_view AblationName(AblationMode mode);
// Accepts "contrastive_only", "plus_npc", "full", and the aliases "npc" and
// "xac" for the last two. Throws ConfigError.
AblationMode ParseAblation(std::string_view name);

struct LossWeights {
  double lambda_npc = 1.0;
  double lambda_xac = 0.01;
  // Throws ConfigError on negative or non-finite weights.
  void Validate() const;
};

// Absent terms (nullopt) and skipped terms contribute 0.
Tensor TotalLoss(Tape* tape, const Tensor& contrastive,
                 const std::optional<LossValue>& npc,
                 const std::optional<LossValue>& xac, const LossWeights& weights);

// One training batch: images, caption token ids and each caption's concept
// spans (token indices into the caption).
struct Batch {
  std::vector<const Image*> images;
  std::vector<std::vector<int64_t>> captions;
  std::vector<std::vector<ConceptSpan>> concepts;
};

struct BatchLosses {
  Tensor image_embeddings;
  Tensor text_embeddings;
  Tensor contrastive;
  std::optional<LossValue> npc;  // absent under kContrastiveOnly
  std::optional<LossValue> xac;  // present only under kFull
  Tensor total;
};

// Full forward pass of both towers plus the losses enabled by `mode`.
// Spans reaching past a truncated caption are dropped.
BatchLosses ComputeBatchLosses(Tape* tape, const ModelParams& params,
                               const Batch& batch, AblationMode mode,
                               const LossWeights& weights);

}  // namespace c2l

#endif  // C2L_LOSS_H_
