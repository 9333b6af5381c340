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

#include "c2l/loss.h"

#include <cmath>
#include <string>

#include "c2l/errors.h"

namespace c2l {
namespace {

void CheckUnitRows(const Tensor& x, const char* what) {
  for (int64_t r = 0; r < x.rows(); ++r) {
    double ss = 0.0;
    for (int64_t j = 0; j < x.cols(); ++j) ss += x.at(r, j) * x.at(r, j);
    if (std::abs(std::sqrt(ss) - 1.0) > kUnitNormTolerance) {
      throw ContractError(std::string(what) + " row " + std::to_string(r) +
                          " is not unit norm (norm " + std::to_string(std::sqrt(ss)) + ")");
    }
  }
}

LossValue Skipped() { return {Tensor::Scalar(0.0), true}; }

}  // namespace

Tensor PairwiseSigmoidLoss(Tape* tape, const Tensor& sims, const ConceptIndicator& z,
                           const LossScalars& scalars, double normalizer) {
  if (sims.rank() != 2 || sims.rows() != z.batch_size || sims.cols() != z.num_concepts()) {
    throw ShapeError("similarity matrix " + ShapeToString(sims.shape()) +
                     " does not match the indicator");
  }
  Tensor logits = MulScalar(tape, sims, Exp(tape, scalars.log_scale));
  logits = AddScalar(tape, logits, scalars.bias);
  logits = Mul(tape, logits, z.AsTensor());
  return Scale(tape, Sum(tape, LogSigmoid(tape, logits)), -1.0 / normalizer);
}

Tensor ConceptIndicator::AsTensor() const {
  if (num_concepts() == 0) return Tensor();
  return Tensor::FromData({batch_size, num_concepts()},
                          std::vector<double>(z.begin(), z.end()));
}

ConceptIndicator BuildConceptIndicator(std::span<const int64_t> owners,
                                       int64_t batch_size) {
  if (batch_size < 1) throw ContractError("concept indicator needs a non-empty batch");
  ConceptIndicator ind;
  ind.batch_size = batch_size;
  ind.owner.assign(owners.begin(), owners.end());
  ind.counts.assign(batch_size, 0);
  const int64_t k = ind.num_concepts();
  ind.z.assign(batch_size * k, -1);
  for (int64_t j = 0; j < k; ++j) {
    const int64_t i = owners[j];
    if (i < 0 || i >= batch_size) {
      throw ContractError("concept owner " + std::to_string(i) +
                          " outside batch of size " + std::to_string(batch_size));
    }
    ind.z[i * k + j] = 1;
    ++ind.counts[i];
  }
  return ind;
}

ConceptIndicator PairIndicator(int64_t batch_size) {
  std::vector<int64_t> owners(batch_size);
  for (int64_t i = 0; i < batch_size; ++i) owners[i] = i;
  return BuildConceptIndicator(owners, batch_size);
}

Tensor ContrastiveSigmoid(Tape* tape, const Tensor& v, const Tensor& t,
                          const LossScalars& scalars) {
  if (v.rank() != 2 || v.shape() != t.shape()) {
    throw ContractError("contrastive loss needs equally shaped [B x D] embeddings, got " +
                        ShapeToString(v.shape()) + " and " + ShapeToString(t.shape()));
  }
  CheckUnitRows(v, "image embedding");
  CheckUnitRows(t, "text embedding");
  const int64_t b = v.rows();
  Tensor sims = MatMul(tape, v, t, false, true);
  return PairwiseSigmoidLoss(tape, sims, PairIndicator(b), scalars, static_cast<double>(b));
}

LossValue NpcLoss(Tape* tape, const Tensor& v, const Tensor& concepts,
                  const ConceptIndicator& z, const LossScalars& scalars) {
  if (v.rows() != z.batch_size) throw ContractError("npc loss: batch size mismatch");
  if (z.num_concepts() == 0) return Skipped();
  if (!concepts.defined() || concepts.rows() != z.num_concepts() ||
      concepts.cols() != v.cols()) {
    throw ContractError("npc loss: concept matrix does not match the indicator");
  }
  CheckUnitRows(v, "image embedding");
  CheckUnitRows(concepts, "concept embedding");
  Tensor sims = MatMul(tape, v, concepts, false, true);
  return {PairwiseSigmoidLoss(tape, sims, z, scalars, static_cast<double>(z.num_concepts())),
          false};
}

LossValue XacLoss(Tape* tape, const ModelParams& params, const Tensor& image_tokens,
                  std::span<const RowRange> image_segments, const Tensor& concepts,
                  const ConceptIndicator& z, const LossScalars& scalars) {
  if (static_cast<int64_t>(image_segments.size()) != z.batch_size) {
    throw ContractError("xac loss: batch size mismatch");
  }
  const int64_t k = z.num_concepts();
  if (k == 0) return Skipped();
  if (!concepts.defined() || concepts.rows() != k) {
    throw ContractError("xac loss: concept matrix does not match the indicator");
  }
  CheckUnitRows(concepts, "concept embedding");
  std::vector<CrossPair> pairs;
  std::vector<int64_t> concept_rows;
  pairs.reserve(z.batch_size * k);
  for (int64_t i = 0; i < z.batch_size; ++i) {
    for (int64_t j = 0; j < k; ++j) {
      pairs.push_back({i, j});
      concept_rows.push_back(j);
    }
  }
  Tensor joint = JointPatchTokens(tape, params, image_tokens);
  Tensor vhat = CrossAttend(tape, params, joint, image_segments, concepts, pairs);
  Tensor c = GatherRows(tape, concepts, concept_rows);
  Tensor sims = Reshape(tape, RowDot(tape, vhat, c), {z.batch_size, k});
  return {PairwiseSigmoidLoss(tape, sims, z, scalars, static_cast<double>(k)), false};
}

std::string_view AblationName(AblationMode mode) {
  switch (mode) {
    case AblationMode::kContrastiveOnly:
      return "contrastive_only";
    case AblationMode::kPlusNpc:
      return "plus_npc";
    case AblationMode::kFull:
      return "full";
  }
  return "full";
}

AblationMode ParseAblation(std::string_view name) {
  if (name == "contrastive_only") return AblationMode::kContrastiveOnly;
  if (name == "plus_npc" || name == "npc") return AblationMode::kPlusNpc;
  if (name == "full" || name == "xac") return AblationMode::kFull;
  throw ConfigError("unknown ablation mode '" + std::string(name) +
                    "' (expected contrastive_only, plus_npc or full)");
}

void LossWeights::Validate() const {
  if (!(lambda_npc >= 0.0) || !std::isfinite(lambda_npc)) {
    throw ConfigError("lambda_npc must be finite and non-negative");
  }
  if (!(lambda_xac >= 0.0) || !std::isfinite(lambda_xac)) {
    throw ConfigError("lambda_xac must be finite and non-negative");
  }
}

Tensor TotalLoss(Tape* tape, const Tensor& contrastive,
                 const std::optional<LossValue>& npc,
                 const std::optional<LossValue>& xac, const LossWeights& weights) {
  weights.Validate();
  Tensor total = contrastive;
  if (npc && !npc->skipped && weights.lambda_npc > 0.0) {
    total = Add(tape, total, Scale(tape, npc->value, weights.lambda_npc));
  }
  if (xac && !xac->skipped && weights.lambda_xac > 0.0) {
    total = Add(tape, total, Scale(tape, xac->value, weights.lambda_xac));
  }
  return total;
}

BatchLosses ComputeBatchLosses(Tape* tape, const ModelParams& params,
                               const Batch& batch, AblationMode mode,
                               const LossWeights& weights) {
  weights.Validate();
  const int64_t b = static_cast<int64_t>(batch.images.size());
  if (b < 1 || static_cast<int64_t>(batch.captions.size()) != b) {
    throw ContractError("batch needs one caption per image");
  }
  if (mode != AblationMode::kContrastiveOnly &&
      static_cast<int64_t>(batch.concepts.size()) != b) {
    throw ContractError("batch needs one concept list per caption");
  }
  BatchLosses out;
  ImageEncoding images = EncodeImages(tape, params, batch.images);
  TextEncoding text = EncodeTexts(tape, params, batch.captions);
  out.image_embeddings = PoolImages(tape, params, images);
  out.text_embeddings = PoolText(tape, params, text);
  out.contrastive = ContrastiveSigmoid(tape, out.image_embeddings, out.text_embeddings,
                                       params.ScalarsFor(LossTerm::kContrastive));
  if (mode != AblationMode::kContrastiveOnly) {
    std::vector<int64_t> owners;
    std::vector<ConceptSpan> spans;
    for (int64_t i = 0; i < b; ++i) {
      const int64_t len = text.segments[i].size();
      for (const auto& s : batch.concepts[i]) {
        if (s.end > len) continue;
        owners.push_back(i);
        spans.push_back(s);
      }
    }
    ConceptIndicator z = BuildConceptIndicator(owners, b);
    Tensor concepts = PoolConcepts(tape, params, text, owners, spans);
    out.npc = NpcLoss(tape, out.image_embeddings, concepts, z,
                      params.ScalarsFor(LossTerm::kNpc));
    if (mode == AblationMode::kFull) {
      out.xac = XacLoss(tape, params, images.tokens, images.segments, concepts, z,
                        params.ScalarsFor(LossTerm::kXac));
    }
  }
  out.total = TotalLoss(tape, out.contrastive, out.npc, out.xac, weights);
  return out;
}

}  // namespace c2l
