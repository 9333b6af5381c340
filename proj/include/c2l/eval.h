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

// Compositionality accuracy, retrieval recall and attention-difference maps.
//
// Every comparison is strict: a tie between a positive and a negative counts
// as a miss.
//
//   single positive  correct iff s(I, p) > s(I, n)
//   two positives    correct iff min(s(I, p1), s(I, p2)) > s(I, n)
//   text only (TOT)  correct iff s(p1, p2) > max(s(p1, n), s(p2, n))

#ifndef C2L_EVAL_H_
#define C2L_EVAL_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "c2l/chunker.h"
#include "c2l/data.h"
#include "c2l/model.h"
#include "c2l/vocab.h"

namespace c2l {

using Embedding = std::vector<double>;

// Dot product of two unit vectors. Throws ContractError when either norm is
// off by more than kEvalNormTolerance.
inline constexpr double kEvalNormTolerance = 1e-6;
double Similarity(std::span<const double> a, std::span<const double> b);

class EmbeddingModel {
 public:
  virtual ~EmbeddingModel() = default;
  virtual Embedding EmbedImage(const Image& image) const = 0;
  virtual Embedding EmbedText(const std::string& caption) const = 0;
};

// The trained towers, run without a tape.
class TrainedModel : public EmbeddingModel {
 public:
  TrainedModel(ModelParams params, Vocabulary vocab);
  static TrainedModel FromCheckpoint(const Checkpoint& ckpt);

  Embedding EmbedImage(const Image& image) const override;
  Embedding EmbedText(const std::string& caption) const override;

  const ModelParams& params() const { return params_; }
  const Vocabulary& vocab() const { return vocab_; }

 private:
  ModelParams params_;
  Vocabulary vocab_;
};

// Independent Gaussian directions keyed by the input's content, so equal
// inputs embed equally and distinct inputs are unrelated.
class RandomEmbeddingModel : public EmbeddingModel {
 public:
  RandomEmbeddingModel(int64_t dim, uint64_t seed) : dim_(dim), seed_(seed) {}
  Embedding EmbedImage(const Image& image) const override;
  Embedding EmbedText(const std::string& caption) const override;

 private:
  int64_t dim_;
  uint64_t seed_;
};

// Text embedding = normalized sum of per-word random vectors, with no
// position information; images as in RandomEmbeddingModel.
class BagOfWordsModel : public EmbeddingModel {
 public:
  BagOfWordsModel(int64_t dim, uint64_t seed) : dim_(dim), seed_(seed) {}
  Embedding EmbedImage(const Image& image) const override;
  Embedding EmbedText(const std::string& caption) const override;

 private:
  int64_t dim_;
  uint64_t seed_;
};

struct BenchmarkItem {
  std::string image_id;
  Image image;
  std::vector<std::string> positives;
  std::string negative;
  std::string task;
};

// Reads a benchmark file and its images. Throws IoError or ParseError.
std::vector<BenchmarkItem> LoadBenchmark(const std::filesystem::path& file);

struct TaskAccuracy {
  int64_t n = 0;
  int64_t correct = 0;
  double accuracy() const {
    return n == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(n);
  }
};
using TaskAccuracies = std::map<std::string, TaskAccuracy>;

bool SingleCorrect(double positive, double negative);
bool ScppCorrect(double positive1, double positive2, double negative);
bool TotCorrect(double positives, double positive1_negative,
                double positive2_negative);

// Grouped by item task. Throws ContractError when an item has the wrong
// number of positives.
TaskAccuracies SugarCrepeAccuracy(const EmbeddingModel& model,
                                  std::span<const BenchmarkItem> items);
TaskAccuracies ScppAccuracy(const EmbeddingModel& model,
                            std::span<const BenchmarkItem> items);
TaskAccuracies TotAccuracy(const EmbeddingModel& model,
                           std::span<const BenchmarkItem> items);

enum class RetrievalDirection { kImageToText, kTextToImage };

// Fraction of queries whose match (same index) ranks in the top k. Equal
// scores rank the lower index first. Throws ConfigError for k outside
// [1, N].
double RecallAtK(const std::vector<Embedding>& images,
                 const std::vector<Embedding>& texts, int64_t k,
                 RetrievalDirection direction);

struct RecallEntry {
  std::string name;  // e.g. "recall@5_image_to_text"
  int64_t n = 0;
  double value = 0.0;
};

struct EvalReport {
  TaskAccuracies tasks;
  std::vector<RecallEntry> recalls;
  std::string config_hash;
  uint64_t seed = 0;
};

// "task,n,accuracy" rows after a "# config_hash=... seed=..." line.
void WriteEvalReport(const std::filesystem::path& path, const EvalReport& report);
std::string FormatEvalSummary(const EvalReport& report);

// ---------------------------------------------------------------------------
// Attention.

// Cross-attention probabilities over the patches of `image` for the first
// concept of `caption`, or the whole caption when it has none.
std::vector<double> ConceptAttention(const ModelParams& params,
                                     const Vocabulary& vocab, const Image& image,
                                     const std::string& caption,
                                     const PosLexicon& lexicon);

struct AttentionMap {
  int64_t rows = 0;
  int64_t cols = 0;
  std::vector<double> values;  // row-major patch grid
};

// Per-patch weight_a - weight_b. Throws ContractError when the two models
// disagree on the patch grid.
AttentionMap AttentionDifference(const ModelParams& a, const Vocabulary& vocab_a,
                                 const ModelParams& b, const Vocabulary& vocab_b,
                                 const Image& image, const std::string& caption,
                                 const PosLexicon& lexicon);

// Writes <prefix>.csv, <prefix>_pos.pgm, <prefix>_neg.pgm and
// <prefix>_scale.txt. Each PGM holds one sign's magnitudes divided by that
// sign's maximum, which the scale file records.
void WriteAttentionMap(const std::filesystem::path& prefix, const AttentionMap& map);

// True for patches that overlap the object's glyph.
std::vector<bool> ObjectPatches(const SceneObject& object, const DataConfig& data,
                                const ModelConfig& model);

// One-sided sign test: P(X >= wins) for X ~ Binomial(wins + losses, 1/2).
double SignTestPValue(int64_t wins, int64_t losses);

}  // namespace c2l

#endif  // C2L_EVAL_H_
