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

#include "c2l/eval.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string_view>

#include "c2l/errors.h"
#include "c2l/json.h"
#include "c2l/random.h"

namespace c2l {
namespace {

constexpr uint64_t kImageTag = 0x494d47;
constexpr uint64_t kTextTag = 0x545854;

Embedding UnitGaussian(Rng& rng, int64_t dim) {
  Embedding e(dim);
  double ss = 0.0;
  for (double& x : e) {
    x = rng.Normal();
    ss += x * x;
  }
  const double norm = std::sqrt(ss);
  for (double& x : e) x /= norm;
  return e;
}

uint64_t ImageHash(const Image& image) {
  std::string_view bytes(reinterpret_cast<const char*>(image.pixels.data()),
                         image.pixels.size() * sizeof(double));
  return Fnv1a64(bytes) ^ static_cast<uint64_t>(image.height * 1000003 + image.width);
}

Embedding Row(const Tensor& t, int64_t r) {
  auto d = t.data();
  return Embedding(d.begin() + r * t.cols(), d.begin() + (r + 1) * t.cols());
}

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void WritePgm(const std::filesystem::path& path, int64_t rows, int64_t cols,
              const std::vector<double>& magnitudes, double max) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (double m : magnitudes) {
    const long v = max > 0.0 ? std::lround(255.0 * m / max) : 0;
    out.put(static_cast<char>(static_cast<unsigned char>(std::clamp(v, 0L, 255L))));
  }
  if (!out) throw IoError("failed writing " + path.string());
}

void RequirePositives(const BenchmarkItem& item, size_t n, const char* protocol) {
  if (item.positives.size() != n) {
    throw ContractError(std::string(protocol) + " needs " + std::to_string(n) +
                        " positive(s) per item; " + item.image_id + " has " +
                        std::to_string(item.positives.size()));
  }
}

}  // namespace

double Similarity(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ContractError("similarity of vectors of different length");
  double aa = 0.0, bb = 0.0, ab = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    aa += a[i] * a[i];
    bb += b[i] * b[i];
    ab += a[i] * b[i];
  }
  if (std::abs(std::sqrt(aa) - 1.0) > kEvalNormTolerance ||
      std::abs(std::sqrt(bb) - 1.0) > kEvalNormTolerance) {
    throw ContractError("similarity needs unit-norm embeddings");
  }
  return ab;
}

// ---------------------------------------------------------------------------
// Models.

TrainedModel::TrainedModel(ModelParams params, Vocabulary vocab)
    : params_(std::move(params)), vocab_(std::move(vocab)) {
  if (params_.config.vocab_size != vocab_.size()) {
    throw ContractError("model vocab_size differs from the vocabulary size");
  }
}

TrainedModel TrainedModel::FromCheckpoint(const Checkpoint& ckpt) {
  return TrainedModel(ParamsFromCheckpoint(ckpt), VocabFromCheckpoint(ckpt));
}

Embedding TrainedModel::EmbedImage(const Image& image) const {
  const Image* ptr = &image;
  ImageEncoding enc = EncodeImages(nullptr, params_, std::span(&ptr, 1));
  return Row(PoolImages(nullptr, params_, enc), 0);
}

Embedding TrainedModel::EmbedText(const std::string& caption) const {
  TextEncoding enc = EncodeText(nullptr, params_, vocab_.EncodeCaption(caption));
  return Row(PoolText(nullptr, params_, enc), 0);
}

Embedding RandomEmbeddingModel::EmbedImage(const Image& image) const {
  Rng rng(MixSeed(seed_, kImageTag), ImageHash(image));
  return UnitGaussian(rng, dim_);
}

Embedding RandomEmbeddingModel::EmbedText(const std::string& caption) const {
  Rng rng(MixSeed(seed_, kTextTag), Fnv1a64(caption));
  return UnitGaussian(rng, dim_);
}

Embedding BagOfWordsModel::EmbedImage(const Image& image) const {
  Rng rng(MixSeed(seed_, kImageTag), ImageHash(image));
  return UnitGaussian(rng, dim_);
}

Embedding BagOfWordsModel::EmbedText(const std::string& caption) const {
  // Summing in sorted order makes permuted captions bit-identical.
  auto words = Tokenize(caption);
  std::sort(words.begin(), words.end());
  Embedding sum(dim_, 0.0);
  for (const auto& w : words) {
    Rng rng(MixSeed(seed_, kTextTag), Fnv1a64(w));
    const Embedding e = UnitGaussian(rng, dim_);
    for (int64_t i = 0; i < dim_; ++i) sum[i] += e[i];
  }
  double ss = 0.0;
  for (double x : sum) ss += x * x;
  const double norm = std::sqrt(ss);
  if (norm > 0.0) {
    for (double& x : sum) x /= norm;
  }
  return sum;
}

// ---------------------------------------------------------------------------
// Accuracy.

std::vector<BenchmarkItem> LoadBenchmark(const std::filesystem::path& file) {
  std::vector<BenchmarkItem> items;
  for (auto& r : ReadDataset(file)) {
    if (!r.negative) throw ParseError(file.string() + ": " + r.image_id + " has no negative");
    BenchmarkItem item;
    item.image_id = r.image_id;
    item.image = ReadPpm(ImagePath(file, r.image_id));
    item.positives = r.positives.empty() ? std::vector<std::string>{r.caption} : r.positives;
    item.negative = *r.negative;
    item.task = r.task.value_or("unknown");
    items.push_back(std::move(item));
  }
  return items;
}

bool SingleCorrect(double positive, double negative) { return positive > negative; }

bool ScppCorrect(double positive1, double positive2, double negative) {
  return std::min(positive1, positive2) > negative;
}

bool TotCorrect(double positives, double positive1_negative, double positive2_negative) {
  return positives > std::max(positive1_negative, positive2_negative);
}

TaskAccuracies SugarCrepeAccuracy(const EmbeddingModel& model,
                                  std::span<const BenchmarkItem> items) {
  TaskAccuracies out;
  for (const auto& item : items) {
    RequirePositives(item, 1, "single-positive accuracy");
    const Embedding v = model.EmbedImage(item.image);
    const bool ok = SingleCorrect(Similarity(v, model.EmbedText(item.positives[0])),
                                  Similarity(v, model.EmbedText(item.negative)));
    auto& acc = out[item.task];
    ++acc.n;
    acc.correct += ok;
  }
  return out;
}

TaskAccuracies ScppAccuracy(const EmbeddingModel& model,
                            std::span<const BenchmarkItem> items) {
  TaskAccuracies out;
  for (const auto& item : items) {
    RequirePositives(item, 2, "two-positive accuracy");
    const Embedding v = model.EmbedImage(item.image);
    const bool ok = ScppCorrect(Similarity(v, model.EmbedText(item.positives[0])),
                                Similarity(v, model.EmbedText(item.positives[1])),
                                Similarity(v, model.EmbedText(item.negative)));
    auto& acc = out[item.task];
    ++acc.n;
    acc.correct += ok;
  }
  return out;
}

TaskAccuracies TotAccuracy(const EmbeddingModel& model,
                           std::span<const BenchmarkItem> items) {
  TaskAccuracies out;
  for (const auto& item : items) {
    RequirePositives(item, 2, "text-only accuracy");
    const Embedding p1 = model.EmbedText(item.positives[0]);
    const Embedding p2 = model.EmbedText(item.positives[1]);
    const Embedding n = model.EmbedText(item.negative);
    const bool ok = TotCorrect(Similarity(p1, p2), Similarity(p1, n), Similarity(p2, n));
    auto& acc = out[item.task];
    ++acc.n;
    acc.correct += ok;
  }
  return out;
}

double RecallAtK(const std::vector<Embedding>& images, const std::vector<Embedding>& texts,
                 int64_t k, RetrievalDirection direction) {
  const int64_t n = static_cast<int64_t>(images.size());
  if (static_cast<int64_t>(texts.size()) != n) {
    throw ContractError("recall needs one caption per image");
  }
  if (k < 1 || k > n) {
    throw ConfigError("recall@k needs 1 <= k <= " + std::to_string(n) + ", got " +
                      std::to_string(k));
  }
  const auto& queries = direction == RetrievalDirection::kImageToText ? images : texts;
  const auto& corpus = direction == RetrievalDirection::kImageToText ? texts : images;
  int64_t hits = 0;
  std::vector<double> scores(n);
  for (int64_t q = 0; q < n; ++q) {
    for (int64_t j = 0; j < n; ++j) scores[j] = Similarity(queries[q], corpus[j]);
    int64_t rank = 0;
    for (int64_t j = 0; j < n; ++j) {
      if (scores[j] > scores[q] || (scores[j] == scores[q] && j < q)) ++rank;
    }
    hits += rank < k;
  }
  return static_cast<double>(hits) / static_cast<double>(n);
}

void WriteEvalReport(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out << "# config_hash=" << report.config_hash << " seed=" << report.seed << '\n';
  out << "task,n,accuracy\n";
  for (const auto& [task, acc] : report.tasks) {
    out << task << ',' << acc.n << ',' << FormatDouble(acc.accuracy()) << '\n';
  }
  for (const auto& r : report.recalls) {
    out << r.name << ',' << r.n << ',' << FormatDouble(r.value) << '\n';
  }
  if (!out) throw IoError("failed writing " + path.string());
}

std::string FormatEvalSummary(const EvalReport& report) {
  std::ostringstream os;
  char buf[160];
  for (const auto& [task, acc] : report.tasks) {
    std::snprintf(buf, sizeof(buf), "%-34s n=%-6lld acc=%.4f\n", task.c_str(),
                  static_cast<long long>(acc.n), acc.accuracy());
    os << buf;
  }
  for (const auto& r : report.recalls) {
    std::snprintf(buf, sizeof(buf), "%-34s n=%-6lld %.4f\n", r.name.c_str(),
                  static_cast<long long>(r.n), r.value);
    os << buf;
  }
  return os.str();
}

// ---------------------------------------------------------------------------
// Attention.

std::vector<double> ConceptAttention(const ModelParams& params, const Vocabulary& vocab,
                                     const Image& image, const std::string& caption,
                                     const PosLexicon& lexicon) {
  const TextEncoding text = EncodeText(nullptr, params, vocab.EncodeCaption(caption));
  const auto spans = ExtractConcepts(caption, lexicon);
  Tensor c;
  if (!spans.empty() && spans[0].end <= text.segments[0].size()) {
    const int64_t owner = 0;
    c = PoolConcepts(nullptr, params, text, std::span(&owner, 1), std::span(&spans[0], 1));
  } else {
    c = PoolText(nullptr, params, text);
  }
  return CrossAttendWeights(params, c, EncodeImage(nullptr, params, image));
}

AttentionMap AttentionDifference(const ModelParams& a, const Vocabulary& vocab_a,
                                 const ModelParams& b, const Vocabulary& vocab_b,
                                 const Image& image, const std::string& caption,
                                 const PosLexicon& lexicon) {
  if (a.config.num_patches() != b.config.num_patches() ||
      a.config.patches_per_side() != b.config.patches_per_side()) {
    throw ContractError("attention difference needs models with the same patch grid (" +
                        std::to_string(a.config.num_patches()) + " vs " +
                        std::to_string(b.config.num_patches()) + " patches)");
  }
  const auto wa = ConceptAttention(a, vocab_a, image, caption, lexicon);
  const auto wb = ConceptAttention(b, vocab_b, image, caption, lexicon);
  AttentionMap map;
  map.rows = map.cols = a.config.patches_per_side();
  map.values.resize(wa.size());
  for (size_t i = 0; i < wa.size(); ++i) map.values[i] = wa[i] - wb[i];
  return map;
}

void WriteAttentionMap(const std::filesystem::path& prefix, const AttentionMap& map) {
  if (prefix.has_parent_path()) std::filesystem::create_directories(prefix.parent_path());
  auto with_suffix = [&](const char* suffix) {
    return prefix.parent_path() / (prefix.filename().string() + suffix);
  };
  std::ofstream csv(with_suffix(".csv"), std::ios::trunc);
  if (!csv) throw IoError("cannot write " + with_suffix(".csv").string());
  for (int64_t r = 0; r < map.rows; ++r) {
    for (int64_t c = 0; c < map.cols; ++c) {
      csv << (c ? "," : "") << FormatDouble(map.values[r * map.cols + c]);
    }
    csv << '\n';
  }
  if (!csv) throw IoError("failed writing " + with_suffix(".csv").string());
  std::vector<double> pos(map.values.size()), neg(map.values.size());
  double pos_max = 0.0, neg_max = 0.0;
  for (size_t i = 0; i < map.values.size(); ++i) {
    pos[i] = std::max(map.values[i], 0.0);
    neg[i] = std::max(-map.values[i], 0.0);
    pos_max = std::max(pos_max, pos[i]);
    neg_max = std::max(neg_max, neg[i]);
  }
  WritePgm(with_suffix("_pos.pgm"), map.rows, map.cols, pos, pos_max);
  WritePgm(with_suffix("_neg.pgm"), map.rows, map.cols, neg, neg_max);
  std::ofstream scale(with_suffix("_scale.txt"), std::ios::trunc);
  scale << "positive_max " << FormatDouble(pos_max) << "\nnegative_max "
        << FormatDouble(neg_max) << '\n';
  if (!scale) throw IoError("failed writing " + with_suffix("_scale.txt").string());
}

std::vector<bool> ObjectPatches(const SceneObject& object, const DataConfig& data,
                                const ModelConfig& model) {
  if (data.image_size != model.image_size) {
    throw ContractError("data and model image sizes differ");
  }
  const int64_t p = model.patch_size, side = model.patches_per_side();
  std::vector<bool> out(side * side, false);
  for (int64_t y = 0; y < data.image_size; ++y) {
    for (int64_t x = 0; x < data.image_size; ++x) {
      if (GlyphCovers(object, data, y, x)) out[(y / p) * side + x / p] = true;
    }
  }
  return out;
}

double SignTestPValue(int64_t wins, int64_t losses) {
  const int64_t n = wins + losses;
  if (n == 0) return 1.0;
  double p = 0.0;
  for (int64_t x = wins; x <= n; ++x) {
    p += std::exp(std::lgamma(n + 1.0) - std::lgamma(x + 1.0) - std::lgamma(n - x + 1.0) -
                  n * std::log(2.0));
  }
  return std::min(p, 1.0);
}

}  // namespace c2l
