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

// Tiny dual-encoder vision-language model.
//
// Both towers are pre-norm transformers over stacked token rows: a batch of
// sequences is one [sum(len) x D] matrix and attention is restricted to each
// sequence's row range. Each tower ends in an attention-pooling head
//
//   q' = f_query(q), K = f_key(X), V' = f_value(X)
//   pooled = softmax(q' K^T / sqrt(D)) V'
//   out = normalize(f_mlp(pooled))
//
// and the vision head's f_value and f_mlp are reused, without new
// parameters, for concept-conditioned cross attention over patch tokens.

#ifndef C2L_MODEL_H_
#define C2L_MODEL_H_

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "c2l/chunker.h"
#include "c2l/gradcheck.h"
#include "c2l/json.h"
#include "c2l/ops.h"
#include "c2l/tensor.h"
#include "c2l/vocab.h"

namespace c2l {

// HWC image with values in [0, 1].
struct Image {
  int64_t height = 0;
  int64_t width = 0;
  std::vector<double> pixels;  // height * width * 3

  double at(int64_t y, int64_t x, int64_t c) const {
    return pixels[(y * width + x) * 3 + c];
  }
  bool operator==(const Image&) const = default;
};

enum class TextPoolMode { kAttention, kMean };

struct ModelConfig {
  int64_t image_size = 32;
  int64_t patch_size = 8;
  int64_t d_enc = 64;
  int64_t d_joint = 32;
  int64_t layers = 2;
  int64_t heads = 2;
  int64_t mlp_ratio = 4;
  int64_t vocab_size = 0;
  int64_t max_len = 16;
  // Head count of the pooling attention; 1 gives the 1/sqrt(d_enc) scaling.
  int64_t pool_heads = 1;
  TextPoolMode text_pool = TextPoolMode::kAttention;
  // One (scale, bias) pair per loss instead of a single shared pair.
  bool separate_loss_scalars = false;
  double init_log_scale = 2.302585092994046;  // log(10)
  double init_bias = -10.0;

  int64_t patches_per_side() const { return image_size / patch_size; }
  int64_t num_patches() const { return patches_per_side() * patches_per_side(); }
  int64_t patch_dim() const { return patch_size * patch_size * 3; }

  // Throws ConfigError.
  void Validate() const;
  Json ToJson() const;
  // Rejects unknown keys; missing keys keep their defaults.
  static ModelConfig FromJson(const Json& json);
};

struct LinearParams {
  Tensor weight;  // [in x out]
  Tensor bias;    // [out]
};

struct BlockParams {
  Tensor ln1_gain, ln1_bias;
  LinearParams query, key, value, out;
  Tensor ln2_gain, ln2_bias;
  LinearParams fc1, fc2;
};

struct EncoderParams {
  // Vision: patch projection [patch_dim x d_enc] with bias.
  // Text: token table [vocab x d_enc]; embed.bias is undefined.
  LinearParams embed;
  Tensor position;  // [positions x d_enc]
  std::vector<BlockParams> blocks;
  Tensor final_gain, final_bias;
};

struct PoolHeadParams {
  Tensor query;  // [1 x d_enc]
  LinearParams f_query, f_key, f_value;
  LinearParams mlp1;  // d_enc -> d_enc, GELU
  LinearParams mlp2;  // d_enc -> d_joint
};

// Similarity scale is stored as log(scale) so the scale stays positive.
struct LossScalars {
  Tensor log_scale;
  Tensor bias;
  double scale() const;
};

enum class LossTerm { kContrastive = 0, kNpc = 1, kXac = 2 };

struct ModelParams {
  ModelConfig config;
  EncoderParams vision;
  EncoderParams text;
  PoolHeadParams vision_head;
  PoolHeadParams text_head;
  std::vector<LossScalars> scalars;  // 1 shared pair, or 3 separate pairs

  // Deterministic initialization from a seed.
  static ModelParams Init(const ModelConfig& config, uint64_t seed);

  const LossScalars& ScalarsFor(LossTerm term) const;
  // Every learnable tensor with a stable hierarchical name, in a fixed order.
  std::vector<NamedTensor> Named() const;
  // Deep copy.
  ModelParams Clone() const;
};

// Total scalar parameter count. The cross-attention path owns no parameters,
// so this does not depend on which losses are trained.
int64_t ParamCount(const ModelParams& params);
// Closed-form count from the config alone.
int64_t ParamCountForConfig(const ModelConfig& config);

// ---------------------------------------------------------------------------
// Encoders.

// Rows of each patch, patch-major in row-major patch order, pixel order
// (y, x, channel) inside a patch. Throws ShapeError when the image is not
// image_size square or not divisible by the patch size.
Tensor Patchify(const ModelConfig& config, std::span<const Image* const> images);

struct ImageEncoding {
  Tensor tokens;                   // [B*M x d_enc]
  std::vector<RowRange> segments;  // one per image
};
ImageEncoding EncodeImages(Tape* tape, const ModelParams& params,
                           std::span<const Image* const> images);
// Patch tokens V [M x d_enc] of one image.
Tensor EncodeImage(Tape* tape, const ModelParams& params, const Image& image);

struct TextEncoding {
  Tensor tokens;                   // [sum(len) x d_enc]
  std::vector<RowRange> segments;  // one per caption
  std::vector<uint8_t> mask;       // 1 = real token, 0 = padding
  std::vector<bool> truncated;     // per caption
};
// Captions longer than max_len are truncated and flagged. Token id
// Vocabulary::kPad marks padding, which is masked out of all attention.
TextEncoding EncodeTexts(Tape* tape, const ModelParams& params,
                         const std::vector<std::vector<int64_t>>& captions);
// Single caption. Throws ContractError on an empty token list.
TextEncoding EncodeText(Tape* tape, const ModelParams& params,
                        const std::vector<int64_t>& token_ids);

// ---------------------------------------------------------------------------
// Pooling.

// f_mlp of a head: mlp2(gelu(mlp1(x))).
Tensor HeadMlp(Tape* tape, const PoolHeadParams& head, const Tensor& x);
Tensor Linear(Tape* tape, const LinearParams& p, const Tensor& x);

// Attention pooling over each segment of `tokens`; one unit-norm row per
// segment. `mask` may be empty.
Tensor AttentionPool(Tape* tape, const PoolHeadParams& head,
                     int64_t pool_heads, const Tensor& tokens,
                     std::span<const RowRange> segments,
                     std::span<const uint8_t> mask);
// The pooling probabilities, one vector per (segment, head).
std::vector<std::vector<double>> AttentionPoolWeights(
    const PoolHeadParams& head, int64_t pool_heads, const Tensor& tokens,
    std::span<const RowRange> segments, std::span<const uint8_t> mask);

// normalize(f_mlp(mean of rows)) per segment.
Tensor MeanPool(Tape* tape, const PoolHeadParams& head, const Tensor& tokens,
                std::span<const RowRange> segments);

// Global text embedding t per caption, by the configured pool mode.
Tensor PoolText(Tape* tape, const ModelParams& params, const TextEncoding& text);
// Global image embedding v per image.
Tensor PoolImages(Tape* tape, const ModelParams& params,
                  const ImageEncoding& images);

// One concept embedding per span: normalize(f_mlp(mean of span tokens)) with
// the text head. Spans are relative to each caption; `owner[k]` names the
// caption of spans[k]. Throws ContractError for spans outside the caption.
Tensor PoolConcepts(Tape* tape, const ModelParams& params,
                    const TextEncoding& text,
                    std::span<const int64_t> owner,
                    std::span<const ConceptSpan> spans);

// One (image, concept) pair of the cross-attention.
struct CrossPair {
  int64_t image = 0;
  int64_t concept_index = 0;
};

// Patch tokens in the joint space, V'' = f_mlp(f_value(V)), for the vision
// head; keys and values of the cross attention.
Tensor JointPatchTokens(Tape* tape, const ModelParams& params,
                        const Tensor& image_tokens);

// normalize(softmax(c V''^T / sqrt(d_joint)) V'') for each pair, where V''
// is the image's rows of `joint_tokens`.
Tensor CrossAttend(Tape* tape, const ModelParams& params,
                   const Tensor& joint_tokens,
                   std::span<const RowRange> image_segments,
                   const Tensor& concepts, std::span<const CrossPair> pairs);
// Single concept c [1 x d_joint] against one image's patch tokens V.
Tensor CrossAttendOne(Tape* tape, const ModelParams& params, const Tensor& c,
                      const Tensor& patch_tokens);
// Cross-attention probabilities over the M patches of one image.
std::vector<double> CrossAttendWeights(const ModelParams& params,
                                       const Tensor& c,
                                       const Tensor& patch_tokens);

// Per-thread call counts of the concept machinery; lets a training run prove
// that a configuration never reached it.
struct ConceptPathCounters {
  int64_t concept_poolings = 0;
  int64_t cross_attends = 0;
};
ConceptPathCounters& ConceptPathCalls();

// ---------------------------------------------------------------------------
// Checkpoints.
//
// Layout (all integers little-endian):
//   "C2L1" | u32 version | u32 n + n bytes canonical JSON config
//   | u64 FNV-1a hash of those bytes | u64 step | u32 tensor count
//   | per tensor: u32 n + name | u32 rank | u64 dims... | f64 values...

inline constexpr uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  Json config;
  uint64_t step = 0;
  std::vector<NamedTensor> tensors;
};

// Throws IoError.
void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
// Throws IoError when unreadable, CheckpointError when corrupt.
Checkpoint ReadCheckpoint(const std::filesystem::path& path);

// Config holds {"model": ..., "vocab": [...]} plus `extra` keys.
Checkpoint MakeModelCheckpoint(const ModelParams& params,
                               const Vocabulary& vocab, Json extra = Json::object());
// Rebuilds parameters; throws CheckpointError on missing or misshapen
// tensors.
ModelParams ParamsFromCheckpoint(const Checkpoint& ckpt);
Vocabulary VocabFromCheckpoint(const Checkpoint& ckpt);

}  // namespace c2l

#endif  // C2L_MODEL_H_
