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

#include "c2l/model.h"

#include <bit>
#include <cmath>
#include <fstream>
#include <functional>
#include <iterator>
#include <map>

#include "c2l/errors.h"
#include "c2l/random.h"

namespace c2l {
namespace {

// Creates every parameter tensor in the canonical order. `fill` receives the
// tensor and an init kind and writes its values.
enum class InitKind { kZero, kOne, kLinear, kEmbedding };

class ParamBuilder {
 public:
  using Fill = std::function<void(Tensor&, InitKind, int64_t fan_in)>;
  explicit ParamBuilder(Fill fill) : fill_(std::move(fill)) {}

  Tensor Make(Shape shape, InitKind kind, int64_t fan_in = 1) {
    Tensor t = Tensor::Zeros(std::move(shape), /*requires_grad=*/true);
    fill_(t, kind, fan_in);
    return t;
  }
  LinearParams MakeLinear(int64_t in, int64_t out, bool bias = true) {
    LinearParams p;
    p.weight = Make({in, out}, InitKind::kLinear, in);
    if (bias) p.bias = Make({out}, InitKind::kZero);
    return p;
  }
  std::pair<Tensor, Tensor> MakeNorm(int64_t d) {
    Tensor gain = Make({d}, InitKind::kOne);
    Tensor bias = Make({d}, InitKind::kZero);
    return {gain, bias};
  }

 private:
  Fill fill_;
};

EncoderParams BuildEncoder(ParamBuilder& b, const ModelConfig& c, bool vision) {
  const int64_t d = c.d_enc;
  EncoderParams e;
  if (vision) {
    e.embed = b.MakeLinear(c.patch_dim(), d);
    e.position = b.Make({c.num_patches(), d}, InitKind::kEmbedding);
  } else {
    e.embed.weight = b.Make({c.vocab_size, d}, InitKind::kEmbedding);
    e.position = b.Make({c.max_len, d}, InitKind::kEmbedding);
  }
  for (int64_t l = 0; l < c.layers; ++l) {
    BlockParams blk;
    std::tie(blk.ln1_gain, blk.ln1_bias) = b.MakeNorm(d);
    blk.query = b.MakeLinear(d, d);
    blk.key = b.MakeLinear(d, d);
    blk.value = b.MakeLinear(d, d);
    blk.out = b.MakeLinear(d, d);
    std::tie(blk.ln2_gain, blk.ln2_bias) = b.MakeNorm(d);
    blk.fc1 = b.MakeLinear(d, d * c.mlp_ratio);
    blk.fc2 = b.MakeLinear(d * c.mlp_ratio, d);
    e.blocks.push_back(std::move(blk));
  }
  std::tie(e.final_gain, e.final_bias) = b.MakeNorm(d);
  return e;
}

PoolHeadParams BuildHead(ParamBuilder& b, const ModelConfig& c) {
  const int64_t d = c.d_enc;
  PoolHeadParams h;
  h.query = b.Make({1, d}, InitKind::kEmbedding);
  h.f_query = b.MakeLinear(d, d);
  h.f_key = b.MakeLinear(d, d);
  h.f_value = b.MakeLinear(d, d);
  h.mlp1 = b.MakeLinear(d, d);
  h.mlp2 = b.MakeLinear(d, c.d_joint);
  return h;
}

ModelParams Build(const ModelConfig& config, ParamBuilder& b) {
  config.Validate();
  ModelParams p;
  p.config = config;
  p.vision = BuildEncoder(b, config, /*vision=*/true);
  p.text = BuildEncoder(b, config, /*vision=*/false);
  p.vision_head = BuildHead(b, config);
  p.text_head = BuildHead(b, config);
  const int n = config.separate_loss_scalars ? 3 : 1;
  for (int i = 0; i < n; ++i) {
    LossScalars s;
    s.log_scale = Tensor::Scalar(config.init_log_scale, true);
    s.bias = Tensor::Scalar(config.init_bias, true);
    p.scalars.push_back(s);
  }
  return p;
}

void AddLinear(std::vector<NamedTensor>& out, const std::string& prefix,
               const LinearParams& p) {
  out.push_back({prefix + ".weight", p.weight});
  if (p.bias.defined()) out.push_back({prefix + ".bias", p.bias});
}

void AddEncoder(std::vector<NamedTensor>& out, const std::string& prefix,
                const EncoderParams& e) {
  AddLinear(out, prefix + ".embed", e.embed);
  out.push_back({prefix + ".position", e.position});
  for (size_t l = 0; l < e.blocks.size(); ++l) {
    const auto& b = e.blocks[l];
    const std::string p = prefix + ".blocks." + std::to_string(l);
    out.push_back({p + ".ln1.gain", b.ln1_gain});
    out.push_back({p + ".ln1.bias", b.ln1_bias});
    AddLinear(out, p + ".attn.query", b.query);
    AddLinear(out, p + ".attn.key", b.key);
    AddLinear(out, p + ".attn.value", b.value);
    AddLinear(out, p + ".attn.out", b.out);
    out.push_back({p + ".ln2.gain", b.ln2_gain});
    out.push_back({p + ".ln2.bias", b.ln2_bias});
    AddLinear(out, p + ".mlp.fc1", b.fc1);
    AddLinear(out, p + ".mlp.fc2", b.fc2);
  }
  out.push_back({prefix + ".final.gain", e.final_gain});
  out.push_back({prefix + ".final.bias", e.final_bias});
}

void AddHead(std::vector<NamedTensor>& out, const std::string& prefix,
             const PoolHeadParams& h) {
  out.push_back({prefix + ".query", h.query});
  AddLinear(out, prefix + ".f_query", h.f_query);
  AddLinear(out, prefix + ".f_key", h.f_key);
  AddLinear(out, prefix + ".f_value", h.f_value);
  AddLinear(out, prefix + ".mlp1", h.mlp1);
  AddLinear(out, prefix + ".mlp2", h.mlp2);
}

const char* const kLossTermNames[] = {"contrastive", "npc", "xac"};

// Pre-norm transformer over stacked sequences.
Tensor RunBlocks(Tape* tape, const ModelConfig& c, const EncoderParams& e,
                 Tensor x, const std::vector<RowRange>& row_ranges,
                 const std::vector<uint8_t>& mask) {
  AttentionSpec spec;
  spec.key_ranges = row_ranges;
  spec.key_mask = mask;
  spec.num_heads = c.heads;
  spec.scale = 1.0 / std::sqrt(static_cast<double>(c.d_enc / c.heads));
  for (const auto& b : e.blocks) {
    Tensor h = LayerNorm(tape, x, b.ln1_gain, b.ln1_bias);
    Tensor q = Linear(tape, b.query, h);
    Tensor k = Linear(tape, b.key, h);
    Tensor v = Linear(tape, b.value, h);
    Tensor a = Attention(tape, q, k, v, spec);
    x = Add(tape, x, Linear(tape, b.out, a));
    Tensor h2 = LayerNorm(tape, x, b.ln2_gain, b.ln2_bias);
    Tensor m = Linear(tape, b.fc2, Gelu(tape, Linear(tape, b.fc1, h2)));
    x = Add(tape, x, m);
  }
  return LayerNorm(tape, x, e.final_gain, e.final_bias);
}

std::vector<RowRange> PerRowRanges(std::span<const RowRange> segments) {
  std::vector<RowRange> ranges;
  for (const auto& s : segments) {
    for (int64_t r = s.begin; r < s.end; ++r) ranges.push_back(s);
  }
  return ranges;
}

void CheckSegments(const Tensor& tokens, std::span<const RowRange> segments,
                   const char* what) {
  if (segments.empty()) throw ContractError(std::string(what) + ": no sequences");
  for (const auto& s : segments) {
    if (s.size() <= 0) throw ContractError(std::string(what) + ": empty sequence (M = 0)");
    if (s.begin < 0 || s.end > tokens.rows()) {
      throw ContractError(std::string(what) + ": sequence outside token rows");
    }
  }
}

// Little-endian binary helpers.
void PutU32(std::string& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}
void PutU64(std::string& out, uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}
  std::string_view Take(size_t n) {
    if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint truncated");
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  uint64_t Uint(int width) {
    auto s = Take(width);
    uint64_t v = 0;
    for (int i = width - 1; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(s[i]);
    return v;
  }
  bool done() const { return pos_ == bytes_.size(); }

 private:
  std::string_view bytes_;
  size_t pos_ = 0;
};

int64_t LinearCount(int64_t in, int64_t out, bool bias = true) {
  return in * out + (bias ? out : 0);
}

int64_t EncoderCount(const ModelConfig& c, bool vision) {
  const int64_t d = c.d_enc;
  const int64_t hidden = d * c.mlp_ratio;
  int64_t n = vision ? LinearCount(c.patch_dim(), d) + c.num_patches() * d
                     : c.vocab_size * d + c.max_len * d;
  const int64_t block = 4 * d + 4 * LinearCount(d, d) + LinearCount(d, hidden) +
                        LinearCount(hidden, d);
  n += c.layers * block + 2 * d;
  return n;
}

int64_t HeadCount(const ModelConfig& c) {
  const int64_t d = c.d_enc;
  return d + 4 * LinearCount(d, d) + LinearCount(d, c.d_joint);
}

}  // namespace

// ---------------------------------------------------------------------------
// Config.

void ModelConfig::Validate() const {
  auto positive = [](int64_t v, const char* name) {
    if (v <= 0) throw ConfigError(std::string("model.") + name + " must be positive");
  };
  positive(image_size, "image_size");
  positive(patch_size, "patch_size");
  positive(d_enc, "d_enc");
  positive(d_joint, "d_joint");
  positive(layers, "layers");
  positive(heads, "heads");
  positive(mlp_ratio, "mlp_ratio");
  positive(max_len, "max_len");
  positive(pool_heads, "pool_heads");
  if (vocab_size < 2) throw ConfigError("model.vocab_size must be at least 2");
  if (image_size % patch_size != 0) {
    throw ConfigError("model.image_size must be divisible by model.patch_size");
  }
  if (d_enc < 2) throw ConfigError("model.d_enc must be at least 2");
  if (d_enc % heads != 0) throw ConfigError("model.d_enc must be divisible by model.heads");
  if (d_enc % pool_heads != 0) {
    throw ConfigError("model.d_enc must be divisible by model.pool_heads");
  }
  if (!std::isfinite(init_log_scale) || !std::isfinite(init_bias)) {
    throw ConfigError("model loss scalar initializers must be finite");
  }
}

Json ModelConfig::ToJson() const {
  return Json{{"image_size", image_size},
              {"patch_size", patch_size},
              {"d_enc", d_enc},
              {"d_joint", d_joint},
              {"layers", layers},
              {"heads", heads},
              {"mlp_ratio", mlp_ratio},
              {"vocab_size", vocab_size},
              {"max_len", max_len},
              {"pool_heads", pool_heads},
              {"text_pool", text_pool == TextPoolMode::kMean ? "mean" : "attention"},
              {"separate_loss_scalars", separate_loss_scalars},
              {"init_log_scale", init_log_scale},
              {"init_bias", init_bias}};
}

ModelConfig ModelConfig::FromJson(const Json& json) {
  RejectUnknownKeys(json,
                    {"image_size", "patch_size", "d_enc", "d_joint", "layers",
                     "heads", "mlp_ratio", "vocab_size", "max_len", "pool_heads",
                     "text_pool", "separate_loss_scalars", "init_log_scale",
                     "init_bias"},
                    "model");
  ModelConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (json.contains(key)) json.at(key).get_to(field);
    };
    get("image_size", c.image_size);
    get("patch_size", c.patch_size);
    get("d_enc", c.d_enc);
    get("d_joint", c.d_joint);
    get("layers", c.layers);
    get("heads", c.heads);
    get("mlp_ratio", c.mlp_ratio);
    get("vocab_size", c.vocab_size);
    get("max_len", c.max_len);
    get("pool_heads", c.pool_heads);
    get("separate_loss_scalars", c.separate_loss_scalars);
    get("init_log_scale", c.init_log_scale);
    get("init_bias", c.init_bias);
    if (json.contains("text_pool")) {
      const auto mode = json.at("text_pool").get<std::string>();
      if (mode == "mean") {
        c.text_pool = TextPoolMode::kMean;
      } else if (mode == "attention") {
        c.text_pool = TextPoolMode::kAttention;
      } else {
        throw ConfigError("model.text_pool must be \"attention\" or \"mean\"");
      }
    }
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("model: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Parameters.

double LossScalars::scale() const { return std::exp(log_scale.item()); }

ModelParams ModelParams::Init(const ModelConfig& config, uint64_t seed) {
  Rng rng(seed);
  ParamBuilder b([&rng](Tensor& t, InitKind kind, int64_t fan_in) {
    auto data = t.mutable_data();
    switch (kind) {
      case InitKind::kZero:
        break;
      case InitKind::kOne:
        for (double& x : data) x = 1.0;
        break;
      case InitKind::kLinear: {
        const double std = 1.0 / std::sqrt(static_cast<double>(fan_in));
        for (double& x : data) x = std * rng.Normal();
        break;
      }
      case InitKind::kEmbedding:
        for (double& x : data) x = 0.02 * rng.Normal();
        break;
    }
  });
  return Build(config, b);
}

const LossScalars& ModelParams::ScalarsFor(LossTerm term) const {
  if (scalars.size() == 1) return scalars[0];
  return scalars.at(static_cast<size_t>(term));
}

std::vector<NamedTensor> ModelParams::Named() const {
  std::vector<NamedTensor> out;
  AddEncoder(out, "vision", vision);
  AddEncoder(out, "text", text);
  AddHead(out, "vision_head", vision_head);
  AddHead(out, "text_head", text_head);
  for (size_t i = 0; i < scalars.size(); ++i) {
    const std::string p =
        scalars.size() == 1 ? "loss" : std::string("loss.") + kLossTermNames[i];
    out.push_back({p + ".log_scale", scalars[i].log_scale});
    out.push_back({p + ".bias", scalars[i].bias});
  }
  return out;
}

ModelParams ModelParams::Clone() const {
  ParamBuilder b([](Tensor&, InitKind, int64_t) {});
  ModelParams copy = Build(config, b);
  auto src = Named();
  auto dst = copy.Named();
  for (size_t i = 0; i < src.size(); ++i) {
    auto from = src[i].tensor.data();
    std::copy(from.begin(), from.end(), dst[i].tensor.mutable_data().begin());
  }
  return copy;
}

int64_t ParamCount(const ModelParams& params) {
  int64_t n = 0;
  for (const auto& nt : params.Named()) n += nt.tensor.size();
  return n;
}

int64_t ParamCountForConfig(const ModelConfig& config) {
  config.Validate();
  return EncoderCount(config, true) + EncoderCount(config, false) +
         2 * HeadCount(config) + (config.separate_loss_scalars ? 6 : 2);
}

// ---------------------------------------------------------------------------
// Encoders.

Tensor Patchify(const ModelConfig& config, std::span<const Image* const> images) {
  const int64_t p = config.patch_size;
  const int64_t side = config.patches_per_side();
  const int64_t m = config.num_patches();
  if (images.empty()) throw ContractError("Patchify: no images");
  std::vector<double> rows;
  rows.reserve(images.size() * m * config.patch_dim());
  for (const Image* img : images) {
    if (img->height % p != 0 || img->width % p != 0) {
      throw ShapeError("image " + std::to_string(img->height) + "x" +
                       std::to_string(img->width) +
                       " is not divisible by patch size " + std::to_string(p));
    }
    if (img->height != config.image_size || img->width != config.image_size) {
      throw ShapeError("image " + std::to_string(img->height) + "x" +
                       std::to_string(img->width) + " does not match image_size " +
                       std::to_string(config.image_size));
    }
    if (static_cast<int64_t>(img->pixels.size()) != img->height * img->width * 3) {
      throw ShapeError("image pixel buffer has the wrong size");
    }
    for (int64_t py = 0; py < side; ++py) {
      for (int64_t px = 0; px < side; ++px) {
        for (int64_t y = 0; y < p; ++y) {
          for (int64_t x = 0; x < p; ++x) {
            for (int64_t c = 0; c < 3; ++c) {
              rows.push_back(img->at(py * p + y, px * p + x, c));
            }
          }
        }
      }
    }
  }
  return Tensor::FromData({static_cast<int64_t>(images.size()) * m, config.patch_dim()},
                          std::move(rows));
}

ImageEncoding EncodeImages(Tape* tape, const ModelParams& params,
                           std::span<const Image* const> images) {
  const ModelConfig& c = params.config;
  const int64_t m = c.num_patches();
  Tensor patches = Patchify(c, images);
  ImageEncoding enc;
  std::vector<int64_t> pos;
  for (size_t i = 0; i < images.size(); ++i) {
    const int64_t begin = static_cast<int64_t>(i) * m;
    enc.segments.push_back({begin, begin + m});
    for (int64_t j = 0; j < m; ++j) pos.push_back(j);
  }
  Tensor x = Linear(tape, params.vision.embed, patches);
  x = Add(tape, x, GatherRows(tape, params.vision.position, pos));
  enc.tokens = RunBlocks(tape, c, params.vision, x, PerRowRanges(enc.segments), {});
  return enc;
}

Tensor EncodeImage(Tape* tape, const ModelParams& params, const Image& image) {
  const Image* ptr = &image;
  return EncodeImages(tape, params, std::span<const Image* const>(&ptr, 1)).tokens;
}

TextEncoding EncodeTexts(Tape* tape, const ModelParams& params,
                         const std::vector<std::vector<int64_t>>& captions) {
  const ModelConfig& c = params.config;
  if (captions.empty()) throw ContractError("EncodeTexts: no captions");
  TextEncoding enc;
  std::vector<int64_t> ids, pos;
  for (const auto& caption : captions) {
    if (caption.empty()) throw ContractError("EncodeTexts: empty token list");
    const int64_t len = std::min<int64_t>(caption.size(), c.max_len);
    enc.truncated.push_back(static_cast<int64_t>(caption.size()) > c.max_len);
    const int64_t begin = static_cast<int64_t>(ids.size());
    bool any_real = false;
    for (int64_t j = 0; j < len; ++j) {
      const int64_t id = caption[j];
      if (id < 0 || id >= c.vocab_size) {
        throw ContractError("token id " + std::to_string(id) + " outside vocabulary");
      }
      ids.push_back(id);
      pos.push_back(j);
      enc.mask.push_back(id == Vocabulary::kPad ? 0 : 1);
      any_real |= id != Vocabulary::kPad;
    }
    if (!any_real) throw ContractError("EncodeTexts: caption is all padding");
    enc.segments.push_back({begin, begin + len});
  }
  Tensor x = GatherRows(tape, params.text.embed.weight, ids);
  x = Add(tape, x, GatherRows(tape, params.text.position, pos));
  enc.tokens = RunBlocks(tape, c, params.text, x, PerRowRanges(enc.segments), enc.mask);
  return enc;
}

TextEncoding EncodeText(Tape* tape, const ModelParams& params,
                        const std::vector<int64_t>& token_ids) {
  return EncodeTexts(tape, params, {token_ids});
}

// ---------------------------------------------------------------------------
// Pooling.

Tensor Linear(Tape* tape, const LinearParams& p, const Tensor& x) {
  Tensor y = MatMul(tape, x, p.weight);
  return p.bias.defined() ? AddBias(tape, y, p.bias) : y;
}

Tensor HeadMlp(Tape* tape, const PoolHeadParams& head, const Tensor& x) {
  return Linear(tape, head.mlp2, Gelu(tape, Linear(tape, head.mlp1, x)));
}

namespace {

AttentionSpec PoolSpec(const Tensor& tokens, int64_t pool_heads,
                       std::span<const RowRange> segments,
                       std::span<const uint8_t> mask) {
  CheckSegments(tokens, segments, "attention_pool");
  AttentionSpec spec;
  spec.key_ranges.assign(segments.begin(), segments.end());
  spec.key_mask.assign(mask.begin(), mask.end());
  spec.num_heads = pool_heads;
  spec.scale = 1.0 / std::sqrt(static_cast<double>(tokens.cols() / pool_heads));
  return spec;
}

Tensor PoolQueries(Tape* tape, const PoolHeadParams& head, size_t n) {
  Tensor q = Linear(tape, head.f_query, head.query);
  std::vector<int64_t> idx(n, 0);
  return GatherRows(tape, q, idx);
}

}  // namespace

Tensor AttentionPool(Tape* tape, const PoolHeadParams& head, int64_t pool_heads,
                     const Tensor& tokens, std::span<const RowRange> segments,
                     std::span<const uint8_t> mask) {
  AttentionSpec spec = PoolSpec(tokens, pool_heads, segments, mask);
  Tensor q = PoolQueries(tape, head, segments.size());
  Tensor k = Linear(tape, head.f_key, tokens);
  Tensor v = Linear(tape, head.f_value, tokens);
  Tensor pooled = Attention(tape, q, k, v, spec);
  return L2NormalizeRows(tape, HeadMlp(tape, head, pooled));
}

std::vector<std::vector<double>> AttentionPoolWeights(
    const PoolHeadParams& head, int64_t pool_heads, const Tensor& tokens,
    std::span<const RowRange> segments, std::span<const uint8_t> mask) {
  AttentionSpec spec = PoolSpec(tokens, pool_heads, segments, mask);
  Tensor q = PoolQueries(nullptr, head, segments.size());
  Tensor k = Linear(nullptr, head.f_key, tokens);
  return AttentionWeights(q, k, spec);
}

Tensor MeanPool(Tape* tape, const PoolHeadParams& head, const Tensor& tokens,
                std::span<const RowRange> segments) {
  CheckSegments(tokens, segments, "mean_pool");
  return L2NormalizeRows(tape, HeadMlp(tape, head, SegmentMean(tape, tokens, segments)));
}

Tensor PoolText(Tape* tape, const ModelParams& params, const TextEncoding& text) {
  if (params.config.text_pool == TextPoolMode::kAttention) {
    return AttentionPool(tape, params.text_head, params.config.pool_heads,
                         text.tokens, text.segments, text.mask);
  }
  // Mean over real tokens only.
  std::vector<int64_t> rows;
  std::vector<RowRange> segments;
  for (const auto& s : text.segments) {
    const int64_t begin = static_cast<int64_t>(rows.size());
    for (int64_t r = s.begin; r < s.end; ++r) {
      if (text.mask.empty() || text.mask[r]) rows.push_back(r);
    }
    segments.push_back({begin, static_cast<int64_t>(rows.size())});
  }
  return MeanPool(tape, params.text_head, GatherRows(tape, text.tokens, rows), segments);
}

Tensor PoolImages(Tape* tape, const ModelParams& params,
                  const ImageEncoding& images) {
  return AttentionPool(tape, params.vision_head, params.config.pool_heads,
                       images.tokens, images.segments, {});
}

Tensor PoolConcepts(Tape* tape, const ModelParams& params,
                    const TextEncoding& text, std::span<const int64_t> owner,
                    std::span<const ConceptSpan> spans) {
  if (owner.size() != spans.size()) {
    throw ContractError("PoolConcepts: owner and span lists differ in length");
  }
  ++ConceptPathCalls().concept_poolings;
  if (spans.empty()) return Tensor();
  std::vector<int64_t> rows;
  std::vector<RowRange> segments;
  for (size_t k = 0; k < spans.size(); ++k) {
    const int64_t i = owner[k];
    if (i < 0 || i >= static_cast<int64_t>(text.segments.size())) {
      throw ContractError("PoolConcepts: owner " + std::to_string(i) + " out of range");
    }
    const RowRange seg = text.segments[i];
    const ConceptSpan s = spans[k];
    if (s.start < 0 || s.start >= s.end || s.end > seg.size()) {
      throw ContractError("PoolConcepts: span [" + std::to_string(s.start) + "," +
                          std::to_string(s.end) + ") outside caption of length " +
                          std::to_string(seg.size()));
    }
    const int64_t begin = static_cast<int64_t>(rows.size());
    for (int64_t r = s.start; r < s.end; ++r) rows.push_back(seg.begin + r);
    segments.push_back({begin, static_cast<int64_t>(rows.size())});
  }
  return MeanPool(tape, params.text_head, GatherRows(tape, text.tokens, rows), segments);
}

Tensor JointPatchTokens(Tape* tape, const ModelParams& params,
                        const Tensor& image_tokens) {
  const PoolHeadParams& h = params.vision_head;
  return HeadMlp(tape, h, Linear(tape, h.f_value, image_tokens));
}

namespace {

AttentionSpec CrossSpec(const ModelParams& params, const Tensor& joint_tokens,
                        std::span<const RowRange> image_segments,
                        std::span<const CrossPair> pairs) {
  CheckSegments(joint_tokens, image_segments, "cross_attend");
  AttentionSpec spec;
  for (const auto& p : pairs) {
    if (p.image < 0 || p.image >= static_cast<int64_t>(image_segments.size())) {
      throw ContractError("cross_attend: image index out of range");
    }
    spec.key_ranges.push_back(image_segments[p.image]);
  }
  spec.scale = 1.0 / std::sqrt(static_cast<double>(params.config.d_joint));
  return spec;
}

}  // namespace

Tensor CrossAttend(Tape* tape, const ModelParams& params,
                   const Tensor& joint_tokens,
                   std::span<const RowRange> image_segments,
                   const Tensor& concepts, std::span<const CrossPair> pairs) {
  if (pairs.empty()) throw ContractError("cross_attend: no pairs");
  ++ConceptPathCalls().cross_attends;
  AttentionSpec spec = CrossSpec(params, joint_tokens, image_segments, pairs);
  std::vector<int64_t> idx;
  idx.reserve(pairs.size());
  for (const auto& p : pairs) idx.push_back(p.concept_index);
  Tensor q = GatherRows(tape, concepts, idx);
  Tensor raw = Attention(tape, q, joint_tokens, joint_tokens, spec);
  return L2NormalizeRows(tape, raw);
}

Tensor CrossAttendOne(Tape* tape, const ModelParams& params, const Tensor& c,
                      const Tensor& patch_tokens) {
  if (patch_tokens.rows() == 0) throw ContractError("cross_attend: M = 0");
  Tensor joint = JointPatchTokens(tape, params, patch_tokens);
  const RowRange seg{0, patch_tokens.rows()};
  const CrossPair pair{0, 0};
  return CrossAttend(tape, params, joint, std::span(&seg, 1), c, std::span(&pair, 1));
}

std::vector<double> CrossAttendWeights(const ModelParams& params,
                                       const Tensor& c,
                                       const Tensor& patch_tokens) {
  Tensor joint = JointPatchTokens(nullptr, params, patch_tokens);
  const RowRange seg{0, patch_tokens.rows()};
  const CrossPair pair{0, 0};
  AttentionSpec spec = CrossSpec(params, joint, std::span(&seg, 1), std::span(&pair, 1));
  return AttentionWeights(c, joint, spec).at(0);
}

ConceptPathCounters& ConceptPathCalls() {
  thread_local ConceptPathCounters counters;
  return counters;
}

// ---------------------------------------------------------------------------
// Checkpoints.

void WriteCheckpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::string out = "C2L1";
  PutU32(out, kCheckpointVersion);
  const std::string config = ckpt.config.dump();
  PutU32(out, static_cast<uint32_t>(config.size()));
  out += config;
  PutU64(out, Fnv1a64(config));
  PutU64(out, ckpt.step);
  PutU32(out, static_cast<uint32_t>(ckpt.tensors.size()));
  for (const auto& nt : ckpt.tensors) {
    PutU32(out, static_cast<uint32_t>(nt.name.size()));
    out += nt.name;
    PutU32(out, static_cast<uint32_t>(nt.tensor.rank()));
    for (int64_t d : nt.tensor.shape()) PutU64(out, static_cast<uint64_t>(d));
    for (double v : nt.tensor.data()) PutU64(out, std::bit_cast<uint64_t>(v));
  }
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write checkpoint " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint ReadCheckpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read checkpoint " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  Reader r(bytes);
  if (r.Take(4) != "C2L1") throw CheckpointError("bad checkpoint magic in " + path.string());
  const uint64_t version = r.Uint(4);
  if (version != kCheckpointVersion) {
    throw CheckpointError("checkpoint version mismatch: file has " +
                          std::to_string(version) + ", expected " +
                          std::to_string(kCheckpointVersion));
  }
  const std::string_view config = r.Take(r.Uint(4));
  const uint64_t hash = r.Uint(8);
  if (hash != Fnv1a64(config)) {
    throw CheckpointError("checkpoint config hash mismatch: stored " + HashHex(hash) +
                          ", computed " + HashHex(Fnv1a64(config)));
  }
  Checkpoint ckpt;
  try {
    ckpt.config = Json::parse(config);
  } catch (const Json::exception& e) {
    throw CheckpointError(std::string("checkpoint config unreadable: ") + e.what());
  }
  ckpt.step = r.Uint(8);
  const uint64_t count = r.Uint(4);
  for (uint64_t i = 0; i < count; ++i) {
    NamedTensor nt;
    nt.name = std::string(r.Take(r.Uint(4)));
    const uint64_t rank = r.Uint(4);
    if (rank > 8) throw CheckpointError("tensor " + nt.name + " has bad rank");
    Shape shape;
    uint64_t n = 1;
    for (uint64_t d = 0; d < rank; ++d) {
      const uint64_t dim = r.Uint(8);
      if (dim == 0 || dim > (uint64_t{1} << 32)) {
        throw CheckpointError("tensor " + nt.name + " has bad shape");
      }
      shape.push_back(static_cast<int64_t>(dim));
      n *= dim;
      if (n > bytes.size()) throw CheckpointError("checkpoint truncated");
    }
    std::vector<double> data(n);
    for (auto& v : data) v = std::bit_cast<double>(r.Uint(8));
    nt.tensor = Tensor::FromData(std::move(shape), std::move(data));
    ckpt.tensors.push_back(std::move(nt));
  }
  if (!r.done()) throw CheckpointError("trailing bytes after checkpoint tensors");
  return ckpt;
}

Checkpoint MakeModelCheckpoint(const ModelParams& params, const Vocabulary& vocab,
                               Json extra) {
  Checkpoint ckpt;
  ckpt.config = std::move(extra);
  ckpt.config["model"] = params.config.ToJson();
  ckpt.config["vocab"] = vocab.ToJson();
  for (const auto& nt : params.Named()) ckpt.tensors.push_back(nt);
  return ckpt;
}

ModelParams ParamsFromCheckpoint(const Checkpoint& ckpt) {
  if (!ckpt.config.contains("model")) {
    throw CheckpointError("checkpoint has no model config");
  }
  ModelConfig config;
  try {
    config = ModelConfig::FromJson(ckpt.config.at("model"));
    config.Validate();
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint model config invalid: ") + e.what());
  }
  ParamBuilder b([](Tensor&, InitKind, int64_t) {});
  ModelParams params = Build(config, b);
  std::map<std::string, const Tensor*> stored;
  for (const auto& nt : ckpt.tensors) stored[nt.name] = &nt.tensor;
  for (auto& nt : params.Named()) {
    auto it = stored.find(nt.name);
    if (it == stored.end()) throw CheckpointError("checkpoint is missing tensor " + nt.name);
    if (it->second->shape() != nt.tensor.shape()) {
      throw CheckpointError("checkpoint tensor " + nt.name + " has shape " +
                            ShapeToString(it->second->shape()) + ", expected " +
                            ShapeToString(nt.tensor.shape()));
    }
    auto src = it->second->data();
    std::copy(src.begin(), src.end(), nt.tensor.mutable_data().begin());
  }
  return params;
}

Vocabulary VocabFromCheckpoint(const Checkpoint& ckpt) {
  if (!ckpt.config.contains("vocab")) throw CheckpointError("checkpoint has no vocabulary");
  try {
    return Vocabulary::FromJson(ckpt.config.at("vocab"));
  } catch (const ConfigError& e) {
    throw CheckpointError(std::string("checkpoint vocabulary invalid: ") + e.what());
  }
}

}  // namespace c2l
