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

#include <cmath>
#include <fstream>
#include <set>

#include <gtest/gtest.h>

#include "c2l/errors.h"
#include "c2l/random.h"
#include "model_test_util.h"
#include "test_util.h"

namespace c2l {
namespace {

using test::TinyConfig;

std::vector<double> Row(const Tensor& t, int64_t r) {
  auto d = t.data();
  return {d.begin() + r * t.cols(), d.begin() + (r + 1) * t.cols()};
}

std::vector<double> Values(const Tensor& t) {
  return {t.data().begin(), t.data().end()};
}

void ExpectNear(const Tensor& a, const Tensor& b, double tol) {
  ASSERT_EQ(a.shape(), b.shape());
  for (int64_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a.data()[i], b.data()[i], tol) << i;
}

Tensor Rows(const Tensor& t, std::vector<int64_t> rows) {
  return GatherRows(nullptr, t, rows);
}

// Weighted sum of the outputs; a generic scalar probe for gradient checks.
Tensor Probe(Tape* tape, const Tensor& y, const Tensor& w) {
  return Sum(tape, Mul(tape, y, w));
}

// ---------------------------------------------------------------------------
// Config and parameter counting.

TEST(ModelConfigTest, JsonRoundTrip) {
  ModelConfig c = TinyConfig();
  c.text_pool = TextPoolMode::kMean;
  c.separate_loss_scalars = true;
  ModelConfig back = ModelConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
}

TEST(ModelConfigTest, RejectsUnknownKeysAndEmptyConfig) {
  Json j = TinyConfig().ToJson();
  j["d_encc"] = 3;
  EXPECT_THROW(ModelConfig::FromJson(j), ConfigError);
  EXPECT_THROW(ModelConfig::FromJson(Json::object()).Validate(), ConfigError);
  EXPECT_THROW(ModelParams::Init(ModelConfig{}, 0), ConfigError);
  ModelConfig bad = TinyConfig();
  bad.d_enc = 0;
  EXPECT_THROW(ParamCountForConfig(bad), ConfigError);
}

TEST(ParamCountTest, EnumerationMatchesClosedForm) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    ModelConfig c;
    c.patch_size = 4 << rng.UniformInt(2);
    c.image_size = c.patch_size * (1 + rng.UniformInt(3));
    c.heads = 1 + rng.UniformInt(2);
    c.d_enc = c.heads * (2 + rng.UniformInt(6));
    c.d_joint = 1 + rng.UniformInt(8);
    c.layers = 1 + rng.UniformInt(3);
    c.vocab_size = 2 + rng.UniformInt(30);
    c.separate_loss_scalars = rng.UniformInt(2) == 1;
    EXPECT_EQ(ParamCount(ModelParams::Init(c, trial)), ParamCountForConfig(c));
  }
}

TEST(ParamCountTest, ReferenceConfigCountedTwiceIsEqual) {
  ModelConfig c;
  c.d_enc = 32;
  c.d_joint = 16;
  c.layers = 2;
  c.heads = 2;
  c.vocab_size = 64;
  // The cross-attention path owns no tensors, so a model built for
  // contrastive-only training is the same object as one built for all losses.
  EXPECT_EQ(ParamCount(ModelParams::Init(c, 1)), ParamCount(ModelParams::Init(c, 2)));
}

TEST(ParamCountTest, DoublingJointWidthChangesOnlyHeadOutputs) {
  ModelConfig c;
  c.d_enc = 32;
  c.d_joint = 16;
  c.vocab_size = 64;
  ModelConfig wide = c;
  wide.d_joint = 32;
  const int64_t delta = ParamCount(ModelParams::Init(wide, 0)) -
                        ParamCount(ModelParams::Init(c, 0));
  EXPECT_EQ(delta, 2 * (c.d_enc + 1) * (wide.d_joint - c.d_joint));
}

TEST(ModelParamsTest, InitIsDeterministicAndNamesAreUnique) {
  ModelParams a = ModelParams::Init(TinyConfig(), 5);
  ModelParams b = ModelParams::Init(TinyConfig(), 5);
  ModelParams c = ModelParams::Init(TinyConfig(), 6);
  auto na = a.Named(), nb = b.Named(), nc = c.Named();
  std::set<std::string> names;
  bool any_diff = false;
  for (size_t i = 0; i < na.size(); ++i) {
    EXPECT_TRUE(names.insert(na[i].name).second) << na[i].name;
    EXPECT_EQ(Values(na[i].tensor), Values(nb[i].tensor)) << na[i].name;
    any_diff |= Values(na[i].tensor) != Values(nc[i].tensor);
  }
  EXPECT_TRUE(any_diff);
  EXPECT_DOUBLE_EQ(a.scalars[0].scale(), 10.0);
  EXPECT_EQ(a.scalars[0].bias.item(), -10.0);
}

TEST(ModelParamsTest, CloneIsDeep) {
  ModelParams a = ModelParams::Init(TinyConfig(), 5);
  ModelParams b = a.Clone();
  b.vision_head.query.mutable_data()[0] += 1.0;
  EXPECT_NE(a.vision_head.query.data()[0], b.vision_head.query.data()[0]);
  EXPECT_EQ(a.Named().size(), b.Named().size());
}

TEST(ModelParamsTest, SeparateScalarsPerLoss) {
  ModelConfig c = TinyConfig();
  c.separate_loss_scalars = true;
  ModelParams p = ModelParams::Init(c, 0);
  ASSERT_EQ(p.scalars.size(), 3u);
  EXPECT_FALSE(p.ScalarsFor(LossTerm::kNpc).log_scale.SameAs(
      p.ScalarsFor(LossTerm::kXac).log_scale));
  ModelParams shared = ModelParams::Init(TinyConfig(), 0);
  EXPECT_TRUE(shared.ScalarsFor(LossTerm::kNpc).log_scale.SameAs(
      shared.ScalarsFor(LossTerm::kXac).log_scale));
}

// ---------------------------------------------------------------------------
// Encoders.

TEST(EncodeImageTest, SixteenBySixteenWithPatchEightHasFourTokens) {
  Rng rng(0);
  ModelParams p = ModelParams::Init(TinyConfig(), 0);
  Tensor v = EncodeImage(nullptr, p, test::RandomImage(rng, 16));
  EXPECT_EQ(v.shape(), (Shape{4, 8}));
}

TEST(EncodeImageTest, IndivisibleSizeIsShapeError) {
  ModelConfig c = TinyConfig();
  ModelParams p = ModelParams::Init(c, 0);
  Image img{12, 12, std::vector<double>(12 * 12 * 3, 0.5)};
  EXPECT_THROW(EncodeImage(nullptr, p, img), ShapeError);
  Image wrong{24, 24, std::vector<double>(24 * 24 * 3, 0.5)};
  EXPECT_THROW(EncodeImage(nullptr, p, wrong), ShapeError);
}

TEST(EncodeImageTest, PatchifyOrder) {
  ModelConfig c = TinyConfig();
  Image img{16, 16, std::vector<double>(16 * 16 * 3)};
  for (int64_t y = 0; y < 16; ++y) {
    for (int64_t x = 0; x < 16; ++x) {
      for (int64_t ch = 0; ch < 3; ++ch) img.pixels[(y * 16 + x) * 3 + ch] = y * 100 + x + ch * 0.1;
    }
  }
  const Image* ptr = &img;
  Tensor t = Patchify(c, std::span<const Image* const>(&ptr, 1));
  ASSERT_EQ(t.shape(), (Shape{4, 192}));
  // Patch 1 is the top-right patch; its first pixel is (0, 8).
  EXPECT_EQ(t.at(1, 0), 8.0);
  // Patch 2 is bottom-left; element (y=1, x=2, c=1) is pixel (9, 2).
  EXPECT_EQ(t.at(2, (1 * 8 + 2) * 3 + 1), 902.1);
}

TEST(EncodeImageTest, ConstantInputWithOnlyBiasesGivesIdenticalRows) {
  ModelParams p = ModelParams::Init(TinyConfig(), 3);
  Rng rng(3);
  for (auto& nt : p.Named()) {
    const bool keep = nt.name.find("bias") != std::string::npos;
    for (double& v : nt.tensor.mutable_data()) v = keep ? rng.Normal() : 0.0;
  }
  Image zero{16, 16, std::vector<double>(16 * 16 * 3, 0.0)};
  Tensor v = EncodeImage(nullptr, p, zero);
  for (int64_t r = 1; r < v.rows(); ++r) EXPECT_EQ(Row(v, r), Row(v, 0));
}

TEST(EncodeImageTest, BitIdenticalAcrossRuns) {
  Rng r1(4), r2(4);
  Tensor a = EncodeImage(nullptr, ModelParams::Init(TinyConfig(), 9), test::RandomImage(r1, 16));
  Tensor b = EncodeImage(nullptr, ModelParams::Init(TinyConfig(), 9), test::RandomImage(r2, 16));
  EXPECT_EQ(Values(a), Values(b));
}

TEST(EncodeImageTest, BatchedEqualsPerImage) {
  Rng rng(4);
  ModelParams p = ModelParams::Init(TinyConfig(), 9);
  Image a = test::RandomImage(rng, 16), b = test::RandomImage(rng, 16);
  std::vector<const Image*> both{&a, &b};
  ImageEncoding enc = EncodeImages(nullptr, p, both);
  EXPECT_EQ(enc.segments, (std::vector<RowRange>{{0, 4}, {4, 8}}));
  EXPECT_EQ(Values(Rows(enc.tokens, {4, 5, 6, 7})), Values(EncodeImage(nullptr, p, b)));
}

TEST(EncodeTextTest, SingleTokenHasOneUnmaskedRow) {
  ModelParams p = ModelParams::Init(TinyConfig(), 0);
  TextEncoding t = EncodeText(nullptr, p, {3});
  EXPECT_EQ(t.tokens.shape(), (Shape{1, 8}));
  EXPECT_EQ(t.mask, (std::vector<uint8_t>{1}));
  EXPECT_FALSE(t.truncated[0]);
}

TEST(EncodeTextTest, EmptyIsContractErrorAndOverlongTruncates) {
  ModelParams p = ModelParams::Init(TinyConfig(), 0);
  EXPECT_THROW(EncodeText(nullptr, p, {}), ContractError);
  EXPECT_THROW(EncodeText(nullptr, p, {0, 0}), ContractError);
  EXPECT_THROW(EncodeText(nullptr, p, {99}), ContractError);
  TextEncoding t = EncodeText(nullptr, p, {2, 3, 4, 5, 6, 7, 8, 9});
  EXPECT_TRUE(t.truncated[0]);
  EXPECT_EQ(t.tokens.rows(), 6);
}

TEST(EncodeTextTest, PaddingIsInert) {
  ModelParams p = ModelParams::Init(TinyConfig(), 2);
  TextEncoding base = EncodeText(nullptr, p, {4, 0, 7, 0, 5});
  // Changing what padding slots hold (their embedding row) cannot reach the
  // real tokens.
  ModelParams q = p.Clone();
  Rng rng(1);
  auto pad = q.text.embed.weight.mutable_data();
  for (int64_t j = 0; j < 8; ++j) pad[j] = rng.Normal();
  TextEncoding moved = EncodeText(nullptr, q, {4, 0, 7, 0, 5});
  for (int64_t r : {0, 2, 4}) EXPECT_EQ(Row(base.tokens, r), Row(moved.tokens, r));
  EXPECT_NE(Row(base.tokens, 1), Row(moved.tokens, 1));
  // Trailing padding leaves the real rows untouched.
  TextEncoding trail = EncodeText(nullptr, p, {4, 7, 0, 0});
  TextEncoding bare = EncodeText(nullptr, p, {4, 7});
  for (int64_t r : {0, 1}) EXPECT_EQ(Row(trail.tokens, r), Row(bare.tokens, r));
  EXPECT_EQ(trail.mask, (std::vector<uint8_t>{1, 1, 0, 0}));
}

TEST(EncodeTextTest, BitIdenticalAcrossRunsAndBatching) {
  ModelParams p = ModelParams::Init(TinyConfig(), 8);
  TextEncoding a = EncodeText(nullptr, p, {3, 4, 5});
  TextEncoding b = EncodeText(nullptr, ModelParams::Init(TinyConfig(), 8), {3, 4, 5});
  EXPECT_EQ(Values(a.tokens), Values(b.tokens));
  TextEncoding batch = EncodeTexts(nullptr, p, {{9, 2}, {3, 4, 5}});
  EXPECT_EQ(Values(Rows(batch.tokens, {2, 3, 4})), Values(a.tokens));
}

// ---------------------------------------------------------------------------
// Attention pooling.

TEST(AttentionPoolTest, SingleRowIgnoresQuery) {
  Rng rng(5);
  ModelParams p = ModelParams::Init(TinyConfig(), 5);
  test::Jitter(p, rng);
  Tensor x = test::RandomTensor(rng, {1, 8}, 1.0, false);
  const RowRange seg{0, 1};
  Tensor pooled = AttentionPool(nullptr, p.vision_head, 1, x, std::span(&seg, 1), {});
  Tensor expected = L2NormalizeRows(
      nullptr, HeadMlp(nullptr, p.vision_head, Linear(nullptr, p.vision_head.f_value, x)));
  ExpectNear(pooled, expected, 1e-12);
  for (double& v : p.vision_head.query.mutable_data()) v = rng.Normal();
  ExpectNear(AttentionPool(nullptr, p.vision_head, 1, x, std::span(&seg, 1), {}),
             expected, 1e-12);
}

TEST(AttentionPoolTest, DuplicateRowsMatchSingleRow) {
  Rng rng(6);
  ModelParams p = ModelParams::Init(TinyConfig(), 6);
  test::Jitter(p, rng);
  Tensor x = test::RandomTensor(rng, {1, 8}, 1.0, false);
  Tensor xx = Rows(x, {0, 0});
  const RowRange one{0, 1}, two{0, 2};
  ExpectNear(AttentionPool(nullptr, p.text_head, 1, xx, std::span(&two, 1), {}),
             AttentionPool(nullptr, p.text_head, 1, x, std::span(&one, 1), {}), 1e-12);
}

TEST(AttentionPoolTest, EmptySegmentIsContractError) {
  ModelParams p = ModelParams::Init(TinyConfig(), 6);
  Tensor x = Tensor::Zeros({2, 8});
  const RowRange empty{1, 1};
  EXPECT_THROW(AttentionPool(nullptr, p.text_head, 1, x, std::span(&empty, 1), {}),
               ContractError);
}

TEST(AttentionPoolTest, WeightsAreDistributionsAndOutputsUnitNorm) {
  Rng rng(7);
  ModelParams p = ModelParams::Init(TinyConfig(), 7);
  test::Jitter(p, rng, 0.5);
  for (int64_t heads : {1, 2}) {
    Tensor x = test::RandomTensor(rng, {9, 8}, 2.0, false);
    std::vector<RowRange> segs{{0, 2}, {2, 3}, {3, 9}};
    std::vector<uint8_t> mask{1, 1, 1, 1, 0, 1, 1, 0, 1};
    Tensor out = AttentionPool(nullptr, p.vision_head, heads, x, segs, mask);
    for (int64_t r = 0; r < out.rows(); ++r) EXPECT_NEAR(test::RowNorm(out, r), 1.0, 1e-9);
    auto w = AttentionPoolWeights(p.vision_head, heads, x, segs, mask);
    ASSERT_EQ(w.size(), segs.size() * heads);
    for (const auto& dist : w) {
      double s = 0.0;
      for (double v : dist) {
        EXPECT_GE(v, 0.0);
        s += v;
      }
      EXPECT_NEAR(s, 1.0, 1e-12);
    }
  }
}

TEST(AttentionPoolTest, GradientMatchesFiniteDifferences) {
  Rng rng(8);
  ModelParams p = ModelParams::Init(TinyConfig(), 8);
  test::Jitter(p, rng, 0.3);
  Tensor x = test::RandomTensor(rng, {5, 8});
  Tensor w = test::RandomTensor(rng, {2, 4}, 1.0, false);
  std::vector<RowRange> segs{{0, 3}, {3, 5}};
  std::vector<NamedTensor> params{{"x", x}};
  for (const auto& nt : p.Named()) {
    if (nt.name.rfind("vision_head.", 0) == 0) params.push_back(nt);
  }
  auto f = [&](Tape* tape) {
    return Probe(tape, AttentionPool(tape, p.vision_head, 1, x, segs, {}), w);
  };
  GradCheckResult r = FiniteDiffCheck(f, params);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst_tensor << "[" << r.worst_index << "]";
}

// ---------------------------------------------------------------------------
// Concept pooling.

TEST(PoolConceptsTest, LengthOneSpanIsThatToken) {
  ModelParams p = ModelParams::Init(TinyConfig(), 10);
  TextEncoding t = EncodeText(nullptr, p, {2, 3, 4});
  const int64_t owner = 0;
  const ConceptSpan span{1, 2};
  Tensor c = PoolConcepts(nullptr, p, t, std::span(&owner, 1), std::span(&span, 1));
  Tensor expected =
      L2NormalizeRows(nullptr, HeadMlp(nullptr, p.text_head, Rows(t.tokens, {1})));
  ExpectNear(c, expected, 1e-12);
}

TEST(PoolConceptsTest, IdenticalSpansOverIdenticalTokensAgree) {
  ModelParams p = ModelParams::Init(TinyConfig(), 10);
  TextEncoding t = EncodeTexts(nullptr, p, {{2, 3, 4}, {2, 3, 4}});
  std::vector<int64_t> owner{0, 1};
  std::vector<ConceptSpan> spans{{0, 2}, {0, 2}};
  Tensor c = PoolConcepts(nullptr, p, t, owner, spans);
  EXPECT_EQ(Row(c, 0), Row(c, 1));
  EXPECT_NEAR(test::RowNorm(c, 0), 1.0, 1e-9);
}

TEST(PoolConceptsTest, FullSpanEqualsMeanModeTextEmbedding) {
  ModelConfig cfg = TinyConfig();
  cfg.text_pool = TextPoolMode::kMean;
  ModelParams p = ModelParams::Init(cfg, 12);
  Rng rng(12);
  test::Jitter(p, rng);
  std::vector<std::vector<int64_t>> caps{{2, 3, 4}, {5, 6}, {7, 8, 9, 10}};
  TextEncoding t = EncodeTexts(nullptr, p, caps);
  Tensor global = PoolText(nullptr, p, t);
  std::vector<int64_t> owner{0, 1, 2};
  std::vector<ConceptSpan> spans{{0, 3}, {0, 2}, {0, 4}};
  Tensor c = PoolConcepts(nullptr, p, t, owner, spans);
  ExpectNear(c, global, 1e-12);
}

TEST(PoolConceptsTest, EmptyAndOutOfBounds) {
  ModelParams p = ModelParams::Init(TinyConfig(), 10);
  TextEncoding t = EncodeText(nullptr, p, {2, 3, 4});
  EXPECT_FALSE(PoolConcepts(nullptr, p, t, {}, {}).defined());
  const int64_t owner = 0, bad_owner = 1;
  const ConceptSpan past{2, 4}, empty{1, 1};
  EXPECT_THROW(PoolConcepts(nullptr, p, t, std::span(&owner, 1), std::span(&past, 1)),
               ContractError);
  EXPECT_THROW(PoolConcepts(nullptr, p, t, std::span(&owner, 1), std::span(&empty, 1)),
               ContractError);
  const ConceptSpan ok{0, 1};
  EXPECT_THROW(PoolConcepts(nullptr, p, t, std::span(&bad_owner, 1), std::span(&ok, 1)),
               ContractError);
}

// ---------------------------------------------------------------------------
// Cross attention.

TEST(CrossAttendTest, SinglePatchIgnoresConcept) {
  Rng rng(13);
  ModelParams p = ModelParams::Init(TinyConfig(), 13);
  test::Jitter(p, rng);
  Tensor v = test::RandomTensor(rng, {1, 8}, 1.0, false);
  Tensor expected = L2NormalizeRows(nullptr, JointPatchTokens(nullptr, p, v));
  for (int trial = 0; trial < 3; ++trial) {
    Tensor c = test::RandomUnitRows(rng, 1, 4);
    ExpectNear(CrossAttendOne(nullptr, p, c, v), expected, 1e-12);
  }
}

TEST(CrossAttendTest, IdenticalRowsMakeOutputIndependentOfConcept) {
  Rng rng(14);
  ModelParams p = ModelParams::Init(TinyConfig(), 14);
  test::Jitter(p, rng);
  Tensor v = Rows(test::RandomTensor(rng, {1, 8}, 1.0, false), {0, 0, 0, 0});
  Tensor first = CrossAttendOne(nullptr, p, test::RandomUnitRows(rng, 1, 4), v);
  Tensor second = CrossAttendOne(nullptr, p, test::RandomUnitRows(rng, 1, 4), v);
  ExpectNear(first, second, 1e-12);
}

TEST(CrossAttendTest, RawOutputIsConvexCombination) {
  Rng rng(15);
  ModelParams p = ModelParams::Init(TinyConfig(), 15);
  test::Jitter(p, rng, 0.5);
  for (int trial = 0; trial < 50; ++trial) {
    Tensor v = test::RandomTensor(rng, {4, 8}, 2.0, false);
    Tensor c = test::RandomUnitRows(rng, 1, 4);
    Tensor joint = JointPatchTokens(nullptr, p, v);
    std::vector<double> w = CrossAttendWeights(p, c, v);
    ASSERT_EQ(w.size(), 4u);
    double total = 0.0;
    for (double x : w) {
      EXPECT_GE(x, 0.0);
      total += x;
    }
    EXPECT_NEAR(total, 1.0, 1e-12);
    std::vector<double> raw(4, 0.0);
    for (int64_t m = 0; m < 4; ++m) {
      for (int64_t j = 0; j < 4; ++j) raw[j] += w[m] * joint.at(m, j);
    }
    double ss = 0.0;
    for (int64_t j = 0; j < 4; ++j) {
      double lo = joint.at(0, j), hi = joint.at(0, j);
      for (int64_t m = 1; m < 4; ++m) {
        lo = std::min(lo, joint.at(m, j));
        hi = std::max(hi, joint.at(m, j));
      }
      EXPECT_GE(raw[j], lo - 1e-12);
      EXPECT_LE(raw[j], hi + 1e-12);
      ss += raw[j] * raw[j];
    }
    // The op's output is the normalized raw vector.
    Tensor out = CrossAttendOne(nullptr, p, c, v);
    for (int64_t j = 0; j < 4; ++j) EXPECT_NEAR(out.at(0, j), raw[j] / std::sqrt(ss), 1e-12);
  }
}

TEST(CrossAttendTest, BatchedPairsMatchSinglePairs) {
  Rng rng(16);
  ModelParams p = ModelParams::Init(TinyConfig(), 16);
  Tensor v = test::RandomTensor(rng, {8, 8}, 1.0, false);
  Tensor concepts = test::RandomUnitRows(rng, 3, 4);
  std::vector<RowRange> segs{{0, 4}, {4, 8}};
  std::vector<CrossPair> pairs{{0, 0}, {1, 0}, {0, 2}, {1, 1}};
  Tensor joint = JointPatchTokens(nullptr, p, v);
  Tensor out = CrossAttend(nullptr, p, joint, segs, concepts, pairs);
  ASSERT_EQ(out.shape(), (Shape{4, 4}));
  for (size_t k = 0; k < pairs.size(); ++k) {
    const RowRange s = segs[pairs[k].image];
    std::vector<int64_t> rows;
    for (int64_t r = s.begin; r < s.end; ++r) rows.push_back(r);
    Tensor single = CrossAttendOne(nullptr, p, Rows(concepts, {pairs[k].concept_index}),
                                   Rows(v, rows));
    EXPECT_EQ(Row(out, k), Row(single, 0));
    EXPECT_NEAR(test::RowNorm(out, k), 1.0, 1e-9);
  }
}

TEST(CrossAttendTest, EmptyImageIsContractError) {
  ModelParams p = ModelParams::Init(TinyConfig(), 16);
  Tensor joint = Tensor::Zeros({4, 4});
  Tensor c = Tensor::Zeros({1, 4});
  const RowRange empty{2, 2};
  const CrossPair pair{0, 0};
  EXPECT_THROW(CrossAttend(nullptr, p, joint, std::span(&empty, 1), c, std::span(&pair, 1)),
               ContractError);
}

TEST(CrossAttendTest, GradientMatchesFiniteDifferences) {
  Rng rng(17);
  ModelParams p = ModelParams::Init(TinyConfig(), 17);
  test::Jitter(p, rng, 0.3);
  Tensor v = test::RandomTensor(rng, {4, 8});
  Tensor c = test::RandomUnitRows(rng, 1, 4, true);
  Tensor w = test::RandomTensor(rng, {1, 4}, 1.0, false);
  std::vector<NamedTensor> params{{"v", v}, {"c", c}};
  for (const auto& nt : p.Named()) {
    if (nt.name.rfind("vision_head.", 0) == 0) params.push_back(nt);
  }
  auto f = [&](Tape* tape) { return Probe(tape, CrossAttendOne(tape, p, c, v), w); };
  GradCheckResult r = FiniteDiffCheck(f, params);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst_tensor << "[" << r.worst_index << "]";
}

TEST(EncoderGradTest, BothTowersMatchFiniteDifferences) {
  Rng rng(18);
  ModelParams p = ModelParams::Init(TinyConfig(), 18);
  test::Jitter(p, rng, 0.2);
  Image a = test::RandomImage(rng, 16), b = test::RandomImage(rng, 16);
  std::vector<const Image*> images{&a, &b};
  std::vector<std::vector<int64_t>> caps{{2, 3, 0, 4}, {5, 6}};
  Tensor wv = test::RandomTensor(rng, {2, 4}, 1.0, false);
  Tensor wt = test::RandomTensor(rng, {2, 4}, 1.0, false);
  auto f = [&](Tape* tape) {
    Tensor v = PoolImages(tape, p, EncodeImages(tape, p, images));
    Tensor t = PoolText(tape, p, EncodeTexts(tape, p, caps));
    return Add(tape, Probe(tape, v, wv), Probe(tape, t, wt));
  };
  std::vector<NamedTensor> params;
  for (const auto& nt : p.Named()) {
    if (nt.name.rfind("loss", 0) != 0) params.push_back(nt);
  }
  GradCheckOptions opt;
  opt.max_coords_per_tensor = 6;
  GradCheckResult r = FiniteDiffCheck(f, params, opt);
  EXPECT_LT(r.max_rel_error, 1e-5) << r.worst_tensor << "[" << r.worst_index << "]";
}

// ---------------------------------------------------------------------------
// Checkpoints.

TEST(CheckpointTest, RoundTripIsBitExactAndResaveIsByteIdentical) {
  auto dir = test::ScratchDir("model_ckpt");
  ModelConfig cfg = TinyConfig();
  cfg.separate_loss_scalars = true;
  ModelParams p = ModelParams::Init(cfg, 21);
  Vocabulary vocab({"a", "red", "circle"});
  Checkpoint ck = MakeModelCheckpoint(p, vocab, Json{{"note", "x"}});
  ck.step = 17;
  WriteCheckpoint(dir / "a.ckpt", ck);
  Checkpoint back = ReadCheckpoint(dir / "a.ckpt");
  EXPECT_EQ(back.step, 17u);
  EXPECT_EQ(back.config, ck.config);
  ModelParams q = ParamsFromCheckpoint(back);
  auto np = p.Named(), nq = q.Named();
  ASSERT_EQ(np.size(), nq.size());
  for (size_t i = 0; i < np.size(); ++i) {
    EXPECT_EQ(np[i].name, nq[i].name);
    EXPECT_EQ(Values(np[i].tensor), Values(nq[i].tensor));
  }
  EXPECT_EQ(VocabFromCheckpoint(back), vocab);
  WriteCheckpoint(dir / "b.ckpt", back);
  EXPECT_EQ(test::ReadFile(dir / "a.ckpt"), test::ReadFile(dir / "b.ckpt"));
}

TEST(CheckpointTest, CorruptFilesAreRejected) {
  auto dir = test::ScratchDir("model_ckpt_bad");
  ModelParams p = ModelParams::Init(TinyConfig(), 22);
  WriteCheckpoint(dir / "good.ckpt", MakeModelCheckpoint(p, Vocabulary()));
  const std::string bytes = test::ReadFile(dir / "good.ckpt");
  auto write = [&](const std::string& name, const std::string& data) {
    std::ofstream(dir / name, std::ios::binary) << data;
    return dir / name;
  };
  EXPECT_THROW(ReadCheckpoint(write("trunc.ckpt", bytes.substr(0, bytes.size() - 3))),
               CheckpointError);
  EXPECT_THROW(ReadCheckpoint(write("head.ckpt", bytes.substr(0, 10))), CheckpointError);
  std::string magic = bytes;
  magic[0] = 'X';
  EXPECT_THROW(ReadCheckpoint(write("magic.ckpt", magic)), CheckpointError);
  std::string version = bytes;
  version[4] = 9;
  EXPECT_THROW(ReadCheckpoint(write("version.ckpt", version)), CheckpointError);
  std::string config = bytes;
  config[14] ^= 1;  // inside the config block
  EXPECT_THROW(ReadCheckpoint(write("hash.ckpt", config)), CheckpointError);
  EXPECT_THROW(ReadCheckpoint(dir / "missing.ckpt"), IoError);
}

TEST(CheckpointTest, ShapeMismatchNamesTensor) {
  ModelParams p = ModelParams::Init(TinyConfig(), 23);
  Checkpoint ck = MakeModelCheckpoint(p, Vocabulary());
  ck.config["model"]["d_joint"] = 5;
  try {
    ParamsFromCheckpoint(ck);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("mlp2"), std::string::npos) << e.what();
  }
}

}  // namespace
}  // namespace c2l
