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

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "c2l/errors.h"
#include "model_test_util.h"
#include "test_util.h"

namespace c2l {
namespace {

Embedding Unit(std::vector<double> v) {
  double ss = 0.0;
  for (double x : v) ss += x * x;
  for (double& x : v) x /= std::sqrt(ss);
  return v;
}

std::vector<BenchmarkItem> Items(NegativeKind kind, int64_t n, bool two,
                                 uint64_t seed = 0) {
  const DataConfig data;
  std::vector<BenchmarkItem> items;
  for (auto& g : GenerateBenchmark(data, seed, kind, n, two)) {
    items.push_back({g.record.image_id, Render(g.scene, data), g.record.positives,
                     *g.record.negative, *g.record.task});
  }
  return items;
}

// Returns fixed embeddings for named captions and one image.
class TableModel : public EmbeddingModel {
 public:
  explicit TableModel(std::map<std::string, Embedding> texts) : texts_(std::move(texts)) {}
  Embedding EmbedImage(const Image&) const override { return {1.0, 0.0}; }
  Embedding EmbedText(const std::string& caption) const override { return texts_.at(caption); }

 private:
  std::map<std::string, Embedding> texts_;
};

// A 2-d unit vector whose dot product with (1, 0) is `s`.
Embedding WithSim(double s) { return {s, std::sqrt(1.0 - s * s)}; }

TEST(SimilarityTest, Basics) {
  const Embedding a = Unit({1.0, 2.0, 3.0});
  const Embedding neg = {-a[0], -a[1], -a[2]};
  EXPECT_NEAR(Similarity(a, a), 1.0, 1e-15);
  EXPECT_NEAR(Similarity(a, neg), -1.0, 1e-15);
  EXPECT_EQ(Similarity(Embedding{1.0, 0.0}, Embedding{0.0, 1.0}), 0.0);
  EXPECT_THROW(Similarity(Embedding{2.0, 0.0}, Embedding{1.0, 0.0}), ContractError);
}

TEST(ProtocolTest, DecisionRules) {
  EXPECT_TRUE(SingleCorrect(0.9, 0.8));
  EXPECT_FALSE(SingleCorrect(0.8, 0.8));
  EXPECT_FALSE(ScppCorrect(0.9, 0.7, 0.8));
  EXPECT_TRUE(ScppCorrect(0.9, 0.85, 0.8));
  EXPECT_FALSE(ScppCorrect(0.9, 0.8, 0.8));
  EXPECT_TRUE(TotCorrect(1.0, 0.5, 0.6));
  EXPECT_FALSE(TotCorrect(0.6, 0.5, 0.6));
}

TEST(ProtocolTest, AccuraciesGroupByTask) {
  TableModel model({{"p", WithSim(0.9)}, {"q", WithSim(0.7)}, {"n", WithSim(0.8)},
                    {"m", WithSim(0.95)}});
  const Image img;
  std::vector<BenchmarkItem> single = {{"0", img, {"p"}, "n", "a"},
                                       {"1", img, {"q"}, "n", "a"},
                                       {"2", img, {"p"}, "m", "b"}};
  const auto acc = SugarCrepeAccuracy(model, single);
  EXPECT_EQ(acc.at("a").n, 2);
  EXPECT_EQ(acc.at("a").correct, 1);
  EXPECT_EQ(acc.at("b").correct, 0);
  EXPECT_EQ(acc.at("a").accuracy(), 0.5);

  std::vector<BenchmarkItem> pairs = {{"0", img, {"p", "q"}, "n", "a"}};
  EXPECT_EQ(ScppAccuracy(model, pairs).at("a").correct, 0);
  EXPECT_THROW(ScppAccuracy(model, single), ContractError);
  EXPECT_THROW(SugarCrepeAccuracy(model, pairs), ContractError);
  EXPECT_TRUE(SugarCrepeAccuracy(model, {}).empty());
}

TEST(ProtocolTest, TotIdenticalPositivesAndNegativeTies) {
  TableModel model({{"p", WithSim(0.3)}, {"n", WithSim(0.9)}});
  const Image img;
  std::vector<BenchmarkItem> items = {{"0", img, {"p", "p"}, "n", "t"},
                                      {"1", img, {"p", "p"}, "p", "t"}};
  const auto acc = TotAccuracy(model, items);
  EXPECT_EQ(acc.at("t").n, 2);
  EXPECT_EQ(acc.at("t").correct, 1);
}

TEST(ProtocolTest, ScppNeverExceedsSinglePositive) {
  const RandomEmbeddingModel model(16, 3);
  for (NegativeKind kind : kAllNegativeKinds) {
    auto pairs = Items(kind, 120, true);
    std::vector<BenchmarkItem> firsts = pairs;
    for (auto& item : firsts) item.positives.resize(1);
    for (const auto& [task, acc] : ScppAccuracy(model, pairs)) {
      EXPECT_LE(acc.correct, SugarCrepeAccuracy(model, firsts).at(task).correct) << task;
    }
  }
}

TEST(ProtocolTest, RandomModelIsNearChance) {
  const RandomEmbeddingModel model(32, 0);
  const auto acc = SugarCrepeAccuracy(model, Items(NegativeKind::kSwapAttribute, 1000, false));
  const double a = acc.at("swap_attribute").accuracy();
  EXPECT_GE(a, 0.40);
  EXPECT_LE(a, 0.60);
}

TEST(ProtocolTest, BagOfWordsTiesOnSwapNegatives) {
  const BagOfWordsModel model(32, 0);
  for (NegativeKind kind : {NegativeKind::kSwapAttribute, NegativeKind::kSwapObject}) {
    const auto items = Items(kind, 200, true);
    for (const auto& item : items) {
      ASSERT_EQ(model.EmbedText(item.positives[0]), model.EmbedText(item.negative));
    }
    EXPECT_EQ(TotAccuracy(model, items).begin()->second.correct, 0);
    std::vector<BenchmarkItem> firsts = items;
    for (auto& item : firsts) item.positives.resize(1);
    EXPECT_EQ(SugarCrepeAccuracy(model, firsts).begin()->second.correct, 0);
  }
}

TEST(RecallTest, FullCorpusAndAlignedEmbeddings) {
  Rng rng(1);
  std::vector<Embedding> images, texts;
  for (int i = 0; i < 20; ++i) {
    Embedding e(8);
    for (double& x : e) x = rng.Normal();
    images.push_back(Unit(e));
    Embedding f(8);
    for (double& x : f) x = rng.Normal();
    texts.push_back(Unit(f));
  }
  for (auto dir : {RetrievalDirection::kImageToText, RetrievalDirection::kTextToImage}) {
    EXPECT_EQ(RecallAtK(images, texts, 20, dir), 1.0);
    EXPECT_EQ(RecallAtK(images, images, 1, dir), 1.0);
  }
  EXPECT_THROW(RecallAtK(images, texts, 21, RetrievalDirection::kImageToText), ConfigError);
  EXPECT_THROW(RecallAtK(images, texts, 0, RetrievalDirection::kImageToText), ConfigError);
}

TEST(RecallTest, TiesBreakByIndex) {
  const std::vector<Embedding> same(3, Embedding{1.0, 0.0});
  // Query q ranks q-th among equal scores, so only query 0 hits at k = 1.
  EXPECT_NEAR(RecallAtK(same, same, 1, RetrievalDirection::kImageToText), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(RecallAtK(same, same, 2, RetrievalDirection::kImageToText), 2.0 / 3.0, 1e-15);
}

TEST(RecallTest, RandomEmbeddingsNearKOverN) {
  const RandomEmbeddingModel model(16, 7);
  std::vector<Embedding> images, texts;
  double mean = 0.0;
  const int trials = 20;
  for (int t = 0; t < trials; ++t) {
    images.clear();
    texts.clear();
    for (int i = 0; i < 200; ++i) {
      Image img{1, 1, {t / 100.0, i / 1000.0, 0.5}};
      images.push_back(model.EmbedImage(img));
      texts.push_back(model.EmbedText("c" + std::to_string(t) + "_" + std::to_string(i)));
    }
    const double r = RecallAtK(images, texts, 5, RetrievalDirection::kImageToText);
    if (t == 0) {
      EXPECT_GE(r, 0.01);
      EXPECT_LE(r, 0.05);
    }
    mean += r / trials;
  }
  // Standard error of the mean of 20 binomial(200, 0.025) fractions.
  const double se = std::sqrt(0.025 * 0.975 / 200.0 / trials);
  EXPECT_NEAR(mean, 0.025, 3.0 * se);
}

TEST(RandomModelTest, ContentKeyed) {
  const RandomEmbeddingModel model(8, 1);
  EXPECT_EQ(model.EmbedText("a red circle"), model.EmbedText("a red circle"));
  EXPECT_NE(model.EmbedText("a red circle"), model.EmbedText("a circle red"));
  const BagOfWordsModel bow(8, 1);
  EXPECT_EQ(bow.EmbedText("a red circle"), bow.EmbedText("circle a red"));
}

TEST(ReportTest, CsvAndSummary) {
  EvalReport r;
  r.tasks["sc/swap_attribute"] = {4, 3};
  r.recalls.push_back({"recall@5_image_to_text", 10, 0.5});
  r.config_hash = "00000000000000ff";
  r.seed = 2;
  const auto dir = test::ScratchDir("eval_report");
  WriteEvalReport(dir / "r.csv", r);
  EXPECT_EQ(test::ReadFile(dir / "r.csv"),
            "# config_hash=00000000000000ff seed=2\ntask,n,accuracy\n"
            "sc/swap_attribute,4,0.75\nrecall@5_image_to_text,10,0.5\n");
  EXPECT_NE(FormatEvalSummary(r).find("sc/swap_attribute"), std::string::npos);
}

class AttentionTest : public ::testing::Test {
 protected:
  void SetUp() override {
    data_.image_size = 16;
    vocab_ = WorldVocabulary(data_);
    ModelConfig m = test::TinyConfig();
    m.vocab_size = vocab_.size();
    m.max_len = 12;
    a_ = ModelParams::Init(m, 1);
    b_ = ModelParams::Init(m, 2);
    Rng rng(4);
    test::Jitter(a_, rng, 0.5);
    test::Jitter(b_, rng, 0.5);
    Rng srng(9);
    scene_ = GenScene(srng, data_);
    image_ = Render(scene_, data_);
    caption_ = MakeCaption(scene_, 0, "x").caption;
  }

  DataConfig data_;
  Vocabulary vocab_;
  ModelParams a_, b_;
  SceneSpec scene_;
  Image image_;
  std::string caption_;
};

TEST_F(AttentionTest, IdenticalModelsGiveZeroMap) {
  const AttentionMap map =
      AttentionDifference(a_, vocab_, a_, vocab_, image_, caption_, PosLexicon::Default());
  EXPECT_EQ(map.rows, 2);
  EXPECT_EQ(map.cols, 2);
  for (double v : map.values) EXPECT_EQ(v, 0.0);
}

TEST_F(AttentionTest, DifferenceSumsToZero) {
  const AttentionMap map =
      AttentionDifference(a_, vocab_, b_, vocab_, image_, caption_, PosLexicon::Default());
  ASSERT_EQ(map.values.size(), 4u);
  EXPECT_NEAR(std::accumulate(map.values.begin(), map.values.end(), 0.0), 0.0, 1e-12);
  double mag = 0.0;
  for (double v : map.values) mag += std::abs(v);
  EXPECT_GT(mag, 0.0);
  const auto w = ConceptAttention(a_, vocab_, image_, caption_, PosLexicon::Default());
  EXPECT_NEAR(std::accumulate(w.begin(), w.end(), 0.0), 1.0, 1e-12);
}

TEST_F(AttentionTest, MismatchedGridIsContractError) {
  ModelConfig m = a_.config;
  m.patch_size = 4;
  const ModelParams c = ModelParams::Init(m, 3);
  EXPECT_THROW(
      AttentionDifference(a_, vocab_, c, vocab_, image_, caption_, PosLexicon::Default()),
      ContractError);
}

TEST_F(AttentionTest, FilesAreDeterministic) {
  const AttentionMap map =
      AttentionDifference(a_, vocab_, b_, vocab_, image_, caption_, PosLexicon::Default());
  const auto d1 = test::ScratchDir("attn1");
  const auto d2 = test::ScratchDir("attn2");
  WriteAttentionMap(d1 / "m", map);
  WriteAttentionMap(d2 / "m",
                    AttentionDifference(a_, vocab_, b_, vocab_, image_, caption_,
                                        PosLexicon::Default()));
  for (const char* f : {"m.csv", "m_pos.pgm", "m_neg.pgm", "m_scale.txt"}) {
    ASSERT_TRUE(std::filesystem::exists(d1 / f)) << f;
    EXPECT_EQ(test::ReadFile(d1 / f), test::ReadFile(d2 / f)) << f;
  }
  const std::string pgm = test::ReadFile(d1 / "m_pos.pgm");
  EXPECT_EQ(pgm.substr(0, 11), "P5\n2 2\n255\n");
  EXPECT_EQ(pgm.size(), 11u + 4u);
}

TEST_F(AttentionTest, ObjectPatchesCoverGlyph) {
  ModelConfig m = a_.config;
  for (const auto& o : scene_.objects) {
    const auto mask = ObjectPatches(o, data_, m);
    ASSERT_EQ(mask.size(), 4u);
    EXPECT_EQ(std::count(mask.begin(), mask.end(), true), 1);
    EXPECT_TRUE(mask[o.row * 2 + o.col]);
  }
}

TEST(SignTestTest, KnownValues) {
  EXPECT_NEAR(SignTestPValue(5, 0), 1.0 / 32.0, 1e-15);
  EXPECT_NEAR(SignTestPValue(0, 5), 1.0, 1e-15);
  EXPECT_NEAR(SignTestPValue(4, 1), 6.0 / 32.0, 1e-14);
  EXPECT_EQ(SignTestPValue(0, 0), 1.0);
}

}  // namespace
}  // namespace c2l
