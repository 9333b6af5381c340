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

#include "c2l/train.h"

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "c2l/errors.h"
#include "model_test_util.h"
#include "test_util.h"

namespace c2l {
namespace {

DataConfig SmallWorld() {
  DataConfig d;
  d.image_size = 16;
  return d;
}

TrainingSet SmallSet(const DataConfig& data, const Vocabulary& vocab, int64_t n,
                     uint64_t seed) {
  TrainingSet set;
  for (int64_t i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<uint64_t>(i));
    const SceneSpec s = GenScene(rng, data);
    const CaptionRecord c = MakeCaption(s, ChooseTemplate(rng, s), "x");
    set.examples.push_back({Render(s, data), vocab.EncodeCaption(c.caption), c.concepts});
  }
  return set;
}

ModelConfig SmallModel(const Vocabulary& vocab) {
  ModelConfig m = test::TinyConfig();
  m.vocab_size = vocab.size();
  m.max_len = 12;
  return m;
}

Trainer MakeTrainer(AblationMode mode, int64_t max_steps, uint64_t seed = 0) {
  const Vocabulary vocab = WorldVocabulary(SmallWorld());
  TrainConfig tc;
  tc.batch_size = 4;
  tc.max_steps = max_steps;
  tc.ablation = mode;
  tc.seed = seed;
  tc.lr = 1e-2;
  return Trainer(ModelParams::Init(SmallModel(vocab), seed), vocab, tc);
}

std::string CheckpointBytes(const Checkpoint& ckpt, const std::string& name) {
  const auto dir = test::ScratchDir(name);
  WriteCheckpoint(dir / "c.bin", ckpt);
  return test::ReadFile(dir / "c.bin");
}

TEST(TrainConfigTest, ValidatesFields) {
  TrainConfig c;
  EXPECT_NO_THROW(c.Validate());
  c.batch_size = 1;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = TrainConfig();
  c.lr = 0.0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = TrainConfig();
  c.beta2 = 1.0;
  EXPECT_THROW(c.Validate(), ConfigError);
  c = TrainConfig();
  c.weights.lambda_xac = -1.0;
  EXPECT_THROW(c.Validate(), ConfigError);
}

TEST(TrainConfigTest, JsonRoundTripAndDefaults) {
  TrainConfig c;
  EXPECT_EQ(c.weights.lambda_npc, 1.0);
  EXPECT_EQ(c.weights.lambda_xac, 0.01);
  c.ablation = AblationMode::kPlusNpc;
  c.seed = 77;
  c.lr = 1e-3;
  const TrainConfig back = TrainConfig::FromJson(c.ToJson());
  EXPECT_EQ(back.ToJson(), c.ToJson());
  EXPECT_EQ(TrainConfig::FromJson(Json::object()).weights.lambda_xac, 0.01);
  Json bad = c.ToJson();
  bad["lambda_hnc"] = 1.0;
  EXPECT_THROW(TrainConfig::FromJson(bad), ConfigError);
  EXPECT_EQ(TrainConfig::FromJson(Json{{"ablation", "xac"}}).ablation, AblationMode::kFull);
}

TEST(AdamTest, FirstStepMovesByLearningRateTimesSign) {
  Tensor w = Tensor::FromData({4}, {1.0, -2.0, 0.5, 3.0}, true);
  const std::vector<double> g = {0.3, -4.0, 1e-3, -0.02};
  std::copy(g.begin(), g.end(), w.mutable_grad().begin());
  std::vector<NamedTensor> params = {{"w", w}};
  AdamState state = AdamState::Zeros(params);
  TrainConfig c;
  c.lr = 0.01;
  const std::vector<double> before(w.data().begin(), w.data().end());
  AdamStep(params, state, c);
  for (size_t i = 0; i < g.size(); ++i) {
    // m_hat = g and v_hat = g^2 after one step.
    const double expected = -c.lr * g[i] / (std::abs(g[i]) + c.eps);
    EXPECT_NEAR(w.data()[i] - before[i], expected, 1e-15);
    const double delta = std::abs(w.data()[i] - before[i]);
    EXPECT_LE(delta, c.lr);
    EXPECT_GE(delta, c.lr * (1.0 - 1e-4));
    EXPECT_EQ(std::signbit(w.data()[i] - before[i]), !std::signbit(g[i]));
  }
  EXPECT_EQ(state.step, 1);
}

TEST(AdamTest, ZeroGradientLeavesParamsButAdvancesStep) {
  Tensor w = Tensor::FromData({3}, {1.0, 2.0, 3.0}, true);
  w.mutable_grad();
  std::vector<NamedTensor> params = {{"w", w}};
  AdamState state = AdamState::Zeros(params);
  for (int i = 0; i < 3; ++i) AdamStep(params, state, TrainConfig());
  EXPECT_EQ(std::vector<double>(w.data().begin(), w.data().end()),
            (std::vector<double>{1.0, 2.0, 3.0}));
  EXPECT_EQ(state.step, 3);
}

TEST(AdamTest, MissingGradientIsContractError) {
  Tensor w = Tensor::FromData({2}, {1.0, 2.0}, true);
  std::vector<NamedTensor> params = {{"w", w}};
  AdamState state = AdamState::Zeros(params);
  EXPECT_THROW(AdamStep(params, state, TrainConfig()), ContractError);
}

TEST(AdamTest, QuadraticMatchesScalarRecurrence) {
  Tensor x = Tensor::Scalar(1.0, true);
  std::vector<NamedTensor> params = {{"x", x}};
  AdamState state = AdamState::Zeros(params);
  TrainConfig c;
  c.lr = 0.1;
  double ox = 1.0, m = 0.0, v = 0.0;
  for (int t = 1; t <= 200; ++t) {
    x.mutable_grad()[0] = 2.0 * x.item();
    AdamStep(params, state, c);
    x.clear_grad();
    const double g = 2.0 * ox;
    m = 0.9 * m + 0.1 * g;
    v = 0.999 * v + 0.001 * g * g;
    ox -= 0.1 * (m / (1.0 - std::pow(0.9, t))) / (std::sqrt(v / (1.0 - std::pow(0.999, t))) + 1e-8);
  }
  EXPECT_LT(std::abs(x.item()), 0.05);
  EXPECT_NEAR(x.item(), ox, 1e-12);
}

TEST(TrainerTest, StepsPerEpochDropsSingleItemTail) {
  Trainer t = MakeTrainer(AblationMode::kFull, 0);
  EXPECT_EQ(t.StepsPerEpoch(8), 2);
  EXPECT_EQ(t.StepsPerEpoch(9), 2);
  EXPECT_EQ(t.StepsPerEpoch(10), 3);
  EXPECT_EQ(t.TotalSteps(10), 3);
}

TEST(TrainerTest, EpochOrderIsSeededPermutation) {
  Trainer t = MakeTrainer(AblationMode::kFull, 0);
  const auto a = t.EpochOrder(50, 0);
  EXPECT_EQ(a, t.EpochOrder(50, 0));
  EXPECT_NE(a, t.EpochOrder(50, 1));
  EXPECT_EQ(std::set<int64_t>(a.begin(), a.end()).size(), 50u);
}

TEST(TrainerTest, OverfitsFixedBatch) {
  const DataConfig data = SmallWorld();
  Trainer t = MakeTrainer(AblationMode::kFull, 0);
  const TrainingSet set = SmallSet(data, t.vocab(), 8, 3);
  Batch batch;
  for (const auto& ex : set.examples) {
    batch.images.push_back(&ex.image);
    batch.captions.push_back(ex.ids);
    batch.concepts.push_back(ex.concepts);
  }
  const StepMetrics first = t.Step(batch);
  StepMetrics last;
  for (int i = 1; i < 50; ++i) last = t.Step(batch);
  EXPECT_LT(last.total, first.total);
  EXPECT_EQ(last.step, 50);
  for (const auto& nt : t.params().Named()) {
    for (double v : nt.tensor.data()) ASSERT_TRUE(std::isfinite(v)) << nt.name;
  }
}

TEST(TrainerTest, ContrastiveOnlyReportsNoConceptTerms) {
  Trainer t = MakeTrainer(AblationMode::kContrastiveOnly, 6);
  const TrainingSet set = SmallSet(SmallWorld(), t.vocab(), 12, 1);
  ConceptPathCalls() = {};
  std::vector<StepMetrics> steps;
  t.Train(set, [&](const StepMetrics& m) { steps.push_back(m); });
  ASSERT_EQ(steps.size(), 6u);
  for (const auto& m : steps) {
    EXPECT_FALSE(m.npc.has_value());
    EXPECT_FALSE(m.xac.has_value());
    EXPECT_EQ(m.total, m.contrastive);
  }
  EXPECT_EQ(ConceptPathCalls().concept_poolings, 0);
  EXPECT_EQ(ConceptPathCalls().cross_attends, 0);
  std::ostringstream csv;
  WriteMetricsRow(csv, steps[0]);
  EXPECT_NE(csv.str().find(",,,"), std::string::npos) << csv.str();
}

TEST(TrainerTest, FullModeReportsAllTerms) {
  Trainer t = MakeTrainer(AblationMode::kFull, 3);
  const TrainingSet set = SmallSet(SmallWorld(), t.vocab(), 12, 1);
  std::vector<StepMetrics> steps;
  const EpochMetrics em = t.Train(set, [&](const StepMetrics& m) { steps.push_back(m); });
  ASSERT_EQ(steps.size(), 3u);
  for (const auto& m : steps) {
    ASSERT_TRUE(m.npc && m.xac);
    EXPECT_NEAR(m.total, m.contrastive + 1.0 * *m.npc + 0.01 * *m.xac, 1e-12);
  }
  EXPECT_EQ(em.steps, 3);
  EXPECT_NEAR(em.contrastive,
              (steps[0].contrastive + steps[1].contrastive + steps[2].contrastive) / 3.0, 1e-12);
}

TEST(TrainerTest, SameSeedGivesIdenticalCheckpoints) {
  const TrainingSet set =
      SmallSet(SmallWorld(), WorldVocabulary(SmallWorld()), 10, 2);
  Trainer a = MakeTrainer(AblationMode::kFull, 7, 5);
  Trainer b = MakeTrainer(AblationMode::kFull, 7, 5);
  a.Train(set);
  b.Train(set);
  EXPECT_EQ(CheckpointBytes(a.ToCheckpoint(), "ta"), CheckpointBytes(b.ToCheckpoint(), "tb"));
  Trainer c = MakeTrainer(AblationMode::kFull, 7, 6);
  c.Train(set);
  EXPECT_NE(CheckpointBytes(a.ToCheckpoint(), "ta"), CheckpointBytes(c.ToCheckpoint(), "tc"));
}

TEST(TrainerTest, CheckpointRoundTripIsByteIdentical) {
  const TrainingSet set =
      SmallSet(SmallWorld(), WorldVocabulary(SmallWorld()), 10, 2);
  Trainer a = MakeTrainer(AblationMode::kPlusNpc, 3);
  a.Train(set);
  const auto dir = test::ScratchDir("train_roundtrip");
  WriteCheckpoint(dir / "a.bin", a.ToCheckpoint());
  const Trainer back = Trainer::Resume(ReadCheckpoint(dir / "a.bin"), a.config());
  WriteCheckpoint(dir / "b.bin", back.ToCheckpoint());
  EXPECT_EQ(test::ReadFile(dir / "a.bin"), test::ReadFile(dir / "b.bin"));
  EXPECT_EQ(back.step(), 3);

  const std::string bytes = test::ReadFile(dir / "a.bin");
  {
    std::ofstream out(dir / "t.bin", std::ios::binary);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size() / 2));
  }
  EXPECT_THROW(ReadCheckpoint(dir / "t.bin"), CheckpointError);
}

TEST(TrainerTest, ResumeMatchesUninterruptedRun) {
  const TrainingSet set =
      SmallSet(SmallWorld(), WorldVocabulary(SmallWorld()), 11, 4);
  // 11 items with batch 4: epochs of 3 steps, so step 4 is mid-epoch.
  Trainer full = MakeTrainer(AblationMode::kFull, 8, 9);
  full.Train(set);

  Trainer first = MakeTrainer(AblationMode::kFull, 4, 9);
  first.Train(set);
  const auto dir = test::ScratchDir("train_resume");
  WriteCheckpoint(dir / "k.bin", first.ToCheckpoint());
  TrainConfig more = first.config();
  more.max_steps = 8;
  Trainer resumed = Trainer::Resume(ReadCheckpoint(dir / "k.bin"), more);
  resumed.Train(set);
  EXPECT_EQ(resumed.step(), 8);
  EXPECT_EQ(CheckpointBytes(resumed.ToCheckpoint(), "r1"),
            CheckpointBytes(full.ToCheckpoint(), "r2"));
}

TEST(TrainerTest, ResumeWithDifferentConfigNamesMismatch) {
  Trainer a = MakeTrainer(AblationMode::kFull, 1);
  TrainConfig other = a.config();
  other.lr = 0.5;
  try {
    Trainer::Resume(a.ToCheckpoint(), other);
    FAIL() << "expected CheckpointError";
  } catch (const CheckpointError& e) {
    EXPECT_NE(std::string(e.what()).find("lr"), std::string::npos) << e.what();
  }
  Checkpoint bare = MakeModelCheckpoint(a.params(), a.vocab());
  EXPECT_THROW(Trainer::Resume(bare, a.config()), CheckpointError);
}

TEST(TrainerTest, EmptyDatasetIsContractError) {
  Trainer t = MakeTrainer(AblationMode::kFull, 2);
  EXPECT_THROW(t.TrainEpoch(TrainingSet(), 2), ContractError);
}

TEST(TrainerTest, VocabularyMismatchIsContractError) {
  const Vocabulary vocab = WorldVocabulary(SmallWorld());
  ModelConfig m = SmallModel(vocab);
  m.vocab_size += 1;
  EXPECT_THROW(Trainer(ModelParams::Init(m, 0), vocab, TrainConfig()), ContractError);
}

TEST(TrainingSetTest, LoadsGeneratedDataset) {
  const auto dir = test::ScratchDir("train_load");
  const DataConfig data = SmallWorld();
  GenerateDataset(dir, data, 1, 6, false);
  const Vocabulary vocab = DatasetVocabulary(dir / "train.jsonl");
  EXPECT_EQ(vocab, WorldVocabulary(data));
  const TrainingSet set = LoadTrainingSet(dir / "train.jsonl", vocab, PosLexicon::Default());
  const auto records = ReadDataset(dir / "train.jsonl");
  ASSERT_EQ(set.examples.size(), 6u);
  for (size_t i = 0; i < records.size(); ++i) {
    EXPECT_EQ(set.examples[i].image, Render(*records[i].scene, data));
    EXPECT_EQ(set.examples[i].concepts, *records[i].concepts);
    EXPECT_EQ(set.examples[i].ids, vocab.EncodeCaption(records[i].caption));
  }
}

TEST(TrainingSetTest, ChunkerFillsMissingSpans) {
  const auto dir = test::ScratchDir("train_chunk");
  DatasetRecord r;
  r.image_id = "i0";
  r.caption = "a red circle above a blue square";
  WriteDataset(dir / "d.jsonl", {r});
  WritePpm(ImagePath(dir / "d.jsonl", "i0"), Image{4, 4, std::vector<double>(48, 1.0)});
  const Vocabulary vocab = DatasetVocabulary(dir / "d.jsonl");
  EXPECT_EQ(vocab.size(), 2 + 6);
  const TrainingSet set = LoadTrainingSet(dir / "d.jsonl", vocab, PosLexicon::Default());
  EXPECT_EQ(set.examples[0].concepts, (std::vector<ConceptSpan>{{0, 3}, {4, 7}}));
}

TEST(MetricsTest, CsvFormat) {
  std::ostringstream os;
  WriteMetricsHeader(os);
  WriteMetricsRow(os, {3, 0.5, 0.25, std::nullopt, 0.75});
  EXPECT_EQ(os.str(), "step,l_contrastive,l_npc,l_xac,l_total\n3,0.5,0.25,,0.75\n");
}

}  // namespace
}  // namespace c2l
