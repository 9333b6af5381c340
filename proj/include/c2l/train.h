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

// Adam training over the total loss.
//
// Batches come from a shuffle seeded by (seed, epoch), so the global step
// alone fixes where training is inside the data. A checkpoint stores the
// parameters, both Adam moments and that step, which makes resume exact.

#ifndef C2L_TRAIN_H_
#define C2L_TRAIN_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "c2l/chunker.h"
#include "c2l/data.h"
#include "c2l/json.h"
#include "c2l/loss.h"
#include "c2l/model.h"
#include "c2l/vocab.h"

namespace c2l {

struct TrainConfig {
  // From-scratch rate. Fine-tuning a pretrained model would use ~1e-5.
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t batch_size = 32;
  int64_t epochs = 1;
  // When positive, overrides `epochs` as the total step budget.
  int64_t max_steps = 0;
  LossWeights weights;
  uint64_t seed = 0;
  AblationMode ablation = AblationMode::kFull;
  // Write a checkpoint every this many steps; 0 writes only the final one.
  int64_t checkpoint_every = 0;

  // Throws ConfigError.
  void Validate() const;
  Json ToJson() const;
  static TrainConfig FromJson(const Json& json);
};

struct AdamState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t step = 0;

  static AdamState Zeros(const std::vector<NamedTensor>& params);
};

// Bias-corrected Adam update of every tensor from its grad. Throws
// ContractError when a tensor has no grad or the state does not match.
void AdamStep(const std::vector<NamedTensor>& params, AdamState& state,
              const TrainConfig& config);

struct TrainingExample {
  Image image;
  std::vector<int64_t> ids;
  std::vector<ConceptSpan> concepts;
};

struct TrainingSet {
  std::vector<TrainingExample> examples;
};

// Loads records and their images. Spans stored in a record win over the
// chunker. Throws IoError or ParseError.
TrainingSet LoadTrainingSet(const std::filesystem::path& dataset_file,
                            const Vocabulary& vocab, const PosLexicon& lexicon);

// The world vocabulary from <dir>/meta.json when present, otherwise every
// caption token in order of first occurrence.
Vocabulary DatasetVocabulary(const std::filesystem::path& dataset_file);

struct StepMetrics {
  int64_t step = 0;  // after the update
  double contrastive = 0.0;
  std::optional<double> npc;
  std::optional<double> xac;
  double total = 0.0;
};

// Means over the steps that reported each term.
struct EpochMetrics {
  int64_t steps = 0;
  double contrastive = 0.0;
  std::optional<double> npc;
  std::optional<double> xac;
  double total = 0.0;
};

// "step,l_contrastive,l_npc,l_xac,l_total" with empty cells for absent terms.
void WriteMetricsHeader(std::ostream& out);
void WriteMetricsRow(std::ostream& out, const StepMetrics& m);

class Trainer {
 public:
  Trainer(ModelParams params, Vocabulary vocab, TrainConfig config);
  // Resumes from a checkpoint written by ToCheckpoint(). Throws
  // CheckpointError when it lacks training state or when its model or
  // train config differs from `config`.
  static Trainer Resume(const Checkpoint& ckpt, const TrainConfig& config);

  // Full batches per epoch; a tail of at least 2 items counts as a batch.
  int64_t StepsPerEpoch(int64_t dataset_size) const;
  int64_t TotalSteps(int64_t dataset_size) const;

  // Index order of `epoch`.
  std::vector<int64_t> EpochOrder(int64_t dataset_size, int64_t epoch) const;

  // One forward/backward/update on `batch`. Throws NumericError when a
  // loss or parameter becomes non-finite.
  StepMetrics Step(const Batch& batch);

  // Runs until `stop_step` or the end of the current epoch, whichever comes
  // first. Throws ContractError on an empty dataset.
  EpochMetrics TrainEpoch(const TrainingSet& data, int64_t stop_step,
                          const std::function<void(const StepMetrics&)>& on_step = {});
  // Runs epochs until TotalSteps(); `on_step` sees every step.
  EpochMetrics Train(const TrainingSet& data,
                     const std::function<void(const StepMetrics&)>& on_step = {});

  Checkpoint ToCheckpoint() const;

  const ModelParams& params() const { return params_; }
  const Vocabulary& vocab() const { return vocab_; }
  const TrainConfig& config() const { return config_; }
  const AdamState& adam() const { return adam_; }
  int64_t step() const { return adam_.step; }

 private:
  ModelParams params_;
  Vocabulary vocab_;
  TrainConfig config_;
  std::vector<NamedTensor> named_;
  AdamState adam_;
};

}  // namespace c2l

#endif  // C2L_TRAIN_H_
