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

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>

#include "c2l/errors.h"

namespace c2l {
namespace {

constexpr uint64_t kShuffleStream = 0x5348554646ULL;

// Keys that may change between a run and its resumption.
const char* const kBudgetKeys[] = {"epochs", "max_steps", "checkpoint_every"};

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

void Accumulate(std::optional<double>& sum, int64_t& count, const std::optional<double>& v) {
  if (!v) return;
  sum = sum.value_or(0.0) + *v;
  ++count;
}

}  // namespace

// ---------------------------------------------------------------------------
// Config.

void TrainConfig::Validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0)) throw ConfigError("train.beta1 must be in [0, 1)");
  if (!(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("train.beta2 must be in [0, 1)");
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
  if (batch_size < 2) throw ConfigError("train.batch_size must be at least 2");
  if (epochs < 1) throw ConfigError("train.epochs must be at least 1");
  if (max_steps < 0) throw ConfigError("train.max_steps must be non-negative");
  if (checkpoint_every < 0) throw ConfigError("train.checkpoint_every must be non-negative");
  weights.Validate();
}

Json TrainConfig::ToJson() const {
  return Json{{"lr", lr},
              {"beta1", beta1},
              {"beta2", beta2},
              {"eps", eps},
              {"batch_size", batch_size},
              {"epochs", epochs},
              {"max_steps", max_steps},
              {"lambda_npc", weights.lambda_npc},
              {"lambda_xac", weights.lambda_xac},
              {"seed", seed},
              {"ablation", AblationName(ablation)},
              {"checkpoint_every", checkpoint_every}};
}

TrainConfig TrainConfig::FromJson(const Json& json) {
  RejectUnknownKeys(json,
                    {"lr", "beta1", "beta2", "eps", "batch_size", "epochs", "max_steps",
                     "lambda_npc", "lambda_xac", "seed", "ablation", "checkpoint_every"},
                    "train");
  TrainConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (json.contains(key)) json.at(key).get_to(field);
    };
    get("lr", c.lr);
    get("beta1", c.beta1);
    get("beta2", c.beta2);
    get("eps", c.eps);
    get("batch_size", c.batch_size);
    get("epochs", c.epochs);
    get("max_steps", c.max_steps);
    get("lambda_npc", c.weights.lambda_npc);
    get("lambda_xac", c.weights.lambda_xac);
    get("seed", c.seed);
    get("checkpoint_every", c.checkpoint_every);
    if (json.contains("ablation")) c.ablation = ParseAblation(json.at("ablation").get<std::string>());
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("train: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Adam.

AdamState AdamState::Zeros(const std::vector<NamedTensor>& params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.push_back(Tensor::Zeros(p.tensor.shape()));
    s.v.push_back(Tensor::Zeros(p.tensor.shape()));
  }
  return s;
}

void AdamStep(const std::vector<NamedTensor>& params, AdamState& state,
              const TrainConfig& config) {
  if (state.m.size() != params.size() || state.v.size() != params.size()) {
    throw ContractError("Adam state does not match the parameter list");
  }
  for (const auto& p : params) {
    if (!p.tensor.has_grad()) throw ContractError("parameter " + p.name + " has no gradient");
  }
  const double t = static_cast<double>(state.step + 1);
  const double c1 = 1.0 - std::pow(config.beta1, t);
  const double c2 = 1.0 - std::pow(config.beta2, t);
  for (size_t i = 0; i < params.size(); ++i) {
    Tensor w = params[i].tensor;
    if (state.m[i].shape() != w.shape()) {
      throw ContractError("Adam moment shape differs for " + params[i].name);
    }
    auto g = w.grad();
    auto data = w.mutable_data();
    auto m = state.m[i].mutable_data();
    auto v = state.v[i].mutable_data();
    for (size_t j = 0; j < data.size(); ++j) {
      m[j] = config.beta1 * m[j] + (1.0 - config.beta1) * g[j];
      v[j] = config.beta2 * v[j] + (1.0 - config.beta2) * g[j] * g[j];
      data[j] -= config.lr * (m[j] / c1) / (std::sqrt(v[j] / c2) + config.eps);
    }
  }
  ++state.step;
}

// ---------------------------------------------------------------------------
// Data.

TrainingSet LoadTrainingSet(const std::filesystem::path& dataset_file,
                            const Vocabulary& vocab, const PosLexicon& lexicon) {
  TrainingSet set;
  for (const auto& r : ReadDataset(dataset_file)) {
    TrainingExample ex;
    ex.image = ReadPpm(ImagePath(dataset_file, r.image_id));
    ex.ids = vocab.EncodeCaption(r.caption);
    ex.concepts = r.concepts ? *r.concepts : ExtractConcepts(r.caption, lexicon);
    set.examples.push_back(std::move(ex));
  }
  return set;
}

Vocabulary DatasetVocabulary(const std::filesystem::path& dataset_file) {
  const auto meta_path = dataset_file.parent_path() / "meta.json";
  if (std::filesystem::exists(meta_path)) {
    std::ifstream in(meta_path);
    Json meta;
    try {
      meta = Json::parse(in);
    } catch (const Json::exception& e) {
      throw ParseError(meta_path.string() + ": " + e.what());
    }
    if (meta.contains("data")) return WorldVocabulary(DataConfig::FromJson(meta.at("data")));
  }
  std::vector<std::string> words;
  for (const auto& r : ReadDataset(dataset_file)) {
    for (auto& w : Tokenize(r.caption)) words.push_back(std::move(w));
  }
  return Vocabulary(words);
}

// ---------------------------------------------------------------------------
// Metrics.

void WriteMetricsHeader(std::ostream& out) {
  out << "step,l_contrastive,l_npc,l_xac,l_total\n";
}

void WriteMetricsRow(std::ostream& out, const StepMetrics& m) {
  out << m.step << ',' << FormatDouble(m.contrastive) << ','
      << (m.npc ? FormatDouble(*m.npc) : "") << ',' << (m.xac ? FormatDouble(*m.xac) : "")
      << ',' << FormatDouble(m.total) << '\n';
}

// ---------------------------------------------------------------------------
// Trainer.

Trainer::Trainer(ModelParams params, Vocabulary vocab, TrainConfig config)
    : params_(std::move(params)), vocab_(std::move(vocab)), config_(config) {
  config_.Validate();
  if (params_.config.vocab_size != vocab_.size()) {
    throw ContractError("model vocab_size " + std::to_string(params_.config.vocab_size) +
                        " differs from the vocabulary size " + std::to_string(vocab_.size()));
  }
  named_ = params_.Named();
  adam_ = AdamState::Zeros(named_);
}

Trainer Trainer::Resume(const Checkpoint& ckpt, const TrainConfig& config) {
  if (!ckpt.config.contains("train")) throw CheckpointError("checkpoint has no train config");
  Json stored = ckpt.config.at("train");
  Json wanted = config.ToJson();
  for (const char* key : kBudgetKeys) {
    stored.erase(key);
    wanted.erase(key);
  }
  if (ConfigHash(stored) != ConfigHash(wanted)) {
    std::string keys;
    for (const auto& [key, value] : wanted.items()) {
      if (!stored.contains(key) || stored.at(key) != value) keys += (keys.empty() ? "" : ", ") + key;
    }
    throw CheckpointError("train config hash mismatch on resume (" + keys + ")");
  }
  Trainer t(ParamsFromCheckpoint(ckpt), VocabFromCheckpoint(ckpt), config);
  std::map<std::string, const Tensor*> stored_tensors;
  for (const auto& nt : ckpt.tensors) stored_tensors[nt.name] = &nt.tensor;
  for (size_t i = 0; i < t.named_.size(); ++i) {
    for (auto [prefix, dst] : {std::pair{"adam.m.", &t.adam_.m[i]}, {"adam.v.", &t.adam_.v[i]}}) {
      const std::string name = prefix + t.named_[i].name;
      auto it = stored_tensors.find(name);
      if (it == stored_tensors.end()) throw CheckpointError("checkpoint is missing tensor " + name);
      if (it->second->shape() != dst->shape()) {
        throw CheckpointError("checkpoint tensor " + name + " has the wrong shape");
      }
      *dst = it->second->Clone();
    }
  }
  t.adam_.step = static_cast<int64_t>(ckpt.step);
  return t;
}

int64_t Trainer::StepsPerEpoch(int64_t dataset_size) const {
  const int64_t b = config_.batch_size;
  return dataset_size / b + (dataset_size % b >= 2 ? 1 : 0);
}

int64_t Trainer::TotalSteps(int64_t dataset_size) const {
  if (config_.max_steps > 0) return config_.max_steps;
  return config_.epochs * StepsPerEpoch(dataset_size);
}

std::vector<int64_t> Trainer::EpochOrder(int64_t dataset_size, int64_t epoch) const {
  Rng rng(MixSeed(config_.seed, kShuffleStream), static_cast<uint64_t>(epoch));
  return rng.Permutation(dataset_size);
}

StepMetrics Trainer::Step(const Batch& batch) {
  Tape tape;
  BatchLosses losses =
      ComputeBatchLosses(&tape, params_, batch, config_.ablation, config_.weights);
  StepMetrics m;
  m.contrastive = losses.contrastive.item();
  if (losses.npc && !losses.npc->skipped) m.npc = losses.npc->value.item();
  if (losses.xac && !losses.xac->skipped) m.xac = losses.xac->value.item();
  m.total = losses.total.item();
  if (!std::isfinite(m.total)) {
    throw NumericError("non-finite loss at step " + std::to_string(adam_.step + 1));
  }
  for (auto& nt : named_) nt.tensor.clear_grad();
  Backward(losses.total, tape);
  // Tensors the loss never reached (for example unused loss scalars) get a
  // zero gradient.
  for (auto& nt : named_) nt.tensor.mutable_grad();
  AdamStep(named_, adam_, config_);
  for (auto& nt : named_) {
    for (double v : nt.tensor.data()) {
      if (!std::isfinite(v)) {
        throw NumericError("parameter " + nt.name + " became non-finite at step " +
                           std::to_string(adam_.step));
      }
    }
    nt.tensor.clear_grad();
  }
  m.step = adam_.step;
  return m;
}

EpochMetrics Trainer::TrainEpoch(const TrainingSet& data, int64_t stop_step,
                                 const std::function<void(const StepMetrics&)>& on_step) {
  const int64_t n = static_cast<int64_t>(data.examples.size());
  if (n == 0) throw ContractError("training set is empty");
  const int64_t spe = StepsPerEpoch(n);
  if (spe == 0) throw ContractError("training set is smaller than 2 items");
  const int64_t b = config_.batch_size;
  const int64_t epoch = adam_.step / spe;
  int64_t index = adam_.step % spe;
  if (index == 0 && n % b == 1) {
    std::cerr << "warning: epoch " << epoch << " drops a tail batch of 1 item\n";
  }
  const auto order = EpochOrder(n, epoch);
  EpochMetrics out;
  int64_t npc_steps = 0, xac_steps = 0;
  for (; index < spe && adam_.step < stop_step; ++index) {
    Batch batch;
    for (int64_t k = index * b; k < std::min((index + 1) * b, n); ++k) {
      const TrainingExample& ex = data.examples[order[k]];
      batch.images.push_back(&ex.image);
      batch.captions.push_back(ex.ids);
      batch.concepts.push_back(ex.concepts);
    }
    const StepMetrics m = Step(batch);
    if (on_step) on_step(m);
    ++out.steps;
    out.contrastive += m.contrastive;
    Accumulate(out.npc, npc_steps, m.npc);
    Accumulate(out.xac, xac_steps, m.xac);
    out.total += m.total;
  }
  if (out.steps > 0) {
    const double k = static_cast<double>(out.steps);
    out.contrastive /= k;
    if (out.npc) *out.npc /= static_cast<double>(npc_steps);
    if (out.xac) *out.xac /= static_cast<double>(xac_steps);
    out.total /= k;
  }
  return out;
}

EpochMetrics Trainer::Train(const TrainingSet& data,
                            const std::function<void(const StepMetrics&)>& on_step) {
  const int64_t total = TotalSteps(static_cast<int64_t>(data.examples.size()));
  EpochMetrics last;
  while (adam_.step < total) last = TrainEpoch(data, total, on_step);
  return last;
}

Checkpoint Trainer::ToCheckpoint() const {
  Checkpoint ckpt = MakeModelCheckpoint(params_, vocab_, Json{{"train", config_.ToJson()}});
  for (size_t i = 0; i < named_.size(); ++i) {
    ckpt.tensors.push_back({"adam.m." + named_[i].name, adam_.m[i]});
  }
  for (size_t i = 0; i < named_.size(); ++i) {
    ckpt.tensors.push_back({"adam.v." + named_[i].name, adam_.v[i]});
  }
  ckpt.step = static_cast<uint64_t>(adam_.step);
  return ckpt;
}

}  // namespace c2l
