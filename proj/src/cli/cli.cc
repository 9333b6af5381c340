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

#include "c2l/cli.h"

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "c2l/errors.h"
#include "c2l/eval.h"
#include "c2l/loss.h"
#include "c2l/ops.h"

namespace c2l {
namespace {

namespace fs = std::filesystem;

constexpr char kOutDirEnv[] = "C2L_OUT_DIR";

fs::path OutDir(const std::string& flag) {
  if (const char* env = std::getenv(kOutDirEnv); env != nullptr && *env != '\0') return env;
  if (flag.empty()) throw ConfigError("--out is required (or set C2L_OUT_DIR)");
  return flag;
}

void EnsureDir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

PosLexicon LoadLexicon(const std::optional<fs::path>& path) {
  return path ? PosLexicon::Load(*path) : PosLexicon::Default();
}

RunConfig LoadRunConfig(const std::string& path) {
  return path.empty() ? RunConfig() : RunConfig::Load(path);
}

std::string Fixed(double v, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

// Memoizes embeddings: benchmark files share images and captions.
class CachedModel : public EmbeddingModel {
 public:
  explicit CachedModel(const EmbeddingModel& base) : base_(base) {}
  Embedding EmbedImage(const Image& image) const override {
    std::string key(reinterpret_cast<const char*>(image.pixels.data()),
                    image.pixels.size() * sizeof(double));
    auto it = images_.find(key);
    if (it == images_.end()) it = images_.emplace(std::move(key), base_.EmbedImage(image)).first;
    return it->second;
  }
  Embedding EmbedText(const std::string& caption) const override {
    auto it = texts_.find(caption);
    if (it == texts_.end()) it = texts_.emplace(caption, base_.EmbedText(caption)).first;
    return it->second;
  }

 private:
  const EmbeddingModel& base_;
  mutable std::map<std::string, Embedding> images_;
  mutable std::map<std::string, Embedding> texts_;
};

// ---------------------------------------------------------------------------
// Commands.

struct GenDataArgs {
  std::string config, out;
  uint64_t seed = 0;
  int64_t n = 1000;
  bool benchmark = false;
};

int CmdGenData(const GenDataArgs& a, std::ostream& out) {
  const RunConfig run = LoadRunConfig(a.config);
  const fs::path dir = OutDir(a.out);
  EnsureDir(dir);
  const GenerateSummary s = GenerateDataset(dir, run.data, a.seed, a.n, a.benchmark);
  out << "train " << s.train_items << '\n';
  for (const auto& [name, count] : s.benchmark_files) out << name << ' ' << count << '\n';
  return kExitOk;
}

int CmdChunk(const std::string& lexicon, std::istream& in, std::ostream& out) {
  const PosLexicon lex =
      lexicon.empty() ? PosLexicon::Default() : PosLexicon::Load(lexicon);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto spans = ExtractConcepts(line, lex);
    for (size_t i = 0; i < spans.size(); ++i) {
      out << (i ? "\t" : "") << spans[i].start << ':' << spans[i].end;
    }
    out << '\n';
  }
  return kExitOk;
}

struct TrainArgs {
  std::string config, data, out, ablation, resume;
  std::optional<uint64_t> seed;
};

int CmdTrain(const TrainArgs& a, std::ostream& out, std::ostream& err) {
  RunConfig run = LoadRunConfig(a.config);
  if (!a.ablation.empty()) run.train.ablation = ParseAblation(a.ablation);
  if (a.seed) run.train.seed = *a.seed;
  run.train.Validate();
  fs::path data = a.data;
  if (fs::is_directory(data)) data /= "train.jsonl";
  if (!fs::exists(data)) throw IoError("dataset not found: " + data.string());
  const fs::path dir = OutDir(a.out);
  EnsureDir(dir);

  const Vocabulary vocab = DatasetVocabulary(data);
  if (run.model.vocab_size == 0) run.model.vocab_size = vocab.size();
  if (run.model.vocab_size != vocab.size()) {
    throw ConfigError("model.vocab_size " + std::to_string(run.model.vocab_size) +
                      " differs from the dataset vocabulary size " +
                      std::to_string(vocab.size()));
  }
  run.model.Validate();
  const TrainingSet set = LoadTrainingSet(data, vocab, LoadLexicon(run.lexicon));
  if (set.examples.empty()) throw ConfigError("dataset " + data.string() + " is empty");

  Trainer trainer = a.resume.empty()
                        ? Trainer(ModelParams::Init(run.model, run.train.seed), vocab, run.train)
                        : Trainer::Resume(ReadCheckpoint(a.resume), run.train);
  if (!a.resume.empty() && trainer.params().config.ToJson() != run.model.ToJson()) {
    throw CheckpointError("model config of " + a.resume + " differs from the run config");
  }
  const std::string hash = HashHex(ConfigHash(run.ToJson()));
  const fs::path metrics_path = dir / "metrics.csv";
  const bool append = !a.resume.empty() && fs::exists(metrics_path);
  std::ofstream metrics(metrics_path, append ? std::ios::app : std::ios::trunc);
  if (!metrics) throw IoError("cannot write " + metrics_path.string());
  if (!append) {
    metrics << "# config_hash=" << hash << '\n';
    WriteMetricsHeader(metrics);
  }
  {
    std::ofstream cfg(dir / "run_config.json", std::ios::trunc);
    cfg << run.ToJson().dump(2) << '\n';
    if (!cfg) throw IoError("cannot write " + (dir / "run_config.json").string());
  }
  const int64_t every = run.train.checkpoint_every;
  StepMetrics last;
  const EpochMetrics em = trainer.Train(set, [&](const StepMetrics& m) {
    WriteMetricsRow(metrics, m);
    last = m;
    if (every > 0 && m.step % every == 0) {
      WriteCheckpoint(dir / ("checkpoint_" + std::to_string(m.step) + ".bin"),
                      trainer.ToCheckpoint());
    }
  });
  metrics.flush();
  if (!metrics) throw IoError("failed writing " + metrics_path.string());
  WriteCheckpoint(dir / "checkpoint.bin", trainer.ToCheckpoint());
  out << "steps " << trainer.step() << " ablation " << AblationName(run.train.ablation)
      << " config_hash " << hash << '\n';
  if (em.steps > 0) {
    out << "final epoch mean: l_contrastive " << Fixed(em.contrastive);
    if (em.npc) out << " l_npc " << Fixed(*em.npc);
    if (em.xac) out << " l_xac " << Fixed(*em.xac);
    out << " l_total " << Fixed(em.total) << '\n';
  } else {
    err << "warning: no training steps were run\n";
  }
  return kExitOk;
}

struct EvalArgs {
  std::string checkpoint, benchmark, out, config;
  uint64_t seed = 0;
};

int CmdEval(const EvalArgs& a, std::ostream& out) {
  const RunConfig run = LoadRunConfig(a.config);
  Checkpoint ckpt;
  try {
    ckpt = ReadCheckpoint(a.checkpoint);
  } catch (const IoError& e) {
    throw CheckpointError(e.what());
  }
  const TrainedModel model = TrainedModel::FromCheckpoint(ckpt);
  if (!a.config.empty()) {
    ModelConfig wanted = run.model;
    if (wanted.vocab_size == 0) wanted.vocab_size = model.params().config.vocab_size;
    if (wanted.ToJson() != model.params().config.ToJson()) {
      throw CheckpointError("config hash mismatch: checkpoint model " +
                            HashHex(ConfigHash(model.params().config.ToJson())) +
                            " vs run config " + HashHex(ConfigHash(wanted.ToJson())));
    }
  }
  std::vector<fs::path> files;
  fs::path bench = a.benchmark;
  if (fs::is_directory(bench / "benchmark")) bench /= "benchmark";
  if (fs::is_directory(bench)) {
    for (const auto& entry : fs::directory_iterator(bench)) {
      if (entry.path().extension() == ".jsonl") files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end());
  } else {
    files.push_back(bench);
  }
  if (files.empty()) throw IoError("no benchmark files in " + bench.string());

  const CachedModel cached(model);
  EvalReport report;
  report.config_hash = HashHex(ConfigHash(ckpt.config));
  report.seed = a.seed;
  std::vector<Embedding> images, texts;
  for (const auto& file : files) {
    const auto items = LoadBenchmark(file);
    if (items.empty()) continue;
    const bool pairs = items.front().positives.size() == 2;
    auto merge = [&](const char* prefix, const TaskAccuracies& acc) {
      for (const auto& [task, t] : acc) {
        auto& dst = report.tasks[std::string(prefix) + task];
        dst.n += t.n;
        dst.correct += t.correct;
      }
    };
    if (pairs) {
      merge("scpp/", ScppAccuracy(cached, items));
      merge("tot/", TotAccuracy(cached, items));
    } else {
      merge("sc/", SugarCrepeAccuracy(cached, items));
      for (const auto& item : items) {
        images.push_back(cached.EmbedImage(item.image));
        texts.push_back(cached.EmbedText(item.positives[0]));
      }
    }
  }
  const int64_t n = static_cast<int64_t>(images.size());
  if (n > 0) {
    const int64_t k = run.recall_k;
    if (k > n) {
      throw ConfigError("eval.recall_k " + std::to_string(k) + " exceeds the corpus of " +
                        std::to_string(n));
    }
    report.recalls.push_back({"recall@" + std::to_string(k) + "_image_to_text", n,
                              RecallAtK(images, texts, k, RetrievalDirection::kImageToText)});
    report.recalls.push_back({"recall@" + std::to_string(k) + "_text_to_image", n,
                              RecallAtK(images, texts, k, RetrievalDirection::kTextToImage)});
  }
  fs::path report_path = OutDir(a.out);
  if (report_path.extension() != ".csv") {
    EnsureDir(report_path);
    report_path /= "eval.csv";
  } else if (report_path.has_parent_path()) {
    EnsureDir(report_path.parent_path());
  }
  WriteEvalReport(report_path, report);
  out << FormatEvalSummary(report);
  return kExitOk;
}

struct GradcheckArgs {
  std::string config;
  uint64_t seed = 0;
  int64_t coords = 24;
  bool corrupt = false;
};

int CmdGradcheck(const GradcheckArgs& a, std::ostream& out) {
  ModelConfig model = GradcheckModelConfig();
  if (!a.config.empty()) {
    const Json json = [&] {
      std::ifstream in(a.config);
      if (!in) throw IoError("cannot read config " + a.config);
      try {
        return Json::parse(in);
      } catch (const Json::exception& e) {
        throw ConfigError(a.config + ": " + e.what());
      }
    }();
    RunConfig::FromJson(json);
    if (json.contains("model")) {
      Json merged = model.ToJson();
      merged.update(json.at("model"));
      model = ModelConfig::FromJson(merged);
      if (model.vocab_size == 0) model.vocab_size = GradcheckModelConfig().vocab_size;
    }
  }
  testing::SetCorruptMatMulBackward(a.corrupt);
  GradcheckReport report;
  try {
    report = RunGradcheck(model, a.seed, a.coords);
  } catch (...) {
    testing::SetCorruptMatMulBackward(false);
    throw;
  }
  testing::SetCorruptMatMulBackward(false);
  for (const auto& e : report.entries) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), "%-12s max_rel_err %.3e  coords %lld  worst %s[%lld]\n",
                  e.loss.c_str(), e.result.max_rel_error,
                  static_cast<long long>(e.result.coords_checked), e.result.worst_tensor.c_str(),
                  static_cast<long long>(e.result.worst_index));
    out << buf;
  }
  if (report.passed) {
    out << "PASS (tolerance " << kGradcheckTolerance << ")\n";
    return kExitOk;
  }
  for (const auto& e : report.entries) {
    if (e.result.max_rel_error > kGradcheckTolerance) {
      out << "FAIL " << e.loss << ": parameter " << e.result.worst_tensor << " index "
          << e.result.worst_index << " analytic " << e.result.worst_analytic << " numeric "
          << e.result.worst_numeric << '\n';
    }
  }
  return kExitCheckFailed;
}

struct AttnDiffArgs {
  std::string checkpoint_a, checkpoint_b, image, caption, out, lexicon;
};

int CmdAttnDiff(const AttnDiffArgs& a, std::ostream& out) {
  auto load = [](const std::string& path) {
    try {
      return ReadCheckpoint(path);
    } catch (const IoError& e) {
      throw CheckpointError(e.what());
    }
  };
  const Checkpoint ca = load(a.checkpoint_a);
  const Checkpoint cb = load(a.checkpoint_b);
  const ModelParams pa = ParamsFromCheckpoint(ca);
  const ModelParams pb = ParamsFromCheckpoint(cb);
  if (pa.config.ToJson() != pb.config.ToJson()) {
    throw CheckpointError("checkpoints have different model configs (" +
                          HashHex(ConfigHash(pa.config.ToJson())) + " vs " +
                          HashHex(ConfigHash(pb.config.ToJson())) + ")");
  }
  const PosLexicon lex = a.lexicon.empty() ? PosLexicon::Default() : PosLexicon::Load(a.lexicon);
  const Image image = ReadPpm(a.image);
  const AttentionMap map = AttentionDifference(pa, VocabFromCheckpoint(ca), pb,
                                               VocabFromCheckpoint(cb), image, a.caption, lex);
  fs::path prefix = OutDir(a.out);
  if (fs::is_directory(prefix) || prefix.filename().empty()) prefix /= "attn_diff";
  WriteAttentionMap(prefix, map);
  out << "wrote " << prefix.string() << ".csv (" << map.rows << "x" << map.cols << ")\n";
  return kExitOk;
}

}  // namespace

// ---------------------------------------------------------------------------
// RunConfig.

Json RunConfig::ToJson() const {
  Json j{{"data", data.ToJson()},
         {"model", model.ToJson()},
         {"train", train.ToJson()},
         {"eval", {{"recall_k", recall_k}}}};
  if (lexicon) j["lexicon"] = lexicon->string();
  return j;
}

RunConfig RunConfig::FromJson(const Json& json) {
  if (!json.is_object()) throw ConfigError("run config must be a JSON object");
  RejectUnknownKeys(json, {"data", "model", "train", "eval", "lexicon"}, "config");
  RunConfig c;
  if (json.contains("data")) c.data = DataConfig::FromJson(json.at("data"));
  if (json.contains("model")) c.model = ModelConfig::FromJson(json.at("model"));
  if (json.contains("train")) c.train = TrainConfig::FromJson(json.at("train"));
  if (json.contains("eval")) {
    const Json& e = json.at("eval");
    RejectUnknownKeys(e, {"recall_k"}, "eval");
    try {
      if (e.contains("recall_k")) c.recall_k = e.at("recall_k").get<int64_t>();
    } catch (const Json::exception& ex) {
      throw ConfigError(std::string("eval: ") + ex.what());
    }
    if (c.recall_k < 1) throw ConfigError("eval.recall_k must be at least 1");
  }
  if (json.contains("lexicon")) {
    if (!json.at("lexicon").is_string()) throw ConfigError("lexicon must be a path string");
    c.lexicon = json.at("lexicon").get<std::string>();
  }
  c.data.Validate();
  c.train.Validate();
  return c;
}

RunConfig RunConfig::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  Json json;
  try {
    json = Json::parse(in);
  } catch (const Json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  RunConfig c = FromJson(json);
  if (c.lexicon && c.lexicon->is_relative()) {
    c.lexicon = fs::absolute(path).parent_path() / *c.lexicon;
  }
  if (c.lexicon) c.lexicon = fs::absolute(*c.lexicon).lexically_normal();
  return c;
}

// ---------------------------------------------------------------------------
// Gradient check.

ModelConfig GradcheckModelConfig() {
  ModelConfig m;
  m.image_size = 16;
  m.patch_size = 8;  // M = 4
  m.d_enc = 32;
  m.d_joint = 16;
  m.layers = 1;
  m.heads = 2;
  m.mlp_ratio = 2;
  m.vocab_size = 12;
  m.max_len = 8;
  return m;
}

GradcheckReport RunGradcheck(const ModelConfig& model, uint64_t seed,
                             int64_t coords_per_tensor) {
  model.Validate();
  Rng rng(seed);
  ModelParams params = ModelParams::Init(model, seed);
  // Nonzero biases and non-unit gains so that every path carries signal.
  for (auto& nt : params.Named()) {
    if (nt.name.rfind("loss.", 0) == 0) continue;
    for (double& v : nt.tensor.mutable_data()) v += 0.1 * rng.Normal();
  }
  std::vector<Image> images(3);
  for (auto& img : images) {
    img = Image{model.image_size, model.image_size,
                std::vector<double>(model.image_size * model.image_size * 3)};
    for (double& v : img.pixels) v = rng.Uniform();
  }
  const int64_t lens[3] = {std::min<int64_t>(6, model.max_len),
                           std::min<int64_t>(5, model.max_len),
                           std::min<int64_t>(4, model.max_len)};
  Batch batch;
  for (int i = 0; i < 3; ++i) {
    batch.images.push_back(&images[i]);
    std::vector<int64_t> ids(lens[i]);
    for (auto& id : ids) id = 1 + rng.UniformInt(model.vocab_size - 1);
    batch.captions.push_back(ids);
  }
  // K = 4: two concepts in the first caption, one in each other.
  batch.concepts = {{{0, 2}, {3, lens[0]}}, {{1, 3}}, {{0, lens[2]}}};

  GradCheckOptions options;
  options.step = 1e-5;
  options.max_coords_per_tensor = coords_per_tensor;
  options.seed = seed;
  const auto named = params.Named();
  const LossWeights weights;
  auto run = [&](const char* name, auto pick) {
    auto f = [&](Tape* tape) { return pick(tape); };
    return GradcheckReport::Entry{name, FiniteDiffCheck(f, named, options)};
  };
  GradcheckReport report;
  report.entries.push_back(run("contrastive", [&](Tape* t) {
    return ComputeBatchLosses(t, params, batch, AblationMode::kContrastiveOnly, weights)
        .contrastive;
  }));
  report.entries.push_back(run("npc", [&](Tape* t) {
    return ComputeBatchLosses(t, params, batch, AblationMode::kPlusNpc, weights).npc->value;
  }));
  report.entries.push_back(run("xac", [&](Tape* t) {
    return ComputeBatchLosses(t, params, batch, AblationMode::kFull, weights).xac->value;
  }));
  report.entries.push_back(run("total", [&](Tape* t) {
    return ComputeBatchLosses(t, params, batch, AblationMode::kFull, weights).total;
  }));
  report.passed = true;
  for (const auto& e : report.entries) {
    report.passed = report.passed && e.result.max_rel_error <= kGradcheckTolerance;
  }
  return report;
}

// ---------------------------------------------------------------------------
// Entry point.

int RunCli(const std::vector<std::string>& args, std::istream& in, std::ostream& out,
           std::ostream& err) {
  CLI::App app{"Concept-centric contrastive vision-language training", "c2l"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic dataset");
  gen_cmd->add_option("--config", gen.config, "Run config JSON");
  gen_cmd->add_option("--out", gen.out, "Output directory");
  gen_cmd->add_option("--seed", gen.seed, "Generation seed");
  gen_cmd->add_option("--n", gen.n, "Training items")->check(CLI::NonNegativeNumber);
  gen_cmd->add_flag("--benchmark", gen.benchmark, "Also write the hard-negative suites");

  std::string chunk_lexicon;
  auto* chunk_cmd = app.add_subcommand("chunk", "Print concept spans of captions on stdin");
  chunk_cmd->add_option("--lexicon", chunk_lexicon, "word<TAB>TAG lexicon file");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train a model");
  train_cmd->add_option("--config", train.config, "Run config JSON");
  train_cmd->add_option("--data", train.data, "Dataset file or directory")->required();
  train_cmd->add_option("--out", train.out, "Output directory");
  train_cmd->add_option("--ablation", train.ablation,
                        "contrastive_only, plus_npc (npc) or full (xac)");
  train_cmd->add_option("--seed", train.seed, "Overrides train.seed");
  train_cmd->add_option("--resume", train.resume, "Checkpoint to continue from");

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a benchmark");
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--benchmark", eval.benchmark, "Benchmark file or directory")
      ->required();
  eval_cmd->add_option("--out", eval.out, "Output directory or .csv path");
  eval_cmd->add_option("--config", eval.config, "Run config to check the checkpoint against");
  eval_cmd->add_option("--seed", eval.seed, "Recorded in the report");

  GradcheckArgs grad;
  auto* grad_cmd = app.add_subcommand("gradcheck", "Finite-difference check of all losses");
  grad_cmd->add_option("--config", grad.config, "Run config JSON (model section)");
  grad_cmd->add_option("--seed", grad.seed, "Model and batch seed");
  grad_cmd->add_option("--coords", grad.coords, "Coordinates per tensor (0 = all)")
      ->check(CLI::NonNegativeNumber);
  grad_cmd->add_flag("--corrupt-backward-for-testing", grad.corrupt)->group("");

  AttnDiffArgs attn;
  auto* attn_cmd = app.add_subcommand("attn-diff", "Cross-attention difference map");
  attn_cmd->add_option("--checkpoint-a", attn.checkpoint_a)->required();
  attn_cmd->add_option("--checkpoint-b", attn.checkpoint_b)->required();
  attn_cmd->add_option("--image", attn.image, "PPM image")->required();
  attn_cmd->add_option("--caption", attn.caption)->required();
  attn_cmd->add_option("--out", attn.out, "Output prefix or directory");
  attn_cmd->add_option("--lexicon", attn.lexicon);

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  if (!reversed.empty()) reversed.pop_back();  // program name
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*gen_cmd) return CmdGenData(gen, out);
    if (*chunk_cmd) return CmdChunk(chunk_lexicon, in, out);
    if (*train_cmd) return CmdTrain(train, out, err);
    if (*eval_cmd) return CmdEval(eval, out);
    if (*grad_cmd) return CmdGradcheck(grad, out);
    if (*attn_cmd) return CmdAttnDiff(attn, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << '\n';
    return kExitIo;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitIo;
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const CheckpointError& e) {
    err << "checkpoint error: " << e.what() << '\n';
    return kExitCheckpoint;
  } catch (const ContractError& e) {
    err << "error: " << e.what() << '\n';
    return *attn_cmd ? kExitCheckpoint : kExitUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace c2l
