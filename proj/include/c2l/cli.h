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

// The `c2l` command line: gen-data, chunk, train, eval, gradcheck and
// attn-diff.
//
// Exit codes: 0 ok, 1 check failure, 2 usage or config, 3 I/O, 4 numeric,
// 5 checkpoint mismatch. C2L_OUT_DIR, when set, replaces every --out.

#ifndef C2L_CLI_H_
#define C2L_CLI_H_

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "c2l/data.h"
#include "c2l/gradcheck.h"
#include "c2l/json.h"
#include "c2l/model.h"
#include "c2l/train.h"

namespace c2l {

enum ExitCode : int {
  kExitOk = 0,
  kExitCheckFailed = 1,
  kExitUsage = 2,
  kExitIo = 3,
  kExitNumeric = 4,
  kExitCheckpoint = 5,
};

// One JSON document: {"data": ..., "model": ..., "train": ..., "eval": ...,
// "lexicon": path}. Every section is optional and unknown keys are rejected.
struct RunConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  int64_t recall_k = 5;
  std::optional<std::filesystem::path> lexicon;

  Json ToJson() const;
  static RunConfig FromJson(const Json& json);
  // Relative lexicon paths resolve against the config file's directory.
  // Throws ConfigError, or IoError when the file is unreadable.
  static RunConfig Load(const std::filesystem::path& path);
};

struct GradcheckReport {
  struct Entry {
    std::string loss;
    GradCheckResult result;
  };
  std::vector<Entry> entries;  // contrastive, npc, xac, total
  bool passed = false;
};

inline constexpr double kGradcheckTolerance = 1e-4;

// Finite-difference check of every loss on a random model with d_enc 32,
// 4 patches, 3 captions and 4 concepts. `model` overrides other sizes.
GradcheckReport RunGradcheck(const ModelConfig& model, uint64_t seed,
                             int64_t coords_per_tensor);
// The model used by RunGradcheck when no config is given.
ModelConfig GradcheckModelConfig();

// Runs one command line. `argv[0]` is the program name.
int RunCli(const std::vector<std::string>& args, std::istream& in,
           std::ostream& out, std::ostream& err);

}  // namespace c2l

#endif  // C2L_CLI_H_
