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

// Synthetic glyph scenes, templated captions and hard-negative benchmarks.
//
// A scene places 1 to 3 colored glyphs in distinct cells of a square grid.
// Captions come from a few fixed templates, so concept spans are known by
// construction; every caption is also run through the chunker and must
// produce the same spans.
//
// Templates (c = color, s = shape, R = relation phrase):
//   0  "a c1 s1 R a c2 s2"                  two objects
//   1  "the c1 s1 is R the c2 s2"           two objects
//   2  "a c s"                              one object
//   3  "a c1 s1 R a c2 s2 and a c3 s3"      three objects
// where R is "to the left of", "to the right of", "above" or "below".

#ifndef C2L_DATA_H_
#define C2L_DATA_H_

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "c2l/chunker.h"
#include "c2l/json.h"
#include "c2l/model.h"
#include "c2l/random.h"
#include "c2l/vocab.h"

namespace c2l {

// Relation of object 0 to object 1.
enum class Relation { kLeftOf, kRightOf, kAbove, kBelow };

std::string_view RelationName(Relation r);  // "left_of", ...
Relation ParseRelation(std::string_view name);
Relation InvertRelation(Relation r);

// Known glyph shapes and palette colors.
const std::vector<std::string>& KnownShapes();
const std::vector<std::string>& KnownColors();

struct DataConfig {
  int64_t image_size = 32;
  int64_t grid = 2;  // cells per side
  std::vector<std::string> shapes = {"circle", "square", "triangle",
                                     "diamond", "cross", "ring"};
  std::vector<std::string> colors = {"red", "green", "blue",
                                     "yellow", "purple", "orange"};
  int64_t min_objects = 2;
  int64_t max_objects = 2;
  // Items per hard-negative kind when writing a benchmark suite.
  int64_t benchmark_items = 1000;

  int64_t cell_size() const { return image_size / grid; }
  // Throws ConfigError.
  void Validate() const;
  Json ToJson() const;
  static DataConfig FromJson(const Json& json);
};

struct SceneObject {
  std::string shape;
  std::string color;
  int64_t row = 0;
  int64_t col = 0;
  bool operator==(const SceneObject&) const = default;
};

struct SceneSpec {
  std::vector<SceneObject> objects;
  std::optional<Relation> relation;  // between objects 0 and 1

  bool operator==(const SceneSpec&) const = default;
  Json ToJson() const;
  static SceneSpec FromJson(const Json& json);
};

// Uniform draw subject to: distinct cells, distinct shapes, distinct colors,
// relation consistent with the cells (same row for left/right, same column
// for above/below). Throws ConfigError.
SceneSpec GenScene(Rng& rng, const DataConfig& config);

// White background with each object drawn as a filled glyph centered in its
// cell. Channel values are multiples of 1/255.
Image Render(const SceneSpec& scene, const DataConfig& config);

// True when pixel (y, x) lies inside the glyph of `object`.
bool GlyphCovers(const SceneObject& object, const DataConfig& config, int64_t y,
                 int64_t x);

// One noun phrase of a caption. An absent color gives "a square".
struct Mention {
  std::optional<std::string> color;
  std::string shape;
  bool operator==(const Mention&) const = default;
};

// Structured caption: template, mentions in caption order and relation.
struct CaptionPlan {
  int template_id = 0;
  std::vector<Mention> mentions;
  std::optional<Relation> relation;
  bool operator==(const CaptionPlan&) const = default;
};

struct RealizedCaption {
  std::string text;
  std::vector<ConceptSpan> concepts;
};

// Throws ContractError when the template does not fit the scene.
CaptionPlan PlanCaption(const SceneSpec& scene, int template_id);
// Throws ContractError on a malformed plan and OracleError when the
// structural spans disagree with the chunker.
RealizedCaption Realize(const CaptionPlan& plan);
// A template compatible with the scene's object count.
int ChooseTemplate(Rng& rng, const SceneSpec& scene);

struct CaptionRecord {
  std::string image_id;
  std::string caption;
  std::vector<ConceptSpan> concepts;
  int template_id = 0;
};
CaptionRecord MakeCaption(const SceneSpec& scene, int template_id,
                          std::string image_id);

enum class NegativeKind {
  kReplaceObject,
  kReplaceAttribute,
  kReplaceRelation,
  kSwapObject,
  kSwapAttribute,
  kAddObject,
  kAddAttribute,
};
inline constexpr NegativeKind kAllNegativeKinds[] = {
    NegativeKind::kReplaceObject, NegativeKind::kReplaceAttribute,
    NegativeKind::kReplaceRelation, NegativeKind::kSwapObject,
    NegativeKind::kSwapAttribute, NegativeKind::kAddObject,
    NegativeKind::kAddAttribute};

std::string_view NegativeKindName(NegativeKind kind);  // "swap_attribute", ...
NegativeKind ParseNegativeKind(std::string_view name);
bool IsSwapKind(NegativeKind kind);

// A positive plan and a minimally edited false plan. For add_attribute the
// positive drops one color ("a square") and the negative inserts a color
// absent from the scene.
struct HardNegative {
  CaptionPlan positive;
  CaptionPlan negative;
};

// nullopt is the skip signal: the kind does not apply to this scene (swap
// needs two objects, replace_relation a relation, replace/add an unused
// vocabulary item).
std::optional<HardNegative> BuildHardNegative(const SceneSpec& scene,
                                              const CaptionPlan& plan,
                                              NegativeKind kind, Rng& rng,
                                              const DataConfig& config);

// Swaps the first two clauses and inverts the relation; nullopt without a
// relation.
std::optional<CaptionPlan> BuildSecondPositive(const CaptionPlan& plan);

// Every word any caption of this world can contain.
Vocabulary WorldVocabulary(const DataConfig& config);

// ---------------------------------------------------------------------------
// Records and files.

struct DatasetRecord {
  std::string image_id;
  std::string caption;
  std::optional<std::vector<ConceptSpan>> concepts;
  std::optional<int64_t> template_id;
  std::vector<std::string> positives;  // benchmark files only
  std::optional<std::string> negative;
  std::optional<std::string> task;
  std::optional<SceneSpec> scene;

  bool operator==(const DatasetRecord&) const = default;
  Json ToJson() const;
  // Throws ParseError naming a missing or mistyped field.
  static DatasetRecord FromJson(const Json& json);
};

// One JSON object per line. Throws IoError.
void WriteDataset(const std::filesystem::path& path,
                  const std::vector<DatasetRecord>& records);
// Throws IoError, or ParseError with the line number.
std::vector<DatasetRecord> ReadDataset(const std::filesystem::path& path);

// Binary PPM (P6, maxval 255); values are rounded to 8 bits.
void WritePpm(const std::filesystem::path& path, const Image& image);
Image ReadPpm(const std::filesystem::path& path);

// <dir of the record file>/images/<image_id>.ppm
std::filesystem::path ImagePath(const std::filesystem::path& dataset_file,
                                const std::string& image_id);

struct GenerateSummary {
  int64_t train_items = 0;
  // (file stem, item count) per written benchmark file.
  std::vector<std::pair<std::string, int64_t>> benchmark_files;
};

// Writes <out>/train.jsonl with images and <out>/meta.json; with
// `benchmark`, also <out>/benchmark/{sc,scpp}_<kind>.jsonl for every kind.
// Scene i of the training set draws from Rng(seed, i); benchmark items draw
// from streams derived from (seed, kind, i).
GenerateSummary GenerateDataset(const std::filesystem::path& out,
                                const DataConfig& config, uint64_t seed,
                                int64_t n, bool benchmark);

// Benchmark items of one kind without writing files. With `two_positives`
// only items with a constructible second positive are produced.
struct GeneratedItem {
  DatasetRecord record;
  SceneSpec scene;
};
std::vector<GeneratedItem> GenerateBenchmark(const DataConfig& config,
                                             uint64_t seed, NegativeKind kind,
                                             int64_t n, bool two_positives);

}  // namespace c2l

#endif  // C2L_DATA_H_
