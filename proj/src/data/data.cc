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

#include "c2l/data.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include "c2l/errors.h"

namespace c2l {
namespace {

struct Rgb {
  int r, g, b;
};

const std::map<std::string, Rgb, std::less<>>& Palette() {
  static const auto* palette = new std::map<std::string, Rgb, std::less<>>{
      {"red", {220, 20, 20}},     {"green", {0, 150, 0}},
      {"blue", {20, 40, 230}},    {"yellow", {240, 210, 0}},
      {"purple", {130, 0, 180}},  {"orange", {255, 128, 0}},
      {"cyan", {0, 200, 210}},    {"magenta", {220, 0, 160}},
      {"gray", {128, 128, 128}},  {"brown", {120, 70, 20}},
      {"pink", {255, 140, 190}},  {"black", {0, 0, 0}},
  };
  return *palette;
}

constexpr std::array<std::string_view, 4> kRelationNames = {"left_of", "right_of",
                                                            "above", "below"};
constexpr std::array<std::string_view, 7> kNegativeNames = {
    "replace_object", "replace_attribute", "replace_relation", "swap_object",
    "swap_attribute", "add_object",        "add_attribute"};

const char* const kStructureWords[] = {"a",  "the",   "is",    "to",  "left",
                                       "right", "of", "above", "below", "and"};

std::vector<std::string> RelationWords(Relation r) {
  switch (r) {
    case Relation::kLeftOf:
      return {"to", "the", "left", "of"};
    case Relation::kRightOf:
      return {"to", "the", "right", "of"};
    case Relation::kAbove:
      return {"above"};
    case Relation::kBelow:
      return {"below"};
  }
  return {};
}

// Objects consumed by each template's fixed part.
int TemplateArity(int template_id) {
  switch (template_id) {
    case 0:
    case 1:
      return 2;
    case 2:
      return 1;
    case 3:
      return 3;
  }
  throw ContractError("unknown template id " + std::to_string(template_id));
}

template <typename T>
std::vector<T> Without(const std::vector<T>& all, const std::set<T>& used) {
  std::vector<T> out;
  for (const auto& x : all) {
    if (!used.count(x)) out.push_back(x);
  }
  return out;
}

std::vector<std::string> Words(const CaptionPlan& plan) {
  return Tokenize(Realize(plan).text);
}

std::string Join(const std::vector<std::string>& words) {
  std::string out;
  for (const auto& w : words) {
    if (!out.empty()) out += ' ';
    out += w;
  }
  return out;
}

std::string PaddedId(std::string_view prefix, int64_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%06lld", static_cast<long long>(i));
  return std::string(prefix) + buf;
}

uint64_t KindStream(NegativeKind kind) { return 1000 + static_cast<uint64_t>(kind); }

std::ofstream OpenOut(const std::filesystem::path& path, bool binary) {
  std::error_code ec;
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
  std::ofstream out(path, binary ? std::ios::binary | std::ios::trunc : std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  return out;
}

}  // namespace

std::string_view RelationName(Relation r) { return kRelationNames[static_cast<int>(r)]; }

Relation ParseRelation(std::string_view name) {
  for (size_t i = 0; i < kRelationNames.size(); ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  throw ParseError("unknown relation '" + std::string(name) + "'");
}

Relation InvertRelation(Relation r) {
  switch (r) {
    case Relation::kLeftOf:
      return Relation::kRightOf;
    case Relation::kRightOf:
      return Relation::kLeftOf;
    case Relation::kAbove:
      return Relation::kBelow;
    case Relation::kBelow:
      return Relation::kAbove;
  }
  return r;
}

const std::vector<std::string>& KnownShapes() {
  static const auto* shapes = new std::vector<std::string>{
      "circle", "square", "triangle", "diamond", "cross", "ring", "star"};
  return *shapes;
}

const std::vector<std::string>& KnownColors() {
  static const auto* colors = [] {
    auto* v = new std::vector<std::string>;
    for (const auto& [name, rgb] : Palette()) v->push_back(name);
    return v;
  }();
  return *colors;
}

// ---------------------------------------------------------------------------
// Config.

void DataConfig::Validate() const {
  if (grid < 1 || image_size < 1 || image_size % grid != 0) {
    throw ConfigError("data.image_size must be a positive multiple of data.grid");
  }
  if (min_objects < 1 || max_objects > 3 || min_objects > max_objects) {
    throw ConfigError("data object counts must satisfy 1 <= min_objects <= max_objects <= 3");
  }
  if (max_objects > grid * grid) throw ConfigError("data.grid has fewer cells than objects");
  if (max_objects >= 2 && grid < 2) throw ConfigError("relations need data.grid >= 2");
  if (static_cast<int64_t>(shapes.size()) < max_objects) {
    throw ConfigError("shape vocabulary of size " + std::to_string(shapes.size()) +
                      " cannot fill " + std::to_string(max_objects) + " distinct objects");
  }
  if (static_cast<int64_t>(colors.size()) < max_objects) {
    throw ConfigError("color vocabulary of size " + std::to_string(colors.size()) +
                      " cannot fill " + std::to_string(max_objects) + " distinct objects");
  }
  if (benchmark_items < 0) throw ConfigError("data.benchmark_items must be non-negative");
  const PosLexicon lex = PosLexicon::Default();
  std::set<std::string> seen;
  for (const auto& s : shapes) {
    if (std::find(KnownShapes().begin(), KnownShapes().end(), s) == KnownShapes().end() ||
        lex.Lookup(s) != PosTag::kNoun) {
      throw ConfigError("unknown shape '" + s + "'");
    }
    if (!seen.insert(s).second) throw ConfigError("duplicate shape '" + s + "'");
  }
  for (const auto& c : colors) {
    if (!Palette().count(c) || lex.Lookup(c) != PosTag::kAdj) {
      throw ConfigError("unknown color '" + c + "'");
    }
    if (!seen.insert(c).second) throw ConfigError("duplicate color '" + c + "'");
  }
}

Json DataConfig::ToJson() const {
  return Json{{"image_size", image_size},   {"grid", grid},
              {"shapes", shapes},           {"colors", colors},
              {"min_objects", min_objects}, {"max_objects", max_objects},
              {"benchmark_items", benchmark_items}};
}

DataConfig DataConfig::FromJson(const Json& json) {
  RejectUnknownKeys(json,
                    {"image_size", "grid", "shapes", "colors", "min_objects",
                     "max_objects", "benchmark_items"},
                    "data");
  DataConfig c;
  try {
    auto get = [&](const char* key, auto& field) {
      if (json.contains(key)) json.at(key).get_to(field);
    };
    get("image_size", c.image_size);
    get("grid", c.grid);
    get("shapes", c.shapes);
    get("colors", c.colors);
    get("min_objects", c.min_objects);
    get("max_objects", c.max_objects);
    get("benchmark_items", c.benchmark_items);
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("data: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Scenes.

Json SceneSpec::ToJson() const {
  Json objs = Json::array();
  for (const auto& o : objects) {
    objs.push_back({{"shape", o.shape}, {"color", o.color}, {"row", o.row}, {"col", o.col}});
  }
  Json j{{"objects", objs}};
  if (relation) j["relation"] = RelationName(*relation);
  return j;
}

SceneSpec SceneSpec::FromJson(const Json& json) {
  SceneSpec s;
  try {
    for (const auto& o : json.at("objects")) {
      s.objects.push_back({o.at("shape").get<std::string>(), o.at("color").get<std::string>(),
                           o.at("row").get<int64_t>(), o.at("col").get<int64_t>()});
    }
    if (json.contains("relation")) {
      s.relation = ParseRelation(json.at("relation").get<std::string>());
    }
  } catch (const Json::exception& e) {
    throw ParseError(std::string("scene: ") + e.what());
  }
  return s;
}

SceneSpec GenScene(Rng& rng, const DataConfig& config) {
  config.Validate();
  const int64_t n = config.min_objects + rng.UniformInt(config.max_objects - config.min_objects + 1);
  const auto shape_order = rng.Permutation(static_cast<int64_t>(config.shapes.size()));
  const auto color_order = rng.Permutation(static_cast<int64_t>(config.colors.size()));
  SceneSpec scene;
  for (int64_t i = 0; i < n; ++i) {
    scene.objects.push_back({config.shapes[shape_order[i]], config.colors[color_order[i]], 0, 0});
  }
  const int64_t g = config.grid;
  std::set<std::pair<int64_t, int64_t>> used;
  if (n >= 2) {
    const auto rel = static_cast<Relation>(rng.UniformInt(4));
    scene.relation = rel;
    const int64_t line = rng.UniformInt(g);
    int64_t a = rng.UniformInt(g), b = rng.UniformInt(g - 1);
    if (b >= a) ++b;
    const int64_t lo = std::min(a, b), hi = std::max(a, b);
    auto& o0 = scene.objects[0];
    auto& o1 = scene.objects[1];
    switch (rel) {
      case Relation::kLeftOf:
        o0.row = o1.row = line, o0.col = lo, o1.col = hi;
        break;
      case Relation::kRightOf:
        o0.row = o1.row = line, o0.col = hi, o1.col = lo;
        break;
      case Relation::kAbove:
        o0.col = o1.col = line, o0.row = lo, o1.row = hi;
        break;
      case Relation::kBelow:
        o0.col = o1.col = line, o0.row = hi, o1.row = lo;
        break;
    }
    used = {{o0.row, o0.col}, {o1.row, o1.col}};
  }
  for (int64_t i = n >= 2 ? 2 : 0; i < n; ++i) {
    std::vector<std::pair<int64_t, int64_t>> free;
    for (int64_t r = 0; r < g; ++r) {
      for (int64_t c = 0; c < g; ++c) {
        if (!used.count({r, c})) free.push_back({r, c});
      }
    }
    const auto cell = free[rng.UniformInt(static_cast<int64_t>(free.size()))];
    scene.objects[i].row = cell.first;
    scene.objects[i].col = cell.second;
    used.insert(cell);
  }
  return scene;
}

bool GlyphCovers(const SceneObject& object, const DataConfig& config, int64_t y,
                 int64_t x) {
  const double cell = static_cast<double>(config.cell_size());
  const double u = ((x - object.col * cell) + 0.5) / cell * 2.0 - 1.0;
  const double v = ((y - object.row * cell) + 0.5) / cell * 2.0 - 1.0;
  if (std::abs(u) > 1.0 || std::abs(v) > 1.0) return false;
  const double r = std::sqrt(u * u + v * v);
  const std::string& s = object.shape;
  if (s == "circle") return r <= 0.8;
  if (s == "square") return std::abs(u) <= 0.7 && std::abs(v) <= 0.7;
  if (s == "triangle") return v >= -0.8 && v <= 0.8 && std::abs(u) <= (v + 0.8) / 1.6 * 0.85;
  if (s == "diamond") return std::abs(u) + std::abs(v) <= 0.85;
  if (s == "cross") {
    return (std::abs(u) <= 0.25 && std::abs(v) <= 0.8) ||
           (std::abs(v) <= 0.25 && std::abs(u) <= 0.8);
  }
  if (s == "ring") return r >= 0.45 && r <= 0.85;
  if (s == "star") return std::sqrt(std::abs(u)) + std::sqrt(std::abs(v)) <= std::sqrt(0.9);
  throw ContractError("no glyph for shape '" + s + "'");
}

Image Render(const SceneSpec& scene, const DataConfig& config) {
  const int64_t n = config.image_size;
  Image img{n, n, std::vector<double>(n * n * 3, 1.0)};
  const int64_t cell = config.cell_size();
  for (const auto& o : scene.objects) {
    auto it = Palette().find(o.color);
    if (it == Palette().end()) throw ContractError("no palette entry for '" + o.color + "'");
    const double rgb[3] = {it->second.r / 255.0, it->second.g / 255.0, it->second.b / 255.0};
    for (int64_t y = o.row * cell; y < (o.row + 1) * cell; ++y) {
      for (int64_t x = o.col * cell; x < (o.col + 1) * cell; ++x) {
        if (!GlyphCovers(o, config, y, x)) continue;
        for (int c = 0; c < 3; ++c) img.pixels[(y * n + x) * 3 + c] = rgb[c];
      }
    }
  }
  return img;
}

// ---------------------------------------------------------------------------
// Captions.

CaptionPlan PlanCaption(const SceneSpec& scene, int template_id) {
  const int arity = TemplateArity(template_id);
  const bool relational = arity >= 2;
  if (static_cast<int>(scene.objects.size()) != arity ||
      relational != scene.relation.has_value()) {
    throw ContractError("template " + std::to_string(template_id) + " does not fit a scene with " +
                        std::to_string(scene.objects.size()) + " objects");
  }
  CaptionPlan plan;
  plan.template_id = template_id;
  plan.relation = scene.relation;
  for (const auto& o : scene.objects) plan.mentions.push_back({o.color, o.shape});
  return plan;
}

RealizedCaption Realize(const CaptionPlan& plan) {
  const int arity = TemplateArity(plan.template_id);
  if (static_cast<int>(plan.mentions.size()) < arity) {
    throw ContractError("caption plan has fewer mentions than its template");
  }
  if ((arity >= 2) != plan.relation.has_value()) {
    throw ContractError("caption plan relation does not fit its template");
  }
  std::vector<std::string> words;
  RealizedCaption out;
  auto mention = [&](const Mention& m, const char* det) {
    const int64_t start = static_cast<int64_t>(words.size());
    words.push_back(det);
    if (m.color) words.push_back(*m.color);
    words.push_back(m.shape);
    out.concepts.push_back({start, static_cast<int64_t>(words.size())});
  };
  auto relation = [&] {
    for (auto& w : RelationWords(*plan.relation)) words.push_back(w);
  };
  switch (plan.template_id) {
    case 0:
    case 3:
      mention(plan.mentions[0], "a");
      relation();
      mention(plan.mentions[1], "a");
      break;
    case 1:
      mention(plan.mentions[0], "the");
      words.push_back("is");
      relation();
      mention(plan.mentions[1], "the");
      break;
    case 2:
      mention(plan.mentions[0], "a");
      break;
  }
  const int fixed = plan.template_id == 3 ? 2 : arity;
  for (size_t i = fixed; i < plan.mentions.size(); ++i) {
    words.push_back("and");
    mention(plan.mentions[i], "a");
  }
  out.text = Join(words);
  const auto chunked = ExtractConcepts(out.text, PosLexicon::Default());
  if (chunked != out.concepts) {
    throw OracleError("template spans disagree with the chunker for '" + out.text + "'");
  }
  return out;
}

int ChooseTemplate(Rng& rng, const SceneSpec& scene) {
  switch (scene.objects.size()) {
    case 1:
      return 2;
    case 2:
      return static_cast<int>(rng.UniformInt(2));
    case 3:
      return 3;
  }
  throw ContractError("scene must have 1 to 3 objects");
}

CaptionRecord MakeCaption(const SceneSpec& scene, int template_id, std::string image_id) {
  RealizedCaption r = Realize(PlanCaption(scene, template_id));
  return {std::move(image_id), r.text, r.concepts, template_id};
}

// ---------------------------------------------------------------------------
// Hard negatives.

std::string_view NegativeKindName(NegativeKind kind) {
  return kNegativeNames[static_cast<int>(kind)];
}

NegativeKind ParseNegativeKind(std::string_view name) {
  for (size_t i = 0; i < kNegativeNames.size(); ++i) {
    if (kNegativeNames[i] == name) return static_cast<NegativeKind>(i);
  }
  throw ConfigError("unknown hard-negative kind '" + std::string(name) + "'");
}

bool IsSwapKind(NegativeKind kind) {
  return kind == NegativeKind::kSwapObject || kind == NegativeKind::kSwapAttribute;
}

std::optional<HardNegative> BuildHardNegative(const SceneSpec& scene,
                                              const CaptionPlan& plan,
                                              NegativeKind kind, Rng& rng,
                                              const DataConfig& config) {
  std::set<std::string> scene_shapes, scene_colors;
  for (const auto& o : scene.objects) {
    scene_shapes.insert(o.shape);
    scene_colors.insert(o.color);
  }
  const int64_t n = static_cast<int64_t>(plan.mentions.size());
  HardNegative out{plan, plan};
  auto& neg = out.negative.mentions;
  switch (kind) {
    case NegativeKind::kSwapAttribute:
      if (n < 2 || !neg[0].color || !neg[1].color || *neg[0].color == *neg[1].color) {
        return std::nullopt;
      }
      std::swap(neg[0].color, neg[1].color);
      break;
    case NegativeKind::kSwapObject:
      if (n < 2 || neg[0].shape == neg[1].shape) return std::nullopt;
      std::swap(neg[0].shape, neg[1].shape);
      break;
    case NegativeKind::kReplaceObject: {
      const auto pool = Without(config.shapes, scene_shapes);
      if (pool.empty()) return std::nullopt;
      const int64_t i = rng.UniformInt(n);
      neg[i].shape = pool[rng.UniformInt(static_cast<int64_t>(pool.size()))];
      break;
    }
    case NegativeKind::kReplaceAttribute: {
      const auto pool = Without(config.colors, scene_colors);
      if (pool.empty()) return std::nullopt;
      const int64_t i = rng.UniformInt(n);
      if (!neg[i].color) return std::nullopt;
      neg[i].color = pool[rng.UniformInt(static_cast<int64_t>(pool.size()))];
      break;
    }
    case NegativeKind::kReplaceRelation: {
      if (!plan.relation) return std::nullopt;
      int64_t r = rng.UniformInt(3);
      if (r >= static_cast<int64_t>(*plan.relation)) ++r;
      out.negative.relation = static_cast<Relation>(r);
      break;
    }
    case NegativeKind::kAddObject: {
      const auto pool = Without(config.shapes, scene_shapes);
      if (pool.empty()) return std::nullopt;
      const std::string shape = pool[rng.UniformInt(static_cast<int64_t>(pool.size()))];
      const std::string color =
          config.colors[rng.UniformInt(static_cast<int64_t>(config.colors.size()))];
      neg.push_back({color, shape});
      break;
    }
    case NegativeKind::kAddAttribute: {
      const auto pool = Without(config.colors, scene_colors);
      if (pool.empty()) return std::nullopt;
      const int64_t i = rng.UniformInt(n);
      out.positive.mentions[i].color.reset();
      neg[i].color = pool[rng.UniformInt(static_cast<int64_t>(pool.size()))];
      break;
    }
  }
  if (Words(out.positive) == Words(out.negative)) return std::nullopt;
  return out;
}

std::optional<CaptionPlan> BuildSecondPositive(const CaptionPlan& plan) {
  if (!plan.relation || plan.mentions.size() < 2) return std::nullopt;
  CaptionPlan second = plan;
  std::swap(second.mentions[0], second.mentions[1]);
  second.relation = InvertRelation(*plan.relation);
  return second;
}

Vocabulary WorldVocabulary(const DataConfig& config) {
  std::vector<std::string> words(std::begin(kStructureWords), std::end(kStructureWords));
  words.insert(words.end(), config.colors.begin(), config.colors.end());
  words.insert(words.end(), config.shapes.begin(), config.shapes.end());
  return Vocabulary(words);
}

// ---------------------------------------------------------------------------
// Records.

Json DatasetRecord::ToJson() const {
  Json j{{"image_id", image_id}, {"caption", caption}};
  if (concepts) {
    Json spans = Json::array();
    for (const auto& s : *concepts) spans.push_back({s.start, s.end});
    j["concepts"] = spans;
  }
  if (template_id) j["template_id"] = *template_id;
  if (!positives.empty()) j["positives"] = positives;
  if (negative) j["negative"] = *negative;
  if (task) j["task"] = *task;
  if (scene) j["scene"] = scene->ToJson();
  return j;
}

DatasetRecord DatasetRecord::FromJson(const Json& json) {
  if (!json.is_object()) throw ParseError("record is not a JSON object");
  static const std::set<std::string> kKnown = {"image_id", "caption",  "concepts", "template_id",
                                               "positives", "negative", "task",     "scene"};
  for (const auto& [key, value] : json.items()) {
    if (!kKnown.count(key)) throw ParseError("unknown field \"" + key + "\"");
  }
  auto require_string = [&](const char* field) {
    if (!json.contains(field)) throw ParseError(std::string("missing field \"") + field + "\"");
    if (!json.at(field).is_string()) {
      throw ParseError(std::string("field \"") + field + "\" must be a string");
    }
    return json.at(field).get<std::string>();
  };
  DatasetRecord r;
  r.image_id = require_string("image_id");
  r.caption = require_string("caption");
  if (json.contains("concepts")) {
    const Json& c = json.at("concepts");
    if (!c.is_array()) throw ParseError("field \"concepts\" must be an array");
    std::vector<ConceptSpan> spans;
    for (const auto& pair : c) {
      if (!pair.is_array() || pair.size() != 2 || !pair[0].is_number_integer() ||
          !pair[1].is_number_integer()) {
        throw ParseError("field \"concepts\" must hold [start, end] integer pairs");
      }
      spans.push_back({pair[0].get<int64_t>(), pair[1].get<int64_t>()});
    }
    if (!SpansValid(spans, static_cast<int64_t>(Tokenize(r.caption).size()))) {
      throw ParseError("field \"concepts\" holds invalid spans for the caption");
    }
    r.concepts = std::move(spans);
  }
  if (json.contains("template_id")) {
    if (!json.at("template_id").is_number_integer()) {
      throw ParseError("field \"template_id\" must be an integer");
    }
    r.template_id = json.at("template_id").get<int64_t>();
  }
  if (json.contains("positives")) {
    const Json& p = json.at("positives");
    if (!p.is_array()) throw ParseError("field \"positives\" must be an array");
    for (const auto& s : p) {
      if (!s.is_string()) throw ParseError("field \"positives\" must hold strings");
      r.positives.push_back(s.get<std::string>());
    }
  }
  if (json.contains("negative")) r.negative = require_string("negative");
  if (json.contains("task")) r.task = require_string("task");
  if (json.contains("scene")) r.scene = SceneSpec::FromJson(json.at("scene"));
  return r;
}

void WriteDataset(const std::filesystem::path& path,
                  const std::vector<DatasetRecord>& records) {
  std::ofstream out = OpenOut(path, true);
  for (const auto& r : records) out << r.ToJson().dump() << '\n';
  if (!out) throw IoError("failed writing " + path.string());
}

std::vector<DatasetRecord> ReadDataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read dataset " + path.string());
  std::vector<DatasetRecord> records;
  std::string line;
  int64_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      Json j;
      try {
        j = Json::parse(line);
      } catch (const Json::exception& e) {
        throw ParseError(std::string("malformed JSON: ") + e.what());
      }
      records.push_back(DatasetRecord::FromJson(j));
    } catch (const ParseError& e) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return records;
}

void WritePpm(const std::filesystem::path& path, const Image& image) {
  std::ofstream out = OpenOut(path, true);
  out << "P6\n" << image.width << ' ' << image.height << "\n255\n";
  std::string bytes(image.pixels.size(), '\0');
  for (size_t i = 0; i < image.pixels.size(); ++i) {
    const double v = std::clamp(image.pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("failed writing " + path.string());
}

Image ReadPpm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read image " + path.string());
  auto token = [&]() {
    std::string t;
    int c;
    while ((c = in.get()) != EOF) {
      if (c == '#') {
        while ((c = in.get()) != EOF && c != '\n') {
        }
        continue;
      }
      if (std::isspace(c)) {
        if (!t.empty()) break;
        continue;
      }
      t.push_back(static_cast<char>(c));
    }
    return t;
  };
  if (token() != "P6") throw ParseError(path.string() + ": not a binary PPM (P6)");
  Image img;
  try {
    img.width = std::stoll(token());
    img.height = std::stoll(token());
    if (std::stoll(token()) != 255) throw ParseError(path.string() + ": maxval must be 255");
  } catch (const std::logic_error&) {
    throw ParseError(path.string() + ": malformed PPM header");
  }
  if (img.width <= 0 || img.height <= 0) throw ParseError(path.string() + ": bad PPM size");
  std::string bytes(img.width * img.height * 3, '\0');
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw ParseError(path.string() + ": truncated PPM data");
  }
  img.pixels.resize(bytes.size());
  for (size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<unsigned char>(bytes[i]) / 255.0;
  }
  return img;
}

std::filesystem::path ImagePath(const std::filesystem::path& dataset_file,
                                const std::string& image_id) {
  return dataset_file.parent_path() / "images" / (image_id + ".ppm");
}

// ---------------------------------------------------------------------------
// Generation.

namespace {

struct BenchmarkDraw {
  DatasetRecord single;
  std::optional<DatasetRecord> pair;
  SceneSpec scene;
};

// Items drawn from attempts 0, 1, ... until `n` single-positive items exist.
std::vector<BenchmarkDraw> DrawBenchmark(const DataConfig& config, uint64_t seed,
                                         NegativeKind kind, int64_t n) {
  config.Validate();
  std::vector<BenchmarkDraw> draws;
  const std::string prefix = "bench_" + std::string(NegativeKindName(kind)) + "_";
  const int64_t max_attempts = 100 * std::max<int64_t>(n, 1);
  for (int64_t attempt = 0; static_cast<int64_t>(draws.size()) < n; ++attempt) {
    if (attempt >= max_attempts) {
      throw ConfigError("hard-negative kind " + std::string(NegativeKindName(kind)) +
                        " does not apply to scenes of this data config");
    }
    Rng rng(MixSeed(seed, KindStream(kind)), static_cast<uint64_t>(attempt));
    SceneSpec scene = GenScene(rng, config);
    const CaptionPlan plan = PlanCaption(scene, ChooseTemplate(rng, scene));
    auto hn = BuildHardNegative(scene, plan, kind, rng, config);
    if (!hn) continue;
    const RealizedCaption pos = Realize(hn->positive);
    const std::string neg = Realize(hn->negative).text;
    if (IsSwapKind(kind)) {
      auto a = Tokenize(pos.text), b = Tokenize(neg);
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      if (a != b) throw OracleError("swap negative changed the word multiset: " + neg);
    }
    BenchmarkDraw d;
    d.scene = scene;
    d.single.image_id = PaddedId(prefix, attempt);
    d.single.caption = pos.text;
    d.single.concepts = pos.concepts;
    d.single.template_id = hn->positive.template_id;
    d.single.positives = {pos.text};
    d.single.negative = neg;
    d.single.task = std::string(NegativeKindName(kind));
    d.single.scene = scene;
    if (auto second = BuildSecondPositive(hn->positive)) {
      const std::string p2 = Realize(*second).text;
      if (Tokenize(p2) != Tokenize(neg) && Tokenize(p2) != Tokenize(pos.text)) {
        d.pair = d.single;
        d.pair->positives.push_back(p2);
      }
    }
    draws.push_back(std::move(d));
  }
  return draws;
}

}  // namespace

std::vector<GeneratedItem> GenerateBenchmark(const DataConfig& config, uint64_t seed,
                                             NegativeKind kind, int64_t n,
                                             bool two_positives) {
  std::vector<GeneratedItem> items;
  for (auto& d : DrawBenchmark(config, seed, kind, n)) {
    if (!two_positives) {
      items.push_back({std::move(d.single), d.scene});
    } else if (d.pair) {
      items.push_back({std::move(*d.pair), d.scene});
    }
  }
  return items;
}

GenerateSummary GenerateDataset(const std::filesystem::path& out,
                                const DataConfig& config, uint64_t seed, int64_t n,
                                bool benchmark) {
  config.Validate();
  if (n < 0) throw ConfigError("item count must be non-negative");
  GenerateSummary summary;
  const auto train_file = out / "train.jsonl";
  std::vector<DatasetRecord> records;
  for (int64_t i = 0; i < n; ++i) {
    Rng rng(seed, static_cast<uint64_t>(i));
    SceneSpec scene = GenScene(rng, config);
    CaptionRecord cap = MakeCaption(scene, ChooseTemplate(rng, scene), PaddedId("train_", i));
    DatasetRecord r;
    r.image_id = cap.image_id;
    r.caption = cap.caption;
    r.concepts = cap.concepts;
    r.template_id = cap.template_id;
    r.scene = scene;
    WritePpm(ImagePath(train_file, r.image_id), Render(scene, config));
    records.push_back(std::move(r));
  }
  WriteDataset(train_file, records);
  summary.train_items = n;

  if (benchmark) {
    const auto dir = out / "benchmark";
    for (NegativeKind kind : kAllNegativeKinds) {
      std::vector<DatasetRecord> single, pairs;
      for (auto& d : DrawBenchmark(config, seed, kind, config.benchmark_items)) {
        WritePpm(ImagePath(dir / "x.jsonl", d.single.image_id), Render(d.scene, config));
        single.push_back(d.single);
        if (d.pair) pairs.push_back(*d.pair);
      }
      const std::string name(NegativeKindName(kind));
      WriteDataset(dir / ("sc_" + name + ".jsonl"), single);
      summary.benchmark_files.push_back({"sc_" + name, static_cast<int64_t>(single.size())});
      if (!pairs.empty()) {
        WriteDataset(dir / ("scpp_" + name + ".jsonl"), pairs);
        summary.benchmark_files.push_back({"scpp_" + name, static_cast<int64_t>(pairs.size())});
      }
    }
  }

  Json meta{{"data", config.ToJson()},
            {"config_hash", HashHex(ConfigHash(config.ToJson()))},
            {"seed", seed},
            {"n", n},
            {"benchmark", benchmark}};
  std::ofstream m = OpenOut(out / "meta.json", false);
  m << meta.dump(2) << '\n';
  if (!m) throw IoError("failed writing " + (out / "meta.json").string());
  return summary;
}

}  // namespace c2l
