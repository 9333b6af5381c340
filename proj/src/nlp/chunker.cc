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

#include "c2l/chunker.h"

#include <array>
#include <cctype>
#include <fstream>
#include <sstream>

#include "c2l/errors.h"

namespace c2l {
namespace {

constexpr std::array<std::pair<PosTag, std::string_view>, 8> kTagNames = {{
    {PosTag::kDet, "DET"},
    {PosTag::kAdj, "ADJ"},
    {PosTag::kNoun, "NOUN"},
    {PosTag::kVerb, "VERB"},
    {PosTag::kAdp, "ADP"},
    {PosTag::kConj, "CONJ"},
    {PosTag::kNum, "NUM"},
    {PosTag::kOther, "OTHER"},
}};

struct LexiconGroup {
  PosTag tag;
  std::initializer_list<std::string_view> words;
};

const LexiconGroup kDefaultLexicon[] = {
    {PosTag::kDet,
     {"a", "an", "the", "this", "that", "these", "those", "some", "each",
      "every", "another", "its", "his", "her", "their", "my", "our", "your"}},
    {PosTag::kNum,
     {"one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
      "ten", "several", "many", "few"}},
    {PosTag::kAdj,
     {"red", "green", "blue", "yellow", "purple", "orange", "cyan", "magenta",
      "black", "white", "gray", "grey", "brown", "pink", "tall", "short",
      "small", "large", "big", "little", "tiny", "huge", "old", "new", "young",
      "long", "wide", "narrow", "bright", "dark", "light", "wooden", "round", "striped",
      "empty", "full", "open", "closed"}},
    {PosTag::kAdp,
     {"to", "of", "in", "on", "at", "by", "with", "near", "above", "below",
      "under", "over", "behind", "beside", "between", "from", "into", "onto",
      "inside", "outside", "across", "along", "around", "against", "for",
      "without", "through", "beneath", "underneath", "atop"}},
    {PosTag::kConj, {"and", "or", "but", "nor", "while", "whereas"}},
    {PosTag::kVerb,
     {"is", "are", "was", "were", "be", "been", "being", "has", "have", "had",
      "sits", "sit", "sitting", "stands", "stand", "standing", "lies", "lying",
      "holds", "holding", "shows", "showing", "looks", "looking", "appears",
      "placed", "located", "positioned"}},
    {PosTag::kOther,
     {"left", "right", "next", "there", "here", "not", "very", "also", "too",
      "it", "they", "he", "she", "we", "you", "i"}},
    {PosTag::kNoun,
     {"circle", "square", "triangle", "diamond", "cross", "ring", "star",
      "couch", "building", "chair", "table", "dog", "cat", "man", "woman"}},
};

bool IsTokenChar(unsigned char c) {
  return std::isalnum(c) || c >= 0x80;
}

}  // namespace

std::string_view PosTagName(PosTag tag) {
  for (const auto& [t, name] : kTagNames) {
    if (t == tag) return name;
  }
  return "OTHER";
}

std::optional<PosTag> ParsePosTag(std::string_view name) {
  for (const auto& [t, n] : kTagNames) {
    if (n == name) return t;
  }
  return std::nullopt;
}

PosLexicon PosLexicon::Default() {
  PosLexicon lex;
  for (const auto& group : kDefaultLexicon) {
    for (std::string_view w : group.words) lex.Set(std::string(w), group.tag);
  }
  return lex;
}

PosLexicon PosLexicon::Load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read lexicon " + path.string());
  PosLexicon lex;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected word<TAB>TAG");
    }
    std::string word = line.substr(0, tab);
    std::string tag_name = line.substr(tab + 1);
    while (!tag_name.empty() && (tag_name.back() == ' ' || tag_name.back() == '\t')) {
      tag_name.pop_back();
    }
    auto tag = ParsePosTag(tag_name);
    if (word.empty() || !tag) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": bad entry '" + line + "'");
    }
    for (char& c : word) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    lex.Set(std::move(word), *tag);
  }
  return lex;
}

void PosLexicon::Set(std::string word, PosTag tag) {
  entries_[std::move(word)] = tag;
}

PosTag PosLexicon::Lookup(std::string_view word) const {
  auto it = entries_.find(word);
  return it == entries_.end() ? default_tag_ : it->second;
}

std::string PosLexicon::ToText() const {
  std::ostringstream os;
  for (const auto& [word, tag] : entries_) {
    os << word << '\t' << PosTagName(tag) << '\n';
  }
  return os.str();
}

std::vector<std::string> Tokenize(std::string_view caption) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : caption) {
    const auto c = static_cast<unsigned char>(ch);
    if (IsTokenChar(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

std::vector<TaggedToken> Tag(const std::vector<std::string>& tokens,
                             const PosLexicon& lexicon) {
  std::vector<TaggedToken> tagged;
  tagged.reserve(tokens.size());
  for (const auto& t : tokens) tagged.push_back({t, lexicon.Lookup(t)});
  return tagged;
}

std::vector<ConceptSpan> ChunkNounPhrases(const std::vector<TaggedToken>& tagged) {
  std::vector<ConceptSpan> spans;
  const int64_t n = static_cast<int64_t>(tagged.size());
  auto is = [&](int64_t j, PosTag tag) { return j < n && tagged[j].pos == tag; };
  int64_t i = 0;
  while (i < n) {
    int64_t j = i;
    if (is(j, PosTag::kDet)) ++j;
    if (is(j, PosTag::kNum)) ++j;
    while (is(j, PosTag::kAdj)) ++j;
    const int64_t noun_start = j;
    while (is(j, PosTag::kNoun)) ++j;
    if (j > noun_start) {
      spans.push_back({i, j});
      i = j;
    } else {
      ++i;
    }
  }
  return spans;
}

std::vector<ConceptSpan> ExtractConcepts(std::string_view caption,
                                         const PosLexicon& lexicon) {
  return ChunkNounPhrases(Tag(Tokenize(caption), lexicon));
}

bool SpansValid(const std::vector<ConceptSpan>& spans, int64_t length) {
  int64_t prev_end = 0;
  for (const auto& s : spans) {
    if (s.start < prev_end || s.start >= s.end || s.end > length) return false;
    prev_end = s.end;
  }
  return true;
}

}  // namespace c2l
