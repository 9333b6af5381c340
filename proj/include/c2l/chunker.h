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

// Rule-based noun-phrase chunking.
//
// Captions are tokenized, tagged with a closed part-of-speech set from a
// lexicon, and scanned left to right for maximal matches of
//
//   DET? NUM? ADJ* NOUN+
//
// Matching is greedy with no backtracking, so chunking is linear time and
// fully deterministic.

#ifndef C2L_CHUNKER_H_
#define C2L_CHUNKER_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace c2l {

enum class PosTag { kDet, kAdj, kNoun, kVerb, kAdp, kConj, kNum, kOther };

std::string_view PosTagName(PosTag tag);
std::optional<PosTag> ParsePosTag(std::string_view name);

// Half-open token interval [start, end) naming one noun phrase.
struct ConceptSpan {
  int64_t start = 0;
  int64_t end = 0;
  int64_t size() const { return end - start; }
  bool operator==(const ConceptSpan&) const = default;
};

struct TaggedToken {
  std::string text;
  PosTag pos = PosTag::kOther;
};

// Word to tag map. Lookup is total: unknown words get the default tag.
class PosLexicon {
 public:
  explicit PosLexicon(PosTag default_tag = PosTag::kNoun)
      : default_tag_(default_tag) {}

  // Closed-class English words plus the synthetic scene vocabulary.
  static PosLexicon Default();
  // One `word<TAB>TAG` per line; `#` starts a comment. Throws IoError when
  // the file cannot be read and ParseError on malformed lines.
  static PosLexicon Load(const std::filesystem::path& path);

  void Set(std::string word, PosTag tag);
  PosTag Lookup(std::string_view word) const;
  PosTag default_tag() const { return default_tag_; }
  const std::map<std::string, PosTag, std::less<>>& entries() const {
    return entries_;
  }

  // Serialized in the Load() format, sorted by word.
  std::string ToText() const;

 private:
  std::map<std::string, PosTag, std::less<>> entries_;
  PosTag default_tag_;
};

// Lowercases and splits on whitespace and punctuation; punctuation is
// dropped.
std::vector<std::string> Tokenize(std::string_view caption);

std::vector<TaggedToken> Tag(const std::vector<std::string>& tokens,
                             const PosLexicon& lexicon);

std::vector<ConceptSpan> ChunkNounPhrases(const std::vector<TaggedToken>& tagged);

// Tokenize, tag and chunk.
std::vector<ConceptSpan> ExtractConcepts(std::string_view caption,
                                         const PosLexicon& lexicon);

// True when spans are sorted, disjoint, non-empty and inside [0, length).
bool SpansValid(const std::vector<ConceptSpan>& spans, int64_t length);

}  // namespace c2l

#endif  // C2L_CHUNKER_H_
