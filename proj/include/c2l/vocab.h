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

#ifndef C2L_VOCAB_H_
#define C2L_VOCAB_H_

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "c2l/json.h"

namespace c2l {

// Closed word list for the text tower. Ids 0 and 1 are reserved for padding
// and out-of-vocabulary words.
class Vocabulary {
 public:
  static constexpr int64_t kPad = 0;
  static constexpr int64_t kUnk = 1;

  Vocabulary();
  // Duplicates are ignored; order of first occurrence is kept.
  explicit Vocabulary(const std::vector<std::string>& words);

  int64_t size() const { return static_cast<int64_t>(words_.size()); }
  int64_t Id(std::string_view word) const;
  const std::string& Word(int64_t id) const { return words_.at(id); }
  std::vector<int64_t> Encode(const std::vector<std::string>& tokens) const;
  // Tokenizes the caption first.
  std::vector<int64_t> EncodeCaption(std::string_view caption) const;

  // Word list without the reserved entries.
  Json ToJson() const;
  static Vocabulary FromJson(const Json& json);

  bool operator==(const Vocabulary& other) const { return words_ == other.words_; }

 private:
  std::vector<std::string> words_;
  std::map<std::string, int64_t, std::less<>> ids_;
};

}  // namespace c2l

#endif  // C2L_VOCAB_H_
