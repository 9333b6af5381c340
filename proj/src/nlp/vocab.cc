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

#include "c2l/vocab.h"

#include "c2l/chunker.h"
#include "c2l/errors.h"

namespace c2l {

Vocabulary::Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

Vocabulary::Vocabulary(const std::vector<std::string>& words) {
  words_ = {"<pad>", "<unk>"};
  ids_ = {{"<pad>", kPad}, {"<unk>", kUnk}};
  for (const auto& w : words) {
    if (ids_.count(w)) continue;
    ids_.emplace(w, size());
    words_.push_back(w);
  }
}

int64_t Vocabulary::Id(std::string_view word) const {
  auto it = ids_.find(word);
  return it == ids_.end() ? kUnk : it->second;
}

std::vector<int64_t> Vocabulary::Encode(
    const std::vector<std::string>& tokens) const {
  std::vector<int64_t> ids;
  ids.reserve(tokens.size());
  for (const auto& t : tokens) ids.push_back(Id(t));
  return ids;
}

std::vector<int64_t> Vocabulary::EncodeCaption(std::string_view caption) const {
  return Encode(Tokenize(caption));
}

Json Vocabulary::ToJson() const {
  return Json(std::vector<std::string>(words_.begin() + 2, words_.end()));
}

Vocabulary Vocabulary::FromJson(const Json& json) {
  if (!json.is_array()) throw ConfigError("vocabulary must be a JSON array");
  std::vector<std::string> words;
  for (const auto& w : json) {
    if (!w.is_string()) throw ConfigError("vocabulary entries must be strings");
    words.push_back(w.get<std::string>());
  }
  return Vocabulary(words);
}

}  // namespace c2l
