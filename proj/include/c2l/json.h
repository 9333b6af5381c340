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

#ifndef C2L_JSON_H_
#define C2L_JSON_H_

#include <cstdint>
#include <initializer_list>
#include <string>
#include <string_view>

#include "json.hpp"

namespace c2l {

// Objects keep keys sorted, so dump() is already canonical.
using Json = nlohmann::json;

uint64_t Fnv1a64(std::string_view bytes);
// Hash of the canonical (sorted-key, compact) serialization.
uint64_t ConfigHash(const Json& config);
std::string HashHex(uint64_t hash);

// Throws ConfigError naming the first key of `object` not in `allowed`, or
// when `object` is not a JSON object.
void RejectUnknownKeys(const Json& object,
                       std::initializer_list<std::string_view> allowed,
                       std::string_view context);

}  // namespace c2l

#endif  // C2L_JSON_H_
