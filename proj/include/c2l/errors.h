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

#ifndef C2L_ERRORS_H_
#define C2L_ERRORS_H_

#include <stdexcept>
#include <string>

namespace c2l {

// Error hierarchy. Every library failure is reported by throwing one of
// these; the CLI maps them onto process exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Tensor shapes that do not fit an operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A caller violated a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration values or unknown configuration keys.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed input file content.
class ParseError : public Error {
 public:
  using Error::Error;
};

// File system failures.
class IoError : public Error {
 public:
  using Error::Error;
};

// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Finite-difference oracle could not evaluate the function.
class OracleError : public Error {
 public:
  using Error::Error;
};

// Checkpoint is corrupt, truncated or incompatible with the expected config.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace c2l

#endif  // C2L_ERRORS_H_
