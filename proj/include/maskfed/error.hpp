/*
 * Copyright 2026 The maskfed Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <stdexcept>
#include <string>

namespace maskfed {

// Violated precondition of a library call (shape mismatch, bad argument).
class ContractError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

// Invalid experiment or policy configuration. Carries the offending key path
// when one is known.
class ConfigError : public std::runtime_error {
public:
  explicit ConfigError(const std::string &msg, std::string key = {})
      : std::runtime_error(key.empty() ? msg : key + ": " + msg),
        key_(std::move(key)) {}
  const std::string &key() const noexcept { return key_; }

private:
  std::string key_;
};

// Malformed input file (wrong size, bad magic).
class FormatError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// Training diverged (non-finite loss).
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

} // namespace maskfed
