// Copyright 2026 The dparse Authors.
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

#pragma once

#include <stdexcept>
#include <string>

namespace dparse {

// Base for every error raised by the library. Commands map these onto exit
// codes: ConfigError is a usage problem (2), everything else is a runtime
// failure (1).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class FormatError : public Error {
 public:
  FormatError(const std::string& what, long line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  long line() const { return line_; }

 private:
  long line_;
};

class ValidationError : public Error { using Error::Error; };
class DimensionError : public Error { using Error::Error; };
class ContractError : public Error { using Error::Error; };
class NumericError : public Error { using Error::Error; };
class ConfigError : public Error { using Error::Error; };
class DecodeError : public Error { using Error::Error; };
class OracleError : public Error { using Error::Error; };
class AlignmentError : public Error { using Error::Error; };
class LoadError : public Error { using Error::Error; };
class UndefinedImpactError : public Error { using Error::Error; };
class IoError : public Error { using Error::Error; };

}  // namespace dparse
