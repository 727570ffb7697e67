// Copyright 2026 The aopvos Authors.
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

namespace aopvos {

// Base of every error raised by the library. The category drives CLI exit
// codes (data errors -> 3, config errors -> 4).
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

// Spatial or channel shapes do not line up.
class DimensionError : public Error {
  public:
    using Error::Error;
};

class ArgumentError : public Error {
  public:
    using Error::Error;
};

// Missing or malformed weights, invalid configuration values.
class ConfigError : public Error {
  public:
    using Error::Error;
};

// Dataset content is inconsistent (missing annotation, unknown object...).
class DataError : public Error {
  public:
    using Error::Error;
};

// A file exists but is not in the expected encoding (e.g. RGB mask PNG).
class FormatError : public DataError {
  public:
    using DataError::DataError;
};

class IoError : public DataError {
  public:
    using DataError::DataError;
};

} // namespace aopvos
