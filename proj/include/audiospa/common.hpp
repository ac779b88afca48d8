// Copyright 2026 The AudioSpa Authors
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

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace audiospa {

// Error taxonomy. The CLI maps these onto its exit-code contract:
// usage errors are handled by the parser, DataError/DomainError -> 2,
// everything else -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid argument values: negative distances, azimuths outside the set,
// mismatched shapes or sample rates.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration: widths not divisible by head count, empty
// pools, bad template files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed external artifacts: WAV files, manifests,
// checkpoints.
class DataError : public Error {
 public:
  using Error::Error;
};

// A text encoder selected by config key cannot be provided in this
// environment. Never silently replaced by another encoder.
class EncoderUnavailableError : public DataError {
 public:
  using DataError::DataError;
};

// NaN/Inf surfaced from numerical code; carries enough context to locate
// the failing step.
class NumericError : public Error {
 public:
  using Error::Error;
};

constexpr double kPi = 3.14159265358979323846;

inline double db_to_power_ratio(double db) { return std::pow(10.0, db / 10.0); }
inline double power_ratio_to_db(double ratio) { return 10.0 * std::log10(ratio); }

}  // namespace audiospa
