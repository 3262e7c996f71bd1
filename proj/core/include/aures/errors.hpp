/*
 * Copyright 2026 The Aures Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AURES_ERRORS_HPP_
#define AURES_ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace aures {

// All library failures derive from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define AURES_DEFINE_ERROR(Name)            \
  class Name : public Error {               \
   public:                                  \
    using Error::Error;                     \
  }

AURES_DEFINE_ERROR(DimensionError);    // operand shapes do not conform
AURES_DEFINE_ERROR(ConfigError);       // invalid configuration value
AURES_DEFINE_ERROR(DomainError);       // math outside an op's domain
AURES_DEFINE_ERROR(UsageError);        // API misuse (e.g. non-scalar backward)
AURES_DEFINE_ERROR(NonFiniteError);    // NaN/Inf produced or consumed
AURES_DEFINE_ERROR(InputError);        // unusable input data
AURES_DEFINE_ERROR(ShapeError);        // model input too small, stage mismatch
AURES_DEFINE_ERROR(MetricError);       // metric undefined for the given data
AURES_DEFINE_ERROR(IngestError);       // WAV / manifest parsing
AURES_DEFINE_ERROR(CheckpointError);   // checkpoint version, hash, or config
AURES_DEFINE_ERROR(CheckError);        // gradient-check harness failure

#undef AURES_DEFINE_ERROR

}  // namespace aures

#endif  // AURES_ERRORS_HPP_
