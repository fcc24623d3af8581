// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace mmjoin {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IngestError : public Error {
 public:
  using Error::Error;
};

enum class QueryErrorCode {
  CyclicQuery,
  DisconnectedQuery,
  UnknownRelation,
  UnknownAttribute,
  InvalidPrefix,
  InvalidPlan,
};

const char* to_string(QueryErrorCode code);

class QueryError : public Error {
 public:
  QueryError(QueryErrorCode code, const std::string& detail)
      : Error(std::string(to_string(code)) + ": " + detail), code_(code) {}
  QueryErrorCode code() const { return code_; }

 private:
  QueryErrorCode code_;
};

class TooManyRelations : public Error {
 public:
  using Error::Error;
};

class GeneratorError : public Error {
 public:
  using Error::Error;
};

/// Raised when an execution exceeds its time budget. Partial counters are
/// attached to the result summary, which is flagged invalid.
class Timeout : public Error {
 public:
  using Error::Error;
};

class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace mmjoin
