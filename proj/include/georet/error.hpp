// Copyright 2026 The georet Authors.
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

#include <cstdint>
#include <stdexcept>
#include <string>
#include <string_view>

namespace georet {

enum class ErrorKind {
  kIo,
  kFormat,
  kCorruption,
  kValidation,
  kConfig,
  kDomain,
  kEvaluation,
  kResource,
};

constexpr std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kCorruption: return "corruption error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kDomain: return "domain error";
    case ErrorKind::kEvaluation: return "evaluation error";
    case ErrorKind::kResource: return "resource error";
  }
  return "error";
}

/// Base class of every exception thrown by georet. The message never
/// repeats the kind; callers that print errors prefix it themselves.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

#define GEORET_DEFINE_ERROR(Name, Kind)                                   \
  class Name : public Error {                                             \
   public:                                                                \
    explicit Name(const std::string& message) : Error(Kind, message) {}   \
  }

GEORET_DEFINE_ERROR(FormatError, ErrorKind::kFormat);
GEORET_DEFINE_ERROR(CorruptionError, ErrorKind::kCorruption);
GEORET_DEFINE_ERROR(ValidationError, ErrorKind::kValidation);
GEORET_DEFINE_ERROR(ConfigError, ErrorKind::kConfig);
GEORET_DEFINE_ERROR(DomainError, ErrorKind::kDomain);
GEORET_DEFINE_ERROR(EvaluationError, ErrorKind::kEvaluation);
GEORET_DEFINE_ERROR(ResourceError, ErrorKind::kResource);

#undef GEORET_DEFINE_ERROR

/// Sink or source failure. Carries how many bytes made it through before
/// the failure.
class IoError : public Error {
 public:
  IoError(const std::string& message, std::uint64_t bytes_done = 0)
      : Error(ErrorKind::kIo, message), bytes_done_(bytes_done) {}

  std::uint64_t bytes_done() const noexcept { return bytes_done_; }

 private:
  std::uint64_t bytes_done_;
};

}  // namespace georet
