// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mdbpe {

enum class ErrorCategory {
  kInvalidArgument,
  kOutOfRange,
  kFormat,
  kConsistency,
  kDecode,
  kIo,
};

std::string_view to_string(ErrorCategory category);

// Single exception type for the library; the category lets callers (CLI,
// bindings) map failures without string matching.
class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& message)
      : std::runtime_error(message), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

// Distinguishes the ways a token sequence can fail to tile its grid.
enum class DecodeFailure {
  kOutOfBounds,
  kOverlap,
  kTokensExhausted,
  kTrailingTokens,
  kUnknownClass,
};

class DecodeError : public Error {
 public:
  DecodeError(DecodeFailure failure, std::size_t token_index,
              const std::string& message)
      : Error(ErrorCategory::kDecode, message),
        failure_(failure),
        token_index_(token_index) {}

  DecodeFailure failure() const noexcept { return failure_; }
  std::size_t token_index() const noexcept { return token_index_; }

 private:
  DecodeFailure failure_;
  std::size_t token_index_;
};

}  // namespace mdbpe
