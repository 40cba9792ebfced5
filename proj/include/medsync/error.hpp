#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace medsync {

enum class Errc {
  KeyConflict,
  SchemaMismatch,
  NotFound,
  KeyImmutable,
  UnknownAttribute,
  InvalidSchema,
  EmptyViewKey,
  FdViolation,
  InsertNotSupported,
  DifferentSource,
  UnknownShared,
  UnknownTable,
  UnknownLens,
  NotReady,
  Refused,
  DigestMismatch,
  ChainCorrupt,
  ParseError,
  ValidationError,
  MaxTicksExceeded,
  NotQuiescent,
  IoError,
};

std::string_view to_string(Errc code) noexcept;

// Every library failure is an Error carrying a stable code; the message is for humans.
class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace medsync
