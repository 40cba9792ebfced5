#include "medsync/error.hpp"

namespace medsync {

std::string_view to_string(Errc code) noexcept {
  switch (code) {
    case Errc::KeyConflict: return "KeyConflict";
    case Errc::SchemaMismatch: return "SchemaMismatch";
    case Errc::NotFound: return "NotFound";
    case Errc::KeyImmutable: return "KeyImmutable";
    case Errc::UnknownAttribute: return "UnknownAttribute";
    case Errc::InvalidSchema: return "InvalidSchema";
    case Errc::EmptyViewKey: return "EmptyViewKey";
    case Errc::FdViolation: return "FdViolation";
    case Errc::InsertNotSupported: return "InsertNotSupported";
    case Errc::DifferentSource: return "DifferentSource";
    case Errc::UnknownShared: return "UnknownShared";
    case Errc::UnknownTable: return "UnknownTable";
    case Errc::UnknownLens: return "UnknownLens";
    case Errc::NotReady: return "NotReady";
    case Errc::Refused: return "Refused";
    case Errc::DigestMismatch: return "DigestMismatch";
    case Errc::ChainCorrupt: return "ChainCorrupt";
    case Errc::ParseError: return "ParseError";
    case Errc::ValidationError: return "ValidationError";
    case Errc::MaxTicksExceeded: return "MaxTicksExceeded";
    case Errc::NotQuiescent: return "NotQuiescent";
    case Errc::IoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace medsync
