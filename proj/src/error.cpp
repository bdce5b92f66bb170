#include "wmark/error.hpp"

namespace wmark {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::FileNotFound: return "FileNotFound";
    case ErrorCode::UnsupportedFormat: return "UnsupportedFormat";
    case ErrorCode::CorruptData: return "CorruptData";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidImage: return "InvalidImage";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::ImageTooSmall: return "ImageTooSmall";
    case ErrorCode::BandOutOfRange: return "BandOutOfRange";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::RangeOverflow: return "RangeOverflow";
    case ErrorCode::MessageOutOfRange: return "MessageOutOfRange";
    case ErrorCode::CapacityExceeded: return "CapacityExceeded";
    case ErrorCode::InvalidParams: return "InvalidParams";
    case ErrorCode::RegistryUnavailable: return "RegistryUnavailable";
    case ErrorCode::StoreLocked: return "StoreLocked";
    case ErrorCode::StoreUnavailable: return "StoreUnavailable";
    case ErrorCode::RegistrationFailed: return "RegistrationFailed";
    case ErrorCode::InvalidSpec: return "InvalidSpec";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::SelfTestFailed: return "SelfTestFailed";
  }
  return "Unknown";
}

}  // namespace wmark
