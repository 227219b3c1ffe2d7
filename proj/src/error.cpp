#include "latent_geom/error.hpp"

namespace lgeom {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument: return "invalid_argument";
        case ErrorKind::Parse: return "parse_error";
        case ErrorKind::EmptyDataset: return "empty_dataset";
        case ErrorKind::DatasetNotFound: return "dataset_not_found";
        case ErrorKind::InsufficientData: return "insufficient_data";
        case ErrorKind::DegenerateData: return "degenerate_data";
        case ErrorKind::DegenerateRange: return "degenerate_range";
        case ErrorKind::Index: return "index_error";
        case ErrorKind::Numeric: return "numeric_error";
        case ErrorKind::Io: return "io_error";
    }
    return "unknown";
}

int exit_code(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidArgument:
        case ErrorKind::Index:
            return 1;
        case ErrorKind::Numeric:
            return 3;
        default:
            return 2;
    }
}

ParseError::ParseError(std::size_t line, std::string text, const std::string& reason)
    : Error(ErrorKind::Parse, "line " + std::to_string(line) + ": " + reason + ": '" + text + "'"),
      line_(line),
      text_(std::move(text)) {}

}  // namespace lgeom
