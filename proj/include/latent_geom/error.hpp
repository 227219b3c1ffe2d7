#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace lgeom {

enum class ErrorKind {
    InvalidArgument,
    Parse,
    EmptyDataset,
    DatasetNotFound,
    InsufficientData,
    DegenerateData,
    DegenerateRange,
    Index,
    Numeric,
    Io,
};

const char* to_string(ErrorKind kind) noexcept;

/// Process exit code for an error kind: 1 usage, 2 data, 3 numeric.
int exit_code(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

/// Malformed input line. `line` is 1-based.
class ParseError : public Error {
public:
    ParseError(std::size_t line, std::string text, const std::string& reason);

    std::size_t line() const noexcept { return line_; }
    const std::string& text() const noexcept { return text_; }

private:
    std::size_t line_;
    std::string text_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) { throw Error(kind, what); }

}  // namespace lgeom
