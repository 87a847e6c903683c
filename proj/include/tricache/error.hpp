#pragma once

#include <stdexcept>
#include <string>

namespace tricache {

enum class ErrorKind {
    InvalidInput,
    Degenerate,
    Validation,
    Io,
    MissingFile,
    Parse,
    SizeMismatch,
    CorruptData,
    Version,
    Internal,
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

// CLI exit code for an error kind: 1 validation, 2 I/O, 3 internal.
int exit_code(ErrorKind kind);

}  // namespace tricache
