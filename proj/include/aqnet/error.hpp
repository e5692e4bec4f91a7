#pragma once

#include <stdexcept>
#include <string>

namespace aqnet {

enum class ErrorKind {
    Validation,  // bad input values or config
    Io,          // missing/unreadable/unwritable files
    Format,      // malformed file contents
    Numeric,     // non-finite values during computation
    Leakage,     // evaluation set overlaps training set
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

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace aqnet
