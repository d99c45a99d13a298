#pragma once

#include <stdexcept>
#include <string>

namespace fadelab {

enum class ErrorKind {
    shape,
    contract,
    config,
    lookup,
    degenerate_input,
    degenerate_fit,
    training_failure,
    integrity,
    schema,
    input,
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
        case ErrorKind::shape: return "shape";
        case ErrorKind::contract: return "contract";
        case ErrorKind::config: return "config";
        case ErrorKind::lookup: return "lookup";
        case ErrorKind::degenerate_input: return "degenerate-input";
        case ErrorKind::degenerate_fit: return "degenerate-fit";
        case ErrorKind::training_failure: return "training-failure";
        case ErrorKind::integrity: return "integrity";
        case ErrorKind::schema: return "schema";
        case ErrorKind::input: return "input";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + " error: " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_error(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline void require(bool cond, ErrorKind kind, const std::string& message) {
    if (!cond) {
        throw_error(kind, message);
    }
}

} // namespace fadelab
