#pragma once

#include <stdexcept>
#include <string>

namespace trendskip {

enum class ErrorKind {
    InvalidParameter,
    DimensionMismatch,
    TimestepOutOfRange,
    KindMismatch,
    MissingTimestep,
    TauOutOfRange,
    WindowZero,
    StepOutOfRange,
    DegenerateInput,
    MissingSnapshot,
    IncompleteLedger,
    ConfigMismatch,
    ParseError,
    ValidationError,
    NumericError,
    IoError,
};

const char* error_kind_name(ErrorKind kind);

/// Single exception type carrying a machine-checkable kind tag.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(error_kind_name(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

inline const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::TimestepOutOfRange: return "timestep-out-of-range";
        case ErrorKind::KindMismatch: return "kind-mismatch";
        case ErrorKind::MissingTimestep: return "missing-timestep";
        case ErrorKind::TauOutOfRange: return "tau-out-of-range";
        case ErrorKind::WindowZero: return "k-zero";
        case ErrorKind::StepOutOfRange: return "s-out-of-range";
        case ErrorKind::DegenerateInput: return "degenerate-input";
        case ErrorKind::MissingSnapshot: return "missing-snapshot";
        case ErrorKind::IncompleteLedger: return "incomplete-ledger";
        case ErrorKind::ConfigMismatch: return "config-mismatch";
        case ErrorKind::ParseError: return "parse-error";
        case ErrorKind::ValidationError: return "validation-error";
        case ErrorKind::NumericError: return "numeric-error";
        case ErrorKind::IoError: return "io-error";
    }
    return "unknown-error";
}

}  // namespace trendskip
