#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mores {

enum class ErrorKind {
    DimensionMismatch,
    NotPositiveDefinite,
    ConvergenceFailure,
    NonFinite,
    InvalidConfig,
    ZeroInput,
};

constexpr std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorKind::ConvergenceFailure: return "ConvergenceFailure";
        case ErrorKind::NonFinite: return "NonFinite";
        case ErrorKind::InvalidConfig: return "InvalidConfig";
        case ErrorKind::ZeroInput: return "ZeroInput";
    }
    return "Unknown";
}

/// Every failure raised by the library carries a kind so callers (the CLI in
/// particular) can map it onto an exit status without parsing messages.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace mores
