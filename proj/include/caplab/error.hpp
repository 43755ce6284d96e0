#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace caplab {

/// Failure categories. The CLI maps every kind except `internal` to exit status 2.
enum class ErrorKind {
    invalid_parameter,
    invalid_input,
    invalid_problem,
    not_applicable,
    precondition_violation,
    refused,
    parse_error,
    internal
};

constexpr std::string_view to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::invalid_parameter: return "invalid-parameter";
    case ErrorKind::invalid_input: return "invalid-input";
    case ErrorKind::invalid_problem: return "invalid-problem";
    case ErrorKind::not_applicable: return "not-applicable";
    case ErrorKind::precondition_violation: return "precondition-violation";
    case ErrorKind::refused: return "refused";
    case ErrorKind::parse_error: return "parse-error";
    case ErrorKind::internal: return "internal";
    }
    return "internal";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

inline void require(bool condition, ErrorKind kind, const std::string& what) {
    if (!condition) throw Error(kind, what);
}

}  // namespace caplab
