#pragma once

#include <stdexcept>
#include <string>

namespace fpc {

enum class ErrorKind {
    Config,         // malformed or inconsistent input
    GridMismatch,   // fields defined on different grids
    DomainTooSmall, // initial law leaks outside the truncated domain
    NonConvergence, // an iteration hit its cap
    Blowup,         // non-finite values appeared
    Representation, // Lagrangian infinite on an occupied node
    Precondition,   // caller violated an operation's precondition
    Infeasible,     // multiplier search ran past the Slater cap
    LinearSolve,    // tridiagonal solve broke down
};

inline const char* to_string(ErrorKind k) {
    switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::DomainTooSmall: return "domain-too-small";
    case ErrorKind::NonConvergence: return "non-convergence";
    case ErrorKind::Blowup: return "blowup";
    case ErrorKind::Representation: return "representation";
    case ErrorKind::Precondition: return "precondition";
    case ErrorKind::Infeasible: return "infeasible";
    case ErrorKind::LinearSolve: return "linear-solve";
    }
    return "unknown";
}

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& what)
        : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

    /// Configuration-class errors map to CLI exit code 1, everything else to 2.
    bool is_config_error() const noexcept {
        return kind_ == ErrorKind::Config || kind_ == ErrorKind::DomainTooSmall ||
               kind_ == ErrorKind::GridMismatch;
    }

private:
    ErrorKind kind_;
};

} // namespace fpc
