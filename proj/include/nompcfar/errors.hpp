#pragma once

#include <stdexcept>
#include <string>

namespace nompcfar {

struct InvalidArgument : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

/// Raised when a CFAR reference window cannot collect a single eligible cell.
struct DegenerateWindow : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Quadrature, bracketing or series evaluation did not reach its tolerance.
struct NumericalFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DomainError : std::domain_error {
    using std::domain_error::domain_error;
};

struct IllConditioned : std::runtime_error {
    IllConditioned(const std::string& what, double rcond) : std::runtime_error(what), rcond_(rcond) {}
    double rcond() const noexcept { return rcond_; }

private:
    double rcond_;
};

struct InfeasibleScenario : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct OutOfFieldOfView : std::domain_error {
    using std::domain_error::domain_error;
};

} // namespace nompcfar
