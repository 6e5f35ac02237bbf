#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bayesreloc {

enum class ErrorKind {
    DegenerateQuaternion,
    DegenerateMean,
    InvalidArchitecture,
    ShapeMismatch,
    NonFiniteLoss,
    NonPositiveValue,
    InsufficientPopulation,
    InsufficientVariance,
    NoConvergence,
    InvalidSpec,
    InvalidArgument,
    ParseError,
    IoError,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Broad class of failure, used by the CLI to pick an exit code.
enum class ErrorClass { Usage, Data, Numerical };

ErrorClass classify(ErrorKind kind) noexcept;

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

}  // namespace bayesreloc
