#include "bayesreloc/error.hpp"

namespace bayesreloc {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::DegenerateQuaternion: return "DegenerateQuaternion";
        case ErrorKind::DegenerateMean: return "DegenerateMean";
        case ErrorKind::InvalidArchitecture: return "InvalidArchitecture";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::NonPositiveValue: return "NonPositiveValue";
        case ErrorKind::InsufficientPopulation: return "InsufficientPopulation";
        case ErrorKind::InsufficientVariance: return "InsufficientVariance";
        case ErrorKind::NoConvergence: return "NoConvergence";
        case ErrorKind::InvalidSpec: return "InvalidSpec";
        case ErrorKind::InvalidArgument: return "InvalidArgument";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::IoError: return "IoError";
    }
    return "Unknown";
}

ErrorClass classify(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::NonFiniteLoss:
        case ErrorKind::NoConvergence:
        case ErrorKind::DegenerateMean:
        case ErrorKind::InsufficientVariance:
            return ErrorClass::Numerical;
        case ErrorKind::InvalidArgument:
            return ErrorClass::Usage;
        default:
            return ErrorClass::Data;
    }
}

}  // namespace bayesreloc
