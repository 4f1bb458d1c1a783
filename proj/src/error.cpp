#include "varpost/error.hpp"

namespace varpost {

const char* to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::InvalidInput: return "InvalidInput";
        case ErrorKind::InvalidParameter: return "InvalidParameter";
        case ErrorKind::NonErgodic: return "NonErgodic";
        case ErrorKind::InsufficientLength: return "InsufficientLength";
        case ErrorKind::InsufficientSamples: return "InsufficientSamples";
        case ErrorKind::ShapeMismatch: return "ShapeMismatch";
        case ErrorKind::RangeViolation: return "RangeViolation";
        case ErrorKind::TooLarge: return "TooLarge";
        case ErrorKind::EmptyFamily: return "EmptyFamily";
        case ErrorKind::EmptyNeighborhood: return "EmptyNeighborhood";
        case ErrorKind::DepthTooSmall: return "DepthTooSmall";
        case ErrorKind::Diverged: return "Diverged";
        case ErrorKind::Infeasible: return "Infeasible";
        case ErrorKind::SolverStall: return "SolverStall";
    }
    return "Unknown";
}

}  // namespace varpost
