#include "ellipsol/error.hpp"

namespace ellipsol {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::NoInteriorNodes: return "NoInteriorNodes";
    case ErrorKind::NodeNotInterior: return "NodeNotInterior";
    case ErrorKind::RequiresInterpolant: return "RequiresInterpolant";
    case ErrorKind::StencilExhausted: return "StencilExhausted";
    case ErrorKind::SingularSystem: return "SingularSystem";
    case ErrorKind::LatticeMismatch: return "LatticeMismatch";
    case ErrorKind::DegenerateHull: return "DegenerateHull";
    case ErrorKind::BoundaryNotNonnegative: return "BoundaryNotNonnegative";
    case ErrorKind::NoConvergence: return "NoConvergence";
    case ErrorKind::Diverging: return "Diverging";
    case ErrorKind::NoConvexSubsolution: return "NoConvexSubsolution";
    case ErrorKind::EmptyControlSet: return "EmptyControlSet";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
    case ErrorKind::ConfigError: return "ConfigError";
  }
  return "Unknown";
}

}  // namespace ellipsol
