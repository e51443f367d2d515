#include "artipg/types.hpp"

namespace artipg {

const char* errcName(Errc code) {
    switch (code) {
    case Errc::MissingParameter: return "MissingParameter";
    case Errc::OutOfRange: return "OutOfRange";
    case Errc::NonUnitQuaternion: return "NonUnitQuaternion";
    case Errc::UnknownPatch: return "UnknownPatch";
    case Errc::ParameterOutOfDomain: return "ParameterOutOfDomain";
    case Errc::DegenerateFrame: return "DegenerateFrame";
    case Errc::NoVisibleSurface: return "NoVisibleSurface";
    case Errc::SyntaxError: return "SyntaxError";
    case Errc::UnknownTemplate: return "UnknownTemplate";
    case Errc::DuplicateName: return "DuplicateName";
    case Errc::UnboundReference: return "UnboundReference";
    case Errc::CyclicConnectivity: return "CyclicConnectivity";
    case Errc::JointOutOfRange: return "JointOutOfRange";
    case Errc::ElaborationCollision: return "ElaborationCollision";
    case Errc::ResidualTooLarge: return "ResidualTooLarge";
    case Errc::UnknownJoint: return "UnknownJoint";
    case Errc::EmptyInput: return "EmptyInput";
    case Errc::NoSymmetricSource: return "NoSymmetricSource";
    case Errc::RepairFailed: return "RepairFailed";
    case Errc::NoCompatibleTemplate: return "NoCompatibleTemplate";
    case Errc::TraceMismatch: return "TraceMismatch";
    case Errc::UnpairablePatches: return "UnpairablePatches";
    case Errc::IncompleteField: return "IncompleteField";
    case Errc::UnknownTarget: return "UnknownTarget";
    case Errc::UnresolvableQuantity: return "UnresolvableQuantity";
    case Errc::UnboundPoint: return "UnboundPoint";
    case Errc::UnknownPart: return "UnknownPart";
    case Errc::UnsupportedFormat: return "UnsupportedFormat";
    case Errc::IoError: return "IoError";
    }
    return "UnknownError";
}

} // namespace artipg
