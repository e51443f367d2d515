#pragma once

#include <Eigen/Dense>
#include <Eigen/Geometry>

#include <stdexcept>
#include <string>

namespace artipg {

using Scalar = double;
using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Rigid transform stored as unit quaternion + translation, meters.
struct Pose {
    Quat rotation = Quat::Identity();
    Vec3 translation = Vec3::Zero();

    static Pose identity() { return {}; }

    Vec3 apply(const Vec3& p) const { return rotation * p + translation; }
    Vec3 applyVector(const Vec3& v) const { return rotation * v; }

    Pose compose(const Pose& rhs) const {
        return Pose{rotation * rhs.rotation, rotation * rhs.translation + translation};
    }
    Pose inverse() const {
        const Quat qi = rotation.conjugate();
        return Pose{qi, -(qi * translation)};
    }
};

inline Pose makePose(const Quat& q, const Vec3& t) { return Pose{q.normalized(), t}; }

inline Pose rotationAbout(const Vec3& axis_point, const Vec3& axis_dir, Scalar angle) {
    const Quat q(Eigen::AngleAxisd(angle, axis_dir.normalized()));
    return Pose{q, axis_point - q * axis_point};
}

inline Pose translationAlong(const Vec3& dir, Scalar distance) {
    return Pose{Quat::Identity(), dir.normalized() * distance};
}

enum class Errc {
    MissingParameter,
    OutOfRange,
    NonUnitQuaternion,
    UnknownPatch,
    ParameterOutOfDomain,
    DegenerateFrame,
    NoVisibleSurface,
    SyntaxError,
    UnknownTemplate,
    DuplicateName,
    UnboundReference,
    CyclicConnectivity,
    JointOutOfRange,
    ElaborationCollision,
    ResidualTooLarge,
    UnknownJoint,
    EmptyInput,
    NoSymmetricSource,
    RepairFailed,
    NoCompatibleTemplate,
    TraceMismatch,
    UnpairablePatches,
    IncompleteField,
    UnknownTarget,
    UnresolvableQuantity,
    UnboundPoint,
    UnknownPart,
    UnsupportedFormat,
    IoError,
};

const char* errcName(Errc code);

class Error : public std::runtime_error {
public:
    Error(Errc code, std::string detail)
        : std::runtime_error(std::string(errcName(code)) + ": " + detail), code_(code),
          detail_(std::move(detail)) {}

    Errc code() const { return code_; }
    const std::string& detail() const { return detail_; }

private:
    Errc code_;
    std::string detail_;
};

[[noreturn]] inline void fail(Errc code, const std::string& detail) { throw Error(code, detail); }

} // namespace artipg
