#pragma once

#include "artipg/primitive.hpp"
#include "artipg/program.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace artipg {

// Which declaration / sub-part / repetition produced an instance.
struct Provenance {
    std::string decl;
    std::string part; // equals decl for elementary declarations
    int repetition = 0;
};

struct ResolvedJoint {
    std::string id;
    JointKind kind = JointKind::Revolute;
    std::string parent_decl;
    std::string child_decl;
    std::uint32_t anchor_instance = 0; // parent-side instance carrying the axis
    Vec3 axis_point = Vec3::Zero();    // world, in the rest configuration
    Vec3 axis_dir = Vec3::UnitZ();     // world unit, in the rest configuration
    Scalar lo = 0.0;
    Scalar hi = 0.0;
    Scalar value = 0.0;                 // current joint value
    std::vector<std::uint32_t> subtree; // instances rigidly moved by this joint
};

// An elaborated structure: posed elementary instances plus everything needed
// to articulate, label, and re-sample them. Treat as an immutable value.
struct Structure {
    std::vector<PrimitiveInstance> instances; // current poses
    std::vector<Pose> rest_poses;             // poses at rest joint values
    std::vector<Provenance> provenance;
    std::vector<ResolvedJoint> joints;
    // Instance pairs connected by an edge (exempt from collision checks).
    std::vector<std::pair<std::uint32_t, std::uint32_t>> adjacency;
    VisibilityMask visibility;
    std::map<std::string, Scalar> params;    // evaluated "decl.param" scope
    std::vector<std::string> semantic_vocab; // category labels, declaration order
    std::vector<std::uint16_t> semantic_of;  // per instance, index into vocab

    int findInstance(const std::string& decl, const std::string& part,
                     int repetition = 0) const; // -1 when absent
    const ResolvedJoint* findJoint(const std::string& id) const;
};

// Expands advanced declarations, resolves every pose by closed-form tree
// traversal from the root, applies joint transforms, and computes patch
// visibility (both contact patches of every Attach edge are invisible).
// joint_values maps joint id -> absolute value (default: rest values).
// Throws CyclicConnectivity (cycles, multiple parents, floating parts),
// JointOutOfRange, UnknownJoint, ResidualTooLarge.
Structure elaborate(const StructureProgram& program,
                    const std::map<std::string, Scalar>& joint_values = {});

// elaborate + collision check; throws ElaborationCollision naming the first
// colliding pair.
Structure elaborateChecked(const StructureProgram& program,
                           const std::map<std::string, Scalar>& joint_values = {});

// Applies a joint value change of `delta` (radians or meters, relative to
// the current value) to the joint's child subtree. The new absolute value
// must stay within the joint range. Only subtree poses change; bindings move
// rigidly with their instances. Throws UnknownJoint, JointOutOfRange.
Structure articulate(const Structure& s, const std::string& joint_id, Scalar delta);

// Largest placement residual over all connectivity edges, measured in the
// rest configuration: Attach = contact-plane gap, normal opposition, and
// in-plane offset error; Coaxial = axis collinearity and offset error;
// FixedRelative = exact pose mismatch. Meters (angular terms in radians).
Scalar maxResidual(const StructureProgram& program, const Structure& s);

} // namespace artipg
