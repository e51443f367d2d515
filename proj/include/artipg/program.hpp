#pragma once

#include "artipg/expr.hpp"
#include "artipg/types.hpp"

#include <array>
#include <map>
#include <string>
#include <vector>

namespace artipg {

// One declared parameter (or edge offset component): a free value with
// perturbation bounds, a fixed value, or an expression over other parameters.
// Expressions reference siblings by bare name ("height") and other
// declarations' parameters with a dot ("body.depth").
struct ParamEntry {
    Scalar value = 0.0; // current value; ignored while derived
    Expr expr;          // non-empty => derived, re-evaluated at elaboration
    bool has_bounds = false;
    Scalar lo = 0.0;
    Scalar hi = 0.0;
    bool integer = false;

    bool derived() const { return !expr.empty(); }
    bool isFree() const { return !derived() && has_bounds; }
};

struct Declaration {
    std::string name;
    bool advanced = false;
    std::string template_name; // primitive name or advanced template name
    std::string semantic;      // part label; defaults to the declaration name
    bool essential = true;     // non-essential declarations may be dropped
    std::map<std::string, ParamEntry> params;
};

enum class EdgeKind { Attach, Coaxial, FixedRelative };

// Degrees of freedom removed by an edge: Attach fixes the contact plane
// (1 translation + 2 rotations; du, dv and spin remain, the first two pinned
// by the edge's offset and spin by the tangent-alignment convention);
// Coaxial removes 4 (axial travel pinned by its offset, spin by convention);
// FixedRelative removes all 6.
int dofRemoved(EdgeKind kind);

struct EdgeSpec {
    EdgeKind kind = EdgeKind::Attach;
    std::string parent;
    std::string child;
    // Patch name for elementary endpoints, template anchor alias otherwise.
    std::string parent_anchor;
    std::string child_anchor;
    // Attach: offset[0..1] = (du, dv), meters along the parent patch tangent
    // and bitangent from the patch center. Coaxial: offset[0] = axial offset
    // between part origins, meters.
    std::array<ParamEntry, 2> offset{};
    // FixedRelative: child part pose relative to the parent part frame.
    std::array<ParamEntry, 3> translation{};
    std::array<Scalar, 4> rotation{1.0, 0.0, 0.0, 0.0}; // unit quaternion wxyz
};

enum class JointKind { Revolute, Prismatic, Fixed };

// Joint axis anchored on the parent: either a template-declared alias
// (advanced parent) or an explicit patch point with the direction given in
// the patch (normal, tangent, bitangent) frame, so the axis follows the
// parent through resizing.
struct JointAnchor {
    std::string alias;
    std::string patch;
    Vec2 uv = Vec2(0.5, 0.5);
    Vec3 dir = Vec3::UnitX();
};

struct JointDecl {
    std::string id;
    JointKind kind = JointKind::Revolute;
    std::string parent;
    std::string child; // root of the articulated subtree
    JointAnchor anchor;
    Scalar lo = 0.0;
    Scalar hi = 0.0;
    Scalar rest = 0.0; // lo <= rest <= hi
};

// Declarative label region: conjunction of interval constraints over a
// sample's parametric coordinates. Quantities: "u", "v" (patch coordinates)
// and "x", "y", "z" (surface point in the primitive's local frame) — all
// functions of (intrinsics, patch, uv) only, never of world pose, so regions
// survive articulation and rigid motion unchanged.
struct RegionConstraint {
    std::string quantity;
    Expr lo; // empty = unbounded below
    Expr hi; // empty = unbounded above
};

struct RegionSpec {
    std::string label;
    std::string target;               // declaration name
    std::string part;                 // sub-part filter; "" = every part
    std::vector<std::string> patches; // patch-name filter; empty = all
    std::vector<RegionConstraint> where;
};

struct StructureProgram {
    std::string category;
    std::string root;
    std::vector<Declaration> declarations;
    std::vector<EdgeSpec> connectivity;
    std::vector<JointDecl> joints;
    std::vector<RegionSpec> label_regions;

    const Declaration* findDecl(const std::string& name) const;
};

// Parses a canonical "artipg-sp/1" document. Throws SyntaxError (with byte
// position), UnknownTemplate, DuplicateName, UnboundReference,
// CyclicConnectivity, OutOfRange.
StructureProgram parseProgram(const std::string& text);

// Canonical form: sorted object keys, 2-space indent, shortest exact decimal
// floats. parse(serialize(p)) is structurally equal to p and
// serialize(parse(text)) == text for canonical inputs.
std::string serializeProgram(const StructureProgram& program);

struct Diagnostic {
    enum class Kind { Floating, Collision, Error };
    Kind kind = Kind::Error;
    std::string subject_a;
    std::string subject_b;
    std::string message;
};

// Empty iff elaboration at rest joint values yields a fully connected,
// collision-free structure. Never throws on a parsed program.
std::vector<Diagnostic> validateProgram(const StructureProgram& program);

// Evaluates every declaration parameter and returns the "decl.param" scope,
// resolving derived expressions in dependency order. Throws UnboundReference
// on unknown names or reference cycles.
std::map<std::string, Scalar> evaluateParams(const StructureProgram& program);

} // namespace artipg
