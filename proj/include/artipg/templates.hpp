#pragma once

#include "artipg/primitive.hpp"
#include "artipg/program.hpp"

#include <functional>
#include <map>
#include <string>
#include <vector>

namespace artipg {

// One elementary part emitted by expanding an advanced template. Parts keep
// stable names across templates of the same role so details and labels can
// follow a part through template swaps.
struct TemplatePart {
    std::string part;
    int repetition = 0; // index within a replicated group
    PrimitiveTemplateId tmpl = PrimitiveTemplateId::Cuboid;
    ParamMap intrinsic;
};

// Internal connectivity between two parts, fully evaluated (closed-form
// numeric placement; resolved by the same tree traversal as program edges).
struct TemplateEdge {
    EdgeKind kind = EdgeKind::FixedRelative;
    std::string parent_part;
    int parent_rep = 0;
    std::string child_part;
    int child_rep = 0;
    std::string parent_patch; // Attach
    std::string child_patch;  // Attach
    Vec2 attach_offset = Vec2::Zero();
    Scalar axial_offset = 0.0; // Coaxial
    Pose relative;             // FixedRelative
};

// External attach/coaxial target exposed by a template under a stable alias.
struct AnchorRef {
    std::string part;
    std::string patch; // empty for axis (coaxial) anchors
};

// Joint axis exposed by a template: a patch point on one of its parts plus
// the axis direction in that point's (normal, tangent, bitangent) frame.
struct AxisAnchor {
    std::string part;
    std::string patch;
    Vec2 uv = Vec2(0.5, 0.5);
    Vec3 dir = Vec3::UnitX();
};

struct TemplateExpansion {
    std::vector<TemplatePart> parts; // parts[0] is the root part
    std::vector<TemplateEdge> edges;
    std::map<std::string, AnchorRef> anchors;
    std::map<std::string, AxisAnchor> axis_anchors;
};

struct TemplateParamSpec {
    const char* name;
    Scalar value; // default
    Scalar lo;
    Scalar hi;
    bool integer;
};

// A role-named composition of elementary primitives. Expansion is a pure
// function of the parameter values; the elaborated rest AABB of a template
// is controlled by (width, depth, height) so swapping templates of one role
// keeps overall dimensions comparable. Box-footprint templates span the
// triple exactly; round-footprint bases span min(width, depth) in both
// horizontal axes; door_assembly spans its outer diameter (= height) across
// the window plane and width along its own axis.
struct AdvancedTemplate {
    std::string name;
    std::string role;
    std::vector<TemplateParamSpec> params;
    // part name -> the integer parameter that replicates it (DPA provenance).
    std::map<std::string, std::string> count_param_of_part;
    std::function<TemplateExpansion(const ParamMap&)> expand;

    const TemplateParamSpec* findParam(const std::string& name) const;
};

// Expansion at the template's default parameter values. Part names, anchor
// aliases, and per-part primitive kinds are parameter-independent (only
// repetition counts and placements vary), so this is the cheap way to
// inspect a template's structure.
TemplateExpansion defaultExpansion(const AdvancedTemplate& t);

// Registry of the shipped advanced templates. Lookup by exact name returns
// null when unknown; role lookup returns templates in registry order.
const AdvancedTemplate* findAdvancedTemplate(const std::string& name);
std::vector<const AdvancedTemplate*> templatesForRole(const std::string& role);
std::vector<std::string> advancedTemplateNames();

} // namespace artipg
