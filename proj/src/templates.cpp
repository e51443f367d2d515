#include "artipg/templates.hpp"

#include <Eigen/Geometry>

#include <cmath>
#include <numbers>
#include <utility>

namespace artipg {
namespace {

constexpr Scalar kPi = std::numbers::pi_v<Scalar>;

Scalar get(const ParamMap& params, const char* name) {
    const auto it = params.find(name);
    if (it == params.end()) fail(Errc::MissingParameter, std::string("template parameter: ") + name);
    return it->second;
}

int getCount(const ParamMap& params, const char* name) {
    const Scalar raw = get(params, name);
    const auto n = static_cast<int>(std::llround(raw));
    if (std::abs(raw - static_cast<Scalar>(n)) > 1e-9)
        fail(Errc::ParameterOutOfDomain, std::string(name) + " must be an integer");
    return n;
}

ParamMap cuboid(Scalar sx, Scalar sy, Scalar sz) {
    return {{"size_x", sx}, {"size_y", sy}, {"size_z", sz}};
}
ParamMap cylinder(Scalar radius, Scalar height) {
    return {{"radius", radius}, {"height", height}};
}
ParamMap torusOf(Scalar major, Scalar minor) {
    return {{"major_radius", major}, {"minor_radius", minor}};
}
ParamMap prismOf(int sides, Scalar circumradius, Scalar height) {
    return {{"side_count", static_cast<Scalar>(sides)},
            {"circumradius", circumradius},
            {"height", height}};
}

Pose rotX(Scalar angle, const Vec3& t = Vec3::Zero()) {
    return makePose(Quat(Eigen::AngleAxisd(angle, Vec3::UnitX())), t);
}
Pose rotZ(Scalar angle, const Vec3& t = Vec3::Zero()) {
    return makePose(Quat(Eigen::AngleAxisd(angle, Vec3::UnitZ())), t);
}
Pose shift(const Vec3& t) { return makePose(Quat::Identity(), t); }

void addPart(TemplateExpansion& x, std::string name, int rep, PrimitiveTemplateId tmpl,
             ParamMap intrinsic) {
    x.parts.push_back({std::move(name), rep, tmpl, std::move(intrinsic)});
}

void attachEdge(TemplateExpansion& x, std::string parent, std::string ppatch, std::string child,
                int rep, std::string cpatch, Scalar du = 0.0, Scalar dv = 0.0) {
    TemplateEdge e;
    e.kind = EdgeKind::Attach;
    e.parent_part = std::move(parent);
    e.child_part = std::move(child);
    e.child_rep = rep;
    e.parent_patch = std::move(ppatch);
    e.child_patch = std::move(cpatch);
    e.attach_offset = Vec2(du, dv);
    x.edges.push_back(std::move(e));
}

void coaxialEdge(TemplateExpansion& x, std::string parent, std::string child, int rep,
                 Scalar axial_offset) {
    TemplateEdge e;
    e.kind = EdgeKind::Coaxial;
    e.parent_part = std::move(parent);
    e.child_part = std::move(child);
    e.child_rep = rep;
    e.axial_offset = axial_offset;
    x.edges.push_back(std::move(e));
}

void fixedEdge(TemplateExpansion& x, std::string parent, std::string child, int rep, Pose relative) {
    TemplateEdge e;
    e.kind = EdgeKind::FixedRelative;
    e.parent_part = std::move(parent);
    e.child_part = std::move(child);
    e.child_rep = rep;
    e.relative = std::move(relative);
    x.edges.push_back(std::move(e));
}

// Centers of n items evenly spread over a span centered on 0.
Scalar spread(int k, int n, Scalar span) {
    return (-0.5 + (k + 0.5) / static_cast<Scalar>(n)) * span;
}

// --- usb_body -------------------------------------------------------------

// Slab with a protruding connector tongue and grip ribs across the top.
TemplateExpansion expandRoundedRectBody(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int ribs = getCount(p, "rib_count");
    const Scalar slab_x = 0.78 * w;

    TemplateExpansion x;
    addPart(x, "slab", 0, PrimitiveTemplateId::Cuboid, cuboid(slab_x, d, 0.94 * h));
    addPart(x, "connector", 0, PrimitiveTemplateId::Cuboid, cuboid(0.22 * w, 0.7 * d, 0.5 * h));
    attachEdge(x, "slab", "px", "connector", 0, "nx");
    for (int k = 0; k < ribs; ++k) {
        addPart(x, "rib", k, PrimitiveTemplateId::Cuboid, cuboid(0.03 * w, 0.8 * d, 0.06 * h));
        attachEdge(x, "slab", "pz", "rib", k, "nz", spread(k, ribs, 0.66 * slab_x), 0.0);
    }
    x.anchors["tip"] = {"connector", "px"};
    x.axis_anchors["pivot"] = {"slab", "pz", Vec2(0.85, 0.5), Vec3(1, 0, 0)};
    return x;
}

// Same silhouette but the slab ends in a half-round tail.
TemplateExpansion expandRoundTailBody(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int ribs = getCount(p, "rib_count");
    const Scalar slab_x = 0.78 * w - 0.5 * d;

    TemplateExpansion x;
    addPart(x, "slab", 0, PrimitiveTemplateId::Cuboid, cuboid(slab_x, d, 0.94 * h));
    addPart(x, "connector", 0, PrimitiveTemplateId::Cuboid, cuboid(0.22 * w, 0.7 * d, 0.5 * h));
    attachEdge(x, "slab", "px", "connector", 0, "nx");
    addPart(x, "tail", 0, PrimitiveTemplateId::Cylinder, cylinder(0.5 * d, 0.94 * h));
    fixedEdge(x, "slab", "tail", 0, shift(Vec3(-0.5 * slab_x, 0, 0)));
    for (int k = 0; k < ribs; ++k) {
        addPart(x, "rib", k, PrimitiveTemplateId::Cuboid, cuboid(0.03 * w, 0.8 * d, 0.06 * h));
        attachEdge(x, "slab", "pz", "rib", k, "nz", spread(k, ribs, 0.66 * slab_x), 0.0);
    }
    x.anchors["tip"] = {"connector", "px"};
    x.axis_anchors["pivot"] = {"slab", "pz", Vec2(0.85, 0.5), Vec3(1, 0, 0)};
    return x;
}

// --- usb_cap --------------------------------------------------------------

// Closed shell with grip grooves across the top; made to swivel on a body.
TemplateExpansion expandRotatedCap(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int grooves = getCount(p, "groove_count");

    TemplateExpansion x;
    addPart(x, "shell", 0, PrimitiveTemplateId::Cuboid, cuboid(w, d, 0.94 * h));
    for (int k = 0; k < grooves; ++k) {
        addPart(x, "groove", k, PrimitiveTemplateId::Cuboid, cuboid(0.04 * w, 0.8 * d, 0.06 * h));
        attachEdge(x, "shell", "pz", "groove", k, "nz", spread(k, grooves, 0.6 * w), 0.0);
    }
    x.anchors["mouth"] = {"shell", "px"};
    return x;
}

// Pull-off shell with retention clips along the underside.
TemplateExpansion expandDetachedCap(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int clips = getCount(p, "clip_count");

    TemplateExpansion x;
    addPart(x, "shell", 0, PrimitiveTemplateId::Cuboid, cuboid(w, d, 0.9 * h));
    for (int k = 0; k < clips; ++k) {
        addPart(x, "clip", k, PrimitiveTemplateId::Cuboid, cuboid(0.12 * w, 0.5 * d, 0.1 * h));
        attachEdge(x, "shell", "nz", "clip", k, "pz", spread(k, clips, 0.7 * w), 0.0);
    }
    x.anchors["mouth"] = {"shell", "px"};
    return x;
}

// --- globe_base -----------------------------------------------------------

// Rectangular plate, polygonal column, crown disc, and splayed feet.
// Horizontal layout scales with min(width, depth) so everything stays on the
// plate for any aspect ratio.
TemplateExpansion expandLeggedBase(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int legs = getCount(p, "leg_count");
    const int sides = getCount(p, "column_sides");
    const Scalar rm = 0.5 * std::min(w, d);

    TemplateExpansion x;
    addPart(x, "plate", 0, PrimitiveTemplateId::Cuboid, cuboid(w, d, 0.08 * h));
    addPart(x, "column", 0, PrimitiveTemplateId::PrismN, prismOf(sides, 0.2 * rm, 0.84 * h));
    // Coaxial (not attach) so the plate's top face keeps its visibility.
    coaxialEdge(x, "plate", "column", 0, 0.46 * h);
    addPart(x, "crown", 0, PrimitiveTemplateId::Cylinder, cylinder(0.32 * rm, 0.08 * h));
    coaxialEdge(x, "column", "crown", 0, 0.46 * h);
    for (int k = 0; k < legs; ++k) {
        const Scalar a = 2.0 * kPi * k / legs;
        addPart(x, "leg", k, PrimitiveTemplateId::Cuboid, cuboid(0.28 * rm, 0.1 * rm, 0.2 * h));
        fixedEdge(x, "plate", "leg", k,
                  rotZ(a, Vec3(0.6 * rm * std::cos(a), 0.6 * rm * std::sin(a), 0.14 * h)));
    }
    x.anchors["mount"] = {"crown", "top_cap"};
    x.anchors["mount_axis"] = {"crown", ""};
    return x;
}

// Torus foot ring with radial spokes around a central column.
TemplateExpansion expandRingBase(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int spokes = getCount(p, "spoke_count");
    const int sides = getCount(p, "column_sides");
    const Scalar rm = 0.5 * std::min(w, d);
    const Scalar tube = 0.12 * rm; // ring outer radius = 0.88*rm + tube = rm

    TemplateExpansion x;
    addPart(x, "ring", 0, PrimitiveTemplateId::Torus, torusOf(0.88 * rm, tube));
    addPart(x, "column", 0, PrimitiveTemplateId::PrismN, prismOf(sides, 0.2 * rm, 0.92 * h));
    coaxialEdge(x, "ring", "column", 0, 0.46 * h - tube);
    addPart(x, "crown", 0, PrimitiveTemplateId::Cylinder, cylinder(0.32 * rm, 0.08 * h));
    coaxialEdge(x, "column", "crown", 0, 0.5 * h);
    for (int k = 0; k < spokes; ++k) {
        const Scalar a = 2.0 * kPi * k / spokes;
        addPart(x, "spoke", k, PrimitiveTemplateId::Cuboid, cuboid(0.56 * rm, 0.08 * rm, 0.04 * h));
        fixedEdge(x, "ring", "spoke", k,
                  rotZ(a, Vec3(0.6 * rm * std::cos(a), 0.6 * rm * std::sin(a), 0.0)));
    }
    x.anchors["mount"] = {"crown", "top_cap"};
    x.anchors["mount_axis"] = {"crown", ""};
    return x;
}

// --- globe_bracket --------------------------------------------------------

// Shared ring-on-stem construction: a vertical stem of length height - width
// carrying an upright torus ring of outer diameter `width` (tube diameter
// `depth`) with polar pivot pins bridging toward the cradled ball.
void addRingAndPins(TemplateExpansion& x, Scalar w, Scalar d, Scalar stem_len) {
    const Scalar major = 0.5 * (w - d);
    const Scalar minor = 0.5 * d;
    const Scalar ring_z = 0.5 * stem_len + major + minor;
    addPart(x, "ring", 0, PrimitiveTemplateId::Torus, torusOf(major, minor));
    fixedEdge(x, "stem", "ring", 0, rotX(0.5 * kPi, Vec3(0, 0, ring_z)));
    // Pins sit at the ring's inner rim (ring-local +-y = world +-z), poking
    // into the tube and across most of the ball clearance gap.
    addPart(x, "pin_top", 0, PrimitiveTemplateId::Cylinder, cylinder(0.15 * d, 0.25 * d));
    fixedEdge(x, "ring", "pin_top", 0, rotX(-0.5 * kPi, Vec3(0, major - minor, 0)));
    addPart(x, "pin_bottom", 0, PrimitiveTemplateId::Cylinder, cylinder(0.15 * d, 0.25 * d));
    fixedEdge(x, "ring", "pin_bottom", 0, rotX(0.5 * kPi, Vec3(0, -(major - minor), 0)));
    x.anchors["foot_axis"] = {"stem", ""};
    x.anchors["cradle"] = {"ring", ""};
    // Inner rim at the ring top; its inward normal is the world -z polar axis.
    x.axis_anchors["polar"] = {"ring", "ring", Vec2(0.25, 0.5), Vec3(1, 0, 0)};
}

TemplateExpansion expandSimpleBracket(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int collars = getCount(p, "collar_count");
    const Scalar stem_len = h - w;

    TemplateExpansion x;
    addPart(x, "stem", 0, PrimitiveTemplateId::Cylinder, cylinder(0.35 * d, stem_len));
    addRingAndPins(x, w, d, stem_len);
    for (int k = 0; k < collars; ++k) {
        addPart(x, "collar", k, PrimitiveTemplateId::Cylinder, cylinder(0.45 * d, 0.08 * stem_len));
        coaxialEdge(x, "stem", "collar", k, (k + 1) * 0.5 * stem_len / (collars + 1));
    }
    return x;
}

// Polygonal stem variant with a torus boss at the foot.
TemplateExpansion expandComplexBracket(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int collars = getCount(p, "collar_count");
    const int sides = getCount(p, "stem_sides");
    const Scalar stem_len = h - w;

    TemplateExpansion x;
    addPart(x, "stem", 0, PrimitiveTemplateId::PrismN, prismOf(sides, 0.3 * d, stem_len));
    addRingAndPins(x, w, d, stem_len);
    addPart(x, "boss", 0, PrimitiveTemplateId::Torus, torusOf(0.4 * d, 0.1 * d));
    fixedEdge(x, "stem", "boss", 0, shift(Vec3(0, 0, -0.5 * stem_len + 0.1 * d)));
    for (int k = 0; k < collars; ++k) {
        addPart(x, "collar", k, PrimitiveTemplateId::Cylinder, cylinder(0.45 * d, 0.06 * stem_len));
        coaxialEdge(x, "stem", "collar", k, (k + 1) * 0.5 * stem_len / (collars + 1));
    }
    return x;
}

// --- wm_body --------------------------------------------------------------

// Drum box with a full-height front panel, a top control strip, and vent
// slats across the back.
TemplateExpansion expandFrontLoadBody(const ParamMap& p) {
    const Scalar w = get(p, "width"), d = get(p, "depth"), h = get(p, "height");
    const int vents = getCount(p, "vent_count");

    TemplateExpansion x;
    addPart(x, "box", 0, PrimitiveTemplateId::Cuboid, cuboid(0.88 * w, d, 0.94 * h));
    addPart(x, "panel", 0, PrimitiveTemplateId::Cuboid, cuboid(0.08 * w, d, h));
    attachEdge(x, "box", "px", "panel", 0, "nx");
    addPart(x, "strip", 0, PrimitiveTemplateId::Cuboid, cuboid(0.1 * w, 0.9 * d, 0.03 * h));
    attachEdge(x, "box", "pz", "strip", 0, "nz", 0.38 * w, 0.0);
    for (int k = 0; k < vents; ++k) {
        addPart(x, "vent", k, PrimitiveTemplateId::Cuboid, cuboid(0.04 * w, 0.06 * d, 0.5 * h));
        attachEdge(x, "box", "nx", "vent", k, "px", spread(k, vents, 0.8 * d), 0.0);
    }
    x.anchors["front"] = {"panel", "px"};
    x.axis_anchors["hinge"] = {"panel", "px", Vec2(0.06, 0.46), Vec3(0, 0, 1)};
    x.axis_anchors["tray_slide"] = {"panel", "px", Vec2(0.78, 0.92), Vec3(1, 0, 0)};
    return x;
}

// --- wm_door --------------------------------------------------------------

// Porthole door: window disc (local +z faces out once mounted), surrounding
// torus rim, and a bolt circle on the rim's front. `width` is the door's
// thickness along its axis; `height` its outer diameter (`depth` unused).
TemplateExpansion expandDoorAssembly(const ParamMap& p) {
    const Scalar w = get(p, "width"), h = get(p, "height");
    const int bolts = getCount(p, "bolt_count");
    const Scalar window_r = 0.5 * (h - w);

    TemplateExpansion x;
    addPart(x, "window", 0, PrimitiveTemplateId::Cylinder, cylinder(window_r, 0.6 * w));
    addPart(x, "rim", 0, PrimitiveTemplateId::Torus, torusOf(window_r, 0.5 * w));
    fixedEdge(x, "window", "rim", 0, shift(Vec3(0, 0, 0.2 * w)));
    for (int k = 0; k < bolts; ++k) {
        const Scalar a = 2.0 * kPi * (k + 0.5) / bolts;
        addPart(x, "bolt", k, PrimitiveTemplateId::Cylinder, cylinder(0.04 * window_r, 0.1 * w));
        // Just clear of the window face (rim-local z), embedded in the tube.
        fixedEdge(x, "rim", "bolt", k,
                  shift(Vec3(0.8 * window_r * std::cos(a), 0.8 * window_r * std::sin(a), 0.16 * w)));
    }
    x.anchors["back"] = {"window", "bottom_cap"};
    return x;
}

// --- registry ---------------------------------------------------------------

std::vector<AdvancedTemplate> buildRegistry() {
    std::vector<AdvancedTemplate> reg;
    const auto add = [&reg](std::string name, std::string role,
                            std::vector<TemplateParamSpec> params,
                            std::map<std::string, std::string> counts,
                            TemplateExpansion (*expand)(const ParamMap&)) {
        AdvancedTemplate t;
        t.name = std::move(name);
        t.role = std::move(role);
        t.params = std::move(params);
        t.count_param_of_part = std::move(counts);
        t.expand = expand;
        reg.push_back(std::move(t));
    };

    add("rounded_rect_body", "usb_body",
        {{"width", 0.055, 0.03, 0.09, false},
         {"depth", 0.018, 0.01, 0.03, false},
         {"height", 0.011, 0.006, 0.018, false},
         {"rib_count", 3, 2, 6, true}},
        {{"rib", "rib_count"}}, expandRoundedRectBody);
    add("round_tail_body", "usb_body",
        {{"width", 0.055, 0.03, 0.09, false},
         {"depth", 0.018, 0.01, 0.03, false},
         {"height", 0.011, 0.006, 0.018, false},
         {"rib_count", 3, 2, 6, true}},
        {{"rib", "rib_count"}}, expandRoundTailBody);
    add("rotated_cap", "usb_cap",
        {{"width", 0.025, 0.015, 0.045, false},
         {"depth", 0.02, 0.012, 0.034, false},
         {"height", 0.013, 0.008, 0.02, false},
         {"groove_count", 2, 1, 4, true}},
        {{"groove", "groove_count"}}, expandRotatedCap);
    add("detached_cap", "usb_cap",
        {{"width", 0.025, 0.015, 0.045, false},
         {"depth", 0.02, 0.012, 0.034, false},
         {"height", 0.013, 0.008, 0.02, false},
         {"clip_count", 3, 2, 4, true}},
        {{"clip", "clip_count"}}, expandDetachedCap);
    add("legged_base", "globe_base",
        {{"width", 0.16, 0.1, 0.24, false},
         {"depth", 0.16, 0.1, 0.24, false},
         {"height", 0.09, 0.05, 0.15, false},
         {"leg_count", 4, 3, 6, true},
         {"column_sides", 8, 6, 12, true}},
        {{"leg", "leg_count"}}, expandLeggedBase);
    add("ring_base", "globe_base",
        {{"width", 0.16, 0.1, 0.24, false},
         {"depth", 0.16, 0.1, 0.24, false},
         {"height", 0.09, 0.05, 0.15, false},
         {"spoke_count", 5, 3, 8, true},
         {"column_sides", 8, 6, 12, true}},
        {{"spoke", "spoke_count"}}, expandRingBase);
    add("simple_bracket", "globe_bracket",
        {{"width", 0.22, 0.12, 0.26, false},
         {"depth", 0.016, 0.008, 0.03, false},
         {"height", 0.34, 0.3, 0.45, false},
         {"collar_count", 1, 1, 3, true}},
        {{"collar", "collar_count"}}, expandSimpleBracket);
    add("complex_bracket", "globe_bracket",
        {{"width", 0.22, 0.12, 0.26, false},
         {"depth", 0.016, 0.008, 0.03, false},
         {"height", 0.34, 0.3, 0.45, false},
         {"collar_count", 2, 2, 4, true},
         {"stem_sides", 6, 5, 9, true}},
        {{"collar", "collar_count"}}, expandComplexBracket);
    add("front_load_body", "wm_body",
        {{"width", 0.6, 0.45, 0.75, false},
         {"depth", 0.6, 0.45, 0.75, false},
         {"height", 0.85, 0.6, 1.1, false},
         {"vent_count", 4, 2, 6, true}},
        {{"vent", "vent_count"}}, expandFrontLoadBody);
    add("door_assembly", "wm_door",
        {{"width", 0.12, 0.05, 0.15, false},
         {"depth", 0.45, 0.3, 0.64, false},
         {"height", 0.45, 0.3, 0.64, false},
         {"bolt_count", 6, 4, 8, true}},
        {{"bolt", "bolt_count"}}, expandDoorAssembly);
    return reg;
}

const std::vector<AdvancedTemplate>& registry() {
    static const std::vector<AdvancedTemplate> reg = buildRegistry();
    return reg;
}

} // namespace

TemplateExpansion defaultExpansion(const AdvancedTemplate& t) {
    ParamMap defaults;
    for (const auto& spec : t.params) defaults[spec.name] = spec.value;
    return t.expand(defaults);
}

const TemplateParamSpec* AdvancedTemplate::findParam(const std::string& name) const {
    for (const auto& spec : params)
        if (name == spec.name) return &spec;
    return nullptr;
}

const AdvancedTemplate* findAdvancedTemplate(const std::string& name) {
    for (const auto& t : registry())
        if (t.name == name) return &t;
    return nullptr;
}

std::vector<const AdvancedTemplate*> templatesForRole(const std::string& role) {
    std::vector<const AdvancedTemplate*> out;
    for (const auto& t : registry())
        if (t.role == role) out.push_back(&t);
    return out;
}

std::vector<std::string> advancedTemplateNames() {
    std::vector<std::string> out;
    for (const auto& t : registry()) out.push_back(t.name);
    return out;
}

} // namespace artipg
