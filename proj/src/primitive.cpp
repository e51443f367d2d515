#include "artipg/primitive.hpp"

#include "artipg/rng.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <sstream>

namespace artipg {
namespace {

constexpr Scalar kPi = std::numbers::pi_v<Scalar>;
constexpr Scalar kTwoPi = 2.0 * std::numbers::pi_v<Scalar>;

// Declared admissible ranges. Lengths are meters; the lower bound stands in
// for "strictly positive" since ranges are closed intervals.
constexpr Scalar kMinLength = 1e-6;
constexpr Scalar kMaxLength = 100.0;

constexpr ParamSpec kCuboidParams[] = {
    {"size_x", kMinLength, kMaxLength, false},
    {"size_y", kMinLength, kMaxLength, false},
    {"size_z", kMinLength, kMaxLength, false},
};
constexpr ParamSpec kCylinderParams[] = {
    {"radius", kMinLength, kMaxLength, false},
    {"height", kMinLength, kMaxLength, false},
};
constexpr ParamSpec kSphereParams[] = {
    {"radius", kMinLength, kMaxLength, false},
};
constexpr ParamSpec kTorusParams[] = {
    {"major_radius", kMinLength, kMaxLength, false},
    {"minor_radius", kMinLength, kMaxLength, false},
};
constexpr ParamSpec kPrismParams[] = {
    {"side_count", 3, 64, true},
    {"circumradius", kMinLength, kMaxLength, false},
    {"height", kMinLength, kMaxLength, false},
};

constexpr const char* kCuboidPatches[] = {"px", "nx", "py", "ny", "pz", "nz"};
constexpr const char* kCylinderPatches[] = {"lateral", "top_cap", "bottom_cap"};
constexpr const char* kSpherePatches[] = {"surface"};
constexpr const char* kTorusPatches[] = {"ring"};
constexpr const char* kPrismPatches[] = {"lateral", "top_cap", "bottom_cap"};

std::span<const char* const> patchTable(PrimitiveTemplateId id) {
    switch (id) {
    case PrimitiveTemplateId::Cuboid: return kCuboidPatches;
    case PrimitiveTemplateId::Cylinder: return kCylinderPatches;
    case PrimitiveTemplateId::Sphere: return kSpherePatches;
    case PrimitiveTemplateId::Torus: return kTorusPatches;
    case PrimitiveTemplateId::PrismN: return kPrismPatches;
    }
    fail(Errc::UnknownTemplate, "invalid template id");
}

Scalar getParam(const ParamMap& intrinsic, const char* name, PrimitiveTemplateId tmpl) {
    auto it = intrinsic.find(name);
    if (it == intrinsic.end())
        fail(Errc::MissingParameter, std::string(templateName(tmpl)) + "." + name);
    return it->second;
}

// uv values arriving from migration or inverse-CDF maps may sit a few ulps
// outside [0,1]; anything worse is a caller bug.
constexpr Scalar kUvSlop = 1e-9;

Scalar clampCoord(Scalar x, const char* which) {
    if (!(x >= -kUvSlop && x <= 1.0 + kUvSlop))
        fail(Errc::ParameterOutOfDomain,
             std::string(which) + " = " + std::to_string(x) + " outside [0,1]");
    return std::clamp(x, 0.0, 1.0);
}

// --- Regular n-gon cross-section helpers (PrismN) ---------------------------

struct PrismSection {
    int n;
    Scalar c; // circumradius

    Scalar vertexAngle(int k) const { return kTwoPi * static_cast<Scalar>(k) / n; }
    Vec2 vertex(int k) const {
        const Scalar a = vertexAngle(k);
        return {c * std::cos(a), c * std::sin(a)};
    }
    Scalar sideLength() const { return 2.0 * c * std::sin(kPi / n); }
    Scalar apothem() const { return c * std::cos(kPi / n); }
    Scalar perimeter() const { return static_cast<Scalar>(n) * sideLength(); }
    Scalar area() const { return 0.5 * n * c * c * std::sin(kTwoPi / n); }

    // u is perimeter fraction; side k runs vertex k -> vertex k+1.
    void locate(Scalar u, int& k, Scalar& f) const {
        const Scalar t = u * n;
        k = std::min(static_cast<int>(t), n - 1);
        f = t - k;
    }
    Vec2 boundary(Scalar u) const {
        int k;
        Scalar f;
        locate(u, k, f);
        const Vec2 a = vertex(k), b = vertex(k + 1);
        return a + f * (b - a);
    }
    Vec2 sideNormal(int k) const {
        const Scalar a = vertexAngle(k) + kPi / n;
        return {std::cos(a), std::sin(a)};
    }
    Vec2 edgeDir(int k) const {
        const Vec2 m = sideNormal(k);
        return {-m.y(), m.x()}; // CCW walk: edge is the normal rotated +90 deg
    }
};

PrismSection prismSection(const ParamMap& p, PrimitiveTemplateId tmpl) {
    return {static_cast<int>(std::llround(getParam(p, "side_count", tmpl))),
            getParam(p, "circumradius", tmpl)};
}

// --- Local parameterizations ------------------------------------------------

Vec3 cuboidPoint(Scalar sx, Scalar sy, Scalar sz, int patch, Scalar u, Scalar v) {
    switch (patch) {
    case 0: return {0.5 * sx, (u - 0.5) * sy, (v - 0.5) * sz};  // px
    case 1: return {-0.5 * sx, (0.5 - u) * sy, (v - 0.5) * sz}; // nx
    case 2: return {(0.5 - u) * sx, 0.5 * sy, (v - 0.5) * sz};  // py
    case 3: return {(u - 0.5) * sx, -0.5 * sy, (v - 0.5) * sz}; // ny
    case 4: return {(u - 0.5) * sx, (v - 0.5) * sy, 0.5 * sz};  // pz
    case 5: return {(u - 0.5) * sx, (0.5 - v) * sy, -0.5 * sz}; // nz
    default: break;
    }
    fail(Errc::UnknownPatch, "cuboid patch index " + std::to_string(patch));
}

// Per-face (normal, tangent) pairs; tangent is the u-axis, chosen so that
// u-axis x v-axis = outward normal on every face.
void cuboidFrame(int patch, Vec3& n, Vec3& t) {
    static const Vec3 kN[6] = {{1, 0, 0}, {-1, 0, 0}, {0, 1, 0}, {0, -1, 0}, {0, 0, 1}, {0, 0, -1}};
    static const Vec3 kT[6] = {{0, 1, 0}, {0, -1, 0}, {-1, 0, 0}, {1, 0, 0}, {1, 0, 0}, {1, 0, 0}};
    n = kN[patch];
    t = kT[patch];
}

struct LocalFrame {
    Vec3 point;
    Vec3 normal;
    Vec3 tangent;
    bool degenerate = false;
};

LocalFrame localEval(PrimitiveTemplateId tmpl, const ParamMap& p, int patch, Scalar u, Scalar v) {
    LocalFrame out;
    switch (tmpl) {
    case PrimitiveTemplateId::Cuboid: {
        const Scalar sx = getParam(p, "size_x", tmpl);
        const Scalar sy = getParam(p, "size_y", tmpl);
        const Scalar sz = getParam(p, "size_z", tmpl);
        if (patch < 0 || patch >= 6)
            fail(Errc::UnknownPatch, "cuboid patch index " + std::to_string(patch));
        out.point = cuboidPoint(sx, sy, sz, patch, u, v);
        cuboidFrame(patch, out.normal, out.tangent);
        return out;
    }
    case PrimitiveTemplateId::Cylinder: {
        const Scalar r = getParam(p, "radius", tmpl);
        const Scalar h = getParam(p, "height", tmpl);
        const Scalar phi = kTwoPi * u;
        const Scalar cp = std::cos(phi), sp = std::sin(phi);
        out.tangent = {-sp, cp, 0.0}; // d/du direction, also the cap-center limit
        switch (patch) {
        case 0: // lateral
            out.point = {r * cp, r * sp, (v - 0.5) * h};
            out.normal = {cp, sp, 0.0};
            return out;
        case 1: // top_cap (v = 0 at center)
            out.point = {r * v * cp, r * v * sp, 0.5 * h};
            out.normal = Vec3::UnitZ();
            out.degenerate = (v == 0.0);
            return out;
        case 2: // bottom_cap
            out.point = {r * v * cp, r * v * sp, -0.5 * h};
            out.normal = -Vec3::UnitZ();
            out.degenerate = (v == 0.0);
            return out;
        default: fail(Errc::UnknownPatch, "cylinder patch index " + std::to_string(patch));
        }
    }
    case PrimitiveTemplateId::Sphere: {
        const Scalar r = getParam(p, "radius", tmpl);
        if (patch != 0) fail(Errc::UnknownPatch, "sphere patch index " + std::to_string(patch));
        const Scalar theta = v * kPi, phi = kTwoPi * u;
        const Scalar st = std::sin(theta), ct = std::cos(theta);
        const Scalar sp = std::sin(phi), cp = std::cos(phi);
        out.point = {r * st * cp, r * st * sp, r * ct};
        out.normal = {st * cp, st * sp, ct};
        out.tangent = {-sp, cp, 0.0}; // exact off the poles, fixed-meridian limit at them
        out.degenerate = (v == 0.0 || v == 1.0);
        return out;
    }
    case PrimitiveTemplateId::Torus: {
        const Scalar R = getParam(p, "major_radius", tmpl);
        const Scalar r = getParam(p, "minor_radius", tmpl);
        if (patch != 0) fail(Errc::UnknownPatch, "torus patch index " + std::to_string(patch));
        const Scalar phi = kTwoPi * u, psi = kTwoPi * v; // psi = 0 at the outer equator
        const Scalar cp = std::cos(phi), sp = std::sin(phi);
        const Scalar cq = std::cos(psi), sq = std::sin(psi);
        const Scalar ring = R + r * cq;
        out.point = {ring * cp, ring * sp, r * sq};
        out.normal = {cq * cp, cq * sp, sq};
        out.tangent = {-sp, cp, 0.0};
        return out;
    }
    case PrimitiveTemplateId::PrismN: {
        const PrismSection sec = prismSection(p, tmpl);
        const Scalar h = getParam(p, "height", tmpl);
        int k;
        Scalar f;
        sec.locate(u, k, f);
        const Vec2 e = sec.edgeDir(k);
        out.tangent = {e.x(), e.y(), 0.0};
        switch (patch) {
        case 0: { // lateral
            const Vec2 b = sec.boundary(u);
            const Vec2 m = sec.sideNormal(k);
            out.point = {b.x(), b.y(), (v - 0.5) * h};
            out.normal = {m.x(), m.y(), 0.0};
            return out;
        }
        case 1:   // top_cap: fan from the centroid, v = 0 at center
        case 2: { // bottom_cap
            const Vec2 b = v * sec.boundary(u);
            const Scalar z = (patch == 1) ? 0.5 * h : -0.5 * h;
            out.point = {b.x(), b.y(), z};
            out.normal = Vec3(0.0, 0.0, (patch == 1) ? 1.0 : -1.0);
            out.degenerate = (v == 0.0);
            return out;
        }
        default: fail(Errc::UnknownPatch, "prism patch index " + std::to_string(patch));
        }
    }
    }
    fail(Errc::UnknownTemplate, "invalid template id");
}

// Inverts the torus minor-angle area CDF: solves R*psi + r*sin(psi) = target
// on [0, 2*pi]. Monotone since R > r.
Scalar invertTorusCdf(Scalar R, Scalar r, Scalar b) {
    const Scalar target = kTwoPi * R * b;
    Scalar lo = 0.0, hi = kTwoPi;
    for (int i = 0; i < 80; ++i) {
        const Scalar mid = 0.5 * (lo + hi);
        if (R * mid + r * std::sin(mid) < target)
            lo = mid;
        else
            hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace

const char* templateName(PrimitiveTemplateId id) {
    switch (id) {
    case PrimitiveTemplateId::Cuboid: return "cuboid";
    case PrimitiveTemplateId::Cylinder: return "cylinder";
    case PrimitiveTemplateId::Sphere: return "sphere";
    case PrimitiveTemplateId::Torus: return "torus";
    case PrimitiveTemplateId::PrismN: return "prism_n";
    }
    return "invalid";
}

PrimitiveTemplateId templateFromName(const std::string& name) {
    for (auto id : {PrimitiveTemplateId::Cuboid, PrimitiveTemplateId::Cylinder,
                    PrimitiveTemplateId::Sphere, PrimitiveTemplateId::Torus,
                    PrimitiveTemplateId::PrismN})
        if (name == templateName(id)) return id;
    fail(Errc::UnknownTemplate, name);
}

std::span<const ParamSpec> templateParams(PrimitiveTemplateId id) {
    switch (id) {
    case PrimitiveTemplateId::Cuboid: return kCuboidParams;
    case PrimitiveTemplateId::Cylinder: return kCylinderParams;
    case PrimitiveTemplateId::Sphere: return kSphereParams;
    case PrimitiveTemplateId::Torus: return kTorusParams;
    case PrimitiveTemplateId::PrismN: return kPrismParams;
    }
    fail(Errc::UnknownTemplate, "invalid template id");
}

Scalar PrimitiveInstance::param(const std::string& name) const {
    auto it = intrinsic.find(name);
    if (it == intrinsic.end()) fail(Errc::MissingParameter, id + "." + name);
    return it->second;
}

PrimitiveInstance instantiatePrimitive(PrimitiveTemplateId tmpl, const ParamMap& intrinsic,
                                       const Pose& pose, std::string id,
                                       std::string semantic_label) {
    const auto specs = templateParams(tmpl);
    ParamMap checked;
    for (const ParamSpec& spec : specs) {
        auto it = intrinsic.find(spec.name);
        if (it == intrinsic.end())
            fail(Errc::MissingParameter, std::string(templateName(tmpl)) + "." + spec.name);
        Scalar value = it->second;
        if (spec.integer) {
            const Scalar rounded = std::round(value);
            if (std::abs(value - rounded) > 1e-9)
                fail(Errc::OutOfRange, std::string(spec.name) + " = " + std::to_string(value) +
                                           " must be an integer");
            value = rounded;
        }
        if (!(value >= spec.lo && value <= spec.hi)) {
            std::ostringstream msg;
            msg << spec.name << " = " << value << " outside [" << spec.lo << ", " << spec.hi
                << "]";
            fail(Errc::OutOfRange, msg.str());
        }
        checked[spec.name] = value;
    }
    for (const auto& [name, value] : intrinsic) {
        if (!checked.count(name))
            fail(Errc::OutOfRange,
                 name + " is not a parameter of template " + templateName(tmpl));
    }
    if (tmpl == PrimitiveTemplateId::Torus &&
        !(checked["minor_radius"] < checked["major_radius"]))
        fail(Errc::OutOfRange, "minor_radius must be < major_radius");
    if (std::abs(pose.rotation.norm() - 1.0) > 1e-9)
        fail(Errc::NonUnitQuaternion,
             "rotation norm " + std::to_string(pose.rotation.norm()) + " for '" + id + "'");
    PrimitiveInstance inst;
    inst.id = std::move(id);
    inst.tmpl = tmpl;
    inst.intrinsic = std::move(checked);
    inst.pose = pose;
    inst.semantic_label = std::move(semantic_label);
    return inst;
}

int patchCount(PrimitiveTemplateId id) { return static_cast<int>(patchTable(id).size()); }

const char* patchName(PrimitiveTemplateId id, int patch) {
    const auto table = patchTable(id);
    if (patch < 0 || patch >= static_cast<int>(table.size()))
        fail(Errc::UnknownPatch,
             std::string(templateName(id)) + " patch index " + std::to_string(patch));
    return table[patch];
}

int patchIndex(PrimitiveTemplateId id, const std::string& name) {
    const auto table = patchTable(id);
    for (std::size_t i = 0; i < table.size(); ++i)
        if (name == table[i]) return static_cast<int>(i);
    fail(Errc::UnknownPatch, std::string(templateName(id)) + " has no patch '" + name + "'");
}

bool patchUPeriodic(PrimitiveTemplateId id, int patch) {
    patchName(id, patch); // validates
    switch (id) {
    case PrimitiveTemplateId::Cuboid: return false;
    case PrimitiveTemplateId::Cylinder:
    case PrimitiveTemplateId::Sphere:
    case PrimitiveTemplateId::Torus:
    case PrimitiveTemplateId::PrismN: return true;
    }
    return false;
}

bool patchVPeriodic(PrimitiveTemplateId id, int patch) {
    patchName(id, patch);
    return id == PrimitiveTemplateId::Torus; // minor angle wraps
}

Vec3 localSurfacePoint(PrimitiveTemplateId tmpl, const ParamMap& intrinsic, int patch, Scalar u,
                       Scalar v) {
    u = clampCoord(u, "u");
    v = clampCoord(v, "v");
    return localEval(tmpl, intrinsic, patch, u, v).point;
}

Vec3 surfacePoint(const PrimitiveInstance& inst, int patch, Scalar u, Scalar v) {
    return inst.pose.apply(localSurfacePoint(inst.tmpl, inst.intrinsic, patch, u, v));
}

SurfaceFrame surfaceFrame(const PrimitiveInstance& inst, int patch, Scalar u, Scalar v) {
    u = clampCoord(u, "u");
    v = clampCoord(v, "v");
    const LocalFrame local = localEval(inst.tmpl, inst.intrinsic, patch, u, v);
    SurfaceFrame frame;
    frame.normal = inst.pose.applyVector(local.normal);
    frame.tangent = inst.pose.applyVector(local.tangent);
    frame.bitangent = frame.normal.cross(frame.tangent);
    frame.degenerate = local.degenerate;
    return frame;
}

Scalar surfaceArea(const PrimitiveInstance& inst, int patch) {
    const ParamMap& p = inst.intrinsic;
    switch (inst.tmpl) {
    case PrimitiveTemplateId::Cuboid: {
        const Scalar sx = getParam(p, "size_x", inst.tmpl);
        const Scalar sy = getParam(p, "size_y", inst.tmpl);
        const Scalar sz = getParam(p, "size_z", inst.tmpl);
        switch (patch) {
        case 0:
        case 1: return sy * sz;
        case 2:
        case 3: return sx * sz;
        case 4:
        case 5: return sx * sy;
        default: break;
        }
        break;
    }
    case PrimitiveTemplateId::Cylinder: {
        const Scalar r = getParam(p, "radius", inst.tmpl);
        const Scalar h = getParam(p, "height", inst.tmpl);
        switch (patch) {
        case 0: return kTwoPi * r * h;
        case 1:
        case 2: return kPi * r * r;
        default: break;
        }
        break;
    }
    case PrimitiveTemplateId::Sphere: {
        const Scalar r = getParam(p, "radius", inst.tmpl);
        if (patch == 0) return 4.0 * kPi * r * r;
        break;
    }
    case PrimitiveTemplateId::Torus: {
        const Scalar R = getParam(p, "major_radius", inst.tmpl);
        const Scalar r = getParam(p, "minor_radius", inst.tmpl);
        if (patch == 0) return 4.0 * kPi * kPi * R * r;
        break;
    }
    case PrimitiveTemplateId::PrismN: {
        const PrismSection sec = prismSection(p, inst.tmpl);
        const Scalar h = getParam(p, "height", inst.tmpl);
        switch (patch) {
        case 0: return sec.perimeter() * h;
        case 1:
        case 2: return sec.area();
        default: break;
        }
        break;
    }
    }
    fail(Errc::UnknownPatch,
         std::string(templateName(inst.tmpl)) + " patch index " + std::to_string(patch));
}

Scalar surfaceArea(const PrimitiveInstance& inst) {
    Scalar total = 0.0;
    for (int patch = 0; patch < patchCount(inst.tmpl); ++patch)
        total += surfaceArea(inst, patch);
    return total;
}

Scalar support(const PrimitiveInstance& inst, const Vec3& world_dir) {
    const Scalar norm = world_dir.norm();
    if (norm < 1e-12) fail(Errc::ParameterOutOfDomain, "support direction must be nonzero");
    const Vec3 d_world = world_dir / norm;
    const Vec3 d = inst.pose.rotation.conjugate() * d_world;
    const ParamMap& p = inst.intrinsic;
    Scalar local = 0.0;
    switch (inst.tmpl) {
    case PrimitiveTemplateId::Cuboid:
        local = 0.5 * (getParam(p, "size_x", inst.tmpl) * std::abs(d.x()) +
                       getParam(p, "size_y", inst.tmpl) * std::abs(d.y()) +
                       getParam(p, "size_z", inst.tmpl) * std::abs(d.z()));
        break;
    case PrimitiveTemplateId::Cylinder:
        local = getParam(p, "radius", inst.tmpl) * std::hypot(d.x(), d.y()) +
                0.5 * getParam(p, "height", inst.tmpl) * std::abs(d.z());
        break;
    case PrimitiveTemplateId::Sphere:
        local = getParam(p, "radius", inst.tmpl);
        break;
    case PrimitiveTemplateId::Torus:
        // Hull = major circle Minkowski-summed with the tube ball; the support
        // point lies on the torus itself, so this is exact for the surface too.
        local = getParam(p, "major_radius", inst.tmpl) * std::hypot(d.x(), d.y()) +
                getParam(p, "minor_radius", inst.tmpl);
        break;
    case PrimitiveTemplateId::PrismN: {
        const PrismSection sec = prismSection(p, inst.tmpl);
        Scalar best = -std::numeric_limits<Scalar>::infinity();
        for (int k = 0; k < sec.n; ++k) {
            const Vec2 vtx = sec.vertex(k);
            best = std::max(best, d.x() * vtx.x() + d.y() * vtx.y());
        }
        local = best + 0.5 * getParam(p, "height", inst.tmpl) * std::abs(d.z());
        break;
    }
    }
    return d_world.dot(inst.pose.translation) + local;
}

Eigen::AlignedBox3d boundingBox(const PrimitiveInstance& inst) {
    Vec3 lo, hi;
    for (int axis = 0; axis < 3; ++axis) {
        Vec3 dir = Vec3::Zero();
        dir[axis] = 1.0;
        hi[axis] = support(inst, dir);
        lo[axis] = -support(inst, -dir);
    }
    return {lo, hi};
}

bool containsPoint(const PrimitiveInstance& inst, const Vec3& world_point, Scalar tol) {
    const Vec3 q = inst.pose.inverse().apply(world_point);
    const ParamMap& p = inst.intrinsic;
    switch (inst.tmpl) {
    case PrimitiveTemplateId::Cuboid:
        return std::abs(q.x()) <= 0.5 * getParam(p, "size_x", inst.tmpl) + tol &&
               std::abs(q.y()) <= 0.5 * getParam(p, "size_y", inst.tmpl) + tol &&
               std::abs(q.z()) <= 0.5 * getParam(p, "size_z", inst.tmpl) + tol;
    case PrimitiveTemplateId::Cylinder:
        return std::hypot(q.x(), q.y()) <= getParam(p, "radius", inst.tmpl) + tol &&
               std::abs(q.z()) <= 0.5 * getParam(p, "height", inst.tmpl) + tol;
    case PrimitiveTemplateId::Sphere:
        return q.norm() <= getParam(p, "radius", inst.tmpl) + tol;
    case PrimitiveTemplateId::Torus: {
        const Scalar R = getParam(p, "major_radius", inst.tmpl);
        const Scalar r = getParam(p, "minor_radius", inst.tmpl);
        return std::hypot(std::hypot(q.x(), q.y()) - R, q.z()) <= r + tol;
    }
    case PrimitiveTemplateId::PrismN: {
        const PrismSection sec = prismSection(p, inst.tmpl);
        if (std::abs(q.z()) > 0.5 * getParam(p, "height", inst.tmpl) + tol) return false;
        const Scalar a = sec.apothem();
        for (int k = 0; k < sec.n; ++k) {
            const Vec2 m = sec.sideNormal(k);
            if (q.x() * m.x() + q.y() * m.y() > a + tol) return false;
        }
        return true;
    }
    }
    fail(Errc::UnknownTemplate, "invalid template id");
}

Vec2 areaUniformUv(PrimitiveTemplateId tmpl, const ParamMap& intrinsic, int patch, Scalar a,
                   Scalar b) {
    a = clampCoord(a, "a");
    b = clampCoord(b, "b");
    switch (tmpl) {
    case PrimitiveTemplateId::Cuboid: return {a, b};
    case PrimitiveTemplateId::Cylinder:
        if (patch == 0) return {a, b};
        return {a, std::sqrt(b)}; // caps: density per unit radius fraction grows linearly
    case PrimitiveTemplateId::Sphere: {
        // cos(theta) uniform in [-1, 1] gives area uniformity.
        const Scalar theta = std::acos(std::clamp(1.0 - 2.0 * b, -1.0, 1.0));
        return {a, theta / kPi};
    }
    case PrimitiveTemplateId::Torus: {
        const Scalar R = getParam(intrinsic, "major_radius", tmpl);
        const Scalar r = getParam(intrinsic, "minor_radius", tmpl);
        return {a, invertTorusCdf(R, r, b) / kTwoPi};
    }
    case PrimitiveTemplateId::PrismN:
        // Lateral: u is arc length. Caps: the fan's area element is v times a
        // u-independent factor (the perpendicular center-to-side distance is
        // the apothem everywhere), so sqrt flattening is exact here too.
        if (patch == 0) return {a, b};
        return {a, std::sqrt(b)};
    }
    fail(Errc::UnknownTemplate, "invalid template id");
}

VisibilityMask::VisibilityMask(std::span<const PrimitiveInstance> instances) {
    bits_.reserve(instances.size());
    for (const PrimitiveInstance& inst : instances) {
        const int count = patchCount(inst.tmpl);
        bits_.push_back(static_cast<std::uint8_t>((1u << count) - 1u));
    }
}

bool VisibilityMask::visible(std::uint32_t instance, int patch) const {
    if (instance >= bits_.size())
        fail(Errc::OutOfRange, "visibility index " + std::to_string(instance));
    return (bits_[instance] >> patch) & 1u;
}

void VisibilityMask::setVisible(std::uint32_t instance, int patch, bool visible) {
    if (instance >= bits_.size())
        fail(Errc::OutOfRange, "visibility index " + std::to_string(instance));
    if (visible)
        bits_[instance] |= static_cast<std::uint8_t>(1u << patch);
    else
        bits_[instance] &= static_cast<std::uint8_t>(~(1u << patch));
}

namespace {
// Sub-stream tags for sampleSurface; patch placement streams are indexed by
// the patch's ordinal in the visible-patch table.
constexpr std::uint64_t kAllocTag = 0x616C6C6F63ull;
constexpr std::uint64_t kPlaceTag = 0x706C616365ull;
} // namespace

std::vector<SurfaceSample> sampleSurface(std::span<const PrimitiveInstance> instances,
                                         const VisibilityMask& visibility, int n,
                                         std::uint64_t seed) {
    if (n < 1) fail(Errc::OutOfRange, "sample count " + std::to_string(n) + " must be >= 1");
    struct PatchRef {
        std::uint32_t instance;
        int patch;
        Scalar cumulative; // upper edge of this patch's area interval
    };
    std::vector<PatchRef> table;
    Scalar total = 0.0;
    for (std::uint32_t i = 0; i < instances.size(); ++i) {
        for (int patch = 0; patch < patchCount(instances[i].tmpl); ++patch) {
            if (!visibility.visible(i, patch)) continue;
            const Scalar area = surfaceArea(instances[i], patch);
            if (area <= 0.0) continue;
            total += area;
            table.push_back({i, patch, total});
        }
    }
    if (table.empty() || total <= 0.0)
        fail(Errc::NoVisibleSurface, "no visible patch with positive area");

    // Multinomial allocation: bin n uniform area positions.
    std::vector<int> counts(table.size(), 0);
    Rng alloc = Rng(seed).split(kAllocTag);
    for (int s = 0; s < n; ++s) {
        const Scalar x = alloc.uniform() * total;
        auto it = std::upper_bound(table.begin(), table.end(), x,
                                   [](Scalar v, const PatchRef& ref) { return v < ref.cumulative; });
        if (it == table.end()) --it;
        ++counts[static_cast<std::size_t>(it - table.begin())];
    }

    std::vector<SurfaceSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (std::size_t t = 0; t < table.size(); ++t) {
        const int k = counts[t];
        if (k == 0) continue;
        const PatchRef& ref = table[t];
        const PrimitiveInstance& inst = instances[ref.instance];
        Rng place = Rng(seed).split(kPlaceTag + t);
        for (int j = 0; j < k; ++j) {
            // Stratify the first inverse-CDF coordinate within the patch.
            const Scalar a = (j + place.uniform()) / k;
            const Scalar b = place.uniform();
            const Vec2 uv = areaUniformUv(inst.tmpl, inst.intrinsic, ref.patch, a, b);
            SurfaceSample sample;
            sample.instance = ref.instance;
            sample.patch = static_cast<std::uint16_t>(ref.patch);
            sample.uv = uv;
            sample.position = surfacePoint(inst, ref.patch, uv.x(), uv.y());
            sample.normal = surfaceFrame(inst, ref.patch, uv.x(), uv.y()).normal;
            sample.visible = true;
            samples.push_back(sample);
        }
    }
    return samples;
}

} // namespace artipg
