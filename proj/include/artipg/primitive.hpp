#pragma once

#include "artipg/types.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace artipg {

enum class PrimitiveTemplateId : std::uint8_t { Cuboid, Cylinder, Sphere, Torus, PrismN };

const char* templateName(PrimitiveTemplateId id);
PrimitiveTemplateId templateFromName(const std::string& name); // throws UnknownTemplate

// Declared intrinsic parameter of a template, with its admissible range.
struct ParamSpec {
    const char* name;
    Scalar lo;
    Scalar hi;
    bool integer;
};

std::span<const ParamSpec> templateParams(PrimitiveTemplateId id);

using ParamMap = std::map<std::string, Scalar>;

// A posed elementary primitive. Immutable after construction.
struct PrimitiveInstance {
    std::string id;
    PrimitiveTemplateId tmpl = PrimitiveTemplateId::Cuboid;
    ParamMap intrinsic;
    Pose pose;
    std::string semantic_label;

    Scalar param(const std::string& name) const;
};

// Validates the parameter map against the template's declared names and
// ranges, and the pose quaternion against unit length. Throws
// MissingParameter / OutOfRange / NonUnitQuaternion.
PrimitiveInstance instantiatePrimitive(PrimitiveTemplateId tmpl, const ParamMap& intrinsic,
                                       const Pose& pose, std::string id = {},
                                       std::string semantic_label = {});

// --- Surface patches ------------------------------------------------------
//
// Every template exposes a fixed list of named patches, each parameterized
// over (u, v) in [0,1]^2:
//   Cuboid   px nx py ny pz nz   (u,v) span the face; tangent axes chosen so
//                                 that e_u x e_v equals the outward normal
//   Cylinder lateral top_cap bottom_cap
//            lateral: u -> angle 2*pi*u from +x, v -> height fraction
//            caps:    u -> angle, v -> radius fraction (v = 0 at center)
//   Sphere   surface: u -> azimuth 2*pi*u, v -> polar angle v*pi from +z
//   Torus    ring: u -> major angle about z, v -> minor angle (v = 0 at the
//            outer equator)
//   PrismN   lateral top_cap bottom_cap; lateral u walks the polygon
//            perimeter starting at vertex 0 (on the +x axis), caps are the
//            fan (u -> boundary point, v -> radius fraction)

int patchCount(PrimitiveTemplateId id);
const char* patchName(PrimitiveTemplateId id, int patch);
int patchIndex(PrimitiveTemplateId id, const std::string& name); // throws UnknownPatch

// Whether the patch's u (resp. v) coordinate is an angle that wraps at 1
// (lateral and cap angles, sphere azimuth, torus angles).
bool patchUPeriodic(PrimitiveTemplateId id, int patch);
bool patchVPeriodic(PrimitiveTemplateId id, int patch);

// World-space surface point. Throws UnknownPatch / ParameterOutOfDomain.
Vec3 surfacePoint(const PrimitiveInstance& inst, int patch, Scalar u, Scalar v);
Vec3 localSurfacePoint(PrimitiveTemplateId tmpl, const ParamMap& intrinsic, int patch, Scalar u,
                       Scalar v);

struct SurfaceFrame {
    Vec3 normal;    // unit, outward
    Vec3 tangent;   // unit, direction of d(position)/du (limit at singular points)
    Vec3 bitangent; // normal x tangent
    bool degenerate = false;
};

// Right-handed orthonormal frame at a surface point. At parameterization
// singularities (sphere poles, cap centers) the tangent is the limit of the
// u-derivative direction along the fixed meridian u; the frame is flagged
// degenerate but still usable.
SurfaceFrame surfaceFrame(const PrimitiveInstance& inst, int patch, Scalar u, Scalar v);

// Closed-form areas, m^2.
Scalar surfaceArea(const PrimitiveInstance& inst, int patch);
Scalar surfaceArea(const PrimitiveInstance& inst);

// Support function of the instance's convex hull along a world direction
// (exact for all templates; the torus hull is its Minkowski circle+ball, and
// its support value coincides with the torus surface's own support).
Scalar support(const PrimitiveInstance& inst, const Vec3& world_dir);
Eigen::AlignedBox3d boundingBox(const PrimitiveInstance& inst);

// Exact solid-containment test (boundary counts as inside at tol = 0).
bool containsPoint(const PrimitiveInstance& inst, const Vec3& world_point, Scalar tol = 0.0);

// Maps a uniform (a, b) in [0,1)^2 to patch (u, v) such that sampling density
// is uniform in surface area.
Vec2 areaUniformUv(PrimitiveTemplateId tmpl, const ParamMap& intrinsic, int patch, Scalar a,
                   Scalar b);

// A point analytically bound to a primitive patch; position and normal are
// cached evaluations of surfacePoint / surfaceFrame and can be recomputed
// from the binding at any time.
struct SurfaceSample {
    std::uint32_t instance = 0;
    std::uint16_t patch = 0;
    Vec2 uv = Vec2::Zero();
    Vec3 position = Vec3::Zero();
    Vec3 normal = Vec3::UnitZ();
    bool visible = true;
};

// Per-instance, per-patch visibility flags.
class VisibilityMask {
public:
    VisibilityMask() = default;
    explicit VisibilityMask(std::span<const PrimitiveInstance> instances);

    bool visible(std::uint32_t instance, int patch) const;
    void setVisible(std::uint32_t instance, int patch, bool visible);
    std::size_t size() const { return bits_.size(); }

private:
    std::vector<std::uint8_t> bits_; // one byte per instance, one bit per patch
};

// n samples distributed over the visible patches with expected counts
// proportional to patch area (multinomial allocation, then stratified
// inverse-CDF placement within each patch). Deterministic for a fixed seed.
// Throws NoVisibleSurface when no visible patch has positive area.
std::vector<SurfaceSample> sampleSurface(std::span<const PrimitiveInstance> instances,
                                         const VisibilityMask& visibility, int n,
                                         std::uint64_t seed);

} // namespace artipg
