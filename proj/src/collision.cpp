#include "artipg/collision.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace artipg {
namespace {

// Canonical half of the symmetric 26-direction set: coordinate axes, face
// diagonals, and corner diagonals (each direction also tests its opposite
// through the two-sided support interval).
const std::vector<Vec3>& satDirections() {
    static const std::vector<Vec3> dirs = [] {
        std::vector<Vec3> out;
        for (int x = -1; x <= 1; ++x)
            for (int y = -1; y <= 1; ++y)
                for (int z = -1; z <= 1; ++z) {
                    if (x == 0 && y == 0 && z == 0) continue;
                    const Vec3 d(x, y, z);
                    // keep one representative of {d, -d}
                    if (x < 0 || (x == 0 && (y < 0 || (y == 0 && z < 0)))) continue;
                    out.push_back(d.normalized());
                }
        return out;
    }();
    return dirs;
}

bool isSphere(const PrimitiveInstance& i) { return i.tmpl == PrimitiveTemplateId::Sphere; }
bool isTorus(const PrimitiveInstance& i) { return i.tmpl == PrimitiveTemplateId::Torus; }
bool isCylinder(const PrimitiveInstance& i) { return i.tmpl == PrimitiveTemplateId::Cylinder; }

// Penetration depth of two spheres (negative = separated).
Scalar sphereSpherePenetration(const PrimitiveInstance& a, const PrimitiveInstance& b) {
    const Scalar dist = (a.pose.translation - b.pose.translation).norm();
    return a.param("radius") + b.param("radius") - dist;
}

// Exact sphere-torus clearance: distance from the sphere center to the torus
// spine circle versus the summed radii. Sound inside the torus hole, where
// the convex-hull test reports phantom contact.
Scalar sphereTorusPenetration(const PrimitiveInstance& sphere, const PrimitiveInstance& torus) {
    const Vec3 p = torus.pose.inverse().apply(sphere.pose.translation);
    const Scalar ring = std::hypot(p.x(), p.y()) - torus.param("major_radius");
    const Scalar spine_dist = std::hypot(ring, p.z());
    return torus.param("minor_radius") + sphere.param("radius") - spine_dist;
}

// Exact test for cylinders with (numerically) parallel axes: overlap needs
// both radial and axial penetration; the smaller of the two is the depth.
bool parallelCylinderPenetration(const PrimitiveInstance& a, const PrimitiveInstance& b,
                                 Scalar& depth) {
    const Vec3 za = a.pose.rotation * Vec3::UnitZ();
    const Vec3 zb = b.pose.rotation * Vec3::UnitZ();
    if (std::abs(za.dot(zb)) < 1.0 - 1e-9) return false;
    const Vec3 d = b.pose.translation - a.pose.translation;
    const Scalar axial = d.dot(za);
    const Vec3 radial = d - axial * za;
    const Scalar radial_pen = a.param("radius") + b.param("radius") - radial.norm();
    const Scalar axial_pen = 0.5 * (a.param("height") + b.param("height")) - std::abs(axial);
    depth = std::min(radial_pen, axial_pen);
    return true;
}

} // namespace

bool primitivesCollide(const PrimitiveInstance& a, const PrimitiveInstance& b, Scalar tol) {
    const Eigen::AlignedBox3d ba = boundingBox(a);
    const Eigen::AlignedBox3d bb = boundingBox(b);
    for (int k = 0; k < 3; ++k) {
        const Scalar gap = std::max(ba.min()[k] - bb.max()[k], bb.min()[k] - ba.max()[k]);
        if (gap >= -tol) return false;
    }

    if (isSphere(a) && isSphere(b)) return sphereSpherePenetration(a, b) > tol;
    if (isSphere(a) && isTorus(b)) return sphereTorusPenetration(a, b) > tol;
    if (isTorus(a) && isSphere(b)) return sphereTorusPenetration(b, a) > tol;
    if (isCylinder(a) && isCylinder(b)) {
        Scalar depth = 0.0;
        if (parallelCylinderPenetration(a, b, depth)) return depth > tol;
    }

    for (const Vec3& dir : satDirections()) {
        const Scalar a_max = support(a, dir), a_min = -support(a, -dir);
        const Scalar b_max = support(b, dir), b_min = -support(b, -dir);
        const Scalar gap = std::max(a_min - b_max, b_min - a_max);
        if (gap >= -tol) return false;
    }
    return true;
}

std::vector<Violation> checkValidity(const Structure& s, Scalar tol) {
    std::set<std::pair<std::uint32_t, std::uint32_t>> adjacent(s.adjacency.begin(),
                                                               s.adjacency.end());
    std::vector<Violation> out;
    const auto n = static_cast<std::uint32_t>(s.instances.size());
    for (std::uint32_t i = 0; i < n; ++i) {
        for (std::uint32_t j = i + 1; j < n; ++j) {
            if (adjacent.count({i, j})) continue;
            if (primitivesCollide(s.instances[i], s.instances[j], tol))
                out.push_back({s.instances[i].id, s.instances[j].id});
        }
    }
    return out;
}

} // namespace artipg
