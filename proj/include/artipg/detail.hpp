#pragma once

#include "artipg/primitive.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace artipg {

// A point bound to a primitive patch, without cached geometry; position and
// frame are recomputed from the owning instance on demand.
struct FieldBinding {
    std::uint32_t instance = 0;
    std::uint16_t patch = 0;
    Vec2 uv = Vec2::Zero();
};

// Per-sample micro-detail displacements over a structure's surface.
struct DetailField {
    enum class Frame : std::uint8_t { World, SurfaceRelative };

    std::vector<FieldBinding> bindings;
    std::vector<Vec3> vectors; // meters; meaning depends on `frame`
    Frame frame = Frame::World;
    std::string provenance;        // source object identifier
    std::size_t zero_filled = 0;   // completion cells with no symmetric source

    std::size_t size() const { return bindings.size(); }
};

// Minimum-cost deformation taking each sample to its nearest target point:
// delta_i = argmin_{y in Y} ||x_i - y|| - x_i, ties broken by lowest index
// in Y. Accelerated search matches brute force exactly. Throws EmptyInput.
DetailField computeDeformation(std::span<const SurfaceSample> samples,
                               std::span<const Vec3> target);

// Re-expresses world vectors in each binding's (normal, tangent, bitangent)
// frame, making them invariant under rigid motion of the owning primitive.
// decodeRelative is the exact inverse (round-trip within 1e-12).
DetailField encodeRelative(const DetailField& field,
                           std::span<const PrimitiveInstance> instances);
DetailField decodeRelative(const DetailField& field,
                           std::span<const PrimitiveInstance> instances);

// Copies surface-relative details onto invisible patches from their
// symmetry-equivalent regions: mid-plane mirrors for cuboids, axis rotations
// (continuous, or 2*pi/n steps for prisms) and cap-to-cap transfer for the
// rotational templates, azimuthal rotation for spheres, major-circle rotation
// for tori. Coverage is tracked on a per-patch occupancy grid, so a partially
// covered invisible patch is filled only where it lacks samples. Relative
// vectors transfer verbatim. Regions with no covered symmetric source fall
// back to zero detail and are counted in `zero_filled`. Visible patches the
// sampler never hit are completed the same way, so the result covers every
// patch of every instance; covered patches and all existing entries pass
// through untouched.
DetailField completeInvisible(std::span<const PrimitiveInstance> instances,
                              const VisibilityMask& visibility, const DetailField& field);

// Nearest-field-sample lookup in parameter space, per (instance, patch),
// honoring angular wrap-around. Ties resolve to the lowest field index.
class FieldIndex {
public:
    FieldIndex(const DetailField& field, std::span<const PrimitiveInstance> instances);

    // Index into the field's binding/vector arrays, or -1 when the patch has
    // no samples at all.
    std::ptrdiff_t nearest(std::uint32_t instance, std::uint16_t patch, const Vec2& uv) const;

private:
    struct Bucket {
        std::vector<std::uint32_t> entries;
        bool u_wraps = false;
        bool v_wraps = false;
    };
    const DetailField& field_;
    std::vector<std::vector<Bucket>> buckets_; // [instance][patch]
};

} // namespace artipg
