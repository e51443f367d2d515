#pragma once

#include "artipg/detail.hpp"
#include "artipg/manipulate.hpp"
#include "artipg/structure.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace artipg {

// How a manipulated-structure sample found its source on the original
// structure: identity on (patch, uv) for unchanged or resized primitives,
// the recorded source repetition for replicas, cross-template projection for
// swapped parts, symmetry-completed when the source patch is invisible in
// the original (its detail came from completeInvisible), or no source at all
// (new surface with no counterpart; migrates as zero detail).
enum class MapKind : std::uint8_t {
    Parametric,
    Replicated,
    Projected,
    SymmetryCompleted,
    NoSource,
};

struct SampleSource {
    MapKind kind = MapKind::NoSource;
    std::uint32_t instance = 0; // original-structure instance; unset for NoSource
    std::uint16_t patch = 0;
    Vec2 uv = Vec2::Zero();
};

struct MappingStats {
    std::size_t parametric = 0;
    std::size_t replicated = 0;
    std::size_t projected = 0;
    std::size_t symmetry_completed = 0;
    std::size_t no_source = 0;
    // Samples projected through the nearest-band fallback (the source
    // template lacks the requested cap band, e.g. caps onto a sphere).
    std::size_t fallback_band = 0;

    std::size_t total() const {
        return parametric + replicated + projected + symmetry_completed + no_source;
    }
    double noSourceFraction() const {
        const std::size_t n = total();
        return n == 0 ? 0.0 : static_cast<double>(no_source) / static_cast<double>(n);
    }
};

struct PatchPoint {
    std::uint16_t patch = 0;
    Vec2 uv = Vec2::Zero();
};

// Maps a point on dst's surface onto src's surface when the two primitives
// play the same structural role but use different templates. Patches are
// grouped into lateral / top / bottom bands; bands transfer by normalized
// coordinates: lateral u is the perimeter fraction measured counterclockwise
// from where the +x axis crosses the band (cuboid faces walk px, py, nx, ny
// weighted by edge length), lateral v is the raw patch v coordinate
// (height fraction; polar angle / pi on spheres — the cylindrical
// equirectangular convention), caps transfer by (boundary fraction, radius
// fraction) with square faces traversed from the +x edge midpoint. A missing
// band on src falls back to the nearest polar region of its lateral band and
// sets *used_fallback. Same-template pairs return the identity.
PatchPoint projectAcrossTemplates(const PrimitiveInstance& src, const PrimitiveInstance& dst,
                                  std::uint16_t dst_patch, const Vec2& dst_uv,
                                  bool* used_fallback = nullptr);

// Per-sample correspondence from a manipulated structure back to the
// original it was derived from. Built once per manipulation; resolution is a
// pure function of the sample's binding.
class SampleMapping {
public:
    // Source binding for a sample on the manipulated structure.
    SampleSource resolve(std::uint32_t instance, std::uint16_t patch, const Vec2& uv) const;
    SampleSource resolve(const SurfaceSample& sample) const {
        return resolve(sample.instance, sample.patch, sample.uv);
    }

    // Kind counts over a sample set (for the per-object manifest record).
    MappingStats stats(std::span<const SurfaceSample> samples) const;

    // Original-structure instance feeding a manipulated instance, -1 if none.
    int sourceInstance(std::uint32_t instance) const;

    const std::vector<PrimitiveInstance>& sourceInstances() const { return src_instances_; }
    const std::vector<PrimitiveInstance>& newInstances() const { return dst_instances_; }

private:
    friend SampleMapping buildMapping(const Structure&, const Structure&,
                                      const AlterationTrace&);

    struct InstanceMap {
        int src = -1;
        MapKind kind = MapKind::NoSource;
        bool cross_template = false;
    };

    SampleSource resolveImpl(std::uint32_t instance, std::uint16_t patch, const Vec2& uv,
                             bool* used_fallback) const;

    std::vector<InstanceMap> per_instance_;
    std::vector<PrimitiveInstance> src_instances_;
    std::vector<PrimitiveInstance> dst_instances_;
    VisibilityMask src_visibility_;
};

// Builds the correspondence by case analysis on provenance and the trace:
// unchanged or resized primitives map identically on (patch, uv); replicas
// introduced by count changes map to their recorded source repetition
// (repetitions beyond the original count wrap modulo it); swapped templates
// pair parts by name within the role, transferring uv identically for
// same-template parts and by projectAcrossTemplates otherwise; parts with no
// original counterpart become NoSource. Throws TraceMismatch when the trace
// names declarations the original structure does not have or records
// replica sources inconsistent with the structures.
SampleMapping buildMapping(const Structure& original, const Structure& manipulated,
                           const AlterationTrace& trace);

// Whether migrated detail vectors keep their absolute length or scale with
// the square root of the patch area ratio when primitives resize.
enum class DetailScale : std::uint8_t { Absolute, Proportional };

// Carries a surface-relative detail field from the original structure onto
// the manipulated structure's samples: each sample fetches the nearest
// source-side relative vector through the mapping (zero for NoSource),
// decodes it in its own surface frame, and offsets its position. The field
// must cover every resolved source patch (run completeInvisible first);
// otherwise throws IncompleteField. Output order matches `samples`.
std::vector<Vec3> migrateDetails(const DetailField& relative, const SampleMapping& mapping,
                                 std::span<const SurfaceSample> samples,
                                 DetailScale scale = DetailScale::Absolute);

} // namespace artipg
