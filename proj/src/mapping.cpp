#include "artipg/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <tuple>

namespace artipg {
namespace {

enum class Band : std::uint8_t { Lateral, Top, Bottom };

Band patchBand(PrimitiveTemplateId tmpl, int patch) {
    switch (tmpl) {
    case PrimitiveTemplateId::Cuboid:
        return patch == 4 ? Band::Top : patch == 5 ? Band::Bottom : Band::Lateral;
    case PrimitiveTemplateId::Cylinder:
    case PrimitiveTemplateId::PrismN:
        return patch == 1 ? Band::Top : patch == 2 ? Band::Bottom : Band::Lateral;
    default:
        return Band::Lateral; // sphere / torus: one closed band
    }
}

bool hasBand(PrimitiveTemplateId tmpl, Band band) {
    if (band == Band::Lateral)
        return true;
    return tmpl == PrimitiveTemplateId::Cuboid || tmpl == PrimitiveTemplateId::Cylinder ||
           tmpl == PrimitiveTemplateId::PrismN;
}

Scalar wrap01(Scalar x) {
    x -= std::floor(x);
    if (x >= 1.0)
        x -= 1.0;
    return x < 0.0 ? 0.0 : x;
}

// --- lateral band: s = perimeter fraction counterclockwise (about local +z)
// from where the +x axis crosses the band; w = raw patch v ------------------
//
// Cuboid side faces traverse px, py, nx, ny; each face's native u already
// advances counterclockwise, so walk position is cumulative edge length plus
// u scaled by the face width. The +x crossing sits at the px face center
// (walk position sy/2), matching angle 0 on the rotational templates and
// vertex 0 of the prism.

struct BandCoord {
    Scalar s = 0.0;
    Scalar w = 0.0;
};

BandCoord cuboidLateralCoord(const PrimitiveInstance& inst, int patch, const Vec2& uv) {
    const Scalar sx = inst.param("size_x");
    const Scalar sy = inst.param("size_y");
    const Scalar perimeter = 2.0 * (sx + sy);
    Scalar start = 0.0;
    Scalar len = sy;
    switch (patch) {
    case 0: start = 0.0; len = sy; break;            // px
    case 2: start = sy; len = sx; break;             // py
    case 1: start = sy + sx; len = sy; break;        // nx
    case 3: start = 2.0 * sy + sx; len = sx; break;  // ny
    default: fail(Errc::UnknownPatch, "cuboid patch " + std::to_string(patch) + " is not a side face");
    }
    const Scalar pos = start + uv.x() * len;
    return {wrap01((pos - 0.5 * sy) / perimeter), uv.y()};
}

BandCoord lateralCoord(const PrimitiveInstance& inst, int patch, const Vec2& uv) {
    if (inst.tmpl == PrimitiveTemplateId::Cuboid)
        return cuboidLateralCoord(inst, patch, uv);
    return {uv.x(), uv.y()}; // angle / perimeter u is already the fraction
}

PatchPoint cuboidLateralPoint(const PrimitiveInstance& inst, Scalar s, Scalar w) {
    const Scalar sx = inst.param("size_x");
    const Scalar sy = inst.param("size_y");
    const Scalar perimeter = 2.0 * (sx + sy);
    Scalar pos = wrap01(s) * perimeter + 0.5 * sy;
    if (pos >= perimeter)
        pos -= perimeter;
    if (pos < sy)
        return {0, Vec2(pos / sy, w)};
    if (pos < sy + sx)
        return {2, Vec2((pos - sy) / sx, w)};
    if (pos < 2.0 * sy + sx)
        return {1, Vec2((pos - sy - sx) / sy, w)};
    return {3, Vec2((pos - 2.0 * sy - sx) / sx, w)};
}

PatchPoint lateralPoint(const PrimitiveInstance& inst, Scalar s, Scalar w) {
    if (inst.tmpl == PrimitiveTemplateId::Cuboid)
        return cuboidLateralPoint(inst, s, w);
    return {0, Vec2(s, w)};
}

// --- cap bands: s = boundary fraction counterclockwise from the +x boundary
// crossing (shared section-plane convention with the lateral walk), r =
// radius fraction from the cap center ---------------------------------------

struct CapCoord {
    Scalar s = 0.0;
    Scalar r = 0.0;
};

// Walk position along the rectangle boundary, starting at the +x edge
// midpoint and moving counterclockwise in section coordinates.
Scalar rectWalkFraction(const Vec2& b, Scalar sx, Scalar sy) {
    const Scalar perimeter = 2.0 * (sx + sy);
    // Classify the edge by the dominant normalized coordinate; corners are
    // continuous either way.
    const Scalar nx = b.x() / (0.5 * sx);
    const Scalar ny = b.y() / (0.5 * sy);
    Scalar pos;
    if (std::abs(nx) >= std::abs(ny)) {
        if (nx >= 0.0)
            pos = b.y() >= 0.0 ? b.y() : perimeter - (-b.y()); // right edge
        else
            pos = 0.5 * sy + sx + (0.5 * sy - b.y()); // left edge
    } else {
        if (ny >= 0.0)
            pos = 0.5 * sy + (0.5 * sx - b.x()); // top edge
        else
            pos = 0.5 * sy + sx + sy + (b.x() + 0.5 * sx); // bottom edge
    }
    return wrap01(pos / perimeter);
}

Vec2 rectWalkPoint(Scalar s, Scalar sx, Scalar sy) {
    const Scalar perimeter = 2.0 * (sx + sy);
    const Scalar pos = wrap01(s) * perimeter;
    if (pos < 0.5 * sy)
        return {0.5 * sx, pos};
    if (pos < 0.5 * sy + sx)
        return {0.5 * sx - (pos - 0.5 * sy), 0.5 * sy};
    if (pos < 0.5 * sy + sx + sy)
        return {-0.5 * sx, 0.5 * sy - (pos - 0.5 * sy - sx)};
    if (pos < 0.5 * sy + 2.0 * sx + sy)
        return {-0.5 * sx + (pos - 0.5 * sy - sx - sy), -0.5 * sy};
    return {0.5 * sx, -0.5 * sy + (pos - 0.5 * sy - 2.0 * sx - sy)};
}

// Section-plane point of a cuboid cap's (u, v); nz mirrors v so both caps
// share one counterclockwise-about-+z convention, like the cylinder's caps.
Vec2 cuboidCapPlane(int patch, const Vec2& uv, Scalar sx, Scalar sy) {
    const Scalar x = (uv.x() - 0.5) * sx;
    const Scalar y = patch == 4 ? (uv.y() - 0.5) * sy : (0.5 - uv.y()) * sy;
    return {x, y};
}

CapCoord capCoord(const PrimitiveInstance& inst, int patch, const Vec2& uv) {
    if (inst.tmpl != PrimitiveTemplateId::Cuboid)
        return {uv.x(), uv.y()}; // cylinder / prism caps: u = boundary fraction, v = radius
    const Scalar sx = inst.param("size_x");
    const Scalar sy = inst.param("size_y");
    const Vec2 q = cuboidCapPlane(patch, uv, sx, sy);
    const Scalar ax = std::abs(q.x()) / (0.5 * sx);
    const Scalar ay = std::abs(q.y()) / (0.5 * sy);
    const Scalar r = std::max(ax, ay); // fraction of the ray from center to boundary
    if (r <= 0.0)
        return {0.0, 0.0};
    return {rectWalkFraction(q / r, sx, sy), r};
}

PatchPoint capPoint(const PrimitiveInstance& inst, Band band, const CapCoord& c) {
    if (inst.tmpl != PrimitiveTemplateId::Cuboid) {
        const std::uint16_t patch = band == Band::Top ? 1 : 2;
        return {patch, Vec2(c.s, c.r)};
    }
    const Scalar sx = inst.param("size_x");
    const Scalar sy = inst.param("size_y");
    const Vec2 q = c.r * rectWalkPoint(c.s, sx, sy);
    const Scalar u = q.x() / sx + 0.5;
    if (band == Band::Top)
        return {4, Vec2(u, q.y() / sy + 0.5)};
    return {5, Vec2(u, 0.5 - q.y() / sy)};
}

// Closest stand-in when the source template has no cap at all: the polar
// region of its one closed band. Sphere caps collapse onto the poles
// (center -> pole, rim -> equator); torus caps onto the top / bottom circles
// of the tube (rim -> outer equator).
PatchPoint nearestBandFallback(PrimitiveTemplateId tmpl, Band band, const CapCoord& c) {
    if (tmpl == PrimitiveTemplateId::Sphere) {
        const Scalar v = band == Band::Top ? 0.5 * c.r : 1.0 - 0.5 * c.r;
        return {0, Vec2(c.s, v)};
    }
    const Scalar v = band == Band::Top ? 0.25 * (1.0 - c.r) : wrap01(0.75 + 0.25 * c.r);
    return {0, Vec2(c.s, v)};
}

} // namespace

PatchPoint projectAcrossTemplates(const PrimitiveInstance& src, const PrimitiveInstance& dst,
                                  std::uint16_t dst_patch, const Vec2& dst_uv,
                                  bool* used_fallback) {
    if (used_fallback)
        *used_fallback = false;
    if (dst_patch >= patchCount(dst.tmpl))
        fail(Errc::UnknownPatch, "patch " + std::to_string(dst_patch) + " on " +
                                     templateName(dst.tmpl));
    if (src.tmpl == dst.tmpl)
        return {dst_patch, dst_uv};
    const Band band = patchBand(dst.tmpl, dst_patch);
    if (band == Band::Lateral) {
        const BandCoord c = lateralCoord(dst, dst_patch, dst_uv);
        return lateralPoint(src, c.s, c.w);
    }
    const CapCoord c = capCoord(dst, dst_patch, dst_uv);
    if (!hasBand(src.tmpl, band)) {
        if (used_fallback)
            *used_fallback = true;
        return nearestBandFallback(src.tmpl, band, c);
    }
    return capPoint(src, band, c);
}

SampleSource SampleMapping::resolveImpl(std::uint32_t instance, std::uint16_t patch,
                                        const Vec2& uv, bool* used_fallback) const {
    if (used_fallback)
        *used_fallback = false;
    if (instance >= per_instance_.size())
        fail(Errc::OutOfRange, "instance " + std::to_string(instance) + " outside the mapping");
    const InstanceMap& m = per_instance_[instance];
    if (m.src < 0)
        return {};
    SampleSource out;
    out.kind = m.kind;
    out.instance = static_cast<std::uint32_t>(m.src);
    if (m.cross_template) {
        const PatchPoint p = projectAcrossTemplates(src_instances_[m.src],
                                                    dst_instances_[instance], patch, uv,
                                                    used_fallback);
        out.patch = p.patch;
        out.uv = p.uv;
    } else {
        if (patch >= patchCount(dst_instances_[instance].tmpl))
            fail(Errc::UnknownPatch, "patch " + std::to_string(patch) + " on " +
                                         templateName(dst_instances_[instance].tmpl));
        out.patch = patch;
        out.uv = uv;
    }
    if (!src_visibility_.visible(out.instance, out.patch))
        out.kind = MapKind::SymmetryCompleted;
    return out;
}

SampleSource SampleMapping::resolve(std::uint32_t instance, std::uint16_t patch,
                                    const Vec2& uv) const {
    return resolveImpl(instance, patch, uv, nullptr);
}

MappingStats SampleMapping::stats(std::span<const SurfaceSample> samples) const {
    MappingStats out;
    for (const SurfaceSample& s : samples) {
        bool fallback = false;
        const SampleSource src = resolveImpl(s.instance, s.patch, s.uv, &fallback);
        if (fallback)
            ++out.fallback_band;
        switch (src.kind) {
        case MapKind::Parametric: ++out.parametric; break;
        case MapKind::Replicated: ++out.replicated; break;
        case MapKind::Projected: ++out.projected; break;
        case MapKind::SymmetryCompleted: ++out.symmetry_completed; break;
        case MapKind::NoSource: ++out.no_source; break;
        }
    }
    return out;
}

int SampleMapping::sourceInstance(std::uint32_t instance) const {
    if (instance >= per_instance_.size())
        fail(Errc::OutOfRange, "instance " + std::to_string(instance) + " outside the mapping");
    return per_instance_[instance].src;
}

SampleMapping buildMapping(const Structure& original, const Structure& manipulated,
                           const AlterationTrace& trace) {
    SampleMapping out;
    out.src_instances_ = original.instances;
    out.dst_instances_ = manipulated.instances;
    out.src_visibility_ = original.visibility;

    // Index the original by provenance.
    std::map<std::tuple<std::string, std::string, int>, int> src_index;
    std::map<std::pair<std::string, std::string>, int> src_count;
    std::set<std::string> src_decls;
    for (std::size_t i = 0; i < original.provenance.size(); ++i) {
        const Provenance& p = original.provenance[i];
        src_index[{p.decl, p.part, p.repetition}] = static_cast<int>(i);
        int& count = src_count[{p.decl, p.part}];
        count = std::max(count, p.repetition + 1);
        src_decls.insert(p.decl);
    }

    // Gross replay check: every declaration the trace names must exist in
    // the original. (Dropped declarations stay indexed — the trace was
    // recorded against the original, and nothing maps to them afterwards.)
    std::map<std::pair<std::string, std::string>, std::vector<const Alteration*>> count_chain;
    for (const Alteration& a : trace) {
        if (a.kind != Alteration::Kind::SetEdgeOffset && !src_decls.count(a.decl))
            fail(Errc::TraceMismatch, "trace names declaration '" + a.decl +
                                          "' absent from the original structure");
        if (a.kind == Alteration::Kind::SetCount && !a.part.empty())
            count_chain[{a.decl, a.part}].push_back(&a);
    }

    out.per_instance_.resize(manipulated.instances.size());
    for (std::size_t j = 0; j < manipulated.provenance.size(); ++j) {
        const Provenance& p = manipulated.provenance[j];
        int rep = p.repetition;
        bool replicated = false;
        // Undo count changes newest-first: repetitions at or above each
        // entry's old count were copied from the recorded source repetition.
        if (const auto it = count_chain.find({p.decl, p.part}); it != count_chain.end()) {
            for (auto e = it->second.rbegin(); e != it->second.rend(); ++e) {
                const int old_count = static_cast<int>(std::llround((*e)->old_value));
                if (rep < old_count)
                    continue;
                const std::size_t added = static_cast<std::size_t>(rep - old_count);
                if (added >= (*e)->replica_sources.size() || (*e)->replica_sources[added] < 0)
                    fail(Errc::TraceMismatch, "replica sources of '" + p.decl + "." + p.part +
                                                  "' do not cover repetition " +
                                                  std::to_string(p.repetition));
                rep = (*e)->replica_sources[added];
                replicated = true;
            }
        }
        const auto count_it = src_count.find({p.decl, p.part});
        if (count_it == src_count.end() || count_it->second == 0) {
            out.per_instance_[j] = {}; // no counterpart part: NoSource
            continue;
        }
        if (rep >= count_it->second) {
            // Count raised implicitly (template swap carrying a larger
            // count) — wrap onto the original repetitions.
            rep %= count_it->second;
            replicated = true;
        }
        const int si = src_index.at({p.decl, p.part, rep});
        SampleMapping::InstanceMap m;
        m.src = si;
        m.cross_template = manipulated.instances[j].tmpl != original.instances[si].tmpl;
        m.kind = m.cross_template ? MapKind::Projected
                                  : (replicated ? MapKind::Replicated : MapKind::Parametric);
        out.per_instance_[j] = m;
    }
    return out;
}

std::vector<Vec3> migrateDetails(const DetailField& relative, const SampleMapping& mapping,
                                 std::span<const SurfaceSample> samples, DetailScale scale) {
    if (relative.frame != DetailField::Frame::SurfaceRelative)
        fail(Errc::ParameterOutOfDomain, "migrateDetails expects a surface-relative field");
    const FieldIndex index(relative, mapping.sourceInstances());
    std::vector<Vec3> out;
    out.reserve(samples.size());
    for (const SurfaceSample& s : samples) {
        const SampleSource src = mapping.resolve(s);
        if (src.kind == MapKind::NoSource) {
            out.push_back(s.position);
            continue;
        }
        const std::ptrdiff_t idx = index.nearest(src.instance, src.patch, src.uv);
        if (idx < 0)
            fail(Errc::IncompleteField,
                 "no detail entries on source instance " + std::to_string(src.instance) +
                     " patch " + std::to_string(src.patch) +
                     " (run completeInvisible on the field first)");
        Vec3 rel = relative.vectors[static_cast<std::size_t>(idx)];
        const PrimitiveInstance& dst_inst = mapping.newInstances()[s.instance];
        if (scale == DetailScale::Proportional) {
            const Scalar a_src =
                surfaceArea(mapping.sourceInstances()[src.instance], src.patch);
            const Scalar a_dst = surfaceArea(dst_inst, s.patch);
            if (a_src > 0.0 && a_dst > 0.0)
                rel *= std::sqrt(a_dst / a_src);
        }
        const SurfaceFrame f = surfaceFrame(dst_inst, s.patch, s.uv.x(), s.uv.y());
        const Vec3 delta = rel.x() * f.normal + rel.y() * f.tangent + rel.z() * f.bitangent;
        out.push_back(s.position + delta);
    }
    return out;
}

} // namespace artipg
