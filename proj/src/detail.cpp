#include "artipg/detail.hpp"

#include "artipg/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace artipg {
namespace {

Mat3 frameMatrix(const SurfaceFrame& f) {
    Mat3 m;
    m.col(0) = f.normal;
    m.col(1) = f.tangent;
    m.col(2) = f.bitangent;
    return m;
}

// Per-component displacement whose rounded sum lands exactly on y, so that
// "x + delta is a member of the target cloud" holds bitwise. The straight
// difference can miss by an ulp; walk it until the sum hits.
Scalar exactDelta(Scalar x, Scalar y) {
    Scalar d = y - x;
    for (int i = 0; i < 8 && x + d != y; ++i)
        d = std::nextafter(d, (x + d < y) ? std::numeric_limits<Scalar>::infinity()
                                          : -std::numeric_limits<Scalar>::infinity());
    return d;
}

Scalar wrap01(Scalar x) { return x - std::floor(x); }

// One symmetry of the solid, as an affine map per uv component taking source
// coordinates to target coordinates: u_t = flip ? off - u_s : u_s + off.
struct Candidate {
    int source_patch;
    bool flip_u = false;
    Scalar off_u = 0.0;
    bool flip_v = false;
    Scalar off_v = 0.0;
};

Scalar mapForward(Scalar x, bool flip, Scalar off, bool periodic) {
    const Scalar y = flip ? off - x : x + off;
    return periodic ? wrap01(y) : std::clamp(y, 0.0, 1.0);
}

Scalar mapInverse(Scalar x, bool flip, Scalar off, bool periodic) {
    const Scalar y = flip ? off - x : x - off;
    return periodic ? wrap01(y) : std::clamp(y, 0.0, 1.0);
}

// Rotation offsets ordered antipodal-first: filling an occluded region from
// the diametrically opposite one is the canonical choice, nearer offsets are
// fallbacks.
std::vector<Scalar> antipodalShifts(int m) {
    std::vector<int> steps;
    steps.reserve(m > 0 ? m - 1 : 0);
    for (int s = 1; s < m; ++s) steps.push_back(s);
    std::sort(steps.begin(), steps.end(), [m](int a, int b) {
        const Scalar da = std::abs(static_cast<Scalar>(a) / m - 0.5);
        const Scalar db = std::abs(static_cast<Scalar>(b) / m - 0.5);
        return da < db || (da == db && a < b);
    });
    std::vector<Scalar> shifts;
    shifts.reserve(steps.size());
    for (int s : steps) shifts.push_back(static_cast<Scalar>(s) / m);
    return shifts;
}

// Ordered symmetry maps that can source detail for `patch`. `g` is the
// occupancy grid resolution, which quantizes continuous rotations.
std::vector<Candidate> symmetryCandidates(const PrimitiveInstance& inst, int patch, int g) {
    std::vector<Candidate> out;
    auto addShifts = [&](int quantum) {
        for (Scalar s : antipodalShifts(quantum)) out.push_back({patch, false, s, false, 0.0});
    };
    switch (inst.tmpl) {
    case PrimitiveTemplateId::Cuboid: {
        // Mid-plane mirror onto the opposite face first, then the two
        // in-face mirrors.
        const int opposite = patch ^ 1;
        if (patch < 4)
            out.push_back({opposite, true, 1.0, false, 0.0}); // x/y mirrors: u -> 1-u
        else
            out.push_back({opposite, false, 0.0, true, 1.0}); // z mirror: v -> 1-v
        out.push_back({patch, true, 1.0, false, 0.0});
        out.push_back({patch, false, 0.0, true, 1.0});
        break;
    }
    case PrimitiveTemplateId::Cylinder:
        addShifts(g);
        if (patch == 1) out.push_back({2, false, 0.0, false, 0.0}); // cap-to-cap
        if (patch == 2) out.push_back({1, false, 0.0, false, 0.0});
        break;
    case PrimitiveTemplateId::Sphere:
    case PrimitiveTemplateId::Torus:
        addShifts(g);
        break;
    case PrimitiveTemplateId::PrismN: {
        const int n = static_cast<int>(std::llround(inst.param("side_count")));
        addShifts(n); // rotations come in 2*pi/n steps only
        if (patch == 1) out.push_back({2, false, 0.0, false, 0.0});
        if (patch == 2) out.push_back({1, false, 0.0, false, 0.0});
        break;
    }
    }
    return out;
}

// Closed interval on a possibly-wrapping coordinate.
struct Interval {
    Scalar lo, hi;
    bool wrapped; // lo > hi means the interval crosses 1 -> 0
    bool all;

    bool contains(Scalar x) const {
        if (all) return true;
        if (!wrapped) return x >= lo && x <= hi;
        return x >= lo || x <= hi;
    }
};

Interval mapCellEdge(Scalar a, Scalar b, bool flip, Scalar off, bool periodic) {
    Scalar lo = mapInverse(a, flip, off, periodic);
    Scalar hi = mapInverse(b, flip, off, periodic);
    if (flip) std::swap(lo, hi);
    Interval iv;
    iv.all = (b - a) >= 1.0;
    if (!periodic) {
        iv.lo = lo;
        iv.hi = hi;
        iv.wrapped = false;
    } else {
        iv.lo = lo;
        iv.hi = hi;
        iv.wrapped = lo > hi;
    }
    return iv;
}

} // namespace

DetailField computeDeformation(std::span<const SurfaceSample> samples,
                               std::span<const Vec3> target) {
    if (samples.empty()) fail(Errc::EmptyInput, "no structure samples");
    if (target.empty()) fail(Errc::EmptyInput, "empty target cloud");
    const KdTree3 tree(std::vector<Vec3>(target.begin(), target.end()));
    DetailField field;
    field.frame = DetailField::Frame::World;
    field.bindings.reserve(samples.size());
    field.vectors.reserve(samples.size());
    for (const SurfaceSample& s : samples) {
        const KdTree3::Hit hit = tree.nearest(s.position);
        const Vec3& y = target[hit.index];
        field.bindings.push_back({s.instance, s.patch, s.uv});
        field.vectors.emplace_back(exactDelta(s.position.x(), y.x()),
                                   exactDelta(s.position.y(), y.y()),
                                   exactDelta(s.position.z(), y.z()));
    }
    return field;
}

namespace {

Mat3 bindingFrame(const FieldBinding& b, std::span<const PrimitiveInstance> instances) {
    if (b.instance >= instances.size())
        fail(Errc::OutOfRange, "field binding references instance " + std::to_string(b.instance));
    const SurfaceFrame f =
        surfaceFrame(instances[b.instance], b.patch, b.uv.x(), b.uv.y());
    const Mat3 m = frameMatrix(f);
    if (!m.allFinite()) fail(Errc::DegenerateFrame, "non-finite surface frame");
    return m;
}

} // namespace

DetailField encodeRelative(const DetailField& field,
                           std::span<const PrimitiveInstance> instances) {
    if (field.frame != DetailField::Frame::World)
        fail(Errc::ParameterOutOfDomain, "encodeRelative expects a world-frame field");
    DetailField out = field;
    out.frame = DetailField::Frame::SurfaceRelative;
    for (std::size_t i = 0; i < field.size(); ++i)
        out.vectors[i] = bindingFrame(field.bindings[i], instances).transpose() * field.vectors[i];
    return out;
}

DetailField decodeRelative(const DetailField& field,
                           std::span<const PrimitiveInstance> instances) {
    if (field.frame != DetailField::Frame::SurfaceRelative)
        fail(Errc::ParameterOutOfDomain, "decodeRelative expects a surface-relative field");
    DetailField out = field;
    out.frame = DetailField::Frame::World;
    for (std::size_t i = 0; i < field.size(); ++i)
        out.vectors[i] = bindingFrame(field.bindings[i], instances) * field.vectors[i];
    return out;
}

DetailField completeInvisible(std::span<const PrimitiveInstance> instances,
                              const VisibilityMask& visibility, const DetailField& field) {
    if (field.frame != DetailField::Frame::SurfaceRelative)
        fail(Errc::ParameterOutOfDomain, "completeInvisible expects a surface-relative field");

    // Original samples per (instance, patch); only these act as sources.
    std::vector<std::vector<std::vector<std::uint32_t>>> buckets(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i)
        buckets[i].resize(static_cast<std::size_t>(patchCount(instances[i].tmpl)));
    for (std::uint32_t k = 0; k < field.size(); ++k) {
        const FieldBinding& b = field.bindings[k];
        if (b.instance < buckets.size() && b.patch < buckets[b.instance].size())
            buckets[b.instance][b.patch].push_back(k);
    }

    DetailField out = field;
    for (std::uint32_t i = 0; i < instances.size(); ++i) {
        const PrimitiveInstance& inst = instances[i];
        for (int patch = 0; patch < patchCount(inst.tmpl); ++patch) {
            // Complete hidden patches, and visible ones the sampler never
            // hit, so the result covers every patch of every instance.
            if (visibility.visible(i, patch) && !buckets[i][patch].empty()) continue;
            const bool u_per = patchUPeriodic(inst.tmpl, patch);
            const bool v_per = patchVPeriodic(inst.tmpl, patch);
            const auto& own = buckets[i][patch];

            // Grid sized for ~2 samples per cell, so partially covered
            // patches are filled only where they lack detail.
            const int g = std::clamp(
                static_cast<int>(std::floor(std::sqrt(own.size() / 2.0))), 1, 16);
            std::vector<std::uint8_t> covered(static_cast<std::size_t>(g) * g, 0);
            auto cellOf = [g](Scalar x, bool periodic) {
                if (periodic) x = wrap01(x);
                return std::min(static_cast<int>(x * g), g - 1);
            };
            for (std::uint32_t k : own) {
                const Vec2& uv = field.bindings[k].uv;
                covered[static_cast<std::size_t>(cellOf(uv.y(), v_per)) * g +
                        cellOf(uv.x(), u_per)] = 1;
            }

            const auto candidates = symmetryCandidates(inst, patch, g);
            for (int iv = 0; iv < g; ++iv) {
                for (int iu = 0; iu < g; ++iu) {
                    if (covered[static_cast<std::size_t>(iv) * g + iu]) continue;
                    const Scalar u_lo = static_cast<Scalar>(iu) / g;
                    const Scalar u_hi = static_cast<Scalar>(iu + 1) / g;
                    const Scalar v_lo = static_cast<Scalar>(iv) / g;
                    const Scalar v_hi = static_cast<Scalar>(iv + 1) / g;
                    bool filled = false;
                    for (const Candidate& cand : candidates) {
                        const Interval su =
                            mapCellEdge(u_lo, u_hi, cand.flip_u, cand.off_u, u_per);
                        const Interval sv =
                            mapCellEdge(v_lo, v_hi, cand.flip_v, cand.off_v, v_per);
                        const auto& source = buckets[i][cand.source_patch];
                        for (std::uint32_t k : source) {
                            Vec2 uv = field.bindings[k].uv;
                            if (u_per) uv.x() = wrap01(uv.x());
                            if (v_per) uv.y() = wrap01(uv.y());
                            if (!su.contains(uv.x()) || !sv.contains(uv.y())) continue;
                            FieldBinding nb;
                            nb.instance = i;
                            nb.patch = static_cast<std::uint16_t>(patch);
                            nb.uv = Vec2(mapForward(uv.x(), cand.flip_u, cand.off_u, u_per),
                                         mapForward(uv.y(), cand.flip_v, cand.off_v, v_per));
                            out.bindings.push_back(nb);
                            out.vectors.push_back(field.vectors[k]); // verbatim transfer
                            filled = true;
                        }
                        if (filled) break;
                    }
                    if (!filled) {
                        // No symmetric source anywhere: pin the cell to zero
                        // detail rather than letting lookups bleed across.
                        FieldBinding nb;
                        nb.instance = i;
                        nb.patch = static_cast<std::uint16_t>(patch);
                        nb.uv = Vec2(0.5 * (u_lo + u_hi), 0.5 * (v_lo + v_hi));
                        out.bindings.push_back(nb);
                        out.vectors.push_back(Vec3::Zero());
                        ++out.zero_filled;
                    }
                }
            }
        }
    }
    return out;
}

FieldIndex::FieldIndex(const DetailField& field, std::span<const PrimitiveInstance> instances)
    : field_(field) {
    buckets_.resize(instances.size());
    for (std::size_t i = 0; i < instances.size(); ++i) {
        const PrimitiveTemplateId tmpl = instances[i].tmpl;
        buckets_[i].resize(static_cast<std::size_t>(patchCount(tmpl)));
        for (int p = 0; p < patchCount(tmpl); ++p) {
            buckets_[i][p].u_wraps = patchUPeriodic(tmpl, p);
            buckets_[i][p].v_wraps = patchVPeriodic(tmpl, p);
        }
    }
    for (std::uint32_t k = 0; k < field.size(); ++k) {
        const FieldBinding& b = field.bindings[k];
        if (b.instance >= buckets_.size() || b.patch >= buckets_[b.instance].size())
            fail(Errc::OutOfRange, "field binding outside the instance set");
        buckets_[b.instance][b.patch].entries.push_back(k);
    }
}

std::ptrdiff_t FieldIndex::nearest(std::uint32_t instance, std::uint16_t patch,
                                   const Vec2& uv) const {
    if (instance >= buckets_.size() || patch >= buckets_[instance].size())
        fail(Errc::OutOfRange, "field lookup outside the instance set");
    const Bucket& bucket = buckets_[instance][patch];
    std::ptrdiff_t best = -1;
    Scalar best_d2 = std::numeric_limits<Scalar>::infinity();
    for (std::uint32_t k : bucket.entries) {
        const Vec2& s = field_.bindings[k].uv;
        Scalar du = std::abs(s.x() - uv.x());
        if (bucket.u_wraps) du = std::min(du, 1.0 - du);
        Scalar dv = std::abs(s.y() - uv.y());
        if (bucket.v_wraps) dv = std::min(dv, 1.0 - dv);
        const Scalar d2 = du * du + dv * dv;
        if (d2 < best_d2) {
            best_d2 = d2;
            best = static_cast<std::ptrdiff_t>(k);
        }
    }
    return best;
}

} // namespace artipg
