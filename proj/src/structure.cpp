#include "artipg/structure.hpp"

#include "artipg/collision.hpp"
#include "artipg/templates.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <set>
#include <utility>

namespace artipg {
namespace {

constexpr Scalar kResidualTolerance = 1e-6;

using Mat3 = Eigen::Matrix3d;

// Reference point a patch is attached through: the geometric center. Caps
// place it at the fan center (v = 0); non-planar patches cannot be attached.
Vec2 contactUv(PrimitiveTemplateId tmpl, int patch) {
    if (tmpl == PrimitiveTemplateId::Cuboid) return Vec2(0.5, 0.5);
    if ((tmpl == PrimitiveTemplateId::Cylinder || tmpl == PrimitiveTemplateId::PrismN) &&
        patch != 0)
        return Vec2(0.0, 0.0);
    fail(Errc::ParameterOutOfDomain, std::string("attach requires a planar patch, got '") +
                                         patchName(tmpl, patch) + "' of " + templateName(tmpl));
}

PrimitiveInstance posedCopy(const PrimitiveInstance& inst, const Pose& pose) {
    PrimitiveInstance out = inst;
    out.pose = pose;
    return out;
}

PrimitiveInstance bareInstance(PrimitiveTemplateId tmpl, const ParamMap& intrinsic,
                               const Pose& pose) {
    return PrimitiveInstance{"", tmpl, intrinsic, pose, ""};
}

// Pose of the child part such that its patch center lands on the parent's
// patch center displaced by (du, dv) along the parent tangent/bitangent,
// with opposed normals and aligned tangents.
Pose attachChildPose(const PrimitiveInstance& parent, int ppatch, Scalar du, Scalar dv,
                     PrimitiveTemplateId ctmpl, const ParamMap& cintr, int cpatch) {
    const Vec2 puv = contactUv(parent.tmpl, ppatch);
    const Vec3 p0 = surfacePoint(parent, ppatch, puv.x(), puv.y());
    const SurfaceFrame pf = surfaceFrame(parent, ppatch, puv.x(), puv.y());
    const Vec3 contact = p0 + du * pf.tangent + dv * pf.bitangent;

    const PrimitiveInstance child_local = bareInstance(ctmpl, cintr, Pose{});
    const Vec2 cuv = contactUv(ctmpl, cpatch);
    const Vec3 q0 = surfacePoint(child_local, cpatch, cuv.x(), cuv.y());
    const SurfaceFrame cf = surfaceFrame(child_local, cpatch, cuv.x(), cuv.y());

    Mat3 mp, mc;
    mp.col(0) = -pf.normal;
    mp.col(1) = pf.tangent;
    mp.col(2) = -pf.bitangent;
    mc.col(0) = cf.normal;
    mc.col(1) = cf.tangent;
    mc.col(2) = cf.bitangent;
    const Mat3 r = mp * mc.transpose();
    const Quat q = Quat(r).normalized();
    return Pose{q, contact - q * q0};
}

Pose coaxialChildPose(const Pose& parent, Scalar axial_offset) {
    return Pose{parent.rotation,
                parent.translation + axial_offset * (parent.rotation * Vec3::UnitZ())};
}

struct ExpandedDecl {
    const Declaration* decl = nullptr;
    const AdvancedTemplate* tmpl = nullptr; // advanced only
    std::vector<TemplatePart> parts;        // parts[0] is the root part
    std::vector<Pose> local;                // template-local pose per part
    std::vector<TemplateEdge> edges;
    std::map<std::string, AnchorRef> anchors;
    std::map<std::string, AxisAnchor> axes;
    std::uint32_t first = 0; // index of parts[0] in Structure::instances

    int partIndex(const std::string& part, int rep) const {
        for (std::size_t i = 0; i < parts.size(); ++i)
            if (parts[i].part == part && parts[i].repetition == rep) return static_cast<int>(i);
        fail(Errc::UnboundReference,
             "declaration '" + decl->name + "' has no part '" + part + "'");
    }
};

ExpandedDecl expandDecl(const Declaration& decl, const std::map<std::string, Scalar>& scope) {
    ExpandedDecl out;
    out.decl = &decl;
    if (!decl.advanced) {
        const PrimitiveTemplateId prim = templateFromName(decl.template_name);
        ParamMap intrinsic;
        for (const auto& [pname, entry] : decl.params) {
            (void)entry;
            intrinsic[pname] = scope.at(decl.name + "." + pname);
        }
        out.parts.push_back({decl.name, 0, prim, std::move(intrinsic)});
        out.local.push_back(Pose{});
        return out;
    }

    out.tmpl = findAdvancedTemplate(decl.template_name);
    if (!out.tmpl)
        fail(Errc::UnknownTemplate,
             "declaration '" + decl.name + "': unknown template '" + decl.template_name + "'");
    ParamMap values;
    for (const auto& [pname, entry] : decl.params) {
        (void)entry;
        values[pname] = scope.at(decl.name + "." + pname);
    }
    TemplateExpansion x = out.tmpl->expand(values);
    out.parts = std::move(x.parts);
    out.edges = std::move(x.edges);
    out.anchors = std::move(x.anchors);
    out.axes = std::move(x.axis_anchors);

    // Root at the template origin; every other part is placed by an edge.
    out.local.assign(out.parts.size(), Pose{});
    std::vector<char> placed(out.parts.size(), 0);
    placed[0] = 1;
    for (std::size_t pass = 0; pass < out.parts.size(); ++pass) {
        bool progress = false;
        for (const auto& e : out.edges) {
            const int pi = out.partIndex(e.parent_part, e.parent_rep);
            const int ci = out.partIndex(e.child_part, e.child_rep);
            if (!placed[pi] || placed[ci]) continue;
            const TemplatePart& parent = out.parts[pi];
            const TemplatePart& child = out.parts[ci];
            switch (e.kind) {
            case EdgeKind::Attach:
                out.local[ci] = attachChildPose(
                    bareInstance(parent.tmpl, parent.intrinsic, out.local[pi]),
                    patchIndex(parent.tmpl, e.parent_patch), e.attach_offset.x(),
                    e.attach_offset.y(), child.tmpl, child.intrinsic,
                    patchIndex(child.tmpl, e.child_patch));
                break;
            case EdgeKind::Coaxial:
                out.local[ci] = coaxialChildPose(out.local[pi], e.axial_offset);
                break;
            case EdgeKind::FixedRelative: out.local[ci] = out.local[pi].compose(e.relative); break;
            }
            placed[ci] = 1;
            progress = true;
        }
        if (!progress) break;
    }
    if (!std::all_of(placed.begin(), placed.end(), [](char c) { return c != 0; }))
        fail(Errc::CyclicConnectivity,
             "template '" + decl.template_name + "' leaves parts unplaced");
    return out;
}

struct PartPatch {
    std::string part;
    std::string patch;
};

// Names the part (and patch, where present) that a program edge endpoint
// resolves to on a declaration.
PartPatch anchorNames(const ExpandedDecl& d, const std::string& anchor, EdgeKind kind) {
    if (d.decl->advanced) {
        const auto it = d.anchors.find(anchor);
        if (it == d.anchors.end())
            fail(Errc::UnboundReference,
                 "declaration '" + d.decl->name + "' has no anchor '" + anchor + "'");
        return {it->second.part, it->second.patch};
    }
    return {d.decl->name, kind == EdgeKind::Attach ? anchor : std::string{}};
}

Scalar evalEntry(const ParamEntry& entry, const std::map<std::string, Scalar>& scope,
                 const char* ctx) {
    if (!entry.derived()) return entry.value;
    const Scalar v = entry.expr.eval([&scope, ctx](const std::string& name) -> Scalar {
        const auto it = scope.find(name);
        if (it == scope.end())
            fail(Errc::UnboundReference,
                 std::string(ctx) + ": unresolved reference '" + name + "'");
        return it->second;
    });
    if (!std::isfinite(v))
        fail(Errc::OutOfRange, std::string(ctx) + ": expression evaluates to a non-finite value");
    return v;
}

Pose fixedRelativePose(const EdgeSpec& e, const std::map<std::string, Scalar>& scope) {
    const Quat q(e.rotation[0], e.rotation[1], e.rotation[2], e.rotation[3]);
    const Vec3 t(evalEntry(e.translation[0], scope, "edge translation"),
                 evalEntry(e.translation[1], scope, "edge translation"),
                 evalEntry(e.translation[2], scope, "edge translation"));
    return Pose{q.normalized(), t};
}

std::string instanceId(const ExpandedDecl& d, const TemplatePart& part) {
    if (!d.decl->advanced) return d.decl->name;
    std::string id = d.decl->name + "." + part.part;
    if (d.tmpl->count_param_of_part.count(part.part)) id += "#" + std::to_string(part.repetition);
    return id;
}

} // namespace

int Structure::findInstance(const std::string& decl, const std::string& part,
                            int repetition) const {
    for (std::size_t i = 0; i < provenance.size(); ++i) {
        const Provenance& p = provenance[i];
        if (p.decl == decl && p.part == part && p.repetition == repetition)
            return static_cast<int>(i);
    }
    return -1;
}

const ResolvedJoint* Structure::findJoint(const std::string& id) const {
    for (const auto& j : joints)
        if (j.id == id) return &j;
    return nullptr;
}

Structure elaborate(const StructureProgram& program,
                    const std::map<std::string, Scalar>& joint_values) {
    const std::map<std::string, Scalar> scope = evaluateParams(program);

    // Expand declarations and lay out instance indices in declaration order.
    std::map<std::string, ExpandedDecl> expanded;
    std::vector<std::string> decl_order;
    std::uint32_t next_index = 0;
    for (const auto& decl : program.declarations) {
        ExpandedDecl e = expandDecl(decl, scope);
        e.first = next_index;
        next_index += static_cast<std::uint32_t>(e.parts.size());
        decl_order.push_back(decl.name);
        expanded.emplace(decl.name, std::move(e));
    }

    // Resolve each declaration's root-part world pose from the program edges.
    std::map<std::string, Pose> root_world;
    root_world[program.root] = Pose{};
    std::vector<std::pair<std::uint32_t, std::uint32_t>> adjacency;
    std::vector<std::pair<std::uint32_t, int>> hidden; // attach contact patches
    std::vector<char> edge_done(program.connectivity.size(), 0);
    for (std::size_t pass = 0; pass < program.connectivity.size() + 1; ++pass) {
        bool progress = false;
        for (std::size_t i = 0; i < program.connectivity.size(); ++i) {
            if (edge_done[i]) continue;
            const EdgeSpec& e = program.connectivity[i];
            if (!root_world.count(e.parent) || root_world.count(e.child)) continue;
            const ExpandedDecl& parent = expanded.at(e.parent);
            const ExpandedDecl& child = expanded.at(e.child);
            const PartPatch pa = anchorNames(parent, e.parent_anchor, e.kind);
            const PartPatch ca = anchorNames(child, e.child_anchor, e.kind);
            const int pi = parent.partIndex(pa.part, 0);
            const int ci = child.partIndex(ca.part, 0);
            const Pose parent_world = root_world.at(e.parent).compose(parent.local[pi]);
            const TemplatePart& ppart = parent.parts[pi];
            const TemplatePart& cpart = child.parts[ci];

            Pose anchor_world;
            switch (e.kind) {
            case EdgeKind::Attach: {
                const int ppatch = patchIndex(ppart.tmpl, pa.patch);
                const int cpatch = patchIndex(cpart.tmpl, ca.patch);
                const Scalar du = evalEntry(e.offset[0], scope, "edge offset");
                const Scalar dv = evalEntry(e.offset[1], scope, "edge offset");
                anchor_world =
                    attachChildPose(bareInstance(ppart.tmpl, ppart.intrinsic, parent_world),
                                    ppatch, du, dv, cpart.tmpl, cpart.intrinsic, cpatch);
                hidden.emplace_back(parent.first + pi, ppatch);
                hidden.emplace_back(child.first + ci, cpatch);
                break;
            }
            case EdgeKind::Coaxial:
                anchor_world =
                    coaxialChildPose(parent_world, evalEntry(e.offset[0], scope, "edge offset"));
                break;
            case EdgeKind::FixedRelative:
                anchor_world = parent_world.compose(fixedRelativePose(e, scope));
                break;
            }
            root_world[e.child] = anchor_world.compose(child.local[ci].inverse());
            adjacency.emplace_back(parent.first + pi, child.first + ci);
            edge_done[i] = 1;
            progress = true;
        }
        if (!progress) break;
    }
    for (const auto& name : decl_order) {
        if (!root_world.count(name))
            fail(Errc::CyclicConnectivity,
                 "declaration '" + name + "' is not connected to the root");
    }

    // Intra-template adjacency and attach visibility.
    for (const auto& name : decl_order) {
        const ExpandedDecl& d = expanded.at(name);
        for (const auto& e : d.edges) {
            const int pi = d.partIndex(e.parent_part, e.parent_rep);
            const int ci = d.partIndex(e.child_part, e.child_rep);
            adjacency.emplace_back(d.first + pi, d.first + ci);
            if (e.kind == EdgeKind::Attach) {
                hidden.emplace_back(d.first + pi, patchIndex(d.parts[pi].tmpl, e.parent_patch));
                hidden.emplace_back(d.first + ci, patchIndex(d.parts[ci].tmpl, e.child_patch));
            }
        }
    }

    Structure s;
    std::vector<std::string> vocab;
    for (const auto& name : decl_order) {
        const ExpandedDecl& d = expanded.at(name);
        const std::string& semantic = d.decl->semantic;
        if (std::find(vocab.begin(), vocab.end(), semantic) == vocab.end())
            vocab.push_back(semantic);
        const auto sem_index = static_cast<std::uint16_t>(
            std::find(vocab.begin(), vocab.end(), semantic) - vocab.begin());
        const Pose& root = root_world.at(name);
        for (std::size_t i = 0; i < d.parts.size(); ++i) {
            const TemplatePart& part = d.parts[i];
            s.instances.push_back(instantiatePrimitive(part.tmpl, part.intrinsic,
                                                       root.compose(d.local[i]),
                                                       instanceId(d, part), semantic));
            s.provenance.push_back({name, part.part, part.repetition});
            s.semantic_of.push_back(sem_index);
        }
    }
    s.semantic_vocab = std::move(vocab);
    s.params = scope;
    for (auto& [a, b] : adjacency)
        if (a > b) std::swap(a, b);
    std::sort(adjacency.begin(), adjacency.end());
    adjacency.erase(std::unique(adjacency.begin(), adjacency.end()), adjacency.end());
    s.adjacency = std::move(adjacency);
    s.rest_poses.reserve(s.instances.size());
    for (const auto& inst : s.instances) s.rest_poses.push_back(inst.pose);

    s.visibility = VisibilityMask(s.instances);
    for (const auto& [inst, patch] : hidden) s.visibility.setVisible(inst, patch, false);

    // Joint resolution against the rest configuration.
    std::map<std::string, std::vector<std::string>> children;
    for (const auto& e : program.connectivity) children[e.parent].push_back(e.child);
    for (const auto& jd : program.joints) {
        const ExpandedDecl& parent = expanded.at(jd.parent);
        AxisAnchor anchor;
        if (!jd.anchor.alias.empty()) {
            const auto it = parent.axes.find(jd.anchor.alias);
            if (it == parent.axes.end())
                fail(Errc::UnknownJoint, "joint '" + jd.id + "': parent has no axis alias '" +
                                             jd.anchor.alias + "'");
            anchor = it->second;
        } else {
            anchor.part = jd.parent;
            anchor.patch = jd.anchor.patch;
            anchor.uv = jd.anchor.uv;
            anchor.dir = jd.anchor.dir;
        }
        const int pi = parent.partIndex(anchor.part, 0);
        const std::uint32_t anchor_instance = parent.first + pi;
        const PrimitiveInstance& inst = s.instances[anchor_instance];
        const int patch = patchIndex(inst.tmpl, anchor.patch);
        const SurfaceFrame f = surfaceFrame(inst, patch, anchor.uv.x(), anchor.uv.y());
        Vec3 dir = anchor.dir.x() * f.normal + anchor.dir.y() * f.tangent +
                   anchor.dir.z() * f.bitangent;
        if (dir.norm() < 1e-12)
            fail(Errc::DegenerateFrame, "joint '" + jd.id + "': axis direction vanishes");
        dir.normalize();

        ResolvedJoint j;
        j.id = jd.id;
        j.kind = jd.kind;
        j.parent_decl = jd.parent;
        j.child_decl = jd.child;
        j.anchor_instance = anchor_instance;
        j.axis_point = surfacePoint(inst, patch, anchor.uv.x(), anchor.uv.y());
        j.axis_dir = dir;
        j.lo = jd.lo;
        j.hi = jd.hi;
        j.value = jd.rest;
        std::vector<std::string> queue{jd.child};
        while (!queue.empty()) {
            const std::string decl = std::move(queue.back());
            queue.pop_back();
            const ExpandedDecl& d = expanded.at(decl);
            for (std::uint32_t k = 0; k < d.parts.size(); ++k) j.subtree.push_back(d.first + k);
            const auto it = children.find(decl);
            if (it != children.end())
                queue.insert(queue.end(), it->second.begin(), it->second.end());
        }
        std::sort(j.subtree.begin(), j.subtree.end());
        s.joints.push_back(std::move(j));
    }

    const Scalar residual = maxResidual(program, s);
    if (residual > kResidualTolerance)
        fail(Errc::ResidualTooLarge,
             "placement residual " + formatScalar(residual) + " exceeds " +
                 formatScalar(kResidualTolerance));

    // Apply requested joint values relative to rest, in declaration order.
    for (const auto& [id, value] : joint_values) {
        (void)value;
        if (!s.findJoint(id)) fail(Errc::UnknownJoint, "unknown joint '" + id + "'");
    }
    for (auto& j : s.joints) {
        const auto it = joint_values.find(j.id);
        if (it == joint_values.end()) continue;
        const Scalar v = it->second;
        if (v < j.lo || v > j.hi)
            fail(Errc::JointOutOfRange,
                 "joint '" + j.id + "': value " + formatScalar(v) + " outside [" +
                     formatScalar(j.lo) + ", " + formatScalar(j.hi) + "]");
        const Scalar delta = v - j.value;
        if (delta == 0.0) continue;
        if (j.kind == JointKind::Fixed)
            fail(Errc::JointOutOfRange, "joint '" + j.id + "' is fixed");
        const Pose& cur = s.instances[j.anchor_instance].pose;
        const Pose motion_frame = cur.compose(s.rest_poses[j.anchor_instance].inverse());
        const Vec3 point = motion_frame.apply(j.axis_point);
        const Vec3 dir = motion_frame.applyVector(j.axis_dir);
        const Pose motion = j.kind == JointKind::Revolute ? rotationAbout(point, dir, delta)
                                                          : translationAlong(dir, delta);
        for (const std::uint32_t idx : j.subtree) {
            PrimitiveInstance& inst = s.instances[idx];
            inst = posedCopy(inst, motion.compose(inst.pose));
        }
        j.value = v;
    }
    return s;
}

Structure elaborateChecked(const StructureProgram& program,
                           const std::map<std::string, Scalar>& joint_values) {
    Structure s = elaborate(program, joint_values);
    const std::vector<Violation> violations = checkValidity(s);
    if (!violations.empty())
        fail(Errc::ElaborationCollision,
             "collision between '" + violations.front().a + "' and '" + violations.front().b +
                 "'");
    return s;
}

Structure articulate(const Structure& s, const std::string& joint_id, Scalar delta) {
    Structure out = s;
    ResolvedJoint* joint = nullptr;
    for (auto& j : out.joints)
        if (j.id == joint_id) joint = &j;
    if (!joint) fail(Errc::UnknownJoint, "unknown joint '" + joint_id + "'");
    const Scalar v = joint->value + delta;
    if (v < joint->lo || v > joint->hi)
        fail(Errc::JointOutOfRange,
             "joint '" + joint_id + "': value " + formatScalar(v) + " outside [" +
                 formatScalar(joint->lo) + ", " + formatScalar(joint->hi) + "]");
    if (delta == 0.0) return out;
    if (joint->kind == JointKind::Fixed)
        fail(Errc::JointOutOfRange, "joint '" + joint_id + "' is fixed");

    // Upstream joints may have moved the anchor since rest; carry the axis
    // with the anchor instance's accumulated motion.
    const Pose motion_frame =
        out.instances[joint->anchor_instance].pose.compose(
            out.rest_poses[joint->anchor_instance].inverse());
    const Vec3 point = motion_frame.apply(joint->axis_point);
    const Vec3 dir = motion_frame.applyVector(joint->axis_dir);
    const Pose motion = joint->kind == JointKind::Revolute ? rotationAbout(point, dir, delta)
                                                           : translationAlong(dir, delta);
    for (const std::uint32_t idx : joint->subtree) {
        PrimitiveInstance& inst = out.instances[idx];
        inst = posedCopy(inst, motion.compose(inst.pose));
    }
    joint->value = v;
    return out;
}

Scalar maxResidual(const StructureProgram& program, const Structure& s) {
    Scalar worst = 0.0;
    const auto rest_instance = [&s](int idx) {
        return posedCopy(s.instances[static_cast<std::size_t>(idx)],
                         s.rest_poses[static_cast<std::size_t>(idx)]);
    };
    for (const EdgeSpec& e : program.connectivity) {
        const Declaration* pdecl = program.findDecl(e.parent);
        const Declaration* cdecl = program.findDecl(e.child);
        if (!pdecl || !cdecl)
            fail(Errc::UnboundReference, "edge references an unknown declaration");
        const auto names = [](const Declaration& d, const std::string& anchor,
                              EdgeKind kind) -> PartPatch {
            if (!d.advanced) return {d.name, kind == EdgeKind::Attach ? anchor : std::string{}};
            const AdvancedTemplate* t = findAdvancedTemplate(d.template_name);
            if (!t) fail(Errc::UnknownTemplate, "unknown template '" + d.template_name + "'");
            const TemplateExpansion x = defaultExpansion(*t);
            const auto it = x.anchors.find(anchor);
            if (it == x.anchors.end())
                fail(Errc::UnboundReference,
                     "declaration '" + d.name + "' has no anchor '" + anchor + "'");
            return {it->second.part, it->second.patch};
        };
        const PartPatch pa = names(*pdecl, e.parent_anchor, e.kind);
        const PartPatch ca = names(*cdecl, e.child_anchor, e.kind);
        const int pidx = s.findInstance(e.parent, pa.part, 0);
        const int cidx = s.findInstance(e.child, ca.part, 0);
        if (pidx < 0 || cidx < 0)
            fail(Errc::UnboundReference, "edge anchor instance is missing from the structure");
        const PrimitiveInstance parent = rest_instance(pidx);
        const PrimitiveInstance child = rest_instance(cidx);

        Scalar res = 0.0;
        switch (e.kind) {
        case EdgeKind::Attach: {
            const int ppatch = patchIndex(parent.tmpl, pa.patch);
            const int cpatch = patchIndex(child.tmpl, ca.patch);
            const Scalar du = evalEntry(e.offset[0], s.params, "edge offset");
            const Scalar dv = evalEntry(e.offset[1], s.params, "edge offset");
            const Vec2 puv = contactUv(parent.tmpl, ppatch);
            const Vec3 p0 = surfacePoint(parent, ppatch, puv.x(), puv.y());
            const SurfaceFrame pf = surfaceFrame(parent, ppatch, puv.x(), puv.y());
            const Vec3 contact = p0 + du * pf.tangent + dv * pf.bitangent;
            const Vec2 cuv = contactUv(child.tmpl, cpatch);
            const Vec3 q0 = surfacePoint(child, cpatch, cuv.x(), cuv.y());
            const SurfaceFrame cf = surfaceFrame(child, cpatch, cuv.x(), cuv.y());
            res = std::max((q0 - contact).norm(), (cf.normal + pf.normal).norm());
            res = std::max(res, (cf.tangent - pf.tangent).norm());
            break;
        }
        case EdgeKind::Coaxial: {
            const Scalar off = evalEntry(e.offset[0], s.params, "edge offset");
            const Vec3 axis = parent.pose.rotation * Vec3::UnitZ();
            const Vec3 expected = parent.pose.translation + off * axis;
            res = std::max((child.pose.translation - expected).norm(),
                           parent.pose.rotation.angularDistance(child.pose.rotation));
            break;
        }
        case EdgeKind::FixedRelative: {
            const Pose expected = parent.pose.compose(fixedRelativePose(e, s.params));
            res = std::max((child.pose.translation - expected.translation).norm(),
                           expected.rotation.angularDistance(child.pose.rotation));
            break;
        }
        }
        worst = std::max(worst, res);
    }
    return worst;
}

} // namespace artipg
