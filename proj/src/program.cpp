#include "artipg/program.hpp"

#include "artipg/collision.hpp"
#include "artipg/json_io.hpp"
#include "artipg/structure.hpp"
#include "artipg/templates.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <set>
#include <utility>

namespace artipg {
namespace {

using nlohmann::json;

constexpr const char* kVersion = "artipg-sp/1";
const std::set<std::string> kQuantities = {"u", "v", "x", "y", "z"};

[[noreturn]] void syntax(const std::string& msg) { fail(Errc::SyntaxError, msg); }

bool isIdentifier(const std::string& s) {
    if (s.empty()) return false;
    if (!std::isalpha(static_cast<unsigned char>(s[0])) && s[0] != '_') return false;
    return std::all_of(s.begin() + 1, s.end(), [](char c) {
        return std::isalnum(static_cast<unsigned char>(c)) || c == '_';
    });
}

const json& member(const json& obj, const char* key, const std::string& ctx) {
    const auto it = obj.find(key);
    if (it == obj.end()) syntax(ctx + ": missing field '" + key + "'");
    return *it;
}

void checkKeys(const json& obj, std::initializer_list<const char*> allowed,
               const std::string& ctx) {
    if (!obj.is_object()) syntax(ctx + ": expected an object");
    for (const auto& [key, value] : obj.items()) {
        if (std::find_if(allowed.begin(), allowed.end(),
                         [&key](const char* a) { return key == a; }) == allowed.end())
            syntax(ctx + ": unexpected field '" + key + "'");
    }
}

std::string asString(const json& j, const std::string& ctx) {
    if (!j.is_string()) syntax(ctx + ": expected a string");
    return j.get<std::string>();
}

Scalar asNumber(const json& j, const std::string& ctx) {
    if (!j.is_number()) syntax(ctx + ": expected a number");
    const Scalar v = j.get<Scalar>();
    if (!std::isfinite(v)) syntax(ctx + ": non-finite number");
    return v;
}

bool asBool(const json& j, const std::string& ctx) {
    if (!j.is_boolean()) syntax(ctx + ": expected a boolean");
    return j.get<bool>();
}

void requireIntegral(Scalar v, const std::string& ctx) {
    if (std::abs(v - std::round(v)) > 1e-9)
        fail(Errc::OutOfRange, ctx + ": expected an integer value");
}

// {"value": v[, "min": lo, "max": hi][, "integer": true]} or {"expr": "..."}.
ParamEntry parseEntry(const json& j, const std::string& ctx) {
    return paramEntryFromJson(j, ctx);
}

Declaration parseDeclaration(const json& j) {
    checkKeys(j, {"name", "kind", "template", "semantic", "essential", "params"}, "declaration");
    Declaration d;
    d.name = asString(member(j, "name", "declaration"), "declaration.name");
    if (!isIdentifier(d.name)) syntax("declaration name '" + d.name + "' is not an identifier");
    const std::string ctx = "declaration '" + d.name + "'";

    const std::string kind = asString(member(j, "kind", ctx), ctx + ".kind");
    if (kind == "advanced")
        d.advanced = true;
    else if (kind != "elementary")
        syntax(ctx + ": kind must be 'elementary' or 'advanced'");

    d.template_name = asString(member(j, "template", ctx), ctx + ".template");
    d.semantic = j.contains("semantic") ? asString(j["semantic"], ctx + ".semantic") : d.name;
    d.essential = j.contains("essential") ? asBool(j["essential"], ctx + ".essential") : true;

    const json& params = member(j, "params", ctx);
    if (!params.is_object()) syntax(ctx + ".params: expected an object");
    for (const auto& [pname, pvalue] : params.items()) {
        if (!isIdentifier(pname)) syntax(ctx + ": parameter name '" + pname + "' is invalid");
        d.params[pname] = parseEntry(pvalue, ctx + ".params." + pname);
    }

    if (d.advanced) {
        const AdvancedTemplate* t = findAdvancedTemplate(d.template_name);
        if (!t) fail(Errc::UnknownTemplate, ctx + ": unknown template '" + d.template_name + "'");
        for (const auto& [pname, entry] : d.params) {
            const TemplateParamSpec* spec = t->findParam(pname);
            if (!spec)
                fail(Errc::OutOfRange,
                     ctx + ": template '" + t->name + "' has no parameter '" + pname + "'");
            if (spec->integer && !entry.derived()) requireIntegral(entry.value, ctx + "." + pname);
        }
        // Unmentioned parameters become free at the template's default bounds.
        for (const auto& spec : t->params) {
            if (d.params.count(spec.name)) continue;
            ParamEntry e;
            e.value = spec.value;
            e.has_bounds = true;
            e.lo = spec.lo;
            e.hi = spec.hi;
            e.integer = spec.integer;
            d.params[spec.name] = e;
        }
    } else {
        const PrimitiveTemplateId tmpl = templateFromName(d.template_name); // throws
        for (const auto& [pname, entry] : d.params) {
            (void)entry;
            const auto specs = templateParams(tmpl);
            if (std::find_if(specs.begin(), specs.end(), [&pname = pname](const ParamSpec& s) {
                    return pname == s.name;
                }) == specs.end())
                fail(Errc::OutOfRange,
                     ctx + ": template '" + d.template_name + "' has no parameter '" + pname + "'");
        }
        for (const ParamSpec& spec : templateParams(tmpl)) {
            if (!d.params.count(spec.name))
                fail(Errc::MissingParameter, ctx + ": missing parameter '" + spec.name + "'");
        }
    }
    return d;
}

EdgeSpec parseEdge(const json& j, int index) {
    const std::string ctx = "connectivity[" + std::to_string(index) + "]";
    EdgeSpec e;
    const std::string kind = asString(member(j, "kind", ctx), ctx + ".kind");
    if (kind == "attach") {
        e.kind = EdgeKind::Attach;
        checkKeys(j, {"kind", "parent", "parent_anchor", "child", "child_anchor", "offset"}, ctx);
    } else if (kind == "coaxial") {
        e.kind = EdgeKind::Coaxial;
        checkKeys(j, {"kind", "parent", "parent_anchor", "child", "child_anchor", "offset"}, ctx);
    } else if (kind == "fixed") {
        e.kind = EdgeKind::FixedRelative;
        checkKeys(j,
                  {"kind", "parent", "parent_anchor", "child", "child_anchor", "translation",
                   "rotation"},
                  ctx);
    } else {
        syntax(ctx + ": kind must be 'attach', 'coaxial', or 'fixed'");
    }
    e.parent = asString(member(j, "parent", ctx), ctx + ".parent");
    e.child = asString(member(j, "child", ctx), ctx + ".child");
    e.parent_anchor = asString(member(j, "parent_anchor", ctx), ctx + ".parent_anchor");
    e.child_anchor = asString(member(j, "child_anchor", ctx), ctx + ".child_anchor");

    if (e.kind != EdgeKind::FixedRelative) {
        const json& off = member(j, "offset", ctx);
        const std::size_t want = e.kind == EdgeKind::Attach ? 2 : 1;
        if (!off.is_array() || off.size() != want)
            syntax(ctx + ".offset: expected " + std::to_string(want) + " entries");
        for (std::size_t i = 0; i < want; ++i)
            e.offset[i] = parseEntry(off[i], ctx + ".offset[" + std::to_string(i) + "]");
    } else {
        const json& tr = member(j, "translation", ctx);
        if (!tr.is_array() || tr.size() != 3) syntax(ctx + ".translation: expected 3 entries");
        for (std::size_t i = 0; i < 3; ++i)
            e.translation[i] = parseEntry(tr[i], ctx + ".translation[" + std::to_string(i) + "]");
        const json& rot = member(j, "rotation", ctx);
        if (!rot.is_array() || rot.size() != 4) syntax(ctx + ".rotation: expected 4 numbers");
        Scalar norm2 = 0;
        for (std::size_t i = 0; i < 4; ++i) {
            e.rotation[i] = asNumber(rot[i], ctx + ".rotation[" + std::to_string(i) + "]");
            norm2 += e.rotation[i] * e.rotation[i];
        }
        if (std::abs(std::sqrt(norm2) - 1.0) > 1e-9)
            fail(Errc::NonUnitQuaternion, ctx + ".rotation: quaternion is not unit length");
    }
    return e;
}

JointDecl parseJoint(const json& j, int index) {
    const std::string ctx = "joints[" + std::to_string(index) + "]";
    checkKeys(j, {"id", "kind", "parent", "child", "anchor", "range", "rest"}, ctx);
    JointDecl d;
    d.id = asString(member(j, "id", ctx), ctx + ".id");
    if (!isIdentifier(d.id)) syntax(ctx + ": joint id '" + d.id + "' is not an identifier");
    const std::string kind = asString(member(j, "kind", ctx), ctx + ".kind");
    if (kind == "revolute")
        d.kind = JointKind::Revolute;
    else if (kind == "prismatic")
        d.kind = JointKind::Prismatic;
    else if (kind == "fixed")
        d.kind = JointKind::Fixed;
    else
        syntax(ctx + ": kind must be 'revolute', 'prismatic', or 'fixed'");
    d.parent = asString(member(j, "parent", ctx), ctx + ".parent");
    d.child = asString(member(j, "child", ctx), ctx + ".child");

    const json& anchor = member(j, "anchor", ctx);
    if (anchor.is_string()) {
        d.anchor.alias = anchor.get<std::string>();
        if (d.anchor.alias.empty()) syntax(ctx + ".anchor: empty alias");
    } else {
        checkKeys(anchor, {"patch", "uv", "dir"}, ctx + ".anchor");
        d.anchor.patch = asString(member(anchor, "patch", ctx), ctx + ".anchor.patch");
        const json& uv = member(anchor, "uv", ctx + ".anchor");
        if (!uv.is_array() || uv.size() != 2) syntax(ctx + ".anchor.uv: expected 2 numbers");
        d.anchor.uv = Vec2(asNumber(uv[0], ctx), asNumber(uv[1], ctx));
        const json& dir = member(anchor, "dir", ctx + ".anchor");
        if (!dir.is_array() || dir.size() != 3) syntax(ctx + ".anchor.dir: expected 3 numbers");
        d.anchor.dir = Vec3(asNumber(dir[0], ctx), asNumber(dir[1], ctx), asNumber(dir[2], ctx));
        if (d.anchor.dir.norm() < 1e-12)
            fail(Errc::OutOfRange, ctx + ".anchor.dir: zero direction");
    }

    const json& range = member(j, "range", ctx);
    if (!range.is_array() || range.size() != 2) syntax(ctx + ".range: expected [lo, hi]");
    d.lo = asNumber(range[0], ctx + ".range");
    d.hi = asNumber(range[1], ctx + ".range");
    d.rest = asNumber(member(j, "rest", ctx), ctx + ".rest");
    if (!(d.lo <= d.rest && d.rest <= d.hi))
        fail(Errc::JointOutOfRange, ctx + ": rest value outside the joint range");
    return d;
}

Expr parseBound(const json& j, const std::string& ctx) {
    const std::string text = asString(j, ctx);
    try {
        return Expr::parse(text);
    } catch (const Error& err) {
        syntax(ctx + ": " + err.what());
    }
}

RegionSpec parseRegion(const json& j, int index) {
    const std::string ctx = "label_regions[" + std::to_string(index) + "]";
    checkKeys(j, {"label", "target", "part", "patches", "where"}, ctx);
    RegionSpec r;
    r.label = asString(member(j, "label", ctx), ctx + ".label");
    if (!isIdentifier(r.label)) syntax(ctx + ": label '" + r.label + "' is not an identifier");
    r.target = asString(member(j, "target", ctx), ctx + ".target");
    if (j.contains("part")) r.part = asString(j["part"], ctx + ".part");
    if (j.contains("patches")) {
        const json& patches = j["patches"];
        if (!patches.is_array()) syntax(ctx + ".patches: expected an array");
        for (const auto& p : patches) r.patches.push_back(asString(p, ctx + ".patches"));
    }
    const json& where = member(j, "where", ctx);
    if (!where.is_array()) syntax(ctx + ".where: expected an array");
    for (std::size_t i = 0; i < where.size(); ++i) {
        const std::string wctx = ctx + ".where[" + std::to_string(i) + "]";
        checkKeys(where[i], {"q", "min", "max"}, wctx);
        RegionConstraint c;
        c.quantity = asString(member(where[i], "q", wctx), wctx + ".q");
        if (!kQuantities.count(c.quantity))
            fail(Errc::OutOfRange, wctx + ": quantity must be one of u, v, x, y, z");
        if (where[i].contains("min")) c.lo = parseBound(where[i]["min"], wctx + ".min");
        if (where[i].contains("max")) c.hi = parseBound(where[i]["max"], wctx + ".max");
        r.where.push_back(std::move(c));
    }
    return r;
}

// --- cross-reference validation ---------------------------------------------

struct DeclInfo {
    const Declaration* decl = nullptr;
    const AdvancedTemplate* tmpl = nullptr;    // advanced only
    PrimitiveTemplateId prim{};                // elementary only
    std::map<std::string, AnchorRef> anchors;  // advanced only
    std::map<std::string, AxisAnchor> axes;    // advanced only
    std::map<std::string, PrimitiveTemplateId> parts;
};

std::map<std::string, DeclInfo> indexDeclarations(const StructureProgram& p) {
    std::map<std::string, DeclInfo> out;
    for (const auto& d : p.declarations) {
        if (out.count(d.name)) fail(Errc::DuplicateName, "duplicate declaration '" + d.name + "'");
        DeclInfo info;
        info.decl = &d;
        if (d.advanced) {
            info.tmpl = findAdvancedTemplate(d.template_name);
            if (!info.tmpl)
                fail(Errc::UnknownTemplate,
                     "declaration '" + d.name + "': unknown template '" + d.template_name + "'");
            const TemplateExpansion x = defaultExpansion(*info.tmpl);
            info.anchors = x.anchors;
            info.axes = x.axis_anchors;
            for (const auto& part : x.parts) info.parts.emplace(part.part, part.tmpl);
        } else {
            info.prim = templateFromName(d.template_name);
            info.parts.emplace(d.name, info.prim);
        }
        out.emplace(d.name, std::move(info));
    }
    return out;
}

const DeclInfo& declOf(const std::map<std::string, DeclInfo>& index, const std::string& name,
                       const std::string& ctx) {
    const auto it = index.find(name);
    if (it == index.end())
        fail(Errc::UnboundReference, ctx + ": unknown declaration '" + name + "'");
    return it->second;
}

// Checks an expression's references against the declared parameter scope.
// `self` names the declaration whose parameters bare identifiers refer to
// (empty = dotted references only).
void checkRefs(const Expr& expr, const std::map<std::string, DeclInfo>& index,
               const std::string& self, const std::string& ctx) {
    if (expr.empty()) return;
    for (const std::string& ref : expr.references()) {
        std::string decl = self, param = ref;
        if (const auto dot = ref.find('.'); dot != std::string::npos) {
            decl = ref.substr(0, dot);
            param = ref.substr(dot + 1);
            if (param.find('.') != std::string::npos)
                fail(Errc::UnboundReference, ctx + ": malformed reference '" + ref + "'");
        } else if (self.empty()) {
            fail(Errc::UnboundReference,
                 ctx + ": reference '" + ref + "' must name a declaration ('decl.param')");
        }
        const auto it = index.find(decl);
        if (it == index.end() || !it->second.decl->params.count(param))
            fail(Errc::UnboundReference, ctx + ": unbound reference '" + ref + "'");
    }
}

void validateAnchor(const DeclInfo& info, const std::string& anchor, EdgeKind kind, bool is_parent,
                    const std::string& ctx) {
    const std::string side = is_parent ? "parent_anchor" : "child_anchor";
    if (info.decl->advanced) {
        const auto it = info.anchors.find(anchor);
        if (it == info.anchors.end())
            fail(Errc::UnboundReference, ctx + "." + side + ": template '" + info.tmpl->name +
                                             "' declares no anchor '" + anchor + "'");
        if (kind == EdgeKind::Attach && it->second.patch.empty())
            fail(Errc::ParameterOutOfDomain,
                 ctx + "." + side + ": anchor '" + anchor + "' has no patch to attach to");
        return;
    }
    // Elementary: a patch name for attach, empty (part frame / own axis) otherwise.
    if (kind == EdgeKind::Attach) {
        patchIndex(info.prim, anchor); // throws UnknownPatch
    } else if (!anchor.empty()) {
        fail(Errc::ParameterOutOfDomain,
             ctx + "." + side + ": elementary declarations take an empty anchor here");
    }
}

void validateCrossReferences(const StructureProgram& p) {
    const auto index = indexDeclarations(p);
    if (!index.count(p.root)) fail(Errc::UnboundReference, "root '" + p.root + "' is not declared");

    for (const auto& d : p.declarations)
        for (const auto& [pname, entry] : d.params)
            checkRefs(entry.expr, index, d.name, "declaration '" + d.name + "'." + pname);

    std::map<std::string, std::string> parent_of;
    for (std::size_t i = 0; i < p.connectivity.size(); ++i) {
        const EdgeSpec& e = p.connectivity[i];
        const std::string ctx = "connectivity[" + std::to_string(i) + "]";
        const DeclInfo& parent = declOf(index, e.parent, ctx + ".parent");
        const DeclInfo& child = declOf(index, e.child, ctx + ".child");
        if (e.parent == e.child) fail(Errc::CyclicConnectivity, ctx + ": self-edge");
        validateAnchor(parent, e.parent_anchor, e.kind, true, ctx);
        validateAnchor(child, e.child_anchor, e.kind, false, ctx);
        for (const auto& entry : e.offset) checkRefs(entry.expr, index, "", ctx + ".offset");
        for (const auto& entry : e.translation)
            checkRefs(entry.expr, index, "", ctx + ".translation");
        if (!parent_of.emplace(e.child, e.parent).second)
            fail(Errc::CyclicConnectivity, ctx + ": '" + e.child + "' has multiple parents");
    }
    if (parent_of.count(p.root))
        fail(Errc::CyclicConnectivity, "root '" + p.root + "' has a parent edge");
    // Walk each decl toward the root; revisiting a node means a cycle.
    for (const auto& [child, parent] : parent_of) {
        (void)parent;
        std::set<std::string> seen;
        std::string cur = child;
        while (parent_of.count(cur)) {
            if (!seen.insert(cur).second)
                fail(Errc::CyclicConnectivity, "connectivity cycle through '" + cur + "'");
            cur = parent_of.at(cur);
        }
    }

    std::set<std::string> joint_ids;
    for (std::size_t i = 0; i < p.joints.size(); ++i) {
        const JointDecl& jd = p.joints[i];
        const std::string ctx = "joints[" + std::to_string(i) + "]";
        if (!joint_ids.insert(jd.id).second)
            fail(Errc::DuplicateName, ctx + ": duplicate joint id '" + jd.id + "'");
        const DeclInfo& parent = declOf(index, jd.parent, ctx + ".parent");
        declOf(index, jd.child, ctx + ".child");
        const auto it = parent_of.find(jd.child);
        if (it == parent_of.end() || it->second != jd.parent)
            fail(Errc::UnboundReference,
                 ctx + ": no connectivity edge from '" + jd.parent + "' to '" + jd.child + "'");
        if (!jd.anchor.alias.empty()) {
            if (!parent.decl->advanced || !parent.axes.count(jd.anchor.alias))
                fail(Errc::UnboundReference, ctx + ": parent declares no joint axis alias '" +
                                                 jd.anchor.alias + "'");
        } else {
            const PrimitiveTemplateId prim =
                parent.decl->advanced ? parent.parts.begin()->second : parent.prim;
            if (parent.decl->advanced)
                fail(Errc::UnboundReference,
                     ctx + ": advanced parents take a declared axis alias");
            patchIndex(prim, jd.anchor.patch); // throws UnknownPatch
        }
    }

    std::set<std::string> labels;
    for (std::size_t i = 0; i < p.label_regions.size(); ++i) {
        const RegionSpec& r = p.label_regions[i];
        const std::string ctx = "label_regions[" + std::to_string(i) + "]";
        if (!labels.insert(r.label).second)
            fail(Errc::DuplicateName, ctx + ": duplicate label '" + r.label + "'");
        const DeclInfo& target = declOf(index, r.target, ctx + ".target");
        if (!r.part.empty() && !target.parts.count(r.part))
            fail(Errc::UnboundReference,
                 ctx + ": '" + r.target + "' has no part '" + r.part + "'");
        for (const std::string& patch : r.patches) {
            bool known = false;
            for (const auto& [part, prim] : target.parts) {
                if (!r.part.empty() && part != r.part) continue;
                for (int k = 0; k < patchCount(prim) && !known; ++k)
                    known = patch == patchName(prim, k);
            }
            if (!known)
                fail(Errc::UnknownPatch, ctx + ": no targeted part has a patch '" + patch + "'");
        }
        for (const auto& c : r.where) {
            checkRefs(c.lo, index, r.target, ctx + ".where.min");
            checkRefs(c.hi, index, r.target, ctx + ".where.max");
        }
    }
    if (p.label_regions.size() > 32)
        fail(Errc::OutOfRange, "at most 32 label regions are supported");
}

// --- canonical writer -------------------------------------------------------

json entryJson(const ParamEntry& e) { return paramEntryToJson(e); }

} // namespace

const Declaration* StructureProgram::findDecl(const std::string& name) const {
    for (const auto& d : declarations)
        if (d.name == name) return &d;
    return nullptr;
}

int dofRemoved(EdgeKind kind) {
    switch (kind) {
    case EdgeKind::Attach: return 3;
    case EdgeKind::Coaxial: return 4;
    case EdgeKind::FixedRelative: return 6;
    }
    return 0;
}

StructureProgram parseProgram(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(Errc::SyntaxError,
             "byte " + std::to_string(e.byte) + ": " + std::string(e.what()));
    }
    if (!doc.is_object()) syntax("document root must be an object");
    checkKeys(doc,
              {"version", "category", "root", "declarations", "connectivity", "joints",
               "label_regions"},
              "document");
    const std::string version = asString(member(doc, "version", "document"), "version");
    if (version != kVersion)
        fail(Errc::UnsupportedFormat, "unsupported document version '" + version + "'");

    StructureProgram p;
    p.category = asString(member(doc, "category", "document"), "category");
    p.root = asString(member(doc, "root", "document"), "root");

    const json& decls = member(doc, "declarations", "document");
    if (!decls.is_array() || decls.empty()) syntax("declarations: expected a non-empty array");
    for (const auto& d : decls) p.declarations.push_back(parseDeclaration(d));

    const json& edges = member(doc, "connectivity", "document");
    if (!edges.is_array()) syntax("connectivity: expected an array");
    for (std::size_t i = 0; i < edges.size(); ++i)
        p.connectivity.push_back(parseEdge(edges[i], static_cast<int>(i)));

    const json& joints = member(doc, "joints", "document");
    if (!joints.is_array()) syntax("joints: expected an array");
    for (std::size_t i = 0; i < joints.size(); ++i)
        p.joints.push_back(parseJoint(joints[i], static_cast<int>(i)));

    const json& regions = member(doc, "label_regions", "document");
    if (!regions.is_array()) syntax("label_regions: expected an array");
    for (std::size_t i = 0; i < regions.size(); ++i)
        p.label_regions.push_back(parseRegion(regions[i], static_cast<int>(i)));

    validateCrossReferences(p);
    evaluateParams(p); // forces reference cycles and non-finite values to surface now
    return p;
}

std::string serializeProgram(const StructureProgram& program) {
    json doc;
    doc["version"] = kVersion;
    doc["category"] = program.category;
    doc["root"] = program.root;

    json decls = json::array();
    for (const auto& d : program.declarations) {
        json j;
        j["name"] = d.name;
        j["kind"] = d.advanced ? "advanced" : "elementary";
        j["template"] = d.template_name;
        j["semantic"] = d.semantic;
        j["essential"] = d.essential;
        json params = json::object();
        for (const auto& [pname, entry] : d.params) params[pname] = entryJson(entry);
        j["params"] = std::move(params);
        decls.push_back(std::move(j));
    }
    doc["declarations"] = std::move(decls);

    json edges = json::array();
    for (const auto& e : program.connectivity) {
        json j;
        j["kind"] = e.kind == EdgeKind::Attach  ? "attach"
                    : e.kind == EdgeKind::Coaxial ? "coaxial"
                                                  : "fixed";
        j["parent"] = e.parent;
        j["parent_anchor"] = e.parent_anchor;
        j["child"] = e.child;
        j["child_anchor"] = e.child_anchor;
        if (e.kind == EdgeKind::FixedRelative) {
            json tr = json::array();
            for (const auto& entry : e.translation) tr.push_back(entryJson(entry));
            j["translation"] = std::move(tr);
            j["rotation"] = json::array({e.rotation[0], e.rotation[1], e.rotation[2],
                                         e.rotation[3]});
        } else {
            json off = json::array();
            off.push_back(entryJson(e.offset[0]));
            if (e.kind == EdgeKind::Attach) off.push_back(entryJson(e.offset[1]));
            j["offset"] = std::move(off);
        }
        edges.push_back(std::move(j));
    }
    doc["connectivity"] = std::move(edges);

    json joints = json::array();
    for (const auto& jd : program.joints) {
        json j;
        j["id"] = jd.id;
        j["kind"] = jd.kind == JointKind::Revolute    ? "revolute"
                    : jd.kind == JointKind::Prismatic ? "prismatic"
                                                      : "fixed";
        j["parent"] = jd.parent;
        j["child"] = jd.child;
        if (!jd.anchor.alias.empty()) {
            j["anchor"] = jd.anchor.alias;
        } else {
            json a;
            a["patch"] = jd.anchor.patch;
            a["uv"] = json::array({jd.anchor.uv.x(), jd.anchor.uv.y()});
            a["dir"] = json::array({jd.anchor.dir.x(), jd.anchor.dir.y(), jd.anchor.dir.z()});
            j["anchor"] = std::move(a);
        }
        j["range"] = json::array({jd.lo, jd.hi});
        j["rest"] = jd.rest;
        joints.push_back(std::move(j));
    }
    doc["joints"] = std::move(joints);

    json regions = json::array();
    for (const auto& r : program.label_regions) {
        json j;
        j["label"] = r.label;
        j["target"] = r.target;
        j["part"] = r.part;
        j["patches"] = r.patches;
        json where = json::array();
        for (const auto& c : r.where) {
            json w;
            w["q"] = c.quantity;
            if (!c.lo.empty()) w["min"] = c.lo.toString();
            if (!c.hi.empty()) w["max"] = c.hi.toString();
            where.push_back(std::move(w));
        }
        j["where"] = std::move(where);
        regions.push_back(std::move(j));
    }
    doc["label_regions"] = std::move(regions);

    return canonicalDump(doc) + '\n';
}

std::map<std::string, Scalar> evaluateParams(const StructureProgram& program) {
    struct Pending {
        std::string decl;
        std::string key; // "decl.param"
        const Expr* expr;
    };
    std::map<std::string, Scalar> scope;
    std::vector<Pending> pending;
    for (const auto& d : program.declarations) {
        for (const auto& [pname, entry] : d.params) {
            const std::string key = d.name + "." + pname;
            if (entry.derived())
                pending.push_back({d.name, key, &entry.expr});
            else
                scope[key] = entry.value;
        }
    }
    while (!pending.empty()) {
        const std::size_t before = pending.size();
        for (auto it = pending.begin(); it != pending.end();) {
            const auto resolver = [&scope, &it](const std::string& name) -> Scalar {
                const std::string key =
                    name.find('.') == std::string::npos ? it->decl + "." + name : name;
                const auto found = scope.find(key);
                if (found == scope.end())
                    fail(Errc::UnboundReference, "unresolved reference '" + name + "'");
                return found->second;
            };
            bool ready = true;
            for (const std::string& ref : it->expr->references()) {
                const std::string key =
                    ref.find('.') == std::string::npos ? it->decl + "." + ref : ref;
                if (!scope.count(key)) {
                    ready = false;
                    break;
                }
            }
            if (!ready) {
                ++it;
                continue;
            }
            const Scalar v = it->expr->eval(resolver);
            if (!std::isfinite(v))
                fail(Errc::OutOfRange, "parameter '" + it->key + "' evaluates to a non-finite value");
            scope[it->key] = v;
            it = pending.erase(it);
        }
        if (pending.size() == before) {
            std::string names;
            for (const auto& p : pending) names += (names.empty() ? "" : ", ") + p.key;
            fail(Errc::UnboundReference, "parameter reference cycle: " + names);
        }
    }
    return scope;
}

std::vector<Diagnostic> validateProgram(const StructureProgram& program) {
    std::vector<Diagnostic> out;
    std::set<std::string> has_parent;
    for (const auto& e : program.connectivity) has_parent.insert(e.child);
    for (const auto& d : program.declarations) {
        if (d.name != program.root && !has_parent.count(d.name))
            out.push_back({Diagnostic::Kind::Floating, d.name, "",
                           "declaration '" + d.name + "' is not connected"});
    }
    if (!out.empty()) return out;

    try {
        const Structure s = elaborate(program);
        for (const auto& v : checkValidity(s))
            out.push_back({Diagnostic::Kind::Collision, v.a, v.b,
                           "collision between '" + v.a + "' and '" + v.b + "'"});
    } catch (const Error& e) {
        out.push_back({Diagnostic::Kind::Error, "", "", e.what()});
    }
    return out;
}

} // namespace artipg
