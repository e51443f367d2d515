#include "artipg/manipulate.hpp"

#include "artipg/json_io.hpp"
#include "artipg/templates.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace artipg {
namespace {

using nlohmann::json;

Declaration& findDeclRef(StructureProgram& p, const std::string& name) {
    for (auto& d : p.declarations)
        if (d.name == name) return d;
    fail(Errc::UnknownTarget, "no declaration named '" + name + "'");
}

ParamEntry defaultEntry(const TemplateParamSpec& spec) {
    ParamEntry e;
    e.value = spec.value;
    e.has_bounds = true;
    e.lo = spec.lo;
    e.hi = spec.hi;
    e.integer = spec.integer;
    return e;
}

// Parameter map for a role swap: shared names carry their entries with
// bounds intersected against the new template's declared range and values
// clamped into it; parameters only the new template knows become free at
// its defaults; parameters only the old template knew are dropped. Carrying
// width/depth/height values verbatim is what makes the replacement inherit
// the replaced template's overall dimensions.
std::map<std::string, ParamEntry> swapParams(const Declaration& d, const AdvancedTemplate& to) {
    std::map<std::string, ParamEntry> out;
    for (const auto& spec : to.params) {
        const auto it = d.params.find(spec.name);
        if (it == d.params.end()) {
            out[spec.name] = defaultEntry(spec);
            continue;
        }
        const ParamEntry& old = it->second;
        if (old.derived()) {
            out[spec.name] = old;
            continue;
        }
        if (old.integer != spec.integer) {
            out[spec.name] = defaultEntry(spec);
            continue;
        }
        ParamEntry e = old;
        if (e.has_bounds) {
            e.lo = std::max(e.lo, spec.lo);
            e.hi = std::min(e.hi, spec.hi);
        } else {
            e.has_bounds = true;
            e.lo = spec.lo;
            e.hi = spec.hi;
        }
        if (e.lo > e.hi) {
            out[spec.name] = defaultEntry(spec);
            continue;
        }
        e.value = std::clamp(e.value, e.lo, e.hi);
        if (e.integer) e.value = std::round(e.value);
        out[spec.name] = e;
    }
    return out;
}

void applyAlteration(StructureProgram& p, const Alteration& a) {
    switch (a.kind) {
    case Alteration::Kind::SwapTemplate: {
        Declaration& d = findDeclRef(p, a.decl);
        d.template_name = a.new_template;
        d.params = a.new_params;
        return;
    }
    case Alteration::Kind::DropDeclaration: {
        findDeclRef(p, a.decl);
        const auto removed = dropClosure(p, a.decl);
        const std::set<std::string> gone(removed.begin(), removed.end());
        std::erase_if(p.declarations, [&](const Declaration& d) { return gone.count(d.name); });
        std::erase_if(p.connectivity, [&](const EdgeSpec& e) {
            return gone.count(e.parent) || gone.count(e.child);
        });
        std::erase_if(p.joints, [&](const JointDecl& j) {
            return gone.count(j.parent) || gone.count(j.child);
        });
        std::erase_if(p.label_regions,
                      [&](const RegionSpec& r) { return gone.count(r.target); });
        return;
    }
    case Alteration::Kind::SetCount:
    case Alteration::Kind::SetParam: {
        Declaration& d = findDeclRef(p, a.decl);
        const auto it = d.params.find(a.param);
        if (it == d.params.end() || it->second.derived())
            fail(Errc::UnknownTarget,
                 "declaration '" + a.decl + "' has no settable parameter '" + a.param + "'");
        it->second.value = a.new_value;
        return;
    }
    case Alteration::Kind::SetEdgeOffset: {
        if (a.edge_index < 0 || a.edge_index >= static_cast<int>(p.connectivity.size()) ||
            a.offset_slot < 0 || a.offset_slot > 1)
            fail(Errc::UnknownTarget, "no connectivity offset at index " +
                                          std::to_string(a.edge_index) + " slot " +
                                          std::to_string(a.offset_slot));
        p.connectivity[static_cast<std::size_t>(a.edge_index)]
            .offset[static_cast<std::size_t>(a.offset_slot)]
            .value = a.new_value;
        return;
    }
    }
}

void checkConfig(const ManipulationConfig& cfg) {
    if (!(cfg.cpa_scale >= 0.0 && cfg.cpa_scale <= 1.0))
        fail(Errc::OutOfRange, "cpa_scale must lie in [0, 1]");
    if (!(cfg.apa_drop_prob >= 0.0 && cfg.apa_drop_prob <= 1.0))
        fail(Errc::OutOfRange, "apa_drop_prob must lie in [0, 1]");
    if (cfg.max_repair_iters < 0)
        fail(Errc::OutOfRange, "max_repair_iters must be non-negative");
}

bool isStructural(const Alteration& a) {
    return a.kind == Alteration::Kind::SwapTemplate ||
           a.kind == Alteration::Kind::DropDeclaration || a.kind == Alteration::Kind::SetCount;
}

bool isNoOp(const Alteration& a) {
    // Swaps and drops always change the program (a same-template swap can
    // still replace the parameter map), so only numeric entries can cancel.
    switch (a.kind) {
    case Alteration::Kind::SwapTemplate:
    case Alteration::Kind::DropDeclaration: return false;
    default: return a.old_value == a.new_value;
    }
}

// Declarations implicated by a diagnostic subject ("decl" or "decl.part#k").
std::string declOfSubject(const std::string& subject) {
    const auto dot = subject.find('.');
    return dot == std::string::npos ? subject : subject.substr(0, dot);
}

std::set<std::string> offendingDecls(const std::vector<Diagnostic>& diags) {
    std::set<std::string> out;
    for (const auto& d : diags) {
        if (!d.subject_a.empty()) out.insert(declOfSubject(d.subject_a));
        if (!d.subject_b.empty()) out.insert(declOfSubject(d.subject_b));
    }
    return out;
}

// `offenders` empty means the failure could not be attributed (an
// elaboration error without subjects): blame every entry.
bool owns(const Alteration& a, const std::set<std::string>& offenders,
          const StructureProgram& current) {
    if (offenders.empty()) return true;
    if (a.kind == Alteration::Kind::SetEdgeOffset) {
        if (a.edge_index < 0 || a.edge_index >= static_cast<int>(current.connectivity.size()))
            return true;
        const EdgeSpec& e = current.connectivity[static_cast<std::size_t>(a.edge_index)];
        return offenders.count(e.parent) || offenders.count(e.child);
    }
    return offenders.count(a.decl) != 0;
}

// --- rule proposals ---------------------------------------------------------

AlterationTrace proposeAdvanced(const StructureProgram& p, Rng& rng,
                                const ManipulationConfig& cfg) {
    AlterationTrace trace;
    for (const auto& d : p.declarations) {
        if (!d.advanced) continue;
        const AdvancedTemplate* cur = findAdvancedTemplate(d.template_name);
        if (!cur) fail(Errc::NoCompatibleTemplate, "unknown template '" + d.template_name + "'");
        const auto group = templatesForRole(cur->role);
        if (group.empty())
            fail(Errc::NoCompatibleTemplate, "role '" + cur->role + "' has no templates");
        const auto pick =
            group[static_cast<std::size_t>(rng.uniformInt(0, static_cast<int>(group.size()) - 1))];
        if (pick->name == d.template_name) continue;
        Alteration a;
        a.kind = Alteration::Kind::SwapTemplate;
        a.decl = d.name;
        a.old_template = d.template_name;
        a.new_template = pick->name;
        a.new_params = swapParams(d, *pick);
        trace.push_back(std::move(a));
    }
    std::set<std::string> already_gone;
    for (const auto& d : p.declarations) {
        if (d.name == p.root || d.essential || already_gone.count(d.name)) continue;
        // The whole subtree goes with the declaration; dropping is only on
        // the table when nothing essential hangs below.
        const auto closure = dropClosure(p, d.name);
        if (std::any_of(closure.begin(), closure.end(), [&](const std::string& n) {
                return p.findDecl(n)->essential;
            }))
            continue;
        if (!rng.bernoulli(cfg.apa_drop_prob)) continue;
        Alteration a;
        a.kind = Alteration::Kind::DropDeclaration;
        a.decl = d.name;
        trace.push_back(std::move(a));
        already_gone.insert(closure.begin(), closure.end());
    }
    return trace;
}

AlterationTrace proposeDiscrete(const StructureProgram& p, Rng& rng) {
    AlterationTrace trace;
    for (const auto& d : p.declarations) {
        if (!d.advanced) continue;
        const AdvancedTemplate* t = findAdvancedTemplate(d.template_name);
        for (const auto& [pname, entry] : d.params) {
            if (!entry.isFree() || !entry.integer) continue;
            const auto lo = static_cast<std::int64_t>(std::llround(entry.lo));
            const auto hi = static_cast<std::int64_t>(std::llround(entry.hi));
            if (hi <= lo) continue; // degenerate range: nothing to resample
            const auto nv = rng.uniformInt(lo, hi);
            const auto old = static_cast<std::int64_t>(std::llround(entry.value));
            if (nv == old) continue;
            Alteration a;
            a.kind = Alteration::Kind::SetCount;
            a.decl = d.name;
            a.param = pname;
            a.old_value = static_cast<Scalar>(old);
            a.new_value = static_cast<Scalar>(nv);
            if (t) {
                for (const auto& [part, count_name] : t->count_param_of_part) {
                    if (count_name != pname) continue;
                    a.part = part;
                    for (std::int64_t rep = old; rep < nv; ++rep)
                        a.replica_sources.push_back(static_cast<int>(rep % old));
                    for (std::int64_t rep = nv; rep < old; ++rep)
                        a.removed_reps.push_back(static_cast<int>(rep));
                }
            }
            trace.push_back(std::move(a));
        }
    }
    return trace;
}

AlterationTrace proposeContinuous(const StructureProgram& p, Rng& rng,
                                  const ManipulationConfig& cfg) {
    AlterationTrace trace;
    const auto perturb = [&](const ParamEntry& entry) {
        const Scalar delta = rng.uniform(-1.0, 1.0) * cfg.cpa_scale * (entry.hi - entry.lo);
        return std::clamp(entry.value + delta, entry.lo, entry.hi);
    };
    for (const auto& d : p.declarations) {
        for (const auto& [pname, entry] : d.params) {
            if (!entry.isFree() || entry.integer) continue;
            const Scalar nv = perturb(entry);
            if (nv == entry.value) continue;
            Alteration a;
            a.kind = Alteration::Kind::SetParam;
            a.decl = d.name;
            a.param = pname;
            a.old_value = entry.value;
            a.new_value = nv;
            trace.push_back(std::move(a));
        }
    }
    for (std::size_t i = 0; i < p.connectivity.size(); ++i) {
        const EdgeSpec& e = p.connectivity[i];
        if (e.kind == EdgeKind::FixedRelative) continue;
        const std::size_t slots = e.kind == EdgeKind::Attach ? 2 : 1;
        for (std::size_t slot = 0; slot < slots; ++slot) {
            const ParamEntry& entry = e.offset[slot];
            if (!entry.isFree() || entry.integer) continue;
            const Scalar nv = perturb(entry);
            if (nv == entry.value) continue;
            Alteration a;
            a.kind = Alteration::Kind::SetEdgeOffset;
            a.edge_index = static_cast<int>(i);
            a.offset_slot = static_cast<int>(slot);
            a.old_value = entry.value;
            a.new_value = nv;
            trace.push_back(std::move(a));
        }
    }
    return trace;
}

} // namespace

std::vector<std::string> dropClosure(const StructureProgram& p, const std::string& decl) {
    std::set<std::string> gone{decl};
    // Connectivity is acyclic (enforced at parse), so one pass per depth
    // level suffices; loop until the closure stops growing.
    bool grew = true;
    while (grew) {
        grew = false;
        for (const auto& e : p.connectivity) {
            if (gone.count(e.parent) && !gone.count(e.child)) {
                gone.insert(e.child);
                grew = true;
            }
        }
    }
    std::vector<std::string> out;
    for (const auto& d : p.declarations)
        if (gone.count(d.name)) out.push_back(d.name);
    return out;
}

StructureProgram replayTrace(const StructureProgram& program, const AlterationTrace& trace) {
    StructureProgram p = program;
    for (const auto& a : trace) applyAlteration(p, a);
    return p;
}

ManipulationResult repair(const StructureProgram& original, AlterationTrace trace, int max_iters) {
    StructureProgram current = replayTrace(original, trace);
    auto diags = validateProgram(current);
    for (int iter = 0; iter < max_iters && !diags.empty(); ++iter) {
        const auto offenders = offendingDecls(diags);
        bool changed = false;
        // Shrink every offending continuous perturbation halfway back toward
        // its original value; total perturbation magnitude strictly drops.
        for (auto& a : trace) {
            if (isStructural(a) || !owns(a, offenders, current)) continue;
            if (a.new_value == a.old_value) continue;
            Scalar nv = a.old_value + 0.5 * (a.new_value - a.old_value);
            if (std::abs(nv - a.old_value) < 1e-12 * std::max(1.0, std::abs(a.old_value)))
                nv = a.old_value;
            if (nv != a.new_value) {
                a.new_value = nv;
                changed = true;
            }
        }
        if (!changed) {
            // No continuous slack left: revert the most recent offending
            // structural alteration outright.
            for (auto it = trace.rbegin(); it != trace.rend(); ++it) {
                if (!isStructural(*it) || !owns(*it, offenders, current)) continue;
                trace.erase(std::next(it).base());
                changed = true;
                break;
            }
        }
        if (!changed) break;
        current = replayTrace(original, trace);
        diags = validateProgram(current);
    }
    if (!diags.empty()) {
        // Full revert: the original program is known-valid, so this never
        // fails unless the caller handed over an invalid input.
        trace.clear();
        current = original;
        diags = validateProgram(current);
        if (!diags.empty())
            fail(Errc::RepairFailed,
                 "input program is invalid: " + diags.front().message);
    }
    std::erase_if(trace, isNoOp);
    return {std::move(current), std::move(trace)};
}

ManipulationResult alterAdvanced(const StructureProgram& program, Rng& rng,
                                 const ManipulationConfig& config) {
    checkConfig(config);
    return repair(program, proposeAdvanced(program, rng, config), config.max_repair_iters);
}

ManipulationResult alterDiscrete(const StructureProgram& program, Rng& rng,
                                 const ManipulationConfig& config) {
    checkConfig(config);
    return repair(program, proposeDiscrete(program, rng), config.max_repair_iters);
}

ManipulationResult alterContinuous(const StructureProgram& program, Rng& rng,
                                   const ManipulationConfig& config) {
    checkConfig(config);
    return repair(program, proposeContinuous(program, rng, config), config.max_repair_iters);
}

ManipulationResult manipulate(const StructureProgram& program, const ManipulationConfig& config) {
    checkConfig(config);
    Rng root(mixSeed(config.seed, rng_stage::kManipulate));
    Rng apa_rng = root.split(1);
    Rng dpa_rng = root.split(2);
    Rng cpa_rng = root.split(3);

    ManipulationResult out{program, {}};
    const auto run = [&out](ManipulationResult stage) {
        out.program = std::move(stage.program);
        out.trace.insert(out.trace.end(), std::make_move_iterator(stage.trace.begin()),
                         std::make_move_iterator(stage.trace.end()));
    };
    if (config.apa_enabled) run(alterAdvanced(out.program, apa_rng, config));
    if (config.dpa_enabled) run(alterDiscrete(out.program, dpa_rng, config));
    if (config.cpa_scale > 0) run(alterContinuous(out.program, cpa_rng, config));
    return out;
}

// --- trace serialization ----------------------------------------------------

std::string serializeTrace(const AlterationTrace& trace) {
    json arr = json::array();
    for (const auto& a : trace) {
        json j;
        switch (a.kind) {
        case Alteration::Kind::SwapTemplate: {
            j["kind"] = "swap_template";
            j["decl"] = a.decl;
            j["old_template"] = a.old_template;
            j["new_template"] = a.new_template;
            json params = json::object();
            for (const auto& [name, entry] : a.new_params)
                params[name] = paramEntryToJson(entry);
            j["params"] = std::move(params);
            break;
        }
        case Alteration::Kind::DropDeclaration:
            j["kind"] = "drop_declaration";
            j["decl"] = a.decl;
            break;
        case Alteration::Kind::SetCount:
            j["kind"] = "set_count";
            j["decl"] = a.decl;
            j["param"] = a.param;
            j["old"] = a.old_value;
            j["new"] = a.new_value;
            if (!a.part.empty()) {
                j["part"] = a.part;
                j["sources"] = a.replica_sources;
                j["removed"] = a.removed_reps;
            }
            break;
        case Alteration::Kind::SetParam:
            j["kind"] = "set_param";
            j["decl"] = a.decl;
            j["param"] = a.param;
            j["old"] = a.old_value;
            j["new"] = a.new_value;
            break;
        case Alteration::Kind::SetEdgeOffset:
            j["kind"] = "set_edge_offset";
            j["edge"] = a.edge_index;
            j["slot"] = a.offset_slot;
            j["old"] = a.old_value;
            j["new"] = a.new_value;
            break;
        }
        arr.push_back(std::move(j));
    }
    return canonicalDump(arr) + '\n';
}

AlterationTrace parseTrace(const std::string& text) {
    json arr;
    try {
        arr = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(Errc::SyntaxError, std::string("trace: ") + e.what());
    }
    if (!arr.is_array()) fail(Errc::SyntaxError, "trace: expected an array");
    AlterationTrace trace;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        const json& j = arr[i];
        const std::string ctx = "trace[" + std::to_string(i) + "]";
        if (!j.is_object() || !j.contains("kind") || !j["kind"].is_string())
            fail(Errc::SyntaxError, ctx + ": missing kind");
        const std::string kind = j["kind"].get<std::string>();
        Alteration a;
        const auto str = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_string())
                fail(Errc::SyntaxError, ctx + ": missing string field '" + std::string(key) + "'");
            return j[key].get<std::string>();
        };
        const auto num = [&](const char* key) {
            if (!j.contains(key) || !j[key].is_number())
                fail(Errc::SyntaxError, ctx + ": missing numeric field '" + std::string(key) + "'");
            return j[key].get<Scalar>();
        };
        if (kind == "swap_template") {
            a.kind = Alteration::Kind::SwapTemplate;
            a.decl = str("decl");
            a.old_template = str("old_template");
            a.new_template = str("new_template");
            if (!j.contains("params") || !j["params"].is_object())
                fail(Errc::SyntaxError, ctx + ": missing params object");
            for (const auto& [name, entry] : j["params"].items())
                a.new_params[name] = paramEntryFromJson(entry, ctx + ".params." + name);
        } else if (kind == "drop_declaration") {
            a.kind = Alteration::Kind::DropDeclaration;
            a.decl = str("decl");
        } else if (kind == "set_count") {
            a.kind = Alteration::Kind::SetCount;
            a.decl = str("decl");
            a.param = str("param");
            a.old_value = num("old");
            a.new_value = num("new");
            if (j.contains("part")) {
                a.part = str("part");
                for (const auto& v : j.value("sources", json::array()))
                    a.replica_sources.push_back(v.get<int>());
                for (const auto& v : j.value("removed", json::array()))
                    a.removed_reps.push_back(v.get<int>());
            }
        } else if (kind == "set_param") {
            a.kind = Alteration::Kind::SetParam;
            a.decl = str("decl");
            a.param = str("param");
            a.old_value = num("old");
            a.new_value = num("new");
        } else if (kind == "set_edge_offset") {
            a.kind = Alteration::Kind::SetEdgeOffset;
            a.edge_index = static_cast<int>(num("edge"));
            a.offset_slot = static_cast<int>(num("slot"));
            a.old_value = num("old");
            a.new_value = num("new");
        } else {
            fail(Errc::SyntaxError, ctx + ": unknown kind '" + kind + "'");
        }
        trace.push_back(std::move(a));
    }
    return trace;
}

} // namespace artipg
