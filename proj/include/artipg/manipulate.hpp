#pragma once

#include "artipg/program.hpp"
#include "artipg/rng.hpp"

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace artipg {

// Knobs for the randomized structure manipulation pipeline.
struct ManipulationConfig {
    std::uint64_t seed = 0;
    // Continuous perturbation half-width as a fraction of each free
    // parameter's declared [lo, hi] range. 0 disables the continuous rule.
    Scalar cpa_scale = 0.2;
    bool dpa_enabled = true;
    bool apa_enabled = true;
    // Chance of removing each non-essential, non-root declaration.
    Scalar apa_drop_prob = 0.1;
    int max_repair_iters = 8;
};

// One recorded alteration. Applying a trace in order to the program it was
// produced from reproduces the manipulated program exactly; repair edits
// entries in place (shrinking or removing them), so the invariant holds for
// repaired results too.
struct Alteration {
    enum class Kind {
        SwapTemplate,    // advanced declaration re-templated within its role
        DropDeclaration, // non-essential declaration removed (with its subtree)
        SetCount,        // integer parameter resampled
        SetParam,        // free continuous declaration parameter perturbed
        SetEdgeOffset,   // free continuous connectivity offset perturbed
    };
    Kind kind = Kind::SetParam;
    std::string decl; // owning declaration (all kinds except SetEdgeOffset)

    // SwapTemplate: the full parameter map installed with the new template —
    // shared names carry their entries (bounds intersected with the new
    // template's, values clamped), new-only parameters get template defaults.
    std::string old_template;
    std::string new_template;
    std::map<std::string, ParamEntry> new_params;

    // SetCount / SetParam: parameter name. SetEdgeOffset: connectivity index
    // and offset slot instead.
    std::string param;
    int edge_index = -1;
    int offset_slot = 0;
    Scalar old_value = 0.0;
    Scalar new_value = 0.0;

    // SetCount bookkeeping consumed by detail migration when the parameter
    // feeds a replicated part: the source repetition copied for each added
    // replica, and the trailing repetitions removed.
    std::string part;
    std::vector<int> replica_sources;
    std::vector<int> removed_reps;
};

using AlterationTrace = std::vector<Alteration>;

struct ManipulationResult {
    StructureProgram program;
    AlterationTrace trace;
};

// Composes the three rules in fixed order — template/existence alterations,
// then discrete resampling, then continuous perturbation — re-validating
// after each stage and repairing on failure. Pure function of
// (program, config): repeated calls are byte-identical. Requires a program
// that passes validateProgram; the result passes it too (repair falls back
// to a full revert of the offending stage). Throws RepairFailed only when
// the input program itself is invalid.
ManipulationResult manipulate(const StructureProgram& program, const ManipulationConfig& config);

// Individual rules, each returning an already-repaired valid program.
// manipulate composes them with sub-streams split from config.seed.
ManipulationResult alterAdvanced(const StructureProgram& program, Rng& rng,
                                 const ManipulationConfig& config);
ManipulationResult alterDiscrete(const StructureProgram& program, Rng& rng,
                                 const ManipulationConfig& config);
ManipulationResult alterContinuous(const StructureProgram& program, Rng& rng,
                                   const ManipulationConfig& config);

// Shrinks continuous perturbations (halving toward their original values)
// and reverts discrete/structural alterations owned by offending
// declarations until the program validates cleanly, up to max_iters
// shrink rounds, then falls back to reverting everything. `original` must
// be the program the trace was recorded against. Returns the repaired
// program and the edited trace. Throws RepairFailed when even the full
// revert fails validation (i.e. `original` was invalid).
ManipulationResult repair(const StructureProgram& original, AlterationTrace trace, int max_iters);

// Applies a recorded trace to the program it was recorded against.
StructureProgram replayTrace(const StructureProgram& program, const AlterationTrace& trace);

// Declarations removed by dropping `decl`: the declaration itself plus every
// declaration whose path to the root passes through it, in declaration
// order. Shared by the drop rule, replay, and detail migration.
std::vector<std::string> dropClosure(const StructureProgram& program, const std::string& decl);

// Canonical JSON round-trip for the dataset sidecar.
std::string serializeTrace(const AlterationTrace& trace);
AlterationTrace parseTrace(const std::string& text);

} // namespace artipg
