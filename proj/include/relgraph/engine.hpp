#pragma once

#include "relgraph/graph.hpp"
#include "relgraph/graph_json.hpp"
#include "relgraph/kb.hpp"

#include <optional>
#include <span>
#include <string>
#include <vector>

namespace relgraph {

/// Justification of one inferred triple. Depth is 1 for a triple inferred
/// from non-inferred premises.
struct Derivation {
    TripleKey conclusion;
    Rule rule;
    std::vector<TripleKey> premises;
    int depth = 1;

    friend bool operator==(const Derivation&, const Derivation&) = default;
};

struct CloseResult {
    Graph graph;
    /// One entry per added triple, in derivation order (premises first).
    std::vector<Derivation> derivations;
    int max_depth = 0;
    /// Set when some derivation is deeper than |V|·|R|.
    bool depth_cap_hit = false;
};

/// Least fixpoint of Symmetry, Inversion, Composition and Subtype over the
/// suggested and confirmed triples of `g`. Added triples are `suggested` with
/// inferred provenance. Existing triples, tombstones included, are never
/// touched. Semi-naive: each round only joins the previous round's additions.
CloseResult close(const Graph& g, const RuleKB& kb);

/// Derivations for every inferred triple currently in the graph, depth
/// computed through inferred premises, in (depth, conclusion) order.
std::vector<Derivation> derivations_of(const Graph& g);

enum class ConflictState : std::uint8_t { open, resolved };

struct Conflict {
    Rule rule;  // incompatible, asymmetric or exclusive
    std::vector<TripleKey> offenders;
    ConflictState state = ConflictState::open;
    std::vector<TripleKey> kept;
    std::vector<TripleKey> dropped;

    /// Stable id derived from the rule and the offenders.
    std::string id() const;

    friend bool operator==(const Conflict&, const Conflict&) = default;
};

/// Every instantiation of the conflict rules over suggested and confirmed
/// triples, ordered by (rule, offenders).
///
/// Incompatible(r1,r2): r1(x,y) with r2(x,y), offenders in rule-argument order.
/// Asymmetric(r1,r2):   r1(x,y) with r2(y,x).
/// Exclusive(r):        all live r(x,·) triples once x has two or more.
std::vector<Conflict> detect_conflicts(const Graph& g, const RuleKB& kb);

// --- completion planning ----------------------------------------------------

enum class OpKind : std::uint8_t {
    t1_symmetry,      // symmetric or inverse rule, one premise
    t2_transitive,    // composition, two premises
    copy_completion,  // subtype, one premise
    manual_add,
    manual_remove,
};

std::string_view to_string(OpKind kind);
std::optional<OpKind> op_kind_from_string(std::string_view text);

struct CompletionOp {
    OpKind kind = OpKind::manual_add;
    TripleKey triple;
    std::vector<TripleKey> premises;
    std::optional<Rule> rule;  // set for the three inferred kinds

    friend bool operator==(const CompletionOp&, const CompletionOp&) = default;
};

struct CompletionPlan {
    std::vector<CompletionOp> ops;
    /// The start graph had triples the target lacks, so removals were needed.
    bool needs_removals = false;

    std::size_t count(OpKind kind) const;
};

/// An operation sequence turning the triple set of `from` into exactly that of
/// `to`. Stages run in the order symmetry, transitive, copy and repeat until
/// nothing more is derivable from the accumulated graph; target triples still
/// missing are added manually. Only target triples are ever derived.
/// Throws ValidationError when the entity sets differ.
CompletionPlan plan_completion(const Graph& from, const Graph& to, const RuleKB& kb);

struct ApplyError {
    std::size_t index = 0;
    std::string message;
};

struct ApplyResult {
    Graph graph;
    std::size_t applied = 0;
    std::optional<ApplyError> error;
};

/// Applies ops in order: inferred kinds add suggested triples, manual_add
/// adds confirmed ones, manual_remove erases. Stops at the first op whose
/// premises are missing (or whose rule does not produce its triple) and
/// returns the graph as of the last good op.
ApplyResult apply_ops(const Graph& g, std::span<const CompletionOp> ops, const RuleKB& kb);

Json to_json(const Derivation& d);
Json to_json(const Conflict& c);
Json to_json(const CompletionOp& op);
CompletionOp completion_op_from_json(const Json& j);
Json to_json(const CompletionPlan& plan);
CompletionPlan completion_plan_from_json(const Json& j);

} // namespace relgraph
