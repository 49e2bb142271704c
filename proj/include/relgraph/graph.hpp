#pragma once

#include "relgraph/kb.hpp"

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace relgraph {

struct Document {
    std::string id;
    std::string text;
    std::string title;
};

/// Half-open [start, end) range of Unicode scalar offsets into a document.
struct MentionSpan {
    std::size_t start = 0;
    std::size_t end = 0;

    friend auto operator<=>(const MentionSpan&, const MentionSpan&) = default;
};

enum class EntityStatus : std::uint8_t { suggested, confirmed };

struct Entity {
    std::string id;
    std::string canonical;
    std::set<std::string> aliases;
    std::vector<MentionSpan> mentions;  // sorted, unique
    EntityStatus status = EntityStatus::suggested;
    int votes = 0;  // extraction votes, 0 for manually added entities

    friend bool operator==(const Entity&, const Entity&) = default;
};

/// Triple statuses. The enumerator order is the merge-collapse precedence:
/// a higher value wins.
enum class TripleStatus : std::uint8_t { rejected, suggested, conflicted, confirmed };

std::string_view to_string(TripleStatus status);
std::optional<TripleStatus> triple_status_from_string(std::string_view text);
std::string_view to_string(EntityStatus status);
std::optional<EntityStatus> entity_status_from_string(std::string_view text);

struct TripleKey {
    std::string src;
    std::string rel;
    std::string dst;

    friend auto operator<=>(const TripleKey&, const TripleKey&) = default;

    /// "src~rel~dst"; URL-safe, used by the HTTP API.
    std::string str() const;
    static TripleKey parse(std::string_view text);
};

/// Where a triple came from. Precedence when two sources meet on one key:
/// manual > extracted > inferred.
struct Provenance {
    enum class Kind : std::uint8_t { inferred, extracted, manual };

    Kind kind = Kind::manual;
    int votes = 0;                    // extracted
    std::optional<Rule> rule;         // inferred
    std::vector<TripleKey> premises;  // inferred

    static Provenance manual() { return {}; }
    static Provenance extracted(int votes) { return {Kind::extracted, votes, std::nullopt, {}}; }
    static Provenance inferred(Rule rule, std::vector<TripleKey> premises) {
        return {Kind::inferred, 0, std::move(rule), std::move(premises)};
    }

    friend bool operator==(const Provenance&, const Provenance&) = default;
};

std::string_view to_string(Provenance::Kind kind);

struct Triple {
    TripleKey key;
    TripleStatus status = TripleStatus::suggested;
    Provenance provenance;

    friend bool operator==(const Triple&, const Triple&) = default;
};

/// Statuses that take part in reasoning (closure premises, conflicts).
inline bool is_live(TripleStatus s) {
    return s == TripleStatus::suggested || s == TripleStatus::confirmed;
}

/// The annotation graph for one document.
///
/// Invariants: every triple endpoint is a live entity; no alias is shared by
/// two entities; each entity's canonical name is one of its aliases; triple
/// keys are unique (by construction of the map); inferred premises exist.
struct Graph {
    std::string doc_id;
    std::map<std::string, Entity, std::less<>> entities;
    std::map<TripleKey, Triple> triples;
    std::uint64_t kb_version = 1;
    std::uint64_t next_entity_seq = 1;
    /// Entity names the annotator rejected; extraction will not re-suggest them.
    std::set<std::string> rejected_names;

    const Entity* find_entity(std::string_view id) const;
    const Triple* find_triple(const TripleKey& key) const;
    const Entity* entity_by_alias(std::string_view alias) const;
    std::set<TripleKey> keys() const;

    friend bool operator==(const Graph&, const Graph&) = default;
};

/// Throws ValidationError naming the first broken invariant.
void check_invariants(const Graph& g, const RuleKB* kb = nullptr);

// --- entity edits -----------------------------------------------------------

struct NewEntity {
    std::string canonical;
    std::set<std::string> aliases;
    std::vector<MentionSpan> mentions;
    EntityStatus status = EntityStatus::suggested;
    int votes = 0;
};

/// Returns the fresh entity id. Throws ValidationError on alias collision.
std::string add_entity(Graph& g, NewEntity entity);

struct EntityPatch {
    std::optional<EntityStatus> status;
    std::optional<std::string> canonical;
    std::optional<std::set<std::string>> aliases;
};

void update_entity(Graph& g, std::string_view id, const EntityPatch& patch);

/// Removes the entity and all triples touching it; its aliases become
/// rejected names.
void remove_entity(Graph& g, const RuleKB& kb, std::string_view id);

struct MergeReport {
    std::vector<TripleKey> dropped_self_loops;  // keys after rewriting
    std::vector<TripleKey> collapsed;           // surviving key of each collapse
    std::vector<TripleKey> retracted;
};

/// Folds `absorb` into `keep`: aliases and mentions are united, triple
/// endpoints rewritten, colliding triples collapsed by status precedence.
MergeReport merge_entities(Graph& g, const RuleKB& kb, std::string_view keep,
                           std::string_view absorb);

struct SplitPart {
    std::string canonical;
    std::set<std::string> aliases;
    std::vector<MentionSpan> mentions;
};

/// Replaces `src` by one fresh entity per part. Each existing alias and
/// mention of `src` must go to exactly one part; parts may introduce new,
/// unused names. Every triple touching `src` must be assigned a part index.
/// Returns the new ids in part order.
std::vector<std::string> split_entity(Graph& g, const RuleKB& kb, std::string_view src,
                                      std::span<const SplitPart> parts,
                                      const std::map<TripleKey, std::size_t>& assignment);

// --- triple edits -----------------------------------------------------------

enum class UpsertOutcome : std::uint8_t { inserted, updated, unchanged, kept_tombstone };

/// Inserts or updates a triple.
///
/// On an existing key the higher-precedence provenance is kept; the status is
/// only overwritten by manual upserts. A rejected key is a tombstone: only a
/// manual upsert revives it.
UpsertOutcome upsert_triple(Graph& g, const RuleKB& kb, const TripleKey& key,
                            TripleStatus status, Provenance provenance);

void set_status(Graph& g, const TripleKey& key, TripleStatus status);

/// Erases the triple (no tombstone) and retracts inferences that relied on it.
/// Returns the keys retracted as a consequence.
std::vector<TripleKey> remove_triple(Graph& g, const RuleKB& kb, const TripleKey& key);

/// An inferred triple is supported when every premise is present and not
/// rejected, no premise is the conclusion itself, and its rule is still in
/// the KB and instantiates to its premises. Unsupported triples that are still
/// `suggested` are erased; any other status becomes manual provenance since a
/// human has already ruled on it. Repeats to a fixpoint and returns erased keys.
std::vector<TripleKey> retract_unsupported(Graph& g, const RuleKB& kb);

/// Whether `rule` applied to `premises` concludes exactly `conclusion`.
bool rule_instantiates(const Rule& rule, std::span<const TripleKey> premises,
                       const TripleKey& conclusion);

struct TriplePattern {
    std::optional<std::string> src;
    std::optional<std::string> rel;
    std::optional<std::string> dst;
    std::optional<TripleStatus> status;
};

/// Triples matching every bound field, in (src, rel, dst) order.
std::vector<Triple> query(const Graph& g, const TriplePattern& pattern);

} // namespace relgraph
