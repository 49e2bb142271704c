#pragma once

#include "relgraph/engine.hpp"
#include "relgraph/graph.hpp"
#include "relgraph/graph_json.hpp"
#include "relgraph/kb.hpp"
#include "relgraph/retrieval.hpp"

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

namespace relgraph {

/// Everything one annotation session holds. Mutated only by `apply_event`,
/// so replaying the event log rebuilds it exactly.
struct SessionState {
    std::string id;
    Document doc;
    RuleKB kb;
    Graph graph;  // closed; statuses as stored (conflicted is derived on serve)
    std::vector<Conflict> conflicts;
    std::vector<Conflict> resolved;
    std::map<std::string, Json> proposals;  // conflict id -> proposed resolution
    Json last_characters = Json::array();
    Json last_relations = Json::array();
    std::uint64_t revision = 0;
};

struct ReasonReport {
    std::vector<Derivation> added;
    std::vector<TripleKey> retracted;
};

/// Retracts unsupported inferences, closes the graph and recomputes the open
/// conflicts.
ReasonReport reason(SessionState& s);

/// Applies one event and the reasoning that follows, bumping the revision.
/// Events are JSON objects with a "type":
///   create, ingest_characters, ingest_relations, entity_add, entity_update,
///   entity_delete, merge, split, triple_add, triple_status, triple_delete,
///   resolution_proposed, resolution_choice, kb_replace.
/// Returns an event-specific result. Leaves `s` untouched on error.
Json apply_event(SessionState& s, const Json& event);

/// The graph as clients see it: triples in an open conflict are reported as
/// `conflicted`, and every entity and triple carries its display colour.
Json served_graph(const SessionState& s);
Json served_conflicts(const SessionState& s);

Json snapshot_json(const SessionState& s);
SessionState state_from_snapshot(const Json& j);

struct Progress {
    std::string stage;  // "", "characters", "relations", "resolve"
    int done = 0;
    int total = 0;
};

/// Sessions with an append-only event log per session under `data_dir`:
/// <data_dir>/<id>/events.jsonl holds {"rev", "event"} lines plus a
/// {"rev", "snapshot"} line every `snapshot_every` events.
class SessionStore {
public:
    explicit SessionStore(std::filesystem::path data_dir, std::size_t snapshot_every = 100);

    /// Restores every session found under the data directory.
    std::size_t load_all();

    std::string create(Document doc, const std::string& kb_text);
    std::shared_ptr<const SessionState> get(const std::string& id) const;
    std::vector<std::string> ids() const;

    struct Mutation {
        std::shared_ptr<const SessionState> state;
        Json result;
    };
    /// Serialized per session. Throws Error("stale_revision") when
    /// `expected_revision` is set and differs from the current revision.
    Mutation mutate(const std::string& id, const Json& event,
                    std::optional<std::uint64_t> expected_revision = std::nullopt);

    /// The current state once its revision exceeds `after`, or nullopt on
    /// timeout.
    std::shared_ptr<const SessionState> wait_newer(const std::string& id, std::uint64_t after,
                                                   std::chrono::milliseconds timeout) const;

    void set_progress(const std::string& id, Progress p);
    Progress progress(const std::string& id) const;

    /// Evidence index for the session's document, built on first use and kept
    /// in a sidecar file next to the log.
    std::shared_ptr<const EvidenceIndex> index(const std::string& id, Embedder& embedder,
                                               std::size_t chunk_chars, std::size_t overlap_chars);

    const std::filesystem::path& data_dir() const noexcept { return dir_; }

private:
    struct Slot {
        std::mutex write_mu;
        mutable std::mutex state_mu;
        mutable std::condition_variable changed;
        std::shared_ptr<const SessionState> state;
        Progress progress;
        std::mutex index_mu;
        std::shared_ptr<const EvidenceIndex> index;
        std::string index_key;
    };

    std::shared_ptr<Slot> slot(const std::string& id) const;
    std::shared_ptr<SessionState> restore(const std::filesystem::path& log) const;
    void append(const std::string& id, const Json& line) const;

    std::filesystem::path dir_;
    std::size_t snapshot_every_;
    mutable std::shared_mutex mu_;
    std::map<std::string, std::shared_ptr<Slot>> slots_;
};

} // namespace relgraph
