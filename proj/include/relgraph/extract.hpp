#pragma once

#include "relgraph/graph.hpp"
#include "relgraph/graph_json.hpp"
#include "relgraph/kb.hpp"
#include "relgraph/provider.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace relgraph {

struct ExtractionConfig {
    int n_c = 5;
    int tau_c = 3;
    int n_e = 5;
    int tau_e = 3;
    double temperature = 0.7;
    std::size_t max_chunk_chars = 12000;

    /// Throws ValidationError when a bound is violated.
    void validate() const;
};

Json to_json(const ExtractionConfig& cfg);
/// Fields missing from `j` keep their value from `base`.
ExtractionConfig extraction_config_from_json(const Json& j, ExtractionConfig base = {});

/// Every item seen in at least `tau` of the runs, with its vote count,
/// ordered by votes descending then item ascending.
template <class T>
std::vector<std::pair<T, int>> consensus(const std::vector<std::set<T>>& runs, int tau) {
    std::map<T, int> votes;
    for (const auto& run : runs) {
        for (const auto& item : run) ++votes[item];
    }
    std::vector<std::pair<T, int>> out;
    for (auto& [item, n] : votes) {
        if (n >= tau) out.emplace_back(item, n);
    }
    std::ranges::stable_sort(out, [](const auto& a, const auto& b) { return a.second > b.second; });
    return out;
}

struct CharacterCandidate {
    std::string name;  // normalized
    int votes = 0;
    int runs = 0;
    std::vector<MentionSpan> mentions;
};

struct RelationCandidate {
    TripleKey triple;  // entity ids and a KB relation id
    int votes = 0;
    int runs = 0;
};

/// A reply item that could not be used, reported as a JSON line.
struct Reject {
    int run = 0;
    std::string raw;
    std::string reason;
};

struct CharacterExtraction {
    std::vector<CharacterCandidate> candidates;
    std::vector<std::set<std::string>> per_run;
    std::vector<Reject> rejects;
    int failed_runs = 0;
};

struct RelationExtraction {
    std::vector<RelationCandidate> candidates;
    std::vector<std::set<TripleKey>> per_run;
    std::vector<Reject> rejects;
    int failed_runs = 0;
};

/// Called after each finished run with (runs done, runs total).
using ProgressFn = std::function<void(int, int)>;

/// Splits text into pieces of at most `max_chars` scalars, preferring to cut
/// after whitespace.
std::vector<std::string> split_chunks(std::string_view text, std::size_t max_chars);

/// Names from one character-extractor reply: a JSON array of strings (or of
/// objects with a "name"), else one name per line with list markers removed.
std::set<std::string> parse_character_reply(std::string_view reply);

struct RawTriple {
    std::string src;
    std::string rel;
    std::string dst;
    std::string raw;
};

/// (source, relation, target) strings from one relation-extractor reply:
/// a JSON array of 3-arrays or {source, relation, target} objects, else
/// lines "a | r | b" or "(a, r, b)". Unusable items go to `rejects`.
std::vector<RawTriple> parse_relation_reply(std::string_view reply, int run,
                                            std::vector<Reject>& rejects);

/// KB relation id for `text`: an exact id, or a case- and punctuation-
/// insensitive match against ids and display labels.
std::optional<std::string> resolve_relation(const RuleKB& kb, std::string_view text);

CharacterExtraction extract_characters(const Document& doc, const ExtractionConfig& cfg,
                                       Provider& provider, const ProgressFn& progress = {});

/// `entities` are the characters the extractor may use; names resolve
/// through their aliases.
RelationExtraction extract_relations(const Document& doc, std::span<const Entity> entities,
                                     const RuleKB& kb, const ExtractionConfig& cfg,
                                     Provider& provider, const ProgressFn& progress = {});

struct IngestReport {
    std::vector<std::string> entities_added;
    std::vector<std::string> entities_updated;
    std::vector<std::string> skipped_names;  // previously rejected by the annotator
    std::vector<TripleKey> triples_added;
    std::vector<TripleKey> triples_updated;
    std::vector<TripleKey> tombstoned;  // rejected keys left alone
};

/// Adds candidates as suggested items with extracted provenance. Names that
/// match an existing alias attach their votes and mentions to that entity.
/// Confirmed items keep their status; rejected keys and names stay out.
IngestReport ingest_candidates(Graph& g, const RuleKB& kb,
                               std::span<const CharacterCandidate> chars,
                               std::span<const RelationCandidate> rels);

Json to_json(const CharacterCandidate& c);
Json to_json(const RelationCandidate& c);
Json to_json(const Reject& r);
Json to_json(const IngestReport& r);

} // namespace relgraph
