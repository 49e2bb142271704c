#pragma once

#include "relgraph/graph.hpp"
#include "relgraph/graph_json.hpp"
#include "relgraph/kb.hpp"
#include "relgraph/provider.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace relgraph {

struct Counts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    friend bool operator==(const Counts&, const Counts&) = default;
};

struct EvalReport {
    Counts counts;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
    std::map<std::string, Counts> per_relation;

    static EvalReport from_counts(Counts c);
};

double safe_ratio(double num, double den);

/// Exact directed match. With `soft_kb`, an unmatched predicted triple whose
/// relation is a subtype of an unmatched gold triple's relation on the same
/// pair also counts (each gold triple is used at most once).
EvalReport score_triples(const std::set<TripleKey>& pred, const std::set<TripleKey>& gold,
                         const RuleKB* soft_kb = nullptr);

/// A predicted group is a hit when it shares names with exactly one gold
/// group that is still unmatched. Groups are matched greedily by overlap size,
/// ties broken by the lexicographically smaller (pred, gold) pair.
EvalReport score_entities(const std::vector<std::set<std::string>>& pred,
                          const std::vector<std::set<std::string>>& gold);

/// Alias groups of a graph, one per entity.
std::vector<std::set<std::string>> alias_groups(const Graph& g);

// --- logic benchmark --------------------------------------------------------

enum class LogicTask : std::uint8_t { add, remove };

struct LogicBenchItem {
    LogicTask task = LogicTask::add;
    std::vector<std::string> inputs;
    std::set<std::string> gold_labels;  // add
    std::string gold_answer;            // remove: Yes, No or Unsure
};

/// One item per non-empty line of {task, inputs, gold} objects.
std::vector<LogicBenchItem> load_logic_bench(std::string_view jsonl);

struct RemoveReport {
    std::size_t total = 0;
    std::size_t correct = 0;
    std::size_t unparseable = 0;
    double accuracy = 0.0;
    double f1_macro = 0.0;
    std::map<std::string, Counts> per_label;
};

struct LogicBenchReport {
    EvalReport add;
    std::size_t add_items = 0;
    std::size_t add_unparseable = 0;
    RemoveReport remove;
};

/// Label set from an add-task answer: a JSON array of strings, else
/// comma/newline separated labels. Unparseable → nullopt.
std::optional<std::set<std::string>> parse_label_set(std::string_view raw);
/// Yes / No / Unsure from a remove-task answer (first matching word).
std::optional<std::string> parse_yes_no_unsure(std::string_view raw);

LogicBenchReport run_logic_benchmark(const std::vector<LogicBenchItem>& items, Provider& provider,
                                     double temperature = 0.0);

// --- small-world statistics -------------------------------------------------

/// Simple undirected graph on vertices 0..n-1.
struct UGraph {
    std::vector<std::vector<std::size_t>> adj;  // sorted, no self-loops or duplicates

    std::size_t size() const noexcept { return adj.size(); }
    std::size_t edge_count() const;
};

UGraph make_ugraph(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges);

/// Mean local clustering coefficient; vertices of degree < 2 count as 0.
double clustering(const UGraph& g);
/// Mean shortest-path length over ordered pairs of distinct vertices.
/// Requires a connected graph.
double path_length(const UGraph& g);
bool is_connected(const UGraph& g);
std::vector<std::size_t> degrees(const UGraph& g);

/// Ring of n vertices each joined to its k/2 nearest neighbours per side.
UGraph ring_lattice(std::size_t n, std::size_t k);

/// Degree-preserving double-edge swaps that keep the graph connected.
UGraph rewire(const UGraph& g, std::uint64_t seed, std::size_t swaps_per_edge = 10);

struct SwiReport {
    std::size_t n_nodes = 0;  // of the component used
    std::size_t n_edges = 0;
    double C = 0.0;
    double L = 0.0;
    double C_rand = 0.0;
    double L_rand = 0.0;
    double C_latt = 0.0;
    double L_latt = 0.0;
    std::optional<double> swi;    // unset when undefined
    std::optional<double> omega;
    int samples = 0;
    std::uint64_t seed = 0;
    std::string note;  // why swi is undefined, when it is
};

/// Projects the triples (either direction, no self-loops) and measures the
/// largest connected component.
SwiReport small_world_index(const Graph& g, int samples, std::uint64_t seed);
SwiReport small_world_index(const UGraph& g, int samples, std::uint64_t seed);

Json to_json(const Counts& c);
Json to_json(const EvalReport& r);
Json to_json(const LogicBenchReport& r);
Json to_json(const SwiReport& r);

} // namespace relgraph
