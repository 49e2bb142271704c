#pragma once

// Random instance generators and brute-force oracles shared by the unit and
// acceptance tests. The oracles deliberately avoid the library's indexes and
// compiled rule tables.

#include "relgraph/engine.hpp"
#include "relgraph/graph.hpp"
#include "relgraph/kb.hpp"
#include "relgraph/metrics.hpp"

#include <cstdint>
#include <random>
#include <set>
#include <string>
#include <vector>

namespace relgraph::testing {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    std::size_t below(std::size_t n) { return static_cast<std::size_t>(gen_() % n); }
    bool chance(double p) { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_) < p; }
    double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(gen_); }
    std::uint64_t next() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

struct Instance {
    RuleKB kb;
    Graph graph;
};

/// Random KB (up to `max_rel` relations, `max_rules` rules of any kind, no
/// hard validation errors) and a random graph over up to `max_ent` entities.
Instance random_instance(Rng& rng, std::size_t max_ent = 8, std::size_t max_rel = 6,
                         std::size_t max_rules = 12);

/// KB with one or two relation types carrying symmetric, inverse and
/// transitive (compose r r r) completion rules, optionally a subtype link.
RuleKB pair_kb(Rng& rng);

/// Graph with entities e1..en and no triples.
Graph empty_graph(std::size_t n);

/// Adds a confirmed manual triple, bypassing the library's edit checks.
void put(Graph& g, const TripleKey& k, TripleStatus s = TripleStatus::confirmed);

/// Repeat-until-fixpoint closure over live triples, applying every rule to
/// every triple and pair of triples each round.
std::set<TripleKey> naive_closure(const Graph& g, const RuleKB& kb);

/// Conflicts by scanning all triples and pairs, as (rule line, sorted
/// offender keys) pairs.
std::set<std::pair<std::string, std::vector<TripleKey>>> brute_conflicts(const Graph& g,
                                                                          const RuleKB& kb);

/// votes(c) = number of runs containing c.
std::map<std::string, int> tally(const std::vector<std::set<std::string>>& runs);

/// Mean local clustering by adjacency-matrix triangle counting.
double clustering_oracle(const UGraph& g);
/// Mean shortest path by Floyd-Warshall.
double path_length_oracle(const UGraph& g);

} // namespace relgraph::testing
