#pragma once

#include "relgraph/graph.hpp"

#include <json.hpp>

namespace relgraph {

using Json = nlohmann::ordered_json;

// Graph exchange format:
//   {doc_id, entities:[{id, canonical, aliases, mentions:[[start,end]...], status}],
//    triples:[{src, rel, dst, status, provenance}]}
// plus kb_version, next_entity_seq, rejected_names and per-entity votes.
// Provenance is {"kind":"manual"}, {"kind":"extracted","votes":n} or
// {"kind":"inferred","rule":"<kb line>","premises":[[src,rel,dst]...]}.

Json to_json(const TripleKey& key);
TripleKey triple_key_from_json(const Json& j);
Json to_json(const Provenance& p);
Provenance provenance_from_json(const Json& j);
Json to_json(const Triple& t);
Json to_json(const Entity& e);
Json to_json(const Graph& g);

/// Parses and checks invariants (against `kb` when given). Throws
/// ParseError on shape errors and ValidationError on broken invariants.
Graph graph_from_json(const Json& j, const RuleKB* kb = nullptr);

Graph load_graph_file(const std::string& path, const RuleKB* kb = nullptr);
void save_graph_file(const std::string& path, const Json& document);

} // namespace relgraph
