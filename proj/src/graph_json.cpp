#include "relgraph/graph_json.hpp"

#include "relgraph/error.hpp"

#include <fstream>
#include <sstream>

namespace relgraph {

namespace {

template <class T>
T field(const Json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) {
        throw ParseError("parse_error", 0, std::string("missing field '") + name + "'");
    }
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ParseError("parse_error", 0, std::string("field '") + name + "' has the wrong type");
    }
}

} // namespace

Json to_json(const TripleKey& key) { return Json::array({key.src, key.rel, key.dst}); }

TripleKey triple_key_from_json(const Json& j) {
    if (j.is_string()) return TripleKey::parse(j.get<std::string>());
    if (!j.is_array() || j.size() != 3 || !j[0].is_string() || !j[1].is_string() ||
        !j[2].is_string()) {
        throw ParseError("parse_error", 0, "triple key must be [src, rel, dst]");
    }
    return {j[0].get<std::string>(), j[1].get<std::string>(), j[2].get<std::string>()};
}

Json to_json(const Provenance& p) {
    Json j;
    j["kind"] = to_string(p.kind);
    if (p.kind == Provenance::Kind::extracted) j["votes"] = p.votes;
    if (p.kind == Provenance::Kind::inferred) {
        j["rule"] = p.rule ? p.rule->to_line() : "";
        Json premises = Json::array();
        for (const auto& k : p.premises) premises.push_back(to_json(k));
        j["premises"] = std::move(premises);
    }
    return j;
}

Provenance provenance_from_json(const Json& j) {
    const auto kind = field<std::string>(j, "kind");
    if (kind == "manual") return Provenance::manual();
    if (kind == "extracted") return Provenance::extracted(j.value("votes", 0));
    if (kind == "inferred") {
        Rule rule = Rule::parse(field<std::string>(j, "rule"));
        std::vector<TripleKey> premises;
        for (const auto& p : j.value("premises", Json::array())) {
            premises.push_back(triple_key_from_json(p));
        }
        return Provenance::inferred(std::move(rule), std::move(premises));
    }
    throw ParseError("parse_error", 0, "unknown provenance kind '" + kind + "'");
}

Json to_json(const Triple& t) {
    Json j;
    j["src"] = t.key.src;
    j["rel"] = t.key.rel;
    j["dst"] = t.key.dst;
    j["status"] = to_string(t.status);
    j["provenance"] = to_json(t.provenance);
    return j;
}

Json to_json(const Entity& e) {
    Json j;
    j["id"] = e.id;
    j["canonical"] = e.canonical;
    j["aliases"] = e.aliases;
    Json mentions = Json::array();
    for (const auto& m : e.mentions) mentions.push_back(Json::array({m.start, m.end}));
    j["mentions"] = std::move(mentions);
    j["status"] = to_string(e.status);
    j["votes"] = e.votes;
    return j;
}

Json to_json(const Graph& g) {
    Json j;
    j["doc_id"] = g.doc_id;
    j["kb_version"] = g.kb_version;
    j["next_entity_seq"] = g.next_entity_seq;
    Json entities = Json::array();
    for (const auto& [_, e] : g.entities) entities.push_back(to_json(e));
    j["entities"] = std::move(entities);
    Json triples = Json::array();
    for (const auto& [_, t] : g.triples) triples.push_back(to_json(t));
    j["triples"] = std::move(triples);
    j["rejected_names"] = g.rejected_names;
    return j;
}

Graph graph_from_json(const Json& j, const RuleKB* kb) {
    if (!j.is_object()) throw ParseError("parse_error", 0, "graph document must be an object");
    Graph g;
    g.doc_id = j.value("doc_id", std::string{});
    g.kb_version = j.value("kb_version", kb != nullptr ? kb->version() : std::uint64_t{1});

    std::uint64_t max_seq = 0;
    for (const auto& je : j.value("entities", Json::array())) {
        Entity e;
        e.id = field<std::string>(je, "id");
        e.canonical = field<std::string>(je, "canonical");
        const auto aliases = je.value("aliases", std::vector<std::string>{});
        e.aliases.insert(aliases.begin(), aliases.end());
        e.aliases.insert(e.canonical);
        for (const auto& m : je.value("mentions", Json::array())) {
            if (!m.is_array() || m.size() != 2) {
                throw ParseError("parse_error", 0, "mention must be [start, end]");
            }
            MentionSpan span{m[0].get<std::size_t>(), m[1].get<std::size_t>()};
            if (span.start >= span.end) throw ValidationError("empty mention span in " + e.id);
            e.mentions.push_back(span);
        }
        std::ranges::sort(e.mentions);
        const auto status = entity_status_from_string(je.value("status", std::string{"suggested"}));
        if (!status) throw ParseError("parse_error", 0, "bad entity status for " + e.id);
        e.status = *status;
        e.votes = je.value("votes", 0);
        if (e.id.size() > 1 && e.id[0] == 'e' &&
            e.id.find_first_not_of("0123456789", 1) == std::string::npos) {
            max_seq = std::max<std::uint64_t>(max_seq, std::stoull(e.id.substr(1)));
        }
        const std::string id = e.id;
        if (!g.entities.emplace(id, std::move(e)).second) {
            throw ValidationError("duplicate entity id '" + id + "'");
        }
    }
    g.next_entity_seq = std::max(j.value("next_entity_seq", std::uint64_t{1}), max_seq + 1);

    for (const auto& jt : j.value("triples", Json::array())) {
        Triple t;
        t.key = {field<std::string>(jt, "src"), field<std::string>(jt, "rel"),
                 field<std::string>(jt, "dst")};
        const auto status = triple_status_from_string(jt.value("status", std::string{"suggested"}));
        if (!status) throw ParseError("parse_error", 0, "bad status for " + t.key.str());
        t.status = *status;
        t.provenance = jt.contains("provenance") ? provenance_from_json(jt["provenance"])
                                                 : Provenance::manual();
        const TripleKey key = t.key;
        if (!g.triples.emplace(key, std::move(t)).second) {
            throw ValidationError("duplicate triple " + key.str());
        }
    }
    const auto rejected = j.value("rejected_names", std::vector<std::string>{});
    g.rejected_names.insert(rejected.begin(), rejected.end());

    check_invariants(g, kb);
    return g;
}

Graph load_graph_file(const std::string& path, const RuleKB* kb) {
    std::ifstream in(path);
    if (!in) throw NotFound("cannot open '" + path + "'");
    Json j;
    try {
        j = Json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ParseError("parse_error", 0, path + ": " + e.what());
    }
    return graph_from_json(j, kb);
}

void save_graph_file(const std::string& path, const Json& document) {
    std::ofstream out(path);
    if (!out) throw Error("io", "cannot write '" + path + "'");
    out << document.dump(2) << '\n';
}

} // namespace relgraph
