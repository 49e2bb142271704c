#include "relgraph/session.hpp"

#include "relgraph/error.hpp"
#include "relgraph/extract.hpp"
#include "relgraph/unicode.hpp"

#include <algorithm>

namespace relgraph {

namespace {

template <class T>
T need(const Json& j, const char* name) {
    if (!j.is_object() || !j.contains(name)) {
        throw ValidationError(std::string("missing field '") + name + "'", "missing_field");
    }
    try {
        return j.at(name).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ValidationError(std::string("field '") + name + "' has the wrong type", "bad_field");
    }
}

Json keys_json(const std::vector<TripleKey>& keys) {
    Json arr = Json::array();
    for (const auto& k : keys) arr.push_back(to_json(k));
    return arr;
}

std::vector<TripleKey> keys_from(const Json& j) {
    std::vector<TripleKey> out;
    if (!j.is_array()) return out;
    for (const auto& k : j) out.push_back(triple_key_from_json(k));
    return out;
}

std::vector<MentionSpan> mentions_from(const Json& j) {
    std::vector<MentionSpan> out;
    if (!j.is_array()) return out;
    for (const auto& m : j) {
        if (!m.is_array() || m.size() != 2) throw ValidationError("mention must be [start, end]");
        out.push_back({m[0].get<std::size_t>(), m[1].get<std::size_t>()});
    }
    return out;
}

std::set<std::string> string_set(const Json& j) {
    std::set<std::string> out;
    if (!j.is_array()) return out;
    for (const auto& s : j) out.insert(s.get<std::string>());
    return out;
}

RuleKB checked_kb(const std::string& text, std::uint64_t version) {
    RuleKB kb = load_kb(text);
    const auto diags = validate_kb(kb);
    if (has_hard_errors(diags)) {
        std::string msg;
        for (const auto& d : diags) {
            if (d.severity == Severity::error) msg += (msg.empty() ? "" : "; ") + d.message;
        }
        throw ValidationError("knowledge base has errors: " + msg, "kb_invalid");
    }
    kb.set_version(version);
    return kb;
}

const Conflict& open_conflict(const SessionState& s, const std::string& id) {
    for (const auto& c : s.conflicts) {
        if (c.id() == id) return c;
    }
    throw NotFound("no open conflict '" + id + "'");
}

Json conflict_record(const Conflict& c) {
    return Json{{"rule", c.rule.to_line()},
                {"offenders", keys_json(c.offenders)},
                {"kept", keys_json(c.kept)},
                {"dropped", keys_json(c.dropped)}};
}

Conflict conflict_from_record(const Json& j) {
    Conflict c;
    c.rule = Rule::parse(need<std::string>(j, "rule"));
    c.offenders = keys_from(j.value("offenders", Json::array()));
    c.kept = keys_from(j.value("kept", Json::array()));
    c.dropped = keys_from(j.value("dropped", Json::array()));
    c.state = ConflictState::resolved;
    return c;
}

std::string_view triple_color(TripleStatus s) {
    switch (s) {
    case TripleStatus::suggested: return "yellow";
    case TripleStatus::confirmed: return "green";
    case TripleStatus::conflicted: return "red";
    case TripleStatus::rejected: return "grey";
    }
    return "grey";
}

// Mutations of the graph proper; reasoning happens afterwards.
Json apply_change(SessionState& s, const std::string& type, const Json& e) {
    Graph& g = s.graph;
    if (type == "create") {
        const Json& doc = e.at("doc");
        s.id = need<std::string>(e, "id");
        s.doc = {need<std::string>(doc, "id"), need<std::string>(doc, "text"),
                 doc.value("title", std::string{})};
        s.kb = checked_kb(need<std::string>(e, "kb_text"), 1);
        s.graph = Graph{};
        s.graph.doc_id = s.doc.id;
        s.graph.kb_version = s.kb.version();
        return Json{{"session_id", s.id}};
    }
    if (type == "kb_replace") {
        RuleKB next = checked_kb(need<std::string>(e, "kb_text"), s.kb.version() + 1);
        for (const auto& [k, _] : g.triples) {
            if (!next.has_relation(k.rel)) {
                throw ValidationError("relation '" + k.rel + "' is still used by " + k.str(),
                                      "relation_in_use");
            }
        }
        s.kb = std::move(next);
        g.kb_version = s.kb.version();
        return Json{{"kb_version", s.kb.version()}};
    }
    if (type == "ingest_characters") {
        std::vector<CharacterCandidate> cands;
        for (const auto& c : e.value("candidates", Json::array())) {
            cands.push_back({need<std::string>(c, "name"), c.value("votes", 0), c.value("runs", 0),
                             mentions_from(c.value("mentions", Json::array()))});
        }
        const auto report = ingest_candidates(g, s.kb, cands, {});
        s.last_characters = e.value("candidates", Json::array());
        return Json{{"ingest", to_json(report)}};
    }
    if (type == "ingest_relations") {
        std::vector<RelationCandidate> cands;
        for (const auto& c : e.value("candidates", Json::array())) {
            cands.push_back({triple_key_from_json(c.at("triple")), c.value("votes", 0),
                             c.value("runs", 0)});
        }
        const auto report = ingest_candidates(g, s.kb, {}, cands);
        s.last_relations = e.value("candidates", Json::array());
        return Json{{"ingest", to_json(report)}};
    }
    if (type == "entity_add") {
        NewEntity ne;
        ne.canonical = need<std::string>(e, "canonical");
        ne.aliases = string_set(e.value("aliases", Json::array()));
        ne.mentions = mentions_from(e.value("mentions", Json::array()));
        const auto status = entity_status_from_string(e.value("status", std::string{"confirmed"}));
        if (!status) throw ValidationError("bad entity status", "bad_status");
        ne.status = *status;
        return Json{{"entity_id", add_entity(g, std::move(ne))}};
    }
    if (type == "entity_update") {
        EntityPatch patch;
        if (e.contains("status")) {
            const auto status = entity_status_from_string(need<std::string>(e, "status"));
            if (!status) throw ValidationError("bad entity status", "bad_status");
            patch.status = *status;
        }
        if (e.contains("canonical")) patch.canonical = need<std::string>(e, "canonical");
        if (e.contains("aliases")) patch.aliases = string_set(e["aliases"]);
        update_entity(g, need<std::string>(e, "id"), patch);
        return Json{{"entity_id", e["id"]}};
    }
    if (type == "entity_delete") {
        remove_entity(g, s.kb, need<std::string>(e, "id"));
        return Json{{"entity_id", e["id"]}};
    }
    if (type == "merge") {
        const auto report = merge_entities(g, s.kb, need<std::string>(e, "keep"),
                                           need<std::string>(e, "absorb"));
        return Json{{"entity_id", e["keep"]},
                    {"dropped_self_loops", keys_json(report.dropped_self_loops)},
                    {"collapsed", keys_json(report.collapsed)}};
    }
    if (type == "split") {
        std::vector<SplitPart> parts;
        for (const auto& p : e.value("parts", Json::array())) {
            parts.push_back({need<std::string>(p, "canonical"),
                             string_set(p.value("aliases", Json::array())),
                             mentions_from(p.value("mentions", Json::array()))});
        }
        std::map<TripleKey, std::size_t> assignment;
        const Json& a = e.value("assignment", Json::object());
        if (a.is_object()) {
            for (const auto& [key, part] : a.items()) {
                assignment.emplace(TripleKey::parse(key), part.get<std::size_t>());
            }
        } else {
            for (const auto& item : a) {
                assignment.emplace(triple_key_from_json(item.at("triple")),
                                   item.at("part").get<std::size_t>());
            }
        }
        return Json{{"entity_ids", split_entity(g, s.kb, need<std::string>(e, "id"), parts,
                                                assignment)}};
    }
    if (type == "triple_add") {
        const TripleKey key{need<std::string>(e, "src"), need<std::string>(e, "rel"),
                            need<std::string>(e, "dst")};
        upsert_triple(g, s.kb, key, TripleStatus::confirmed, Provenance::manual());
        return Json{{"triple", to_json(key)}};
    }
    if (type == "triple_status") {
        const TripleKey key = triple_key_from_json(e.at("key"));
        const auto status = triple_status_from_string(need<std::string>(e, "status"));
        if (!status || *status == TripleStatus::conflicted) {
            throw ValidationError("status must be suggested, confirmed or rejected", "bad_status");
        }
        set_status(g, key, *status);
        return Json{{"triple", to_json(key)}};
    }
    if (type == "triple_delete") {
        const TripleKey key = triple_key_from_json(e.at("key"));
        remove_triple(g, s.kb, key);
        return Json{{"triple", to_json(key)}};
    }
    if (type == "resolution_proposed") {
        const std::string cid = need<std::string>(e, "conflict_id");
        open_conflict(s, cid);
        s.proposals[cid] = e.at("resolution");
        return Json{{"conflict_id", cid}};
    }
    if (type == "resolution_choice") {
        const std::string cid = need<std::string>(e, "conflict_id");
        Conflict c = open_conflict(s, cid);
        Resolution r;
        r.conflict_id = cid;
        r.label = need<std::string>(e, "label");
        r.kept = keys_from(e.value("kept", Json::array()));
        r.dropped = keys_from(e.value("dropped", Json::array()));
        for (const auto& k : r.kept) {
            if (std::ranges::find(c.offenders, k) == c.offenders.end()) {
                throw ValidationError(k.str() + " is not part of the conflict", "bad_choice");
            }
        }
        apply_resolution(g, s.kb, r);
        c.state = ConflictState::resolved;
        c.kept = r.kept;
        c.dropped = r.dropped;
        s.resolved.push_back(std::move(c));
        s.proposals.erase(cid);
        return Json{{"conflict_id", cid}, {"resolution", to_json(r)}};
    }
    throw ValidationError("unknown event type '" + type + "'", "bad_event");
}

} // namespace

ReasonReport reason(SessionState& s) {
    ReasonReport report;
    report.retracted = retract_unsupported(s.graph, s.kb);
    CloseResult closed = close(s.graph, s.kb);
    s.graph = std::move(closed.graph);
    report.added = std::move(closed.derivations);
    s.conflicts = detect_conflicts(s.graph, s.kb);
    std::erase_if(s.proposals, [&](const auto& kv) {
        return std::ranges::none_of(s.conflicts, [&](const Conflict& c) { return c.id() == kv.first; });
    });
    return report;
}

Json apply_event(SessionState& s, const Json& event) {
    const std::string type = need<std::string>(event, "type");
    if (type != "create" && s.id.empty()) throw ValidationError("session not created", "bad_event");
    SessionState next = s;
    std::set<std::string> before;
    for (const auto& c : s.conflicts) before.insert(c.id());

    Json result;
    try {
        result = apply_change(next, type, event);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed event: ") + e.what(), "bad_event");
    }
    const ReasonReport report = reason(next);
    ++next.revision;

    Json added = Json::array();
    for (const auto& d : report.added) added.push_back(to_json(d));
    Json fresh = Json::array();
    for (const auto& c : next.conflicts) {
        if (!before.contains(c.id())) fresh.push_back(to_json(c));
    }
    result["added_inferences"] = std::move(added);
    result["retracted"] = keys_json(report.retracted);
    result["conflicts"] = served_conflicts(next);
    result["new_conflicts"] = std::move(fresh);
    result["revision"] = next.revision;
    s = std::move(next);
    return result;
}

Json served_conflicts(const SessionState& s) {
    Json out = Json::array();
    for (const auto& c : s.conflicts) {
        Json j = to_json(c);
        const std::string cid = c.id();
        Json statements = Json::array();
        for (const auto& k : c.offenders) statements.push_back(render_statement(k, s.graph, s.kb));
        j["statements"] = std::move(statements);
        if (const auto it = s.proposals.find(cid); it != s.proposals.end()) j["proposal"] = it->second;
        out.push_back(std::move(j));
    }
    return out;
}

Json served_graph(const SessionState& s) {
    std::map<TripleKey, std::vector<const Conflict*>> involved;
    for (const auto& c : s.conflicts) {
        for (const auto& k : c.offenders) involved[k].push_back(&c);
    }

    Json entities = Json::array();
    for (const auto& [_, e] : s.graph.entities) {
        Json j = to_json(e);
        j["color"] = e.status == EntityStatus::confirmed ? "green" : "red";
        entities.push_back(std::move(j));
    }
    Json triples = Json::array();
    for (const auto& [k, t] : s.graph.triples) {
        Json j = to_json(t);
        TripleStatus shown = t.status;
        Json tips = Json::array();
        if (const auto it = involved.find(k); it != involved.end() && is_live(t.status)) {
            shown = TripleStatus::conflicted;
            for (const Conflict* c : it->second) {
                Json others = Json::array();
                for (const auto& o : c->offenders) {
                    if (!(o == k)) others.push_back(to_json(o));
                }
                tips.push_back(Json{{"conflict_id", c->id()},
                                    {"rule", c->rule.to_line()},
                                    {"with", std::move(others)}});
            }
        }
        j["key"] = k.str();
        j["status"] = to_string(shown);
        j["base_status"] = to_string(t.status);
        j["color"] = triple_color(shown);
        j["conflicts"] = std::move(tips);
        triples.push_back(std::move(j));
    }
    Json derivations = Json::array();
    for (const auto& d : derivations_of(s.graph)) derivations.push_back(to_json(d));
    Json resolved = Json::array();
    for (const auto& c : s.resolved) resolved.push_back(to_json(c));

    return Json{{"session_id", s.id},
                {"revision", s.revision},
                {"doc", {{"id", s.doc.id}, {"title", s.doc.title}, {"length", unicode::length(s.doc.text)}}},
                {"kb_version", s.kb.version()},
                {"entities", std::move(entities)},
                {"triples", std::move(triples)},
                {"rejected_names", s.graph.rejected_names},
                {"derivations", std::move(derivations)},
                {"conflicts", served_conflicts(s)},
                {"resolved_conflicts", std::move(resolved)},
                {"candidates", {{"characters", s.last_characters}, {"relations", s.last_relations}}}};
}

Json snapshot_json(const SessionState& s) {
    Json resolved = Json::array();
    for (const auto& c : s.resolved) resolved.push_back(conflict_record(c));
    Json proposals = Json::object();
    for (const auto& [cid, p] : s.proposals) proposals[cid] = p;
    return Json{{"id", s.id},
                {"doc", {{"id", s.doc.id}, {"title", s.doc.title}, {"text", s.doc.text}}},
                {"kb_text", save_kb(s.kb)},
                {"kb_version", s.kb.version()},
                {"graph", to_json(s.graph)},
                {"resolved", std::move(resolved)},
                {"proposals", std::move(proposals)},
                {"last_characters", s.last_characters},
                {"last_relations", s.last_relations},
                {"revision", s.revision}};
}

SessionState state_from_snapshot(const Json& j) {
    SessionState s;
    s.id = need<std::string>(j, "id");
    const Json& doc = j.at("doc");
    s.doc = {need<std::string>(doc, "id"), need<std::string>(doc, "text"),
             doc.value("title", std::string{})};
    s.kb = load_kb(need<std::string>(j, "kb_text"));
    s.kb.set_version(need<std::uint64_t>(j, "kb_version"));
    s.graph = graph_from_json(j.at("graph"), &s.kb);
    for (const auto& c : j.value("resolved", Json::array())) s.resolved.push_back(conflict_from_record(c));
    const Json proposals = j.value("proposals", Json::object());
    for (const auto& [cid, p] : proposals.items()) s.proposals[cid] = p;
    s.last_characters = j.value("last_characters", Json::array());
    s.last_relations = j.value("last_relations", Json::array());
    s.revision = need<std::uint64_t>(j, "revision");
    s.conflicts = detect_conflicts(s.graph, s.kb);
    return s;
}

} // namespace relgraph
