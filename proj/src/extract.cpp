#include "relgraph/extract.hpp"

#include "relgraph/error.hpp"
#include "relgraph/resources.hpp"
#include "relgraph/unicode.hpp"

#include <cctype>
#include <iostream>

namespace relgraph {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
    while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
    return s;
}

std::string_view unquote(std::string_view s) {
    s = trim(s);
    while (s.size() >= 2 && (s.front() == '"' || s.front() == '\'' || s.front() == '`') &&
           s.back() == s.front()) {
        s = trim(s.substr(1, s.size() - 2));
    }
    return s;
}

// Leading "-", "*", "•", "1." or "1)" list markers.
std::string_view strip_marker(std::string_view s) {
    s = trim(s);
    if (s.starts_with("- ") || s.starts_with("* ")) return trim(s.substr(2));
    if (s.starts_with("•")) return trim(s.substr(3));
    std::size_t i = 0;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > 0 && i < s.size() && (s[i] == '.' || s[i] == ')')) return trim(s.substr(i + 1));
    return s;
}

std::vector<std::string_view> lines_of(std::string_view text) {
    std::vector<std::string_view> out;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        out.push_back(text.substr(0, nl));
        if (nl == std::string_view::npos) break;
        text.remove_prefix(nl + 1);
    }
    return out;
}

std::vector<std::string> split_on(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(unquote(s.substr(start, pos - start)));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

// The outermost [...] block of a reply, parsed, if it is valid JSON.
std::optional<Json> json_array_in(std::string_view reply) {
    const auto open = reply.find('[');
    const auto close = reply.rfind(']');
    if (open == std::string_view::npos || close == std::string_view::npos || close < open) {
        return std::nullopt;
    }
    try {
        Json j = Json::parse(reply.substr(open, close - open + 1));
        if (j.is_array()) return j;
    } catch (const nlohmann::json::parse_error&) {
    }
    return std::nullopt;
}

std::string loose_key(std::string_view s) {
    std::string out;
    bool gap = false;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c >= 0x80) {
            if (gap && !out.empty()) out += '_';
            out += static_cast<char>(std::tolower(c));
            gap = false;
        } else {
            gap = true;
        }
    }
    return out;
}

std::string first_string(const Json& obj, std::initializer_list<const char*> names) {
    for (const char* n : names) {
        if (obj.contains(n) && obj[n].is_string()) return obj[n].get<std::string>();
    }
    return {};
}

void note(const std::string& message) { std::cerr << message << '\n'; }

} // namespace

void ExtractionConfig::validate() const {
    if (n_c < 1 || n_e < 1) throw ValidationError("run counts must be at least 1");
    if (tau_c < 1 || tau_c > n_c) throw ValidationError("tau_c must lie in [1, n_c]");
    if (tau_e < 1 || tau_e > n_e) throw ValidationError("tau_e must lie in [1, n_e]");
    if (!(temperature >= 0.0)) throw ValidationError("temperature must be non-negative");
    if (max_chunk_chars < 1) throw ValidationError("max_chunk_chars must be positive");
}

Json to_json(const ExtractionConfig& cfg) {
    return Json{{"n_c", cfg.n_c},
                {"tau_c", cfg.tau_c},
                {"n_e", cfg.n_e},
                {"tau_e", cfg.tau_e},
                {"temperature", cfg.temperature},
                {"max_chunk_chars", cfg.max_chunk_chars}};
}

ExtractionConfig extraction_config_from_json(const Json& j, ExtractionConfig base) {
    if (j.is_null()) return base;
    if (!j.is_object()) throw ValidationError("extraction config must be an object");
    try {
        base.n_c = j.value("n_c", base.n_c);
        base.tau_c = j.value("tau_c", base.tau_c);
        base.n_e = j.value("n_e", base.n_e);
        base.tau_e = j.value("tau_e", base.tau_e);
        base.temperature = j.value("temperature", base.temperature);
        base.max_chunk_chars = j.value("max_chunk_chars", base.max_chunk_chars);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad extraction config: ") + e.what());
    }
    base.validate();
    return base;
}

std::vector<std::string> split_chunks(std::string_view text, std::size_t max_chars) {
    const unicode::ScalarIndex idx(text);
    std::vector<std::string> out;
    std::size_t start = 0;
    while (start < idx.size()) {
        std::size_t end = std::min(idx.size(), start + max_chars);
        if (end < idx.size()) {
            // back off to just after the last whitespace in the second half
            for (std::size_t cut = end; cut > start + max_chars / 2; --cut) {
                const auto piece = idx.slice(cut - 1, cut);
                if (piece.size() == 1 && std::isspace(static_cast<unsigned char>(piece[0]))) {
                    end = cut;
                    break;
                }
            }
        }
        out.emplace_back(idx.slice(start, end));
        start = end;
    }
    return out;
}

std::set<std::string> parse_character_reply(std::string_view reply) {
    std::set<std::string> names;
    const auto add = [&](std::string_view raw) {
        std::string name = unicode::normalize_name(unquote(raw));
        if (!name.empty()) names.insert(std::move(name));
    };
    if (const auto arr = json_array_in(reply)) {
        for (const auto& item : *arr) {
            if (item.is_string()) {
                add(item.get<std::string>());
            } else if (item.is_object()) {
                add(first_string(item, {"name", "character", "canonical"}));
            }
        }
        return names;
    }
    for (auto line : lines_of(reply)) {
        line = strip_marker(line);
        if (line.empty() || line.back() == ':' || loose_key(line) == "none") continue;
        add(line);
    }
    return names;
}

std::vector<RawTriple> parse_relation_reply(std::string_view reply, int run,
                                            std::vector<Reject>& rejects) {
    std::vector<RawTriple> out;
    if (const auto arr = json_array_in(reply)) {
        for (const auto& item : *arr) {
            RawTriple t;
            t.raw = item.dump();
            if (item.is_array() && item.size() == 3 && item[0].is_string() && item[1].is_string() &&
                item[2].is_string()) {
                t.src = item[0].get<std::string>();
                t.rel = item[1].get<std::string>();
                t.dst = item[2].get<std::string>();
            } else if (item.is_object()) {
                t.src = first_string(item, {"source", "src", "head", "subject"});
                t.rel = first_string(item, {"relation", "rel", "predicate", "type"});
                t.dst = first_string(item, {"target", "dst", "tail", "object"});
            }
            if (t.src.empty() || t.rel.empty() || t.dst.empty()) {
                rejects.push_back({run, t.raw, "malformed"});
                continue;
            }
            out.push_back(std::move(t));
        }
        return out;
    }
    for (auto line : lines_of(reply)) {
        line = strip_marker(line);
        if (line.empty()) continue;
        std::vector<std::string> parts;
        if (line.find('|') != std::string_view::npos) {
            parts = split_on(line, '|');
        } else if (line.front() == '(' && line.back() == ')') {
            parts = split_on(line.substr(1, line.size() - 2), ',');
        }
        if (parts.size() != 3 || parts[0].empty() || parts[1].empty() || parts[2].empty()) {
            rejects.push_back({run, std::string(line), "malformed"});
            continue;
        }
        out.push_back({parts[0], parts[1], parts[2], std::string(line)});
    }
    return out;
}

std::optional<std::string> resolve_relation(const RuleKB& kb, std::string_view text) {
    const std::string_view t = unquote(text);
    if (kb.has_relation(t)) return std::string(t);
    const std::string key = loose_key(t);
    if (key.empty()) return std::nullopt;
    for (const auto& [id, rel] : kb.relations()) {
        if (loose_key(id) == key || (!rel.display.empty() && loose_key(rel.display) == key)) {
            return id;
        }
    }
    return std::nullopt;
}

CharacterExtraction extract_characters(const Document& doc, const ExtractionConfig& cfg,
                                       Provider& provider, const ProgressFn& progress) {
    cfg.validate();
    if (trim(doc.text).empty()) throw ValidationError("document is empty");
    const auto chunks = split_chunks(doc.text, cfg.max_chunk_chars);

    CharacterExtraction result;
    for (int run = 0; run < cfg.n_c; ++run) {
        std::set<std::string> names;
        try {
            for (const auto& chunk : chunks) {
                const std::string reply = provider.complete(
                    resources::render(resources::character_prompt, {{"text", chunk}}),
                    cfg.temperature);
                names.merge(parse_character_reply(reply));
            }
        } catch (const ProviderError& e) {
            note("character run " + std::to_string(run + 1) + " failed: " + e.what());
            result.rejects.push_back({run + 1, "", std::string("provider: ") + e.what()});
            names.clear();
            ++result.failed_runs;
        }
        result.per_run.push_back(std::move(names));
        if (progress) progress(run + 1, cfg.n_c);
    }
    if (result.failed_runs == cfg.n_c) throw ProviderError("every character extraction run failed");

    for (auto& [name, votes] : consensus(result.per_run, cfg.tau_c)) {
        CharacterCandidate c{name, votes, cfg.n_c, {}};
        const std::size_t len = unicode::length(name);
        for (const std::size_t start : unicode::find_all(doc.text, name)) {
            c.mentions.push_back({start, start + len});
        }
        result.candidates.push_back(std::move(c));
    }
    return result;
}

RelationExtraction extract_relations(const Document& doc, std::span<const Entity> entities,
                                     const RuleKB& kb, const ExtractionConfig& cfg,
                                     Provider& provider, const ProgressFn& progress) {
    cfg.validate();
    if (trim(doc.text).empty()) throw ValidationError("document is empty");
    if (entities.empty()) throw ValidationError("relation extraction needs at least one entity");

    std::map<std::string, std::string> by_alias;
    std::string characters;
    for (const Entity& e : entities) {
        characters += "- " + e.canonical;
        std::string others;
        for (const auto& a : e.aliases) {
            by_alias.emplace(a, e.id);
            if (a != e.canonical) others += (others.empty() ? "" : ", ") + a;
        }
        if (!others.empty()) characters += " (also: " + others + ")";
        characters += '\n';
    }
    std::string relations;
    for (const auto& [id, rel] : kb.relations()) relations += "- " + id + ": " + kb.display(id) + '\n';

    const auto chunks = split_chunks(doc.text, cfg.max_chunk_chars);
    RelationExtraction result;
    for (int run = 0; run < cfg.n_e; ++run) {
        std::set<TripleKey> found;
        std::vector<Reject> run_rejects;
        try {
            for (const auto& chunk : chunks) {
                const std::string reply = provider.complete(
                    resources::render(resources::relation_prompt, {{"characters", characters},
                                                                   {"relations", relations},
                                                                   {"text", chunk}}),
                    cfg.temperature);
                for (auto& t : parse_relation_reply(reply, run + 1, run_rejects)) {
                    const auto src = by_alias.find(unicode::normalize_name(t.src));
                    const auto dst = by_alias.find(unicode::normalize_name(t.dst));
                    const auto rel = resolve_relation(kb, t.rel);
                    if (src == by_alias.end()) {
                        run_rejects.push_back({run + 1, t.raw, "unknown entity '" + t.src + "'"});
                    } else if (dst == by_alias.end()) {
                        run_rejects.push_back({run + 1, t.raw, "unknown entity '" + t.dst + "'"});
                    } else if (!rel) {
                        run_rejects.push_back({run + 1, t.raw, "unknown relation '" + t.rel + "'"});
                    } else if (src->second == dst->second && !kb.self_allowed(*rel)) {
                        run_rejects.push_back({run + 1, t.raw, "self_loop"});
                    } else {
                        found.insert({src->second, *rel, dst->second});
                    }
                }
            }
        } catch (const ProviderError& e) {
            note("relation run " + std::to_string(run + 1) + " failed: " + e.what());
            found.clear();
            run_rejects = {{run + 1, "", std::string("provider: ") + e.what()}};
            ++result.failed_runs;
        }
        result.rejects.insert(result.rejects.end(), run_rejects.begin(), run_rejects.end());
        result.per_run.push_back(std::move(found));
        if (progress) progress(run + 1, cfg.n_e);
    }
    if (result.failed_runs == cfg.n_e) throw ProviderError("every relation extraction run failed");

    for (auto& [key, votes] : consensus(result.per_run, cfg.tau_e)) {
        result.candidates.push_back({key, votes, cfg.n_e});
    }
    return result;
}

IngestReport ingest_candidates(Graph& g, const RuleKB& kb,
                               std::span<const CharacterCandidate> chars,
                               std::span<const RelationCandidate> rels) {
    IngestReport report;
    for (const auto& c : chars) {
        const std::string name = unicode::normalize_name(c.name);
        if (name.empty()) continue;
        if (g.rejected_names.contains(name)) {
            report.skipped_names.push_back(name);
            continue;
        }
        if (const Entity* existing = g.entity_by_alias(name)) {
            Entity& e = g.entities.at(existing->id);
            const Entity before = e;
            e.votes = std::max(e.votes, c.votes);
            e.mentions.insert(e.mentions.end(), c.mentions.begin(), c.mentions.end());
            std::ranges::sort(e.mentions);
            e.mentions.erase(std::unique(e.mentions.begin(), e.mentions.end()), e.mentions.end());
            if (!(e == before)) report.entities_updated.push_back(e.id);
            continue;
        }
        report.entities_added.push_back(
            add_entity(g, NewEntity{name, {name}, c.mentions, EntityStatus::suggested, c.votes}));
    }
    for (const auto& r : rels) {
        if (!g.entities.contains(r.triple.src) || !g.entities.contains(r.triple.dst)) continue;
        switch (upsert_triple(g, kb, r.triple, TripleStatus::suggested,
                              Provenance::extracted(r.votes))) {
        case UpsertOutcome::inserted: report.triples_added.push_back(r.triple); break;
        case UpsertOutcome::updated: report.triples_updated.push_back(r.triple); break;
        case UpsertOutcome::kept_tombstone: report.tombstoned.push_back(r.triple); break;
        case UpsertOutcome::unchanged: break;
        }
    }
    return report;
}

Json to_json(const CharacterCandidate& c) {
    Json mentions = Json::array();
    for (const auto& m : c.mentions) mentions.push_back(Json::array({m.start, m.end}));
    return Json{{"name", c.name}, {"votes", c.votes}, {"runs", c.runs}, {"mentions", mentions}};
}

Json to_json(const RelationCandidate& c) {
    return Json{{"triple", to_json(c.triple)}, {"votes", c.votes}, {"runs", c.runs}};
}

Json to_json(const Reject& r) { return Json{{"run", r.run}, {"raw", r.raw}, {"reason", r.reason}}; }

Json to_json(const IngestReport& r) {
    const auto keys = [](const std::vector<TripleKey>& ks) {
        Json arr = Json::array();
        for (const auto& k : ks) arr.push_back(to_json(k));
        return arr;
    };
    return Json{{"entities_added", r.entities_added},
                {"entities_updated", r.entities_updated},
                {"skipped_names", r.skipped_names},
                {"triples_added", keys(r.triples_added)},
                {"triples_updated", keys(r.triples_updated)},
                {"tombstoned", keys(r.tombstoned)}};
}

} // namespace relgraph
