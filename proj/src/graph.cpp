#include "relgraph/graph.hpp"

#include "relgraph/error.hpp"
#include "relgraph/unicode.hpp"

#include <algorithm>

namespace relgraph {

namespace {

constexpr std::string_view kTripleStatus[] = {"rejected", "suggested", "conflicted", "confirmed"};
constexpr std::string_view kEntityStatus[] = {"suggested", "confirmed"};
constexpr std::string_view kProvenanceKind[] = {"inferred", "extracted", "manual"};

Entity& entity_or_throw(Graph& g, std::string_view id) {
    const auto it = g.entities.find(id);
    if (it == g.entities.end()) throw NotFound("unknown entity '" + std::string(id) + "'");
    return it->second;
}

const Entity* alias_owner(const Graph& g, std::string_view alias) {
    for (const auto& [id, e] : g.entities) {
        if (e.aliases.contains(std::string(alias))) return &e;
    }
    return nullptr;
}

std::set<std::string> normalized(const std::set<std::string>& names) {
    std::set<std::string> out;
    for (const auto& n : names) {
        auto norm = unicode::normalize_name(n);
        if (norm.empty()) throw ValidationError("empty alias");
        out.insert(std::move(norm));
    }
    return out;
}

std::vector<MentionSpan> sorted_mentions(std::vector<MentionSpan> spans) {
    for (const auto& m : spans) {
        if (m.start >= m.end) {
            throw ValidationError("mention span [" + std::to_string(m.start) + ", " +
                                  std::to_string(m.end) + ") is empty");
        }
    }
    std::ranges::sort(spans);
    spans.erase(std::unique(spans.begin(), spans.end()), spans.end());
    return spans;
}

std::string fresh_entity_id(Graph& g) {
    std::string id;
    do {
        id = "e" + std::to_string(g.next_entity_seq++);
    } while (g.entities.contains(id));
    return id;
}

bool touches(const TripleKey& k, std::string_view id) { return k.src == id || k.dst == id; }

int provenance_rank(Provenance::Kind kind) { return static_cast<int>(kind); }

// Whether each inferred triple's justification bottoms out in non-inferred
// triples. Triples on a justification cycle are not grounded.
class Grounding {
public:
    explicit Grounding(const Graph& g) : g_(g) {}

    bool grounded(const TripleKey& key) {
        if (const auto it = memo_.find(key); it != memo_.end()) return it->second == State::yes;
        const Triple* t = g_.find_triple(key);
        if (t == nullptr) return false;
        if (t->provenance.kind != Provenance::Kind::inferred) {
            memo_[key] = State::yes;
            return true;
        }
        memo_[key] = State::visiting;
        bool ok = true;
        for (const auto& p : t->provenance.premises) {
            const auto it = memo_.find(p);
            if (it != memo_.end() && it->second == State::visiting) {
                ok = false;
                break;
            }
            if (!grounded(p)) {
                ok = false;
                break;
            }
        }
        memo_[key] = ok ? State::yes : State::no;
        return ok;
    }

private:
    enum class State { visiting, yes, no };
    const Graph& g_;
    std::map<TripleKey, State> memo_;
};

} // namespace

std::string_view to_string(TripleStatus status) {
    return kTripleStatus[static_cast<std::size_t>(status)];
}

std::optional<TripleStatus> triple_status_from_string(std::string_view text) {
    for (std::size_t i = 0; i < std::size(kTripleStatus); ++i) {
        if (kTripleStatus[i] == text) return static_cast<TripleStatus>(i);
    }
    return std::nullopt;
}

std::string_view to_string(EntityStatus status) {
    return kEntityStatus[static_cast<std::size_t>(status)];
}

std::optional<EntityStatus> entity_status_from_string(std::string_view text) {
    for (std::size_t i = 0; i < std::size(kEntityStatus); ++i) {
        if (kEntityStatus[i] == text) return static_cast<EntityStatus>(i);
    }
    return std::nullopt;
}

std::string_view to_string(Provenance::Kind kind) {
    return kProvenanceKind[static_cast<std::size_t>(kind)];
}

std::string TripleKey::str() const { return src + "~" + rel + "~" + dst; }

TripleKey TripleKey::parse(std::string_view text) {
    const auto a = text.find('~');
    const auto b = a == std::string_view::npos ? a : text.find('~', a + 1);
    if (b == std::string_view::npos || text.find('~', b + 1) != std::string_view::npos) {
        throw ParseError("parse_error", 0, "triple key must be src~rel~dst");
    }
    TripleKey key{std::string(text.substr(0, a)), std::string(text.substr(a + 1, b - a - 1)),
                  std::string(text.substr(b + 1))};
    if (key.src.empty() || key.rel.empty() || key.dst.empty()) {
        throw ParseError("parse_error", 0, "triple key has an empty component");
    }
    return key;
}

const Entity* Graph::find_entity(std::string_view id) const {
    const auto it = entities.find(id);
    return it == entities.end() ? nullptr : &it->second;
}

const Triple* Graph::find_triple(const TripleKey& key) const {
    const auto it = triples.find(key);
    return it == triples.end() ? nullptr : &it->second;
}

const Entity* Graph::entity_by_alias(std::string_view alias) const {
    return alias_owner(*this, alias);
}

std::set<TripleKey> Graph::keys() const {
    std::set<TripleKey> out;
    for (const auto& [k, _] : triples) out.insert(k);
    return out;
}

void check_invariants(const Graph& g, const RuleKB* kb) {
    std::map<std::string, std::string> owner;
    for (const auto& [id, e] : g.entities) {
        if (id.empty() || id.find('~') != std::string::npos || id != e.id) {
            throw ValidationError("bad entity id '" + id + "'");
        }
        if (!e.aliases.contains(e.canonical)) {
            throw ValidationError("canonical name of " + id + " is not among its aliases");
        }
        for (const auto& a : e.aliases) {
            if (auto [it, fresh] = owner.emplace(a, id); !fresh) {
                throw ValidationError("alias '" + a + "' shared by " + it->second + " and " + id);
            }
        }
    }
    for (const auto& [k, t] : g.triples) {
        if (!(t.key == k)) throw ValidationError("triple stored under the wrong key");
        if (!g.entities.contains(k.src) || !g.entities.contains(k.dst)) {
            throw ValidationError("triple " + k.str() + " has a dangling endpoint");
        }
        if (kb != nullptr) {
            if (!kb->has_relation(k.rel)) {
                throw ValidationError("triple " + k.str() + " uses unknown relation",
                                      "unknown_relation");
            }
            if (k.src == k.dst && !kb->self_allowed(k.rel)) {
                throw ValidationError("self-loop " + k.str() + " not allowed");
            }
        }
        if (t.provenance.kind == Provenance::Kind::inferred) {
            if (!t.provenance.rule) throw ValidationError("inferred " + k.str() + " has no rule");
            for (const auto& p : t.provenance.premises) {
                if (!g.triples.contains(p)) {
                    throw ValidationError("premise " + p.str() + " of " + k.str() + " is missing");
                }
            }
        }
    }
}

std::string add_entity(Graph& g, NewEntity entity) {
    auto canonical = unicode::normalize_name(entity.canonical);
    if (canonical.empty()) throw ValidationError("entity needs a canonical name");
    auto aliases = normalized(entity.aliases);
    aliases.insert(canonical);
    for (const auto& a : aliases) {
        if (const Entity* other = alias_owner(g, a)) {
            throw ValidationError("alias '" + a + "' already belongs to " + other->id,
                                  "alias_collision");
        }
    }
    auto mentions = sorted_mentions(std::move(entity.mentions));
    const std::string id = fresh_entity_id(g);
    g.entities.emplace(id, Entity{id, std::move(canonical), std::move(aliases),
                                  std::move(mentions), entity.status, entity.votes});
    return id;
}

void update_entity(Graph& g, std::string_view id, const EntityPatch& patch) {
    Entity updated = entity_or_throw(g, id);
    if (patch.aliases) updated.aliases = normalized(*patch.aliases);
    if (patch.canonical) {
        updated.canonical = unicode::normalize_name(*patch.canonical);
        if (updated.canonical.empty()) throw ValidationError("entity needs a canonical name");
        updated.aliases.insert(updated.canonical);
    }
    if (!updated.aliases.contains(updated.canonical)) {
        throw ValidationError("aliases must include the canonical name");
    }
    for (const auto& a : updated.aliases) {
        if (const Entity* other = alias_owner(g, a); other != nullptr && other->id != id) {
            throw ValidationError("alias '" + a + "' already belongs to " + other->id,
                                  "alias_collision");
        }
    }
    if (patch.status) updated.status = *patch.status;
    g.entities.find(id)->second = std::move(updated);
}

void remove_entity(Graph& g, const RuleKB& kb, std::string_view id) {
    const Entity gone = entity_or_throw(g, id);
    Graph next = g;
    std::erase_if(next.triples, [&](const auto& kv) { return touches(kv.first, id); });
    next.entities.erase(next.entities.find(id));
    next.rejected_names.insert(gone.aliases.begin(), gone.aliases.end());
    retract_unsupported(next, kb);
    g = std::move(next);
}

MergeReport merge_entities(Graph& g, const RuleKB& kb, std::string_view keep,
                           std::string_view absorb) {
    if (keep == absorb) throw ValidationError("cannot merge an entity into itself");
    const Entity& k = entity_or_throw(g, keep);
    const Entity& a = entity_or_throw(g, absorb);

    Graph next = g;
    Entity& merged = next.entities.find(keep)->second;
    merged.aliases.insert(a.aliases.begin(), a.aliases.end());
    std::vector<MentionSpan> mentions = k.mentions;
    mentions.insert(mentions.end(), a.mentions.begin(), a.mentions.end());
    merged.mentions = sorted_mentions(std::move(mentions));
    merged.status = std::max(k.status, a.status);
    merged.votes = std::max(k.votes, a.votes);
    next.entities.erase(next.entities.find(absorb));

    const auto rewrite = [&](TripleKey key) {
        if (key.src == absorb) key.src = keep;
        if (key.dst == absorb) key.dst = keep;
        return key;
    };

    MergeReport report;
    std::map<TripleKey, Triple> triples;
    std::set<TripleKey> rewritten_keys;
    for (const auto& [old_key, t] : g.triples) {
        Triple moved = t;
        moved.key = rewrite(old_key);
        for (auto& p : moved.provenance.premises) p = rewrite(p);
        if (moved.key.src == moved.key.dst && !kb.self_allowed(moved.key.rel)) {
            report.dropped_self_loops.push_back(moved.key);
            continue;
        }
        const bool was_rewritten = !(moved.key == old_key);
        auto it = triples.find(moved.key);
        if (it == triples.end()) {
            if (was_rewritten) rewritten_keys.insert(moved.key);
            triples.emplace(moved.key, std::move(moved));
            continue;
        }
        // Collision: the higher status wins; on a tie the copy that was
        // already keyed under `keep` survives.
        report.collapsed.push_back(moved.key);
        const bool incumbent_original = !rewritten_keys.contains(moved.key);
        const bool challenger_wins =
            moved.status > it->second.status ||
            (moved.status == it->second.status && !was_rewritten && !incumbent_original);
        if (challenger_wins) {
            it->second = std::move(moved);
            if (!was_rewritten) rewritten_keys.erase(it->first);
        }
    }
    next.triples = std::move(triples);
    report.retracted = retract_unsupported(next, kb);
    g = std::move(next);
    return report;
}

std::vector<std::string> split_entity(Graph& g, const RuleKB& kb, std::string_view src,
                                      std::span<const SplitPart> parts,
                                      const std::map<TripleKey, std::size_t>& assignment) {
    const Entity original = entity_or_throw(g, src);
    if (parts.size() < 2) throw ValidationError("a split needs at least two parts");

    // Aliases: old ones partitioned, new ones unused elsewhere.
    std::vector<std::set<std::string>> part_aliases;
    std::map<std::string, std::size_t> alias_part;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        auto names = normalized(parts[i].aliases);
        const auto canonical = unicode::normalize_name(parts[i].canonical);
        if (canonical.empty()) throw ValidationError("split part needs a canonical name");
        names.insert(canonical);
        for (const auto& n : names) {
            if (!alias_part.emplace(n, i).second) {
                throw ValidationError("alias '" + n + "' assigned to more than one part",
                                      "not_a_partition");
            }
            if (!original.aliases.contains(n)) {
                if (const Entity* other = alias_owner(g, n)) {
                    throw ValidationError("alias '" + n + "' already belongs to " + other->id,
                                          "alias_collision");
                }
            }
        }
        part_aliases.push_back(std::move(names));
    }
    for (const auto& a : original.aliases) {
        if (!alias_part.contains(a)) {
            throw ValidationError("alias '" + a + "' is not assigned to any part",
                                  "not_a_partition");
        }
    }

    std::set<MentionSpan> pending(original.mentions.begin(), original.mentions.end());
    for (const auto& part : parts) {
        for (const auto& m : part.mentions) {
            if (pending.erase(m) == 0) {
                throw ValidationError("mention [" + std::to_string(m.start) + ", " +
                                          std::to_string(m.end) +
                                          ") is not an unassigned mention of " + original.id,
                                      "not_a_partition");
            }
        }
    }
    if (!pending.empty()) throw ValidationError("some mentions are unassigned", "not_a_partition");

    for (const auto& [key, part] : assignment) {
        if (!touches(key, src) || !g.triples.contains(key)) {
            throw ValidationError("assignment names " + key.str() + " which does not touch " +
                                  original.id);
        }
        if (part >= parts.size()) throw ValidationError("part index out of range");
    }
    for (const auto& [key, _] : g.triples) {
        if (touches(key, src) && !assignment.contains(key)) {
            throw ValidationError("triple " + key.str() + " is not assigned", "unassigned_triple");
        }
    }

    Graph next = g;
    next.entities.erase(next.entities.find(src));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        const std::string id = fresh_entity_id(next);
        next.entities.emplace(
            id, Entity{id, unicode::normalize_name(parts[i].canonical), part_aliases[i],
                       sorted_mentions(parts[i].mentions), original.status, original.votes});
        ids.push_back(id);
    }

    const auto rewrite = [&](TripleKey key) {
        const auto it = assignment.find(key);
        if (it == assignment.end()) return key;
        const std::string& to = ids[it->second];
        if (key.src == src) key.src = to;
        if (key.dst == src) key.dst = to;
        return key;
    };
    std::map<TripleKey, Triple> triples;
    for (const auto& [old_key, t] : g.triples) {
        Triple moved = t;
        moved.key = rewrite(old_key);
        for (auto& p : moved.provenance.premises) p = rewrite(p);
        triples.emplace(moved.key, std::move(moved));
    }
    next.triples = std::move(triples);
    retract_unsupported(next, kb);
    g = std::move(next);
    return ids;
}

bool rule_instantiates(const Rule& rule, std::span<const TripleKey> premises,
                       const TripleKey& conclusion) {
    const auto& a = rule.args;
    const auto& c = conclusion;
    switch (rule.kind) {
    case RuleKind::symmetric: {
        if (premises.size() != 1) return false;
        const auto& p = premises[0];
        return p.rel == a[0] && c.rel == a[0] && c.src == p.dst && c.dst == p.src;
    }
    case RuleKind::inverse: {
        if (premises.size() != 1) return false;
        const auto& p = premises[0];
        const bool rels = (p.rel == a[0] && c.rel == a[1]) || (p.rel == a[1] && c.rel == a[0]);
        return rels && c.src == p.dst && c.dst == p.src;
    }
    case RuleKind::subtype: {
        if (premises.size() != 1) return false;
        const auto& p = premises[0];
        return p.rel == a[0] && c.rel == a[1] && c.src == p.src && c.dst == p.dst;
    }
    case RuleKind::compose: {
        if (premises.size() != 2) return false;
        const auto& p = premises[0];
        const auto& q = premises[1];
        return p.rel == a[0] && q.rel == a[1] && c.rel == a[2] && p.dst == q.src &&
               c.src == p.src && c.dst == q.dst;
    }
    default: return false;
    }
}

UpsertOutcome upsert_triple(Graph& g, const RuleKB& kb, const TripleKey& key,
                            TripleStatus status, Provenance provenance) {
    if (!g.entities.contains(key.src)) throw NotFound("unknown entity '" + key.src + "'");
    if (!g.entities.contains(key.dst)) throw NotFound("unknown entity '" + key.dst + "'");
    if (!kb.has_relation(key.rel)) {
        throw ValidationError("unknown relation '" + key.rel + "'", "unknown_relation");
    }
    if (key.src == key.dst && !kb.self_allowed(key.rel)) {
        throw ValidationError("relation '" + key.rel + "' may not relate an entity to itself",
                              "self_loop");
    }
    if (provenance.kind == Provenance::Kind::inferred) {
        if (!provenance.rule) throw ValidationError("inferred provenance needs a rule");
        for (const auto& p : provenance.premises) {
            if (!g.triples.contains(p)) {
                throw ValidationError("premise " + p.str() + " is not in the graph");
            }
        }
    }

    const auto it = g.triples.find(key);
    if (it == g.triples.end()) {
        g.triples.emplace(key, Triple{key, status, std::move(provenance)});
        return UpsertOutcome::inserted;
    }
    Triple& t = it->second;
    const bool manual = provenance.kind == Provenance::Kind::manual;
    if (t.status == TripleStatus::rejected && !manual) return UpsertOutcome::kept_tombstone;

    const Triple before = t;
    const int incoming = provenance_rank(provenance.kind);
    const int existing = provenance_rank(t.provenance.kind);
    if (incoming > existing ||
        (incoming == existing && provenance.kind == Provenance::Kind::extracted)) {
        t.provenance = std::move(provenance);
    }
    if (manual) t.status = status;
    return t == before ? UpsertOutcome::unchanged : UpsertOutcome::updated;
}

void set_status(Graph& g, const TripleKey& key, TripleStatus status) {
    const auto it = g.triples.find(key);
    if (it == g.triples.end()) throw NotFound("unknown triple " + key.str());
    it->second.status = status;
}

std::vector<TripleKey> remove_triple(Graph& g, const RuleKB& kb, const TripleKey& key) {
    if (!g.triples.contains(key)) throw NotFound("unknown triple " + key.str());
    g.triples.erase(key);
    return retract_unsupported(g, kb);
}

std::vector<TripleKey> retract_unsupported(Graph& g, const RuleKB& kb) {
    std::vector<TripleKey> erased;
    bool changed = true;
    while (changed) {
        changed = false;
        Grounding grounding(g);
        std::vector<TripleKey> unsupported;
        for (const auto& [key, t] : g.triples) {
            if (t.provenance.kind != Provenance::Kind::inferred) continue;
            const auto& prov = t.provenance;
            bool ok = prov.rule.has_value() && !prov.premises.empty() &&
                      kb.rules().contains(*prov.rule) &&
                      rule_instantiates(*prov.rule, prov.premises, key);
            for (const auto& p : prov.premises) {
                if (!ok) break;
                const Triple* premise = g.find_triple(p);
                ok = premise != nullptr && !(p == key) &&
                     premise->status != TripleStatus::rejected;
            }
            if (ok) ok = grounding.grounded(key);
            if (!ok) unsupported.push_back(key);
        }
        for (const auto& key : unsupported) {
            Triple& t = g.triples.find(key)->second;
            if (t.status == TripleStatus::suggested) {
                g.triples.erase(key);
                erased.push_back(key);
            } else {
                t.provenance = Provenance::manual();
            }
            changed = true;
        }
    }
    return erased;
}

std::vector<Triple> query(const Graph& g, const TriplePattern& pattern) {
    std::vector<Triple> out;
    auto first = g.triples.begin();
    if (pattern.src) first = g.triples.lower_bound(TripleKey{*pattern.src, "", ""});
    for (auto it = first; it != g.triples.end(); ++it) {
        const auto& [k, t] = *it;
        if (pattern.src && k.src != *pattern.src) break;
        if (pattern.rel && k.rel != *pattern.rel) continue;
        if (pattern.dst && k.dst != *pattern.dst) continue;
        if (pattern.status && t.status != *pattern.status) continue;
        out.push_back(t);
    }
    return out;
}

} // namespace relgraph
