#include "relgraph/engine.hpp"

#include "relgraph/error.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <stdexcept>

namespace relgraph {

namespace {

using Adjacency = std::map<std::pair<std::string, std::string>, std::set<std::string>>;

std::uint64_t fnv1a(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

std::map<TripleKey, int> inferred_depths(const Graph& g) {
    std::map<TripleKey, int> depth;
    std::set<TripleKey> visiting;
    std::function<int(const TripleKey&)> visit = [&](const TripleKey& k) -> int {
        if (const auto it = depth.find(k); it != depth.end()) return it->second;
        const Triple* t = g.find_triple(k);
        if (t == nullptr || t->provenance.kind != Provenance::Kind::inferred) return 0;
        if (!visiting.insert(k).second) return 0;
        int d = 0;
        for (const auto& p : t->provenance.premises) d = std::max(d, visit(p));
        visiting.erase(k);
        return depth[k] = d + 1;
    };
    for (const auto& [k, t] : g.triples) {
        if (t.provenance.kind == Provenance::Kind::inferred) visit(k);
    }
    return depth;
}

} // namespace

CloseResult close(const Graph& g, const RuleKB& kb) {
    const CompiledRules rules(kb);
    CloseResult result{g, {}, 0, false};
    Graph& out = result.graph;

    Adjacency fwd;  // (src, rel) -> dst
    Adjacency bwd;  // (dst, rel) -> src
    std::vector<TripleKey> delta;
    for (const auto& [k, t] : g.triples) {
        if (!is_live(t.status)) continue;
        fwd[{k.src, k.rel}].insert(k.dst);
        bwd[{k.dst, k.rel}].insert(k.src);
        delta.push_back(k);
    }
    std::map<TripleKey, int> depth = inferred_depths(g);
    const auto depth_of = [&](const TripleKey& k) {
        const auto it = depth.find(k);
        return it == depth.end() ? 0 : it->second;
    };

    const std::size_t n_entities = g.entities.size();
    const std::size_t n_relations = kb.relations().size();
    const std::size_t cap = n_entities * n_entities * n_relations;
    const int depth_cap = static_cast<int>(n_entities * n_relations);
    std::size_t added = 0;

    while (!delta.empty()) {
        std::map<TripleKey, Derivation> found;
        const auto emit = [&](TripleKey c, Rule rule, std::vector<TripleKey> premises) {
            if (c.src == c.dst && !kb.self_allowed(c.rel)) return;
            if (out.triples.contains(c) || found.contains(c)) return;
            int d = 0;
            for (const auto& p : premises) d = std::max(d, depth_of(p));
            found.emplace(c, Derivation{c, std::move(rule), std::move(premises), d + 1});
        };

        for (const TripleKey& t : delta) {
            if (rules.symmetric.contains(t.rel)) {
                emit({t.dst, t.rel, t.src}, Rule::symmetric(t.rel), {t});
            }
            for (auto [it, end] = rules.inverse.equal_range(t.rel); it != end; ++it) {
                emit({t.dst, it->second, t.src}, Rule::inverse(t.rel, it->second), {t});
            }
            for (auto [it, end] = rules.supertypes.equal_range(t.rel); it != end; ++it) {
                emit({t.src, it->second, t.dst}, Rule::subtype(t.rel, it->second), {t});
            }
            // t as the first premise: t.rel(x,y), r2(y,z) => r3(x,z)
            for (auto [it, end] = rules.by_first.equal_range(t.rel); it != end; ++it) {
                const auto& [r2, r3] = it->second;
                const auto next = fwd.find({t.dst, r2});
                if (next == fwd.end()) continue;
                for (const auto& z : next->second) {
                    emit({t.src, r3, z}, Rule::compose(t.rel, r2, r3), {t, {t.dst, r2, z}});
                }
            }
            // t as the second premise: r1(x,y), t.rel(y,z) => r3(x,z)
            for (auto [it, end] = rules.by_second.equal_range(t.rel); it != end; ++it) {
                const auto& [r1, r3] = it->second;
                const auto prev = bwd.find({t.src, r1});
                if (prev == bwd.end()) continue;
                for (const auto& x : prev->second) {
                    emit({x, r3, t.dst}, Rule::compose(r1, t.rel, r3), {{x, r1, t.src}, t});
                }
            }
        }

        delta.clear();
        for (auto& [k, d] : found) {
            out.triples.emplace(
                k, Triple{k, TripleStatus::suggested, Provenance::inferred(d.rule, d.premises)});
            fwd[{k.src, k.rel}].insert(k.dst);
            bwd[{k.dst, k.rel}].insert(k.src);
            depth[k] = d.depth;
            result.max_depth = std::max(result.max_depth, d.depth);
            delta.push_back(k);
            result.derivations.push_back(std::move(d));
            if (++added > cap) {
                throw std::logic_error("closure exceeded |V|^2*|R| new triples");
            }
        }
    }
    result.depth_cap_hit = result.max_depth > depth_cap;
    return result;
}

std::vector<Derivation> derivations_of(const Graph& g) {
    const auto depth = inferred_depths(g);
    std::vector<Derivation> out;
    for (const auto& [k, t] : g.triples) {
        if (t.provenance.kind != Provenance::Kind::inferred || !t.provenance.rule) continue;
        out.push_back({k, *t.provenance.rule, t.provenance.premises, depth.at(k)});
    }
    std::ranges::stable_sort(out, [](const Derivation& a, const Derivation& b) {
        return a.depth < b.depth;
    });
    return out;
}

std::string Conflict::id() const {
    std::string text = rule.to_line();
    for (const auto& k : offenders) text += "|" + k.str();
    char buf[20];
    std::snprintf(buf, sizeof buf, "c%016llx", static_cast<unsigned long long>(fnv1a(text)));
    return buf;
}

std::vector<Conflict> detect_conflicts(const Graph& g, const RuleKB& kb) {
    std::set<TripleKey> live;
    for (const auto& [k, t] : g.triples) {
        if (is_live(t.status)) live.insert(k);
    }

    std::vector<Conflict> out;
    for (const Rule& rule : kb.rules()) {
        if (!rule.is_conflict()) continue;
        const auto& a = rule.args;
        switch (rule.kind) {
        case RuleKind::incompatible:
            if (a[0] == a[1]) break;  // needs two distinct triples
            for (const auto& k : live) {
                if (k.rel != a[0]) continue;
                TripleKey other{k.src, a[1], k.dst};
                if (live.contains(other)) out.push_back({rule, {k, std::move(other)}, ConflictState::open, {}, {}});
            }
            break;
        case RuleKind::asymmetric:
            for (const auto& k : live) {
                if (k.rel != a[0]) continue;
                TripleKey other{k.dst, a[1], k.src};
                if (other == k) continue;
                if (a[0] == a[1] && !(k < other)) continue;  // each pair once
                if (live.contains(other)) out.push_back({rule, {k, std::move(other)}, ConflictState::open, {}, {}});
            }
            break;
        case RuleKind::exclusive: {
            std::map<std::string, std::vector<TripleKey>> by_src;
            for (const auto& k : live) {
                if (k.rel == a[0]) by_src[k.src].push_back(k);
            }
            for (auto& [src, keys] : by_src) {
                if (keys.size() >= 2) out.push_back({rule, std::move(keys), ConflictState::open, {}, {}});
            }
            break;
        }
        default: break;
        }
    }
    std::ranges::sort(out, [](const Conflict& x, const Conflict& y) {
        if (x.rule != y.rule) return x.rule < y.rule;
        return x.offenders < y.offenders;
    });
    return out;
}

Json to_json(const Derivation& d) {
    Json j;
    j["conclusion"] = to_json(d.conclusion);
    j["rule"] = d.rule.to_line();
    Json premises = Json::array();
    for (const auto& p : d.premises) premises.push_back(to_json(p));
    j["premises"] = std::move(premises);
    j["depth"] = d.depth;
    return j;
}

Json to_json(const Conflict& c) {
    Json j;
    j["id"] = c.id();
    j["kind"] = to_string(c.rule.kind);
    j["rule"] = c.rule.to_line();
    Json offenders = Json::array();
    for (const auto& k : c.offenders) offenders.push_back(to_json(k));
    j["offenders"] = std::move(offenders);
    j["state"] = c.state == ConflictState::open ? "open" : "resolved";
    if (c.state == ConflictState::resolved) {
        Json kept = Json::array(), dropped = Json::array();
        for (const auto& k : c.kept) kept.push_back(to_json(k));
        for (const auto& k : c.dropped) dropped.push_back(to_json(k));
        j["kept"] = std::move(kept);
        j["dropped"] = std::move(dropped);
    }
    return j;
}

} // namespace relgraph
