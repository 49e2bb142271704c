#include "support.hpp"

#include <algorithm>
#include <limits>

namespace relgraph::testing {

namespace {

bool live(const Triple& t) { return is_live(t.status); }

} // namespace

Graph empty_graph(std::size_t n) {
    Graph g;
    g.doc_id = "doc";
    for (std::size_t i = 1; i <= n; ++i) {
        const std::string id = "e" + std::to_string(i);
        Entity e;
        e.id = id;
        e.canonical = "Person " + std::to_string(i);
        e.aliases = {e.canonical};
        e.status = EntityStatus::confirmed;
        g.entities.emplace(id, std::move(e));
    }
    g.next_entity_seq = n + 1;
    return g;
}

void put(Graph& g, const TripleKey& k, TripleStatus s) {
    g.triples[k] = Triple{k, s, Provenance::manual()};
}

Instance random_instance(Rng& rng, std::size_t max_ent, std::size_t max_rel, std::size_t max_rules) {
    Instance inst;
    const std::size_t n_rel = 1 + rng.below(max_rel);
    std::vector<std::string> rels;
    for (std::size_t i = 0; i < n_rel; ++i) {
        rels.push_back("r" + std::to_string(i));
        inst.kb.insert_relation({rels.back(), "", "", rng.chance(0.2)});
    }
    const auto pick = [&] { return rels[rng.below(rels.size())]; };
    const std::size_t n_rules = rng.below(max_rules + 1);
    for (std::size_t tries = 0; inst.kb.rules().size() < n_rules && tries < 200; ++tries) {
        Rule rule;
        switch (rng.below(7)) {
        case 0: rule = Rule::symmetric(pick()); break;
        case 1: rule = Rule::inverse(pick(), pick()); break;
        case 2: rule = Rule::compose(pick(), pick(), pick()); break;
        case 3: {
            const auto a = pick(), b = pick();
            if (a == b) continue;
            rule = Rule::subtype(a, b);
            break;
        }
        case 4: rule = Rule::incompatible(pick(), pick()); break;
        case 5: rule = Rule::asymmetric(pick(), pick()); break;
        default: rule = Rule::exclusive(pick()); break;
        }
        if (inst.kb.rules().contains(rule)) continue;
        RuleKB trial = inst.kb;
        trial.insert_rule(rule);
        if (has_hard_errors(validate_kb(trial))) continue;
        inst.kb = std::move(trial);
    }

    const std::size_t n_ent = 1 + rng.below(max_ent);
    inst.graph = empty_graph(n_ent);
    const std::size_t n_triples = rng.below(3 * n_ent + 1);
    for (std::size_t i = 0; i < n_triples; ++i) {
        const std::string src = "e" + std::to_string(1 + rng.below(n_ent));
        const std::string dst = "e" + std::to_string(1 + rng.below(n_ent));
        const std::string rel = pick();
        if (src == dst && !inst.kb.self_allowed(rel)) continue;
        const double roll = rng.uniform();
        const TripleStatus s = roll < 0.1   ? TripleStatus::rejected
                               : roll < 0.5 ? TripleStatus::suggested
                                            : TripleStatus::confirmed;
        put(inst.graph, {src, rel, dst}, s);
    }
    return inst;
}

RuleKB pair_kb(Rng& rng) {
    RuleKB kb;
    const bool two = rng.chance(0.5);
    kb.insert_relation({"a", "", "", false});
    if (two) kb.insert_relation({"b", "", "", false});
    if (rng.chance(0.6)) kb.insert_rule(Rule::symmetric("a"));
    if (rng.chance(0.8)) kb.insert_rule(Rule::compose("a", "a", "a"));
    if (two) {
        switch (rng.below(3)) {
        case 0: kb.insert_rule(Rule::inverse("a", "b")); break;
        case 1: kb.insert_rule(Rule::subtype("b", "a")); break;
        default: kb.insert_rule(Rule::compose("b", "b", "b")); break;
        }
        if (rng.chance(0.5)) kb.insert_rule(Rule::symmetric("b"));
    }
    return kb;
}

std::set<TripleKey> naive_closure(const Graph& g, const RuleKB& kb) {
    std::set<TripleKey> all;      // every key present, whatever its status
    std::set<TripleKey> usable;   // keys that may serve as premises
    for (const auto& [k, t] : g.triples) {
        all.insert(k);
        if (live(t)) usable.insert(k);
    }
    const auto admit = [&](const TripleKey& k, std::set<TripleKey>& fresh) {
        if (k.src == k.dst && !kb.self_allowed(k.rel)) return;
        if (!all.contains(k)) fresh.insert(k);
    };
    while (true) {
        std::set<TripleKey> fresh;
        for (const Rule& rule : kb.rules()) {
            const auto& a = rule.args;
            for (const auto& t : usable) {
                switch (rule.kind) {
                case RuleKind::symmetric:
                    if (t.rel == a[0]) admit({t.dst, t.rel, t.src}, fresh);
                    break;
                case RuleKind::inverse:
                    if (t.rel == a[0]) admit({t.dst, a[1], t.src}, fresh);
                    if (t.rel == a[1]) admit({t.dst, a[0], t.src}, fresh);
                    break;
                case RuleKind::subtype:
                    if (t.rel == a[0]) admit({t.src, a[1], t.dst}, fresh);
                    break;
                case RuleKind::compose:
                    for (const auto& u : usable) {
                        if (t.rel == a[0] && u.rel == a[1] && t.dst == u.src) {
                            admit({t.src, a[2], u.dst}, fresh);
                        }
                    }
                    break;
                default: break;
                }
            }
        }
        if (fresh.empty()) break;
        for (const auto& k : fresh) {
            all.insert(k);
            usable.insert(k);
        }
    }
    return all;
}

std::set<std::pair<std::string, std::vector<TripleKey>>> brute_conflicts(const Graph& g,
                                                                          const RuleKB& kb) {
    std::vector<TripleKey> ts;
    for (const auto& [k, t] : g.triples) {
        if (live(t)) ts.push_back(k);
    }
    std::set<std::pair<std::string, std::vector<TripleKey>>> out;
    for (const Rule& rule : kb.rules()) {
        const auto& a = rule.args;
        if (rule.kind == RuleKind::exclusive) {
            std::map<std::string, std::vector<TripleKey>> groups;
            for (const auto& t : ts) {
                if (t.rel == a[0]) groups[t.src].push_back(t);
            }
            for (auto& [_, v] : groups) {
                if (v.size() < 2) continue;
                std::ranges::sort(v);
                out.insert({rule.to_line(), v});
            }
            continue;
        }
        for (const auto& t : ts) {
            for (const auto& u : ts) {
                if (t == u) continue;
                bool hit = false;
                if (rule.kind == RuleKind::incompatible) {
                    hit = t.rel == a[0] && u.rel == a[1] && t.src == u.src && t.dst == u.dst;
                } else if (rule.kind == RuleKind::asymmetric) {
                    hit = t.rel == a[0] && u.rel == a[1] && t.src == u.dst && t.dst == u.src;
                }
                if (!hit) continue;
                std::vector<TripleKey> v{t, u};
                std::ranges::sort(v);
                out.insert({rule.to_line(), v});
            }
        }
    }
    return out;
}

std::map<std::string, int> tally(const std::vector<std::set<std::string>>& runs) {
    std::map<std::string, int> votes;
    for (const auto& run : runs) {
        for (const auto& name : run) votes[name] += 1;
    }
    return votes;
}

double clustering_oracle(const UGraph& g) {
    const std::size_t n = g.size();
    if (n == 0) return 0.0;
    std::vector<std::vector<int>> m(n, std::vector<int>(n, 0));
    for (std::size_t v = 0; v < n; ++v) {
        for (std::size_t w : g.adj[v]) m[v][w] = 1;
    }
    double sum = 0.0;
    for (std::size_t v = 0; v < n; ++v) {
        int deg = 0;
        for (std::size_t w = 0; w < n; ++w) deg += m[v][w];
        if (deg < 2) continue;
        int tri = 0;
        for (std::size_t a = 0; a < n; ++a) {
            for (std::size_t b = 0; b < n; ++b) tri += m[v][a] * m[a][b] * m[b][v];
        }
        // tri counts each closed pair twice
        sum += static_cast<double>(tri) / (static_cast<double>(deg) * (deg - 1));
    }
    return sum / static_cast<double>(n);
}

double path_length_oracle(const UGraph& g) {
    const std::size_t n = g.size();
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::vector<double>> d(n, std::vector<double>(n, inf));
    for (std::size_t v = 0; v < n; ++v) {
        d[v][v] = 0;
        for (std::size_t w : g.adj[v]) d[v][w] = 1;
    }
    for (std::size_t k = 0; k < n; ++k) {
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], d[i][k] + d[k][j]);
        }
    }
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (i != j) total += d[i][j];
        }
    }
    return total / static_cast<double>(n * (n - 1));
}

} // namespace relgraph::testing
