#include "relgraph/metrics.hpp"

#include <algorithm>

namespace relgraph {

double safe_ratio(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

EvalReport EvalReport::from_counts(Counts c) {
    EvalReport r;
    r.counts = c;
    const auto tp = static_cast<double>(c.tp);
    r.precision = safe_ratio(tp, tp + static_cast<double>(c.fp));
    r.recall = safe_ratio(tp, tp + static_cast<double>(c.fn));
    r.f1 = safe_ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
    return r;
}

EvalReport score_triples(const std::set<TripleKey>& pred, const std::set<TripleKey>& gold,
                         const RuleKB* soft_kb) {
    std::map<std::string, Counts> per_rel;
    std::set<TripleKey> open_pred, open_gold;
    Counts total;
    for (const auto& k : pred) {
        if (gold.contains(k)) {
            ++total.tp;
            ++per_rel[k.rel].tp;
        } else {
            open_pred.insert(k);
        }
    }
    for (const auto& k : gold) {
        if (!pred.contains(k)) open_gold.insert(k);
    }
    if (soft_kb != nullptr) {
        for (auto it = open_pred.begin(); it != open_pred.end();) {
            const auto supers = ancestors(*soft_kb, it->rel);
            const auto match = std::ranges::find_if(open_gold, [&](const TripleKey& g) {
                return g.src == it->src && g.dst == it->dst && supers.contains(g.rel);
            });
            if (match != open_gold.end()) {
                ++total.tp;
                ++per_rel[match->rel].tp;
                open_gold.erase(match);
                it = open_pred.erase(it);
            } else {
                ++it;
            }
        }
    }
    for (const auto& k : open_pred) {
        ++total.fp;
        ++per_rel[k.rel].fp;
    }
    for (const auto& k : open_gold) {
        ++total.fn;
        ++per_rel[k.rel].fn;
    }
    EvalReport r = EvalReport::from_counts(total);
    r.per_relation = std::move(per_rel);
    return r;
}

EvalReport score_entities(const std::vector<std::set<std::string>>& pred,
                          const std::vector<std::set<std::string>>& gold) {
    struct Candidate {
        std::size_t overlap;
        std::size_t p;
        std::size_t g;
    };
    std::vector<Candidate> candidates;
    for (std::size_t p = 0; p < pred.size(); ++p) {
        std::size_t hits = 0, which = 0, overlap = 0;
        for (std::size_t g = 0; g < gold.size(); ++g) {
            std::size_t shared = 0;
            for (const auto& name : pred[p]) shared += gold[g].contains(name) ? 1 : 0;
            if (shared > 0) {
                ++hits;
                which = g;
                overlap = shared;
            }
        }
        if (hits == 1) candidates.push_back({overlap, p, which});
    }
    std::ranges::sort(candidates, [&](const Candidate& a, const Candidate& b) {
        if (a.overlap != b.overlap) return a.overlap > b.overlap;
        if (pred[a.p] != pred[b.p]) return pred[a.p] < pred[b.p];
        return gold[a.g] < gold[b.g];
    });
    std::vector<bool> gold_used(gold.size(), false);
    Counts c;
    for (const auto& cand : candidates) {
        if (gold_used[cand.g]) continue;
        gold_used[cand.g] = true;
        ++c.tp;
    }
    c.fp = pred.size() - c.tp;
    c.fn = gold.size() - c.tp;
    return EvalReport::from_counts(c);
}

std::vector<std::set<std::string>> alias_groups(const Graph& g) {
    std::vector<std::set<std::string>> out;
    for (const auto& [_, e] : g.entities) out.push_back(e.aliases);
    return out;
}

Json to_json(const Counts& c) { return Json{{"tp", c.tp}, {"fp", c.fp}, {"fn", c.fn}}; }

Json to_json(const EvalReport& r) {
    Json j{{"tp", r.counts.tp},         {"fp", r.counts.fp},   {"fn", r.counts.fn},
           {"precision", r.precision}, {"recall", r.recall}, {"f1", r.f1}};
    Json per = Json::object();
    for (const auto& [rel, c] : r.per_relation) per[rel] = to_json(c);
    j["per_relation"] = std::move(per);
    return j;
}

} // namespace relgraph
