#include "relgraph/engine.hpp"

#include "relgraph/error.hpp"

#include <algorithm>
#include <array>

namespace relgraph {

namespace {

constexpr std::array<std::pair<OpKind, std::string_view>, 5> kOpNames{{
    {OpKind::t1_symmetry, "T1_symmetry"},
    {OpKind::t2_transitive, "T2_transitive"},
    {OpKind::copy_completion, "copy_completion"},
    {OpKind::manual_add, "manual_add"},
    {OpKind::manual_remove, "manual_remove"},
}};

bool is_inferred(OpKind kind) {
    return kind == OpKind::t1_symmetry || kind == OpKind::t2_transitive ||
           kind == OpKind::copy_completion;
}

OpKind op_kind_for(RuleKind kind) {
    switch (kind) {
    case RuleKind::symmetric:
    case RuleKind::inverse: return OpKind::t1_symmetry;
    case RuleKind::compose: return OpKind::t2_transitive;
    case RuleKind::subtype: return OpKind::copy_completion;
    default: throw ValidationError("conflict rules derive nothing");
    }
}

// Current triple set plus a (src, rel) -> dst index for composition lookups.
class Working {
public:
    explicit Working(std::set<TripleKey> keys) : keys_(std::move(keys)) {
        for (const auto& k : keys_) out_[{k.src, k.rel}].insert(k.dst);
    }

    bool contains(const TripleKey& k) const { return keys_.contains(k); }
    void insert(const TripleKey& k) {
        keys_.insert(k);
        out_[{k.src, k.rel}].insert(k.dst);
    }
    void erase(const TripleKey& k) {
        keys_.erase(k);
        if (auto it = out_.find({k.src, k.rel}); it != out_.end()) it->second.erase(k.dst);
    }
    const std::set<std::string>* successors(const std::string& src, const std::string& rel) const {
        const auto it = out_.find({src, rel});
        return it == out_.end() ? nullptr : &it->second;
    }

private:
    std::set<TripleKey> keys_;
    std::map<std::pair<std::string, std::string>, std::set<std::string>> out_;
};

struct Tables {
    CompiledRules compiled;
    std::multimap<std::string, std::pair<std::string, std::string>> compose_into;  // r3 -> (r1, r2)
    std::multimap<std::string, std::string> subtypes_of;                           // super -> sub

    explicit Tables(const RuleKB& kb) : compiled(kb) {
        for (const Rule& rule : kb.rules()) {
            if (rule.kind == RuleKind::compose) {
                compose_into.emplace(rule.args[2], std::pair{rule.args[0], rule.args[1]});
            } else if (rule.kind == RuleKind::subtype) {
                subtypes_of.emplace(rule.args[1], rule.args[0]);
            }
        }
    }
};

std::optional<CompletionOp> derive(OpKind stage, const TripleKey& k, const Working& cur,
                                   const Tables& t) {
    switch (stage) {
    case OpKind::t1_symmetry: {
        const TripleKey mirror{k.dst, k.rel, k.src};
        if (t.compiled.symmetric.contains(k.rel) && cur.contains(mirror)) {
            return CompletionOp{stage, k, {mirror}, Rule::symmetric(k.rel)};
        }
        for (auto [it, end] = t.compiled.inverse.equal_range(k.rel); it != end; ++it) {
            const TripleKey premise{k.dst, it->second, k.src};
            if (cur.contains(premise)) {
                return CompletionOp{stage, k, {premise}, Rule::inverse(it->second, k.rel)};
            }
        }
        return std::nullopt;
    }
    case OpKind::t2_transitive:
        for (auto [it, end] = t.compose_into.equal_range(k.rel); it != end; ++it) {
            const auto& [r1, r2] = it->second;
            const auto* mids = cur.successors(k.src, r1);
            if (mids == nullptr) continue;
            for (const auto& z : *mids) {
                const TripleKey second{z, r2, k.dst};
                if (cur.contains(second)) {
                    return CompletionOp{stage, k, {{k.src, r1, z}, second},
                                        Rule::compose(r1, r2, k.rel)};
                }
            }
        }
        return std::nullopt;
    case OpKind::copy_completion:
        for (auto [it, end] = t.subtypes_of.equal_range(k.rel); it != end; ++it) {
            const TripleKey premise{k.src, it->second, k.dst};
            if (cur.contains(premise)) {
                return CompletionOp{stage, k, {premise}, Rule::subtype(it->second, k.rel)};
            }
        }
        return std::nullopt;
    default: return std::nullopt;
    }
}

// Erase without cascading: dependents keep their place but lose the inferred
// justification, so the resulting triple set is exactly what the ops say.
void erase_detached(Graph& g, const TripleKey& key) {
    if (g.triples.erase(key) == 0) throw NotFound("no triple " + key.str());
    for (auto& [k, t] : g.triples) {
        if (t.provenance.kind != Provenance::Kind::inferred) continue;
        if (std::ranges::find(t.provenance.premises, key) != t.provenance.premises.end()) {
            t.provenance = Provenance::manual();
        }
    }
}

} // namespace

std::string_view to_string(OpKind kind) {
    for (const auto& [k, name] : kOpNames) {
        if (k == kind) return name;
    }
    return "?";
}

std::optional<OpKind> op_kind_from_string(std::string_view text) {
    for (const auto& [k, name] : kOpNames) {
        if (name == text) return k;
    }
    return std::nullopt;
}

std::size_t CompletionPlan::count(OpKind kind) const {
    return static_cast<std::size_t>(
        std::ranges::count_if(ops, [kind](const CompletionOp& op) { return op.kind == kind; }));
}

CompletionPlan plan_completion(const Graph& from, const Graph& to, const RuleKB& kb) {
    const auto ids = [](const Graph& g) {
        std::set<std::string> out;
        for (const auto& [id, _] : g.entities) out.insert(id);
        return out;
    };
    if (ids(from) != ids(to)) {
        throw ValidationError("start and target graphs have different entity sets");
    }

    const Tables tables(kb);
    const std::set<TripleKey> target = to.keys();
    Working cur(from.keys());
    CompletionPlan plan;

    for (const auto& k : from.keys()) {
        if (target.contains(k)) continue;
        plan.ops.push_back({OpKind::manual_remove, k, {}, std::nullopt});
        plan.needs_removals = true;
        cur.erase(k);
    }

    std::set<TripleKey> missing;
    std::ranges::set_difference(target, from.keys(), std::inserter(missing, missing.end()));

    bool progress = true;
    while (progress && !missing.empty()) {
        progress = false;
        for (OpKind stage : {OpKind::t1_symmetry, OpKind::t2_transitive, OpKind::copy_completion}) {
            for (auto it = missing.begin(); it != missing.end();) {
                if (auto op = derive(stage, *it, cur, tables)) {
                    cur.insert(*it);
                    plan.ops.push_back(std::move(*op));
                    it = missing.erase(it);
                    progress = true;
                } else {
                    ++it;
                }
            }
        }
    }
    for (const auto& k : missing) plan.ops.push_back({OpKind::manual_add, k, {}, std::nullopt});
    return plan;
}

ApplyResult apply_ops(const Graph& g, std::span<const CompletionOp> ops, const RuleKB& kb) {
    ApplyResult result{g, 0, std::nullopt};
    Graph& out = result.graph;
    for (std::size_t i = 0; i < ops.size(); ++i) {
        const CompletionOp& op = ops[i];
        try {
            if (is_inferred(op.kind)) {
                if (!op.rule) throw ValidationError("inferred op without a rule");
                if (op_kind_for(op.rule->kind) != op.kind) {
                    throw ValidationError("rule '" + op.rule->to_line() + "' does not match op kind");
                }
                if (!kb.rules().contains(*op.rule)) {
                    throw ValidationError("rule '" + op.rule->to_line() + "' is not in the KB");
                }
                for (const auto& p : op.premises) {
                    if (!out.triples.contains(p)) throw ValidationError("premise " + p.str() + " missing");
                }
                if (!rule_instantiates(*op.rule, op.premises, op.triple)) {
                    throw ValidationError("rule does not conclude " + op.triple.str());
                }
                if (!out.triples.contains(op.triple)) {
                    upsert_triple(out, kb, op.triple, TripleStatus::suggested,
                                  Provenance::inferred(*op.rule, op.premises));
                }
            } else if (op.kind == OpKind::manual_add) {
                upsert_triple(out, kb, op.triple, TripleStatus::confirmed, Provenance::manual());
            } else {
                erase_detached(out, op.triple);
            }
        } catch (const Error& e) {
            result.error = ApplyError{i, e.what()};
            break;
        }
        ++result.applied;
    }
    return result;
}

Json to_json(const CompletionOp& op) {
    Json j;
    j["kind"] = to_string(op.kind);
    j["triple"] = to_json(op.triple);
    Json premises = Json::array();
    for (const auto& p : op.premises) premises.push_back(to_json(p));
    j["premises"] = std::move(premises);
    if (op.rule) j["rule"] = op.rule->to_line();
    return j;
}

CompletionOp completion_op_from_json(const Json& j) {
    if (!j.is_object() || !j.contains("kind") || !j.contains("triple")) {
        throw ParseError("parse_error", 0, "op needs kind and triple");
    }
    const auto kind = op_kind_from_string(j["kind"].get<std::string>());
    if (!kind) throw ParseError("parse_error", 0, "unknown op kind " + j["kind"].dump());
    CompletionOp op;
    op.kind = *kind;
    op.triple = triple_key_from_json(j["triple"]);
    for (const auto& p : j.value("premises", Json::array())) {
        op.premises.push_back(triple_key_from_json(p));
    }
    if (j.contains("rule") && j["rule"].is_string()) op.rule = Rule::parse(j["rule"].get<std::string>());
    return op;
}

Json to_json(const CompletionPlan& plan) {
    Json j;
    Json ops = Json::array();
    for (const auto& op : plan.ops) ops.push_back(to_json(op));
    j["ops"] = std::move(ops);
    j["needs_removals"] = plan.needs_removals;
    Json counts = Json::object();
    for (const auto& [kind, name] : kOpNames) counts[std::string(name)] = plan.count(kind);
    j["counts"] = std::move(counts);
    return j;
}

CompletionPlan completion_plan_from_json(const Json& j) {
    CompletionPlan plan;
    const Json& ops = j.is_array() ? j : j.value("ops", Json::array());
    for (const auto& op : ops) plan.ops.push_back(completion_op_from_json(op));
    if (j.is_object()) plan.needs_removals = j.value("needs_removals", false);
    return plan;
}

} // namespace relgraph
