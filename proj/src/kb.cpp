#include "relgraph/kb.hpp"

#include "relgraph/error.hpp"
#include "relgraph/resources.hpp"

#include <algorithm>
#include <functional>
#include <sstream>

namespace relgraph {

namespace {

constexpr std::string_view kKindNames[] = {
    "symmetric", "inverse", "compose", "subtype", "incompatible", "asymmetric", "exclusive",
};

constexpr std::size_t kArity[] = {1, 2, 3, 2, 2, 2, 1};

struct Token {
    std::string text;
    bool quoted = false;
};

// Whitespace-separated tokens; double-quoted strings may contain spaces and
// \" or \\ escapes; an unquoted '#' starts a comment.
std::vector<Token> tokenize(std::string_view line, std::size_t line_no) {
    std::vector<Token> tokens;
    std::size_t i = 0;
    while (i < line.size()) {
        const char c = line[i];
        if (c == ' ' || c == '\t' || c == '\r') {
            ++i;
            continue;
        }
        if (c == '#') break;
        Token tok;
        if (c == '"') {
            tok.quoted = true;
            ++i;
            bool closed = false;
            while (i < line.size()) {
                const char d = line[i++];
                if (d == '\\' && i < line.size()) {
                    tok.text.push_back(line[i++]);
                } else if (d == '"') {
                    closed = true;
                    break;
                } else {
                    tok.text.push_back(d);
                }
            }
            if (!closed) throw ParseError("parse_error", line_no, "unterminated string");
        } else {
            while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r' &&
                   line[i] != '#') {
                tok.text.push_back(line[i++]);
            }
        }
        tokens.push_back(std::move(tok));
    }
    return tokens;
}

std::string quote(std::string_view text) {
    std::string out = "\"";
    for (char c : text) {
        if (c == '"' || c == '\\') out.push_back('\\');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

Rule rule_from_tokens(const std::vector<Token>& tokens, std::size_t line_no) {
    const auto kind = rule_kind_from_string(tokens.front().text);
    if (!kind) {
        throw ParseError("parse_error", line_no, "unknown directive '" + tokens.front().text + "'");
    }
    const std::size_t n = arity(*kind);
    if (tokens.size() != n + 1) {
        throw ParseError("parse_error", line_no,
                         "'" + tokens.front().text + "' takes " + std::to_string(n) +
                             " relation id(s)");
    }
    std::vector<std::string> args;
    for (std::size_t i = 1; i < tokens.size(); ++i) {
        if (tokens[i].quoted || !is_valid_relation_id(tokens[i].text)) {
            throw ParseError("parse_error", line_no, "invalid relation id '" + tokens[i].text + "'");
        }
        args.push_back(tokens[i].text);
    }
    return Rule::make(*kind, std::move(args));
}

// Tarjan SCC over the subtype graph; returns components that contain a cycle.
std::vector<std::vector<std::string>> subtype_cycles(const RuleKB& kb) {
    std::map<std::string, std::vector<std::string>> edges;
    for (const Rule& rule : kb.rules()) {
        if (rule.kind == RuleKind::subtype) edges[rule.args[0]].push_back(rule.args[1]);
    }
    std::map<std::string, int> index, low;
    std::set<std::string> on_stack;
    std::vector<std::string> stack;
    std::vector<std::vector<std::string>> cycles;
    int counter = 0;

    std::function<void(const std::string&)> visit = [&](const std::string& v) {
        index[v] = low[v] = counter++;
        stack.push_back(v);
        on_stack.insert(v);
        for (const auto& w : edges[v]) {
            if (!index.contains(w)) {
                visit(w);
                low[v] = std::min(low[v], low[w]);
            } else if (on_stack.contains(w)) {
                low[v] = std::min(low[v], index[w]);
            }
        }
        if (low[v] != index[v]) return;
        std::vector<std::string> component;
        std::string w;
        do {
            w = stack.back();
            stack.pop_back();
            on_stack.erase(w);
            component.push_back(w);
        } while (w != v);
        const bool self_loop =
            component.size() == 1 &&
            std::ranges::find(edges[v], v) != edges[v].end();
        if (component.size() > 1 || self_loop) {
            std::ranges::sort(component);
            cycles.push_back(std::move(component));
        }
    };

    std::vector<std::string> nodes;
    for (const auto& [from, _] : edges) nodes.push_back(from);
    for (const auto& v : nodes) {
        if (!index.contains(v)) visit(v);
    }
    std::ranges::sort(cycles);
    return cycles;
}

} // namespace

std::string_view to_string(RuleKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

std::optional<RuleKind> rule_kind_from_string(std::string_view keyword) {
    for (std::size_t i = 0; i < std::size(kKindNames); ++i) {
        if (kKindNames[i] == keyword) return static_cast<RuleKind>(i);
    }
    return std::nullopt;
}

std::size_t arity(RuleKind kind) { return kArity[static_cast<std::size_t>(kind)]; }

bool is_valid_relation_id(std::string_view id) {
    return !id.empty() && std::ranges::all_of(id, [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    });
}

Rule Rule::make(RuleKind kind, std::vector<std::string> args, RuleOrigin origin) {
    if (args.size() != arity(kind)) {
        throw ValidationError(std::string(to_string(kind)) + " takes " +
                              std::to_string(arity(kind)) + " argument(s)");
    }
    for (const auto& a : args) {
        if (!is_valid_relation_id(a)) throw ValidationError("invalid relation id '" + a + "'");
    }
    if (kind == RuleKind::inverse || kind == RuleKind::incompatible ||
        kind == RuleKind::asymmetric) {
        std::ranges::sort(args);
    }
    return Rule{kind, std::move(args), origin};
}

Rule Rule::parse(std::string_view line) {
    const auto tokens = tokenize(line, 0);
    if (tokens.empty()) throw ParseError("parse_error", 0, "empty rule");
    return rule_from_tokens(tokens, 0);
}

bool Rule::mentions(std::string_view relation) const {
    return std::ranges::find(args, relation) != args.end();
}

std::string Rule::to_line() const {
    std::string out(to_string(kind));
    for (const auto& a : args) {
        out.push_back(' ');
        out += a;
    }
    return out;
}

const RelationType* RuleKB::find_relation(std::string_view id) const {
    const auto it = relations_.find(id);
    return it == relations_.end() ? nullptr : &it->second;
}

bool RuleKB::self_allowed(std::string_view id) const {
    const auto* r = find_relation(id);
    return r != nullptr && r->self_allowed;
}

std::string RuleKB::display(std::string_view id) const {
    if (const auto* r = find_relation(id); r != nullptr && !r->display.empty()) return r->display;
    std::string out(id);
    std::ranges::replace(out, '_', ' ');
    return out;
}

void RuleKB::insert_relation(RelationType relation) {
    if (!is_valid_relation_id(relation.id)) {
        throw ValidationError("invalid relation id '" + relation.id + "'");
    }
    if (relations_.contains(relation.id)) {
        throw ValidationError("duplicate relation '" + relation.id + "'", "duplicate_relation");
    }
    const std::string id = relation.id;
    relations_.emplace(id, std::move(relation));
}

void RuleKB::insert_rule(Rule rule) {
    for (const auto& a : rule.args) {
        if (!relations_.contains(a)) {
            throw ValidationError("unknown relation '" + a + "' in '" + rule.to_line() + "'",
                                  "unknown_relation");
        }
    }
    if (rules_.contains(rule)) {
        throw ValidationError("duplicate rule '" + rule.to_line() + "'", "duplicate_rule");
    }
    rules_.insert(std::move(rule));
}

void RuleKB::erase_relation(std::string_view id) {
    const auto it = relations_.find(id);
    if (it == relations_.end()) throw NotFound("unknown relation '" + std::string(id) + "'");
    std::erase_if(rules_, [&](const Rule& r) { return r.mentions(id); });
    relations_.erase(it);
}

void RuleKB::erase_rule(const Rule& rule) {
    if (rules_.erase(rule) == 0) throw NotFound("rule not in KB: '" + rule.to_line() + "'");
}

RuleKB load_kb(std::string_view source, RuleOrigin origin) {
    RuleKB kb;
    std::vector<std::pair<std::size_t, Rule>> pending;

    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= source.size()) {
        const std::size_t nl = source.find('\n', pos);
        const std::string_view line =
            source.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? source.size() + 1 : nl + 1;
        ++line_no;

        const auto tokens = tokenize(line, line_no);
        if (tokens.empty()) continue;
        if (tokens.front().quoted) throw ParseError("parse_error", line_no, "expected directive");

        if (tokens.front().text == "relation") {
            if (tokens.size() < 2 || tokens[1].quoted || !is_valid_relation_id(tokens[1].text)) {
                throw ParseError("parse_error", line_no, "relation needs a [a-z0-9_]+ id");
            }
            RelationType rel{tokens[1].text, {}, {}, false};
            for (std::size_t i = 2; i < tokens.size(); ++i) {
                const auto& key = tokens[i].text;
                if ((key == "display" || key == "notes") && !tokens[i].quoted) {
                    if (i + 1 >= tokens.size() || !tokens[i + 1].quoted) {
                        throw ParseError("parse_error", line_no, key + " needs a quoted string");
                    }
                    (key == "display" ? rel.display : rel.notes) = tokens[++i].text;
                } else if (key == "self" && !tokens[i].quoted) {
                    rel.self_allowed = true;
                } else {
                    throw ParseError("parse_error", line_no, "unexpected token '" + key + "'");
                }
            }
            if (kb.has_relation(rel.id)) {
                throw ParseError("duplicate_relation", line_no,
                                 "relation '" + rel.id + "' declared twice");
            }
            kb.insert_relation(std::move(rel));
            continue;
        }
        Rule rule = rule_from_tokens(tokens, line_no);
        rule.origin = origin;
        pending.emplace_back(line_no, std::move(rule));
    }

    for (auto& [at, rule] : pending) {
        for (const auto& a : rule.args) {
            if (!kb.has_relation(a)) {
                throw ParseError("unknown_relation", at, "unknown relation '" + a + "'");
            }
        }
        if (kb.rules().contains(rule)) {
            throw ParseError("duplicate_rule", at, "duplicate rule '" + rule.to_line() + "'");
        }
        kb.insert_rule(std::move(rule));
    }
    return kb;
}

std::string save_kb(const RuleKB& kb) {
    std::ostringstream out;
    for (const auto& [id, rel] : kb.relations()) {
        out << "relation " << id;
        if (!rel.display.empty()) out << " display " << quote(rel.display);
        if (!rel.notes.empty()) out << " notes " << quote(rel.notes);
        if (rel.self_allowed) out << " self";
        out << '\n';
    }
    for (const Rule& rule : kb.rules()) out << rule.to_line() << '\n';
    return out.str();
}

std::string_view builtin_kb_text() { return resources::starter_kb; }

const RuleKB& builtin_kb() {
    static const RuleKB kb = load_kb(resources::starter_kb, RuleOrigin::builtin);
    return kb;
}

std::vector<Diagnostic> validate_kb(const RuleKB& kb) {
    std::vector<Diagnostic> out;
    const auto& rules = kb.rules();

    for (const Rule& rule : rules) {
        const auto& a = rule.args;
        if (rule.kind == RuleKind::symmetric) {
            const Rule anti = Rule::asymmetric(a[0], a[0]);
            if (rules.contains(anti)) {
                out.push_back({Severity::error, {rule, anti},
                               a[0] + " is declared both symmetric and asymmetric"});
            }
        }
        if (rule.kind == RuleKind::incompatible && a[0] == a[1] &&
            rules.contains(Rule::symmetric(a[0]))) {
            for (const Rule& other : rules) {
                if (other.kind == RuleKind::compose && other.args[2] == a[0] &&
                    (other.args[0] == a[0] || other.args[1] == a[0])) {
                    out.push_back({Severity::error, {rule, Rule::symmetric(a[0]), other},
                                   a[0] + " is incompatible with itself yet symmetric and "
                                          "produced by composition from itself"});
                }
            }
        }
        if (rule.kind == RuleKind::compose) {
            const bool alone = std::ranges::none_of(rules, [&](const Rule& other) {
                return !(other == rule) && other.mentions(a[2]);
            });
            if (alone) {
                out.push_back({Severity::warning, {rule},
                               "composition output " + a[2] + " has no other rules"});
            }
        }
        if (rule.kind == RuleKind::exclusive && rules.contains(Rule::symmetric(a[0]))) {
            out.push_back({Severity::warning, {rule, Rule::symmetric(a[0])},
                           a[0] + " is both exclusive and symmetric"});
        }
    }

    for (const auto& cycle : subtype_cycles(kb)) {
        std::vector<Rule> involved;
        for (const Rule& rule : rules) {
            if (rule.kind == RuleKind::subtype &&
                std::ranges::binary_search(cycle, rule.args[0]) &&
                std::ranges::binary_search(cycle, rule.args[1])) {
                involved.push_back(rule);
            }
        }
        std::string names;
        for (const auto& c : cycle) names += (names.empty() ? "" : ", ") + c;
        out.push_back({Severity::error, std::move(involved), "subtype cycle among " + names});
    }
    return out;
}

bool has_hard_errors(const std::vector<Diagnostic>& diagnostics) {
    return std::ranges::any_of(diagnostics,
                               [](const Diagnostic& d) { return d.severity == Severity::error; });
}

std::vector<Rule> rules_about(const RuleKB& kb, std::string_view relation) {
    if (!kb.has_relation(relation)) {
        throw NotFound("unknown relation '" + std::string(relation) + "'");
    }
    std::vector<Rule> out;
    for (const Rule& rule : kb.rules()) {
        if (rule.mentions(relation)) out.push_back(rule);
    }
    return out;
}

RuleKB edit_kb(const RuleKB& kb, const KbChange& change) {
    RuleKB next = kb;
    switch (change.op) {
    case KbChange::Op::add_relation: next.insert_relation(change.relation); break;
    case KbChange::Op::remove_relation: next.erase_relation(change.relation.id); break;
    case KbChange::Op::add_rule: next.insert_rule(change.rule); break;
    case KbChange::Op::remove_rule: next.erase_rule(change.rule); break;
    }
    // Only errors the change introduces are fatal; a KB loaded with existing
    // errors can still be repaired one edit at a time.
    std::set<std::string> before;
    for (const auto& d : validate_kb(kb)) {
        if (d.severity == Severity::error) before.insert(d.message);
    }
    for (const auto& d : validate_kb(next)) {
        if (d.severity == Severity::error && !before.contains(d.message)) {
            throw ValidationError(d.message);
        }
    }
    next.set_version(kb.version() + 1);
    return next;
}

CompiledRules::CompiledRules(const RuleKB& kb) {
    for (const Rule& rule : kb.rules()) {
        const auto& a = rule.args;
        switch (rule.kind) {
        case RuleKind::symmetric: symmetric.insert(a[0]); break;
        case RuleKind::inverse:
            inverse.emplace(a[0], a[1]);
            if (a[0] != a[1]) inverse.emplace(a[1], a[0]);
            break;
        case RuleKind::compose:
            by_first.emplace(a[0], std::pair{a[1], a[2]});
            by_second.emplace(a[1], std::pair{a[0], a[2]});
            break;
        case RuleKind::subtype: supertypes.emplace(a[0], a[1]); break;
        default: break;
        }
    }
}

std::set<std::string> ancestors(const RuleKB& kb, std::string_view relation) {
    std::multimap<std::string, std::string, std::less<>> up;
    for (const Rule& rule : kb.rules()) {
        if (rule.kind == RuleKind::subtype) up.emplace(rule.args[0], rule.args[1]);
    }
    std::set<std::string> seen;
    std::vector<std::string> frontier{std::string(relation)};
    while (!frontier.empty()) {
        const std::string r = frontier.back();
        frontier.pop_back();
        const auto [lo, hi] = up.equal_range(r);
        for (auto it = lo; it != hi; ++it) {
            if (seen.insert(it->second).second) frontier.push_back(it->second);
        }
    }
    seen.erase(std::string(relation));
    return seen;
}

} // namespace relgraph
