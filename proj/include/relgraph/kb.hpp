#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace relgraph {

/// Rule kinds in their canonical sort order: the four completion patterns
/// followed by the three conflict patterns.
enum class RuleKind : std::uint8_t {
    symmetric,
    inverse,
    compose,
    subtype,
    incompatible,
    asymmetric,
    exclusive,
};

enum class RuleOrigin : std::uint8_t { builtin, user };

std::string_view to_string(RuleKind kind);
std::optional<RuleKind> rule_kind_from_string(std::string_view keyword);
std::size_t arity(RuleKind kind);

struct RelationType {
    std::string id;
    std::string display;
    std::string notes;
    bool self_allowed = false;

    friend bool operator==(const RelationType&, const RelationType&) = default;
};

bool is_valid_relation_id(std::string_view id);

/// A typed logic rule over relation ids.
///
/// Rules are kept in canonical form. Inversion, Incompatible and Asymmetric
/// are symmetric in their two arguments (r1(x,y) => r2(y,x) entails
/// r2(y,x) => r1(x,y); the two negative patterns are contrapositives of
/// themselves), so their arguments are stored sorted and a rule is written
/// once no matter which direction the author chose.
///
/// Equality and ordering ignore `origin`.
struct Rule {
    RuleKind kind = RuleKind::symmetric;
    std::vector<std::string> args;
    RuleOrigin origin = RuleOrigin::user;

    static Rule make(RuleKind kind, std::vector<std::string> args,
                     RuleOrigin origin = RuleOrigin::user);
    static Rule symmetric(std::string r) { return make(RuleKind::symmetric, {std::move(r)}); }
    static Rule inverse(std::string a, std::string b) {
        return make(RuleKind::inverse, {std::move(a), std::move(b)});
    }
    static Rule compose(std::string a, std::string b, std::string c) {
        return make(RuleKind::compose, {std::move(a), std::move(b), std::move(c)});
    }
    static Rule subtype(std::string sub, std::string super) {
        return make(RuleKind::subtype, {std::move(sub), std::move(super)});
    }
    static Rule incompatible(std::string a, std::string b) {
        return make(RuleKind::incompatible, {std::move(a), std::move(b)});
    }
    static Rule asymmetric(std::string a, std::string b) {
        return make(RuleKind::asymmetric, {std::move(a), std::move(b)});
    }
    static Rule exclusive(std::string r) { return make(RuleKind::exclusive, {std::move(r)}); }

    /// Parses a single KB directive line such as "compose a b c".
    static Rule parse(std::string_view line);

    bool is_completion() const noexcept { return kind <= RuleKind::subtype; }
    bool is_conflict() const noexcept { return !is_completion(); }
    bool mentions(std::string_view relation) const;

    /// The KB-format directive, e.g. "inverse child_of parent_of".
    std::string to_line() const;

    friend bool operator==(const Rule& a, const Rule& b) {
        return a.kind == b.kind && a.args == b.args;
    }
    friend std::strong_ordering operator<=>(const Rule& a, const Rule& b) {
        if (auto c = a.kind <=> b.kind; c != 0) return c;
        return a.args <=> b.args;
    }
};

/// An immutable-by-convention snapshot of the relation inventory and rules.
/// `insert_*` are used while building; edits to a published KB go through
/// `edit_kb`, which returns a new snapshot with a bumped version.
class RuleKB {
public:
    const std::map<std::string, RelationType, std::less<>>& relations() const noexcept {
        return relations_;
    }
    const std::set<Rule>& rules() const noexcept { return rules_; }
    std::uint64_t version() const noexcept { return version_; }

    bool has_relation(std::string_view id) const { return relations_.contains(id); }
    const RelationType* find_relation(std::string_view id) const;
    bool self_allowed(std::string_view id) const;

    /// Human label; falls back to the id with underscores as spaces.
    std::string display(std::string_view id) const;

    void insert_relation(RelationType relation);
    void insert_rule(Rule rule);
    /// Removes the relation and every rule mentioning it.
    void erase_relation(std::string_view id);
    void erase_rule(const Rule& rule);
    void set_version(std::uint64_t version) noexcept { version_ = version; }

    friend bool operator==(const RuleKB& a, const RuleKB& b) {
        return a.relations_ == b.relations_ && a.rules_ == b.rules_;
    }

private:
    std::map<std::string, RelationType, std::less<>> relations_;
    std::set<Rule> rules_;
    std::uint64_t version_ = 1;
};

/// Parses the line-based KB format. Relations may be declared after the rules
/// that use them. Throws ParseError (codes: parse_error, unknown_relation,
/// duplicate_rule, duplicate_relation) with the offending line number.
RuleKB load_kb(std::string_view source, RuleOrigin origin = RuleOrigin::user);

/// Relations sorted by id, then rules in canonical order.
std::string save_kb(const RuleKB& kb);

/// The starter kinship/social KB shipped with the library.
const RuleKB& builtin_kb();
std::string_view builtin_kb_text();

enum class Severity : std::uint8_t { error, warning };

struct Diagnostic {
    Severity severity = Severity::error;
    std::vector<Rule> rules;
    std::string message;
};

std::vector<Diagnostic> validate_kb(const RuleKB& kb);
bool has_hard_errors(const std::vector<Diagnostic>& diagnostics);

/// Every rule mentioning `relation`, in (kind, args) order. Throws NotFound
/// for an unknown relation.
std::vector<Rule> rules_about(const RuleKB& kb, std::string_view relation);

struct KbChange {
    enum class Op : std::uint8_t { add_relation, remove_relation, add_rule, remove_rule };
    Op op = Op::add_rule;
    RelationType relation;
    Rule rule;

    static KbChange add(RelationType r) { return {Op::add_relation, std::move(r), {}}; }
    static KbChange remove(std::string relation_id) {
        return {Op::remove_relation, RelationType{std::move(relation_id), {}, {}, false}, {}};
    }
    static KbChange add(Rule r) { return {Op::add_rule, {}, std::move(r)}; }
    static KbChange remove(Rule r) { return {Op::remove_rule, {}, std::move(r)}; }
};

/// Applies one change and returns the new snapshot with version + 1. A change
/// that would introduce a hard validation error throws ValidationError and
/// leaves `kb` untouched.
RuleKB edit_kb(const RuleKB& kb, const KbChange& change);

/// Precomputed lookup tables for the completion rules of one KB snapshot.
struct CompiledRules {
    std::set<std::string, std::less<>> symmetric;
    std::multimap<std::string, std::string, std::less<>> inverse;     // r -> partner, both ways
    std::multimap<std::string, std::string, std::less<>> supertypes;  // sub -> super
    // compose(r1, r2, r3): keyed by r1 -> (r2, r3) and by r2 -> (r1, r3)
    std::multimap<std::string, std::pair<std::string, std::string>, std::less<>> by_first;
    std::multimap<std::string, std::pair<std::string, std::string>, std::less<>> by_second;

    explicit CompiledRules(const RuleKB& kb);
};

/// Transitive supertypes of `relation` (excluding itself).
std::set<std::string> ancestors(const RuleKB& kb, std::string_view relation);

} // namespace relgraph
