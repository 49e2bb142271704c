#include "relgraph/engine.hpp"
#include "relgraph/error.hpp"
#include "relgraph/graph.hpp"
#include "relgraph/graph_json.hpp"

#include "support.hpp"

#include <doctest.h>

using namespace relgraph;
using relgraph::testing::empty_graph;

namespace {

const RuleKB& kin() { return builtin_kb(); }

Graph three_people() {
    Graph g;
    g.doc_id = "d";
    add_entity(g, {"Ann", {"Annie"}, {{0, 3}}, EntityStatus::confirmed, 0});
    add_entity(g, {"Ben", {}, {{10, 13}}, EntityStatus::confirmed, 0});
    add_entity(g, {"Cal", {}, {}, EntityStatus::suggested, 0});
    return g;
}

} // namespace

TEST_CASE("triple keys round trip through strings") {
    const TripleKey k{"e1", "father_of", "e2"};
    CHECK(k.str() == "e1~father_of~e2");
    CHECK(TripleKey::parse(k.str()) == k);
    CHECK_THROWS_AS(TripleKey::parse("e1~father_of"), ParseError);
    CHECK_THROWS_AS(TripleKey::parse("e1~~e2"), ParseError);
}

TEST_CASE("entities get sequential ids and unique aliases") {
    Graph g = three_people();
    CHECK(g.entities.size() == 3);
    CHECK(g.find_entity("e1")->aliases == std::set<std::string>{"Ann", "Annie"});
    CHECK(g.entity_by_alias("Annie")->id == "e1");
    CHECK_THROWS_AS(add_entity(g, {"Annie", {}, {}, EntityStatus::suggested, 0}), ValidationError);
    CHECK_THROWS_AS(add_entity(g, {"  ", {}, {}, EntityStatus::suggested, 0}), ValidationError);
    check_invariants(g, &kin());
}

TEST_CASE("update_entity keeps the canonical name among aliases") {
    Graph g = three_people();
    update_entity(g, "e3", {EntityStatus::confirmed, std::string("Calvin"), std::nullopt});
    const Entity* e = g.find_entity("e3");
    CHECK(e->canonical == "Calvin");
    CHECK(e->aliases.contains("Calvin"));
    CHECK(e->status == EntityStatus::confirmed);
    CHECK_THROWS_AS(update_entity(g, "e3", {std::nullopt, std::nullopt, std::set<std::string>{"X"}}),
                    ValidationError);
    CHECK_THROWS_AS(update_entity(g, "e9", {}), NotFound);
}

TEST_CASE("upsert precedence and tombstones") {
    Graph g = three_people();
    const TripleKey k{"e1", "father_of", "e2"};
    CHECK(upsert_triple(g, kin(), k, TripleStatus::suggested, Provenance::extracted(3)) ==
          UpsertOutcome::inserted);
    // manual beats extracted and sets the status
    CHECK(upsert_triple(g, kin(), k, TripleStatus::confirmed, Provenance::manual()) ==
          UpsertOutcome::updated);
    CHECK(g.find_triple(k)->status == TripleStatus::confirmed);
    CHECK(upsert_triple(g, kin(), k, TripleStatus::suggested, Provenance::extracted(5)) ==
          UpsertOutcome::unchanged);
    CHECK(g.find_triple(k)->provenance.kind == Provenance::Kind::manual);

    set_status(g, k, TripleStatus::rejected);
    CHECK(upsert_triple(g, kin(), k, TripleStatus::suggested, Provenance::extracted(5)) ==
          UpsertOutcome::kept_tombstone);
    CHECK(upsert_triple(g, kin(), k, TripleStatus::confirmed, Provenance::manual()) ==
          UpsertOutcome::updated);
    CHECK(g.find_triple(k)->status == TripleStatus::confirmed);

    CHECK_THROWS_AS(upsert_triple(g, kin(), {"e1", "nope", "e2"}, TripleStatus::confirmed,
                                  Provenance::manual()),
                    ValidationError);
    CHECK_THROWS_AS(upsert_triple(g, kin(), {"e1", "father_of", "e1"}, TripleStatus::confirmed,
                                  Provenance::manual()),
                    ValidationError);
    CHECK_THROWS_AS(upsert_triple(g, kin(), {"e1", "father_of", "e7"}, TripleStatus::confirmed,
                                  Provenance::manual()),
                    NotFound);
}

TEST_CASE("removing a premise retracts dependent inferences") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "father_of", "e2"}, TripleStatus::confirmed, Provenance::manual());
    g = close(g, kin()).graph;
    REQUIRE(g.find_triple({"e1", "parent_of", "e2"}) != nullptr);
    REQUIRE(g.find_triple({"e2", "child_of", "e1"}) != nullptr);

    const auto gone = remove_triple(g, kin(), {"e1", "father_of", "e2"});
    CHECK(gone.size() == 2);
    CHECK(g.triples.empty());
}

TEST_CASE("a human-ruled inference survives as manual when unsupported") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "father_of", "e2"}, TripleStatus::confirmed, Provenance::manual());
    g = close(g, kin()).graph;
    set_status(g, {"e2", "child_of", "e1"}, TripleStatus::confirmed);
    remove_triple(g, kin(), {"e1", "father_of", "e2"});
    const Triple* t = g.find_triple({"e2", "child_of", "e1"});
    REQUIRE(t != nullptr);
    CHECK(t->provenance.kind == Provenance::Kind::manual);
    CHECK(t->status == TripleStatus::confirmed);
}

TEST_CASE("rejecting a premise retracts, and rules removed from the KB retract") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "wife_of", "e2"}, TripleStatus::suggested, Provenance::extracted(3));
    g = close(g, kin()).graph;
    CHECK(g.find_triple({"e2", "husband_of", "e1"}) != nullptr);

    RuleKB smaller = edit_kb(kin(), KbChange::remove(Rule::inverse("husband_of", "wife_of")));
    Graph h = g;
    const auto gone = retract_unsupported(h, smaller);
    CHECK(std::ranges::find(gone, TripleKey{"e2", "husband_of", "e1"}) != gone.end());
    CHECK(h.find_triple({"e1", "spouse_of", "e2"}) != nullptr);

    set_status(g, {"e1", "wife_of", "e2"}, TripleStatus::rejected);
    retract_unsupported(g, kin());
    CHECK(g.triples.size() == 1);
}

TEST_CASE("remove_entity drops its triples and remembers its names") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "friend_of", "e3"}, TripleStatus::confirmed, Provenance::manual());
    remove_entity(g, kin(), "e1");
    CHECK(g.find_entity("e1") == nullptr);
    CHECK(g.triples.empty());
    CHECK(g.rejected_names == std::set<std::string>{"Ann", "Annie"});
}

TEST_CASE("merge rewrites, collapses and drops self loops") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "friend_of", "e3"}, TripleStatus::suggested, Provenance::extracted(2));
    upsert_triple(g, kin(), {"e2", "friend_of", "e3"}, TripleStatus::confirmed, Provenance::manual());
    upsert_triple(g, kin(), {"e1", "enemy_of", "e2"}, TripleStatus::confirmed, Provenance::manual());
    const auto report = merge_entities(g, kin(), "e1", "e2");
    CHECK(g.find_entity("e2") == nullptr);
    CHECK(g.find_entity("e1")->aliases.contains("Ben"));
    CHECK(g.find_entity("e1")->mentions.size() == 2);
    CHECK(report.dropped_self_loops == std::vector<TripleKey>{{"e1", "enemy_of", "e1"}});
    CHECK(report.collapsed == std::vector<TripleKey>{{"e1", "friend_of", "e3"}});
    CHECK(g.find_triple({"e1", "friend_of", "e3"})->status == TripleStatus::confirmed);
    check_invariants(g, &kin());
}

TEST_CASE("split partitions aliases, mentions and triples") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "friend_of", "e2"}, TripleStatus::confirmed, Provenance::manual());
    upsert_triple(g, kin(), {"e3", "enemy_of", "e1"}, TripleStatus::confirmed, Provenance::manual());
    const std::vector<SplitPart> parts{{"Ann", {}, {{0, 3}}}, {"Annie", {}, {}}};
    const std::map<TripleKey, std::size_t> assignment{{{"e1", "friend_of", "e2"}, 0},
                                                      {{"e3", "enemy_of", "e1"}, 1}};
    const auto ids = split_entity(g, kin(), "e1", parts, assignment);
    REQUIRE(ids == std::vector<std::string>{"e4", "e5"});
    CHECK(g.find_triple({"e4", "friend_of", "e2"}) != nullptr);
    CHECK(g.find_triple({"e3", "enemy_of", "e5"}) != nullptr);
    CHECK(g.find_entity("e4")->mentions.size() == 1);
    check_invariants(g, &kin());

    Graph h = three_people();
    upsert_triple(h, kin(), {"e1", "friend_of", "e2"}, TripleStatus::confirmed, Provenance::manual());
    CHECK_THROWS_AS(split_entity(h, kin(), "e1", parts, {}), ValidationError);
    const std::vector<SplitPart> overlap{{"Ann", {"Annie"}, {{0, 3}}}, {"Annie", {}, {}}};
    CHECK_THROWS_AS(split_entity(h, kin(), "e1", overlap, {{{"e1", "friend_of", "e2"}, 0}}),
                    ValidationError);
}

TEST_CASE("query filters by bound fields") {
    Graph g = empty_graph(3);
    relgraph::testing::put(g, {"e1", "friend_of", "e2"});
    relgraph::testing::put(g, {"e1", "enemy_of", "e3"}, TripleStatus::suggested);
    relgraph::testing::put(g, {"e2", "friend_of", "e3"});
    CHECK(query(g, {std::string("e1"), {}, {}, {}}).size() == 2);
    CHECK(query(g, {{}, std::string("friend_of"), {}, {}}).size() == 2);
    CHECK(query(g, {{}, {}, {}, TripleStatus::suggested}).size() == 1);
    CHECK(query(g, {std::string("e2"), std::string("friend_of"), std::string("e3"), {}}).size() == 1);
}

TEST_CASE("graph JSON round trip") {
    Graph g = three_people();
    upsert_triple(g, kin(), {"e1", "father_of", "e2"}, TripleStatus::confirmed, Provenance::manual());
    upsert_triple(g, kin(), {"e3", "friend_of", "e2"}, TripleStatus::suggested, Provenance::extracted(4));
    g = close(g, kin()).graph;
    g.rejected_names.insert("Zed");
    const Json j = to_json(g);
    CHECK(graph_from_json(j, &kin()) == g);
    CHECK(graph_from_json(Json::parse(j.dump()), &kin()) == g);

    Json broken = j;
    broken["triples"][0]["src"] = "e42";
    CHECK_THROWS_AS(graph_from_json(broken, &kin()), Error);
}
