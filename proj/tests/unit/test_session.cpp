#include "relgraph/error.hpp"
#include "relgraph/session.hpp"

#include "support.hpp"

#include <doctest.h>

#include <filesystem>
#include <fstream>

using namespace relgraph;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) {
        fs::remove_all(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

SessionState created() {
    SessionState s;
    apply_event(s, Json{{"type", "create"},
                        {"id", "s1"},
                        {"doc", {{"id", "d"}, {"text", "Ann and Ben."}}},
                        {"kb_text", std::string(builtin_kb_text())}});
    return s;
}

} // namespace

TEST_CASE("events drive a closed, conflict-complete state") {
    SessionState s = created();
    CHECK(s.revision == 1);
    const Json a = apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ann"}});
    CHECK(a["entity_id"] == "e1");
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ben"}});
    const Json t = apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "father_of"}, {"dst", "e2"}});
    CHECK(s.revision == 4);
    CHECK(t["added_inferences"].size() == 2);
    CHECK(s.graph.keys() == close(s.graph, s.kb).graph.keys());

    const Json c = apply_event(s, Json{{"type", "triple_add"}, {"src", "e2"}, {"rel", "father_of"}, {"dst", "e1"}});
    CHECK(c["new_conflicts"].size() >= 1);
    CHECK(s.conflicts == detect_conflicts(s.graph, s.kb));

    const Json served = served_graph(s);
    bool saw_conflicted = false;
    for (const auto& tr : served["triples"]) {
        if (tr["status"] == "conflicted") {
            saw_conflicted = true;
            CHECK(tr["color"] == "red");
            CHECK(tr["conflicts"].size() >= 1);
        }
    }
    CHECK(saw_conflicted);
    CHECK(served["entities"][0]["color"] == "green");
}

TEST_CASE("failed events leave the state untouched") {
    SessionState s = created();
    const SessionState before = s;
    CHECK_THROWS_AS(apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "father_of"}, {"dst", "e2"}}),
                    NotFound);
    CHECK_THROWS_AS(apply_event(s, Json{{"type", "explode"}}), ValidationError);
    CHECK_THROWS_AS(apply_event(s, Json{{"type", "kb_replace"}, {"kb_text", "relation a\nsymmetric a\nasymmetric a a\n"}}),
                    ValidationError);
    CHECK(s.revision == before.revision);
    CHECK(s.graph == before.graph);
    SessionState fresh;
    CHECK_THROWS_AS(apply_event(fresh, Json{{"type", "entity_add"}, {"canonical", "X"}}), ValidationError);
}

TEST_CASE("kb_replace refuses to drop relations in use") {
    SessionState s = created();
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ann"}});
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ben"}});
    apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "friend_of"}, {"dst", "e2"}});
    try {
        apply_event(s, Json{{"type", "kb_replace"}, {"kb_text", "relation enemy_of\n"}});
        FAIL("expected relation_in_use");
    } catch (const ValidationError& e) {
        CHECK(e.code() == "relation_in_use");
    }
    const Json r = apply_event(s, Json{{"type", "kb_replace"}, {"kb_text", "relation friend_of\n"}});
    CHECK(r["kb_version"] == 2);
    // without the symmetric rule the mirrored inference is retracted
    CHECK(s.graph.triples.size() == 1);
}

TEST_CASE("triple status edits and resolution events") {
    SessionState s = created();
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ann"}});
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ben"}});
    apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "friend_of"}, {"dst", "e2"}});
    apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "enemy_of"}, {"dst", "e2"}});
    CHECK_THROWS_AS(apply_event(s, Json{{"type", "triple_status"}, {"key", "e1~friend_of~e2"}, {"status", "conflicted"}}),
                    ValidationError);
    apply_event(s, Json{{"type", "triple_status"}, {"key", "e1~enemy_of~e2"}, {"status", "rejected"}});
    CHECK(s.graph.find_triple({"e2", "enemy_of", "e1"}) == nullptr);

    apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "husband_of"}, {"dst", "e2"}});
    apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "sister_of"}, {"dst", "e2"}});
    REQUIRE(s.conflicts.size() >= 1);
    const std::string cid = s.conflicts[0].id();
    apply_event(s, Json{{"type", "resolution_proposed"}, {"conflict_id", cid}, {"resolution", {{"label", "A"}}}});
    CHECK(served_conflicts(s)[0]["proposal"]["label"] == "A");
    const auto& off = s.conflicts[0].offenders;
    apply_event(s, Json{{"type", "resolution_choice"},
                        {"conflict_id", cid},
                        {"label", "C"},
                        {"kept", Json::array()},
                        {"dropped", Json::array({to_json(off[0]), to_json(off[1])})}});
    CHECK(s.resolved.size() == 1);
    CHECK(s.proposals.empty());
    CHECK(std::ranges::none_of(s.conflicts, [&](const Conflict& c) { return c.id() == cid; }));
    CHECK_THROWS_AS(apply_event(s, Json{{"type", "resolution_proposed"}, {"conflict_id", cid}, {"resolution", {}}}),
                    NotFound);
}

TEST_CASE("snapshot round trip") {
    SessionState s = created();
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ann"}});
    apply_event(s, Json{{"type", "entity_add"}, {"canonical", "Ben"}});
    apply_event(s, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "father_of"}, {"dst", "e2"}});
    const SessionState back = state_from_snapshot(Json::parse(snapshot_json(s).dump()));
    CHECK(back.graph == s.graph);
    CHECK(back.kb == s.kb);
    CHECK(back.revision == s.revision);
    CHECK(served_graph(back).dump() == served_graph(s).dump());
}

TEST_CASE("store persists, snapshots and replays") {
    TempDir tmp("relgraph_store_test");
    std::string id;
    Json exported;
    {
        SessionStore store(tmp.path, 3);
        id = store.create({"", "Ann and Ben.", "t"}, std::string(builtin_kb_text()));
        store.mutate(id, Json{{"type", "entity_add"}, {"canonical", "Ann"}});
        store.mutate(id, Json{{"type", "entity_add"}, {"canonical", "Ben"}});
        store.mutate(id, Json{{"type", "triple_add"}, {"src", "e1"}, {"rel", "father_of"}, {"dst", "e2"}});
        store.mutate(id, Json{{"type", "entity_update"}, {"id", "e2"}, {"status", "suggested"}});
        try {
            store.mutate(id, Json{{"type", "entity_delete"}, {"id", "e1"}}, 1);
            FAIL("expected a stale revision");
        } catch (const Error& e) {
            CHECK(e.code() == "stale_revision");
        }
        CHECK(store.get(id)->revision == 5);
        exported = to_json(store.get(id)->graph);
    }
    std::ifstream log(tmp.path / id / "events.jsonl");
    std::string line;
    int snapshots = 0;
    while (std::getline(log, line)) snapshots += Json::parse(line).contains("snapshot") ? 1 : 0;
    CHECK(snapshots == 1);

    // a torn trailing line is ignored
    std::ofstream(tmp.path / id / "events.jsonl", std::ios::app) << "{\"rev\": 6, \"ev";
    SessionStore again(tmp.path, 3);
    CHECK(again.load_all() == 1);
    CHECK(to_json(again.get(id)->graph) == exported);
    CHECK(again.get(id)->revision == 5);
    CHECK_THROWS_AS(again.get("nope"), NotFound);
}

TEST_CASE("wait_newer times out or returns the newer state") {
    TempDir tmp("relgraph_wait_test");
    SessionStore store(tmp.path);
    const std::string id = store.create({"", "text", ""}, std::string(builtin_kb_text()));
    CHECK(store.wait_newer(id, 1, std::chrono::milliseconds(20)) == nullptr);
    std::thread t([&] { store.mutate(id, Json{{"type", "entity_add"}, {"canonical", "Ann"}}); });
    const auto s = store.wait_newer(id, 1, std::chrono::seconds(5));
    t.join();
    REQUIRE(s != nullptr);
    CHECK(s->revision == 2);
}

TEST_CASE("evidence index is cached in a sidecar") {
    TempDir tmp("relgraph_index_test");
    SessionStore store(tmp.path);
    const std::string id = store.create({"", "Mary married Robert. Scott sailed.", ""}, std::string(builtin_kb_text()));
    HashEmbedder emb(32);
    const auto a = store.index(id, emb, 10, 2);
    CHECK(fs::exists(tmp.path / id / "index.bin"));
    SessionStore other(tmp.path);
    other.load_all();
    const auto b = other.index(id, emb, 10, 2);
    REQUIRE(a->chunks().size() == b->chunks().size());
    CHECK(a->chunks().back().vector == b->chunks().back().vector);
    CHECK(other.index(id, emb, 20, 2)->chunks().size() != a->chunks().size());
}
