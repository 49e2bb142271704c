#include "relgraph/error.hpp"
#include "relgraph/retrieval.hpp"
#include "relgraph/unicode.hpp"

#include "support.hpp"

#include <doctest.h>

#include <cmath>
#include <filesystem>

using namespace relgraph;
namespace rt = relgraph::testing;

TEST_CASE("hash embedder gives deterministic unit vectors") {
    HashEmbedder e(64);
    const auto v = e.embed({"Mary married Robert", "mary MARRIED robert!", ""});
    double sq = 0;
    for (double x : v[0]) sq += x * x;
    CHECK(std::abs(sq - 1.0) < 1e-12);
    CHECK(v[0] == v[1]);
    CHECK(v[2][0] == 1.0);
    CHECK_THROWS_AS(HashEmbedder(0), ValidationError);
}

TEST_CASE("chunk spans overlap and cover") {
    CHECK(chunk_spans(10, 4, 1) == std::vector<MentionSpan>{{0, 4}, {3, 7}, {6, 10}});
    CHECK(chunk_spans(3, 4, 1) == std::vector<MentionSpan>{{0, 3}});
    CHECK(chunk_spans(0, 4, 1).empty());
    CHECK_THROWS_AS(chunk_spans(10, 4, 4), ValidationError);
}

TEST_CASE("index build, top_k and sidecar round trip") {
    const Document doc{"d", "The harbour was cold. Mary kept the accounts. Robert sold rope and nets. "
                            "Mary married Robert long ago.", ""};
    HashEmbedder emb(128);
    const auto idx = EvidenceIndex::build(doc, 30, 10, emb);
    std::string rebuilt;
    std::size_t covered = 0;
    for (const auto& c : idx.chunks()) {
        CHECK(c.text == std::string(unicode::ScalarIndex(doc.text).slice(c.span.start, c.span.end)));
        const unicode::ScalarIndex piece(c.text);
        rebuilt += piece.slice(covered - c.span.start, piece.size());
        covered = c.span.end;
    }
    CHECK(rebuilt == doc.text);

    const auto hits = retrieve(idx, "Mary married Robert", 2, emb);
    REQUIRE(hits.size() == 2);
    CHECK(hits[0].score >= hits[1].score);
    CHECK(hits[0].text.find("married") != std::string::npos);

    const auto path = (std::filesystem::temp_directory_path() / "relgraph_test_index.bin").string();
    idx.save(path);
    const auto back = EvidenceIndex::load(path, doc);
    REQUIRE(back.chunks().size() == idx.chunks().size());
    for (std::size_t i = 0; i < back.chunks().size(); ++i) {
        CHECK(back.chunks()[i].vector == idx.chunks()[i].vector);
        CHECK(back.chunks()[i].text == idx.chunks()[i].text);
    }
    CHECK_THROWS_AS(EvidenceIndex::load(path, Document{"d", "short", ""}), ParseError);
    std::filesystem::remove(path);
    CHECK_THROWS_AS(EvidenceIndex::load(path, doc), NotFound);
}

TEST_CASE("top_k tie rule prefers earlier spans") {
    std::vector<EvidenceChunk> chunks;
    for (std::size_t i = 0; i < 5; ++i) {
        chunks.push_back({"d", {10 * (5 - i), 10 * (5 - i) + 5}, "", {i == 2 ? 0.0 : 1.0, i == 2 ? 1.0 : 0.0}});
    }
    const auto idx = EvidenceIndex::from_chunks(chunks);
    const auto top = idx.top_k({1.0, 0.0}, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].first == 4);
    CHECK(top[1].first == 3);
    CHECK(top[2].first == 1);
    CHECK(idx.top_k({1.0, 0.0}, 99).size() == 5);
    CHECK_THROWS_AS(idx.top_k({1.0}, 1), ValidationError);
}

namespace {

Graph family() {
    Graph g = rt::empty_graph(4);
    g.entities["e1"].canonical = "Andrew";
    g.entities["e1"].aliases = {"Andrew"};
    g.entities["e2"].canonical = "Mary";
    g.entities["e2"].aliases = {"Mary"};
    g.entities["e3"].canonical = "Robert";
    g.entities["e3"].aliases = {"Robert"};
    g.entities["e4"].canonical = "Scott";
    g.entities["e4"].aliases = {"Scott"};
    return g;
}

} // namespace

TEST_CASE("prompts for two-offender conflicts") {
    const Graph g = family();
    const Conflict c{Rule::incompatible("child_of", "father_of"),
                     {{"e4", "child_of", "e1"}, {"e4", "father_of", "e1"}}, ConflictState::open, {}, {}};
    CHECK(render_query(c, g, builtin_kb()) == "Scott child of Andrew. Scott father of Andrew.");
    const auto p = build_resolution_prompt(c, g, builtin_kb(), {});
    CHECK(p.low_confidence);
    REQUIRE(p.options.size() == 3);
    CHECK(p.options[1].kept == std::vector<TripleKey>{{"e4", "father_of", "e1"}});
    CHECK(p.options[2].kept.empty());
    CHECK(p.text.find("2. Scott is the father of Andrew.") != std::string::npos);
    CHECK(p.text.find("(no evidence found)") != std::string::npos);
}

TEST_CASE("prompts for exclusive conflicts") {
    const Graph g = family();
    const Conflict c{Rule::exclusive("wife_of"),
                     {{"e2", "wife_of", "e1"}, {"e2", "wife_of", "e3"}, {"e2", "wife_of", "e4"}},
                     ConflictState::open, {}, {}};
    const auto p = build_resolution_prompt(c, g, builtin_kb(), {{{0, 4}, "Mary", 0.5}});
    CHECK_FALSE(p.low_confidence);
    REQUIRE(p.options.size() == 4);
    CHECK(p.options[3].label == "D");
    CHECK(p.options[3].dropped.size() == 3);
    CHECK(p.options[0].dropped.size() == 2);
    CHECK(p.text.find("[0-4] Mary") != std::string::npos);
}

TEST_CASE("answers parse to the first standalone label") {
    const std::vector<std::string> labels{"A", "B", "C"};
    CHECK(parse_answer("B", labels) == "B");
    CHECK(parse_answer("Answer: (C).", labels) == "C");
    CHECK(parse_answer("Both A and B", labels) == "A");
    CHECK_FALSE(parse_answer("Absolutely", labels));
    CHECK_FALSE(parse_answer("", labels));
}

TEST_CASE("resolve_conflict never throws and apply_resolution retracts") {
    const RuleKB& kb = builtin_kb();
    Graph g = family();
    rt::put(g, {"e4", "child_of", "e1"}, TripleStatus::suggested);
    rt::put(g, {"e4", "father_of", "e1"}, TripleStatus::suggested);
    g = close(g, kb).graph;
    const auto cs = detect_conflicts(g, kb);
    const auto& inc = *std::ranges::find(cs, RuleKind::incompatible, [](const Conflict& c) { return c.rule.kind; });
    const auto prompt = build_resolution_prompt(inc, g, kb, {});

    ScriptedProvider bad(std::vector<Json>{Json("no idea")});
    auto r = resolve_conflict(prompt, bad);
    CHECK_FALSE(r.label);
    CHECK(r.error == "unparseable answer");
    ScriptedProvider down(std::vector<Json>{Json{{"error", "offline"}}});
    r = resolve_conflict(prompt, down);
    CHECK_FALSE(r.label);
    CHECK_FALSE(r.error.empty());
    CHECK_THROWS_AS(apply_resolution(g, kb, r), ValidationError);

    ScriptedProvider good(std::vector<Json>{Json("B")});
    r = resolve_conflict(prompt, good);
    REQUIRE(r.label == "B");
    apply_resolution(g, kb, r);
    CHECK(g.find_triple({"e4", "father_of", "e1"})->status == TripleStatus::confirmed);
    CHECK(g.find_triple({"e4", "child_of", "e1"})->status == TripleStatus::rejected);
    CHECK(g.find_triple({"e1", "parent_of", "e4"}) == nullptr);
    CHECK_THROWS_AS(choose_option(prompt, "Z"), ValidationError);
}
