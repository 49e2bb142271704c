import pytest

import relgraph


def graph(triples, n=3):
    return {
        "doc_id": "d",
        "entities": [
            {"id": f"e{i}", "canonical": f"P{i}", "status": "confirmed"} for i in range(1, n + 1)
        ],
        "triples": [
            {"src": s, "rel": r, "dst": d, "status": "confirmed", "provenance": {"kind": "manual"}}
            for s, r, d in triples
        ],
    }


def keys(g):
    return {(t["src"], t["rel"], t["dst"]) for t in g["triples"]}


def test_builtin_kb_is_valid():
    report = relgraph.validate_kb(relgraph.builtin_kb())
    assert report["rules"] > 0
    assert not [d for d in report["diagnostics"] if d["severity"] == "error"]


def test_close_adds_inverse():
    out = relgraph.close(graph([("e1", "parent_of", "e2")]))
    assert ("e2", "child_of", "e1") in keys(out["graph"])
    assert out["derivations"]


def test_conflicts_found_after_closure():
    closed = relgraph.close(graph([("e1", "child_of", "e2"), ("e1", "father_of", "e2")]))["graph"]
    kinds = {c["kind"] for c in relgraph.detect_conflicts(closed)}
    assert "incompatible" in kinds


def test_plan_and_apply_round_trip():
    start = graph([("e1", "parent_of", "e2")])
    target = relgraph.close(graph([("e1", "parent_of", "e2"), ("e2", "parent_of", "e3")]))["graph"]
    plan = relgraph.plan_completion(start, target)
    result = relgraph.apply_ops(start, plan)
    assert result["error"] is None
    assert keys(result["graph"]) == keys(target)


def test_scores():
    r = relgraph.score_triples([("a", "r", "b"), ("a", "r", "c")], [("a", "r", "b")])
    assert r["precision"] == pytest.approx(0.5)
    assert r["recall"] == pytest.approx(1.0)


def test_consensus_and_chunks():
    assert relgraph.consensus([{"a", "b"}, {"a"}], 2) == [("a", 2)]
    spans = relgraph.chunk_spans(10, 4, 1)
    assert spans[0] == (0, 4) and spans[-1][1] == 10


def test_small_world_reproducible():
    g = graph([(f"e{i}", "friend_of", f"e{i % 8 + 1}") for i in range(1, 9)], n=8)
    assert relgraph.small_world_index(g, 5, 7) == relgraph.small_world_index(g, 5, 7)


def test_errors_surface():
    with pytest.raises(relgraph.RelgraphError):
        relgraph.validate_kb("relation x\nrule nonsense")
