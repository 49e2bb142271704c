"""Drives the relgraph binary end to end: test_cli.py <relgraph> <fixtures> <kb>."""

import json
import subprocess
import sys
import tempfile
from pathlib import Path

BIN, FIXTURES, KB = sys.argv[1], Path(sys.argv[2]), sys.argv[3]
failures = []


def run(*args, code=0):
    p = subprocess.run([BIN, *map(str, args)], capture_output=True, text=True)
    if p.returncode != code:
        failures.append(f"{args[0]}: exit {p.returncode}, stderr {p.stderr.strip()}")
    return p


def check(cond, what):
    if not cond:
        failures.append(what)


with tempfile.TemporaryDirectory() as tmp:
    tmp = Path(tmp)

    out = json.loads(run("kb", "validate", KB).stdout)
    check(out["valid"] and out["rules"] > 0, "starter KB not valid")
    bad = tmp / "bad.kb"
    bad.write_text("relation a\nrelation b\nsubtype a b\nsubtype b a\n")
    run("kb", "validate", bad, code=1)

    config = tmp / "config.json"
    config.write_text(json.dumps({"provider": {"kind": "scripted", "script": str(FIXTURES / "story" / "provider.json")}}))
    graph = tmp / "graph.json"
    p = run("--config", config, "pipeline", FIXTURES / "story" / "story.txt", "--out", graph, "--auto-resolve")
    summary = json.loads(p.stdout or "{}")
    check(summary.get("entities") == 4, f"pipeline entities {summary.get('entities')}")
    check(summary.get("open_conflicts") == 0, f"pipeline left conflicts: {summary.get('open_conflicts')}")

    closed = json.loads(run("close", graph).stdout or "{}")
    check(closed.get("added") == 0 and closed.get("conflicts") == [], "pipeline output is not closed and clean")

    scores = json.loads(run("eval", "--pred", graph, "--gold", graph).stdout or "{}")
    check(scores.get("triples", {}).get("f1") == 1.0, "self evaluation is not perfect")

    first = run("swi", graph, "--samples", "5", "--seed", "3").stdout
    second = run("swi", graph, "--samples", "5", "--seed", "3").stdout
    check(first and first == second, "swi output not reproducible")

    start = tmp / "start.json"
    doc = json.loads(graph.read_text())
    doc["triples"] = [t for t in doc["triples"] if t["provenance"]["kind"] != "inferred"]
    start.write_text(json.dumps(doc))
    ops = tmp / "ops.json"
    ops.write_text(run("plan", "--from", start, "--to", graph).stdout)
    rebuilt = tmp / "rebuilt.json"
    applied = json.loads(run("apply", "--graph", start, "--ops", ops, "--out", rebuilt).stdout or "{}")
    check("error" not in applied, f"apply failed: {applied.get('error')}")
    keys = lambda path: {(t["src"], t["rel"], t["dst"]) for t in json.loads(Path(path).read_text())["triples"]}
    check(keys(rebuilt) == keys(graph), "plan/apply did not rebuild the graph")

    bench_provider = tmp / "bench_provider.json"
    bench_provider.write_text(json.dumps({"kind": "scripted", "script": str(FIXTURES / "logic_provider.json")}))
    bench = json.loads(
        run("logic-bench", FIXTURES / "logic_bench.jsonl", "--provider", bench_provider).stdout or "{}"
    )
    check(abs(bench.get("add", {}).get("f1", 0) - 12 / 19) < 1e-12, f"logic-bench add f1 {bench.get('add')}")
    check(bench.get("remove", {}).get("accuracy") == 0.5, f"logic-bench remove {bench.get('remove')}")

    err = run("close", tmp / "missing.json", code=2)
    check(json.loads(err.stderr)["error"]["code"] == "not_found", "missing file not reported as not_found")
    run("plan", code=2)

for f in failures:
    print("FAIL", f)
print("ok" if not failures else f"{len(failures)} failure(s)")
sys.exit(1 if failures else 0)
