"""Character relation graphs with rule-based completion and conflict checks."""

import json

from . import _core
from ._core import RelgraphError, chunk_spans, consensus

__all__ = [
    "RelgraphError",
    "apply_ops",
    "builtin_kb",
    "chunk_spans",
    "close",
    "consensus",
    "detect_conflicts",
    "plan_completion",
    "score_entities",
    "score_triples",
    "small_world_index",
    "validate_kb",
]


def _dump(graph):
    return graph if isinstance(graph, str) else json.dumps(graph)


def builtin_kb():
    return _core.builtin_kb_text()


def validate_kb(text):
    return json.loads(_core.validate_kb(text))


def close(graph, kb=None):
    return json.loads(_core.close(_dump(graph), kb))


def detect_conflicts(graph, kb=None):
    return json.loads(_core.detect_conflicts(_dump(graph), kb))


def plan_completion(start, target, kb=None):
    return json.loads(_core.plan_completion(_dump(start), _dump(target), kb))


def apply_ops(graph, ops, kb=None):
    return json.loads(_core.apply_ops(_dump(graph), _dump(ops), kb))


def score_triples(pred, gold, soft_kb=None):
    return json.loads(_core.score_triples([list(t) for t in pred], [list(t) for t in gold], soft_kb))


def score_entities(pred, gold):
    return json.loads(_core.score_entities([set(g) for g in pred], [set(g) for g in gold]))


def small_world_index(graph, samples=20, seed=0):
    return json.loads(_core.small_world_index(_dump(graph), samples, seed))
