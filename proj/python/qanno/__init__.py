"""Python access to the qanno annotation engine."""

import json as _json

from . import _core
from ._core import (
    CapacityError,
    generate,
    huffman_expected_questions,
    joint_entropy,
    optimal_expected_questions,
)

__all__ = [
    "CapacityError",
    "best_action",
    "generate",
    "huffman_expected_questions",
    "joint_entropy",
    "optimal_expected_questions",
    "simulate",
    "table1",
]


def _config(config):
    return _json.dumps(config or {})


def simulate(probs, labels, method="ia", config=None, max_questions=2500):
    """Runs one simulated annotation with a truthful oracle and returns the run record as a dict."""
    return _core.simulate(list(probs), list(labels), method, _config(config), max_questions)


def best_action(probs, config=None):
    """Returns (indices, pseudo_labels) of the first question for a fresh state."""
    return _core.best_action(list(probs), _config(config))


def table1(problems=("a", "b", "c"), seeds=range(1000), config=None, jobs=1):
    """Summary rows (mean Q, Q-H, Q/H per problem and method) over the given seeds."""
    return _core.table1(list(problems), list(seeds), _config(config), jobs)
