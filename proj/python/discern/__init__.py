"""Discernment benchmark for LLM evaluators.

Thin wrapper over the C++ core in ``discern._core``. Functions that return
structured data hand back plain dicts.
"""

import json as _json
import os as _os

from . import _core
from ._core import (
    DiscernError,
    builtin_plan_names,
    config_hash,
    count_graphemes,
    delete_chars,
    delete_word_span,
    discernment_score,
    enumeration_oracle,
    expert_weights_from_votes,
    hmp,
    hmp_weighted,
    inject_typos,
    parse_score,
    shuffle_sentences,
    split_sentences,
    tokenize_words,
)

__all__ = [
    "DiscernError",
    "builtin_plan",
    "builtin_plan_names",
    "config_hash",
    "corpus_stats",
    "count_graphemes",
    "delete_chars",
    "delete_word_span",
    "discernment_score",
    "enumeration_oracle",
    "expert_weights_from_votes",
    "hmp",
    "hmp_weighted",
    "inject_typos",
    "level_weights",
    "parse_score",
    "run",
    "shuffle_sentences",
    "split_sentences",
    "tokenize_words",
    "wilcoxon",
]


def wilcoxon(original, perturbed, mode="auto", zero_method="drop"):
    """One-sided signed-rank test that original scores exceed perturbed ones."""
    return _json.loads(_core.wilcoxon(list(original), list(perturbed), mode, zero_method))


def builtin_plan(name):
    return _json.loads(_core.builtin_plan(name))


def level_weights(plan):
    """Per-spec weights for a plan given as a dict or a built-in name."""
    if isinstance(plan, str):
        plan = builtin_plan(plan)
    return _core.level_weights(_json.dumps(plan))


def corpus_stats(path, task):
    chars, words, sentences = _core.corpus_stats(_os.fspath(path), task)
    return {"avg_chars": chars, "avg_words": words, "avg_sentences": sentences}


def run(config, offline=False, out=None, seed=None):
    """Runs every stage and returns the report as a dict."""
    return _json.loads(
        _core.run(_os.fspath(config), offline, None if out is None else _os.fspath(out), seed)
    )
