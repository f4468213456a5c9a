from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from promptevo.errors import LengthMismatch
from promptevo.metrics import (
    accuracy,
    confusion,
    exact_match,
    lcs_length,
    mcc,
    normalize_answer,
    rouge_avg,
    rouge_l,
    rouge_n,
    token_f1,
)


def test_accuracy_and_missing_predictions():
    assert accuracy(["a", "b", None], ["a", "a", "a"]) == pytest.approx(1 / 3)
    with pytest.raises(LengthMismatch):
        accuracy(["a"], ["a", "b"])
    with pytest.raises(LengthMismatch):
        accuracy([], [])


def test_mcc_identity_inverse_and_degenerate():
    golds = ["yes", "no", "yes", "no"]
    assert mcc(golds, golds) == pytest.approx(1.0)
    flipped = ["no", "yes", "no", "yes"]
    assert mcc(flipped, golds) == pytest.approx(-1.0)
    assert mcc(["yes"] * 4, golds) == 0.0


def test_confusion_counts_missing_predictions_as_wrong():
    assert confusion([None, None], ["pos", "neg"], positive="pos") == (0, 0, 1, 1)
    with pytest.raises(ValueError):
        confusion(["a", "b", "c"], ["a", "b", "c"])


def test_normalisation_and_f1():
    assert normalize_answer("The  Cat, sat!") == "cat sat"
    assert token_f1(["the cat sat"], ["cat sat"]) == 1.0
    assert token_f1(["cat"], ["cat sat"]) == pytest.approx(2 / 3)
    assert token_f1(["dog"], ["cat"]) == 0.0
    assert token_f1([None], ["cat"]) == 0.0
    assert exact_match(["A cat."], ["cat"]) == 1.0


def test_rouge_components():
    assert rouge_n("the cat sat", "the cat sat", 2) == 1.0
    assert rouge_n("a b", "c d", 1) == 0.0
    assert lcs_length("abcbdab", "bdcaba") == 4
    assert rouge_l("the cat sat on the mat", "the cat on the mat") == pytest.approx(2 * 5 / 11)
    assert rouge_avg(["", "x"], ["y", "x"]) == pytest.approx(0.5 * (1 + 0 + 1) / 3)


words = st.lists(st.sampled_from(["a", "the", "cat", "dog", "sat", "mat", "on"]), max_size=8)
pairs = st.lists(st.tuples(words.map(" ".join), words.map(" ".join)), min_size=1, max_size=6)


@settings(max_examples=100, deadline=None)
@given(pairs, st.randoms())
def test_metrics_are_permutation_invariant_and_bounded(data, rnd):
    preds, golds = [p for p, _ in data], [g or "cat" for _, g in data]
    order = list(range(len(preds)))
    rnd.shuffle(order)
    for fn in (token_f1, rouge_avg, exact_match):
        v = fn(preds, golds)
        assert 0.0 <= v <= 1.0
        assert fn([preds[i] for i in order], [golds[i] for i in order]) == pytest.approx(v)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.sampled_from(["p", "n"]), st.sampled_from(["p", "n", None])),
                min_size=1, max_size=30))
def test_mcc_range(data):
    golds, preds = [g for g, _ in data], [p for _, p in data]
    assert -1.0 - 1e-12 <= mcc(preds, golds, positive="p") <= 1.0 + 1e-12
