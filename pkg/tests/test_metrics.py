from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from graphsmile.metrics import classification_report, confusion_matrix


def brute(truth, pred, C):
    """Per-class counts straight from the lists, no confusion matrix."""
    n = len(truth)
    acc = Fraction(sum(t == p for t, p in zip(truth, pred)), n)
    f1s, wf1 = [], Fraction(0)
    for c in range(C):
        tp = sum(1 for t, p in zip(truth, pred) if t == c and p == c)
        npred = sum(1 for p in pred if p == c)
        nsup = sum(1 for t in truth if t == c)
        if tp == 0:
            f = Fraction(0)
        else:
            prec, rec = Fraction(tp, npred), Fraction(tp, nsup)
            f = 2 * prec * rec / (prec + rec)
        f1s.append(f)
        wf1 += Fraction(nsup, n) * f
    return acc, f1s, wf1


def test_hand_example():
    rep = classification_report([0, 1, 1], [0, 0, 1], 2)
    assert rep.accuracy == pytest.approx(2 / 3, abs=0)
    assert rep.per_class_f1 == [float(Fraction(2, 3))] * 2
    assert rep.weighted_f1 == float(Fraction(2, 3))
    assert rep.confusion.tolist() == [[1, 0], [1, 1]]


def test_all_correct():
    rep = classification_report([0, 1, 2, 2], [0, 1, 2, 2], 3)
    assert rep.accuracy == 1.0 and rep.weighted_f1 == 1.0


def test_zero_support_class():
    rep = classification_report([0, 0, 1], [0, 1, 1], 3)
    assert rep.per_class_f1[2] == 0.0
    assert rep.support.tolist() == [2, 1, 0]
    acc, f1s, wf1 = brute([0, 0, 1], [0, 1, 1], 3)
    assert rep.weighted_f1 == float(wf1)


@settings(max_examples=200, deadline=None)
@given(st.integers(1, 6).flatmap(lambda C: st.tuples(
    st.just(C),
    st.lists(st.tuples(st.integers(0, C - 1), st.integers(0, C - 1)), min_size=1, max_size=40),
)))
def test_matches_brute_force(case):
    C, pairs = case
    truth, pred = [t for t, _ in pairs], [p for _, p in pairs]
    rep = classification_report(truth, pred, C)
    acc, f1s, wf1 = brute(truth, pred, C)
    assert rep.accuracy == float(acc)
    assert rep.per_class_f1 == [float(f) for f in f1s]
    assert rep.weighted_f1 == float(wf1)
    assert rep.confusion.sum(axis=1).tolist() == [truth.count(c) for c in range(C)]
    assert rep.accuracy == float(Fraction(int(np.trace(rep.confusion)), len(truth)))


def test_confusion_shape_error():
    with pytest.raises(ValueError):
        confusion_matrix([0, 1], [0], 2)


def test_empty():
    rep = classification_report([], [], 3, excluded=4)
    assert rep.accuracy == 0.0 and rep.excluded == 4 and rep.total == 0
