import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedopenmax.evaluation import confusion_matrix, evaluate_labels, evaluate_open_set, macro_f1
from fedopenmax.exceptions import InvalidInputError
from fedopenmax.openmax import UNKNOWN, Prediction

from oracles import tally_macro_f1

labels = st.integers(-1, 3)


def test_worked_two_class_example():
    truths, preds = [0, 0, 1, 1], [0, 1, 1, 1]
    # 2/3 and 0.8, computed by hand and by the brute-force tally
    assert tally_macro_f1(truths, preds) == pytest.approx((2 / 3 + 0.8) / 2, abs=1e-15)
    report = evaluate_labels(preds, truths, K=2)
    assert report.macro_f1 == pytest.approx(0.7333333333333333, abs=1e-15)
    assert report.f1.tolist()[1:] == pytest.approx([2 / 3, 0.8])
    assert report.active.tolist() == [False, True, True]


def test_perfect_diagonal():
    assert macro_f1(np.diag([3, 0, 5])) == 1.0
    r = evaluate_labels([0, 1, UNKNOWN], [0, 1, UNKNOWN], K=2)
    assert (r.accuracy, r.macro_f1) == (1.0, 1.0)


def test_all_unknown_predictions():
    truths = [0, 1, 1, UNKNOWN, UNKNOWN]
    r = evaluate_labels([UNKNOWN] * 5, truths, K=3)
    assert r.f1[1] == r.f1[2] == 0.0
    assert not r.active[3]
    assert r.f1[0] == pytest.approx(2 * 0.4 / 1.4)
    assert r.macro_f1 == pytest.approx(r.f1[0] / 3)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(labels, labels), min_size=1, max_size=60))
def test_matches_brute_force_tally(pairs):
    truths, preds = zip(*pairs)
    r = evaluate_labels(list(preds), list(truths), K=4)
    assert r.macro_f1 == pytest.approx(tally_macro_f1(truths, preds), abs=1e-12)
    assert r.counts.sum() == len(pairs)
    assert r.macro_f1 == float(np.mean(r.f1[r.active]))
    assert 0.0 <= r.macro_f1 <= 1.0
    diagonal = np.count_nonzero(r.counts - np.diag(np.diag(r.counts))) == 0
    assert (r.macro_f1 == 1.0) == diagonal


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(labels, labels), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_joint_permutation_invariance(pairs, rnd):
    shuffled = list(pairs)
    rnd.shuffle(shuffled)
    a = evaluate_labels(*zip(*[(p, t) for t, p in pairs]), K=4)
    b = evaluate_labels(*zip(*[(p, t) for t, p in shuffled]), K=4)
    assert a == b


def test_evaluate_open_set_infers_K():
    preds = [Prediction(l, np.full(4, 0.25), np.ones(3)) for l in (0, 2, UNKNOWN)]
    r = evaluate_open_set(preds, [0, 2, UNKNOWN])
    assert r.counts.shape == (4, 4) and r.accuracy == 1.0


@pytest.mark.parametrize(
    "call",
    [
        lambda: evaluate_labels([], [], 2),
        lambda: evaluate_labels([0, 1], [0], 2),
        lambda: evaluate_open_set([], []),
        lambda: macro_f1(np.zeros((3, 3))),
        lambda: confusion_matrix([5], [0], 2),
    ],
)
def test_invalid_input(call):
    with pytest.raises(InvalidInputError):
        call()


def test_serialization():
    r = evaluate_labels([0, 1, UNKNOWN], [0, 0, UNKNOWN], K=2)
    body = json.loads(r.to_json(phase="open_set"))
    assert body["phase"] == "open_set"
    assert body["per_class"][0]["class"] == "unknown"
    assert len(body["per_class"]) == 3
    header, row = r.summary_row(seed=3).splitlines()
    assert header == "seed,accuracy,macro_f1,n" and row.startswith("3,")
