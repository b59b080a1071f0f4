import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fedopenmax.exceptions import InvalidInputError
from fedopenmax.numerics import DistanceMetric, argmax, distance, softmax

finite = st.floats(-1e4, 1e4, allow_nan=False)
vectors = arrays(np.float64, st.integers(1, 12), elements=finite)
pairs = st.integers(1, 8).flatmap(lambda n: st.tuples(arrays(np.float64, n, elements=finite),
                                                      arrays(np.float64, n, elements=finite)))


def test_softmax_symmetric_inputs():
    assert softmax([0, 0]) == pytest.approx([0.5, 0.5], abs=0)
    np.testing.assert_allclose(softmax([1000, 1000, 1000]), [1 / 3] * 3, rtol=1e-15)


def test_softmax_matches_high_precision_oracle():
    # frozen from mpmath at 50 digits
    expected = [0.0900305731703805, 0.244728471054798, 0.665240955774822]
    np.testing.assert_allclose(softmax([1, 2, 3]), expected, atol=1e-12)


@pytest.mark.parametrize("bad", [[np.nan, 1.0], [np.inf], []])
def test_softmax_rejects_bad_input(bad):
    with pytest.raises(InvalidInputError):
        softmax(bad)


@given(vectors)
def test_softmax_sums_to_one(v):
    p = softmax(v)
    assert abs(p.sum() - 1.0) < 1e-9
    assert np.all(p >= 0)


@given(vectors, st.floats(-1e4, 1e4))
def test_softmax_shift_invariant(v, c):
    np.testing.assert_allclose(softmax(v), softmax(v + c), atol=1e-12, rtol=0)


@given(vectors)
def test_softmax_preserves_argmax(v):
    # the top entry must win by a margin float64 can still resolve after exp
    top = np.sort(v)[::-1]
    if top.size == 1 or top[0] - top[1] > 1e-9:
        assert argmax(softmax(v)) == argmax(v)


def test_argmax_ties_go_to_lowest_index():
    assert argmax([1.0, 3.0, 3.0]) == 1


def test_distance_examples():
    assert distance([3, 4], [3, 4], "euclidean") == 0
    assert distance([0, 0], [3, 4], DistanceMetric.EUCLIDEAN) == 5
    assert distance([1, 0], [0, 1], DistanceMetric.COSINE) == pytest.approx(1.0, abs=1e-15)


def test_eucos_combines_scaled_euclidean_and_cosine():
    a, b = np.array([1.0, 0.0]), np.array([0.0, 3.0])
    expected = np.sqrt(10) / 200 + 1.0
    assert distance(a, b, "eucos") == pytest.approx(expected, rel=1e-15)
    assert distance(a, b, "eucos", eucos_divisor=10) == pytest.approx(np.sqrt(10) / 10 + 1.0, rel=1e-15)


def test_distance_errors():
    with pytest.raises(InvalidInputError):
        distance([1, 2], [1, 2, 3])
    with pytest.raises(InvalidInputError):
        distance([0, 0], [1, 1], "cosine")
    with pytest.raises(InvalidInputError):
        distance([1], [1], "manhattan")


@pytest.mark.parametrize("metric", list(DistanceMetric))
@given(pair=pairs)
def test_distance_symmetric_and_zero_on_diagonal(metric, pair):
    a, b = pair
    if metric is not DistanceMetric.EUCLIDEAN and (not np.any(a) or not np.any(b)):
        return
    assert distance(a, b, metric) == distance(b, a, metric)
    assert distance(a, b, metric) >= 0
    assert distance(a, a, metric) == 0
