import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedopenmax.exceptions import DegenerateDataError, InsufficientDataError, InvalidInputError
from fedopenmax.weibull import (
    WeibullModel,
    cdf,
    fit_tail,
    log_likelihood,
    log_likelihood_gradient,
    select_tail,
)
from oracles import grid_log_likelihood_max, weibull_sample


def test_recovers_known_parameters():
    d = weibull_sample(2.0, 1.0, 5000, seed=0)
    w = fit_tail(d, 5000)
    assert w.tail_size_used == 5000
    assert w.shape_k == pytest.approx(2.0, rel=0.05)
    assert w.scale_lambda == pytest.approx(1.0, rel=0.02)


def test_fit_beats_grid_oracle():
    d = weibull_sample(2.0, 1.0, 5000, seed=0)
    w = fit_tail(d, 5000)
    assert log_likelihood(w, d) >= grid_log_likelihood_max(d) - 1e-3


def test_top_eta_selection():
    assert select_tail([5, 1, 9, 7, 2], 3).tolist() == [9, 7, 5]
    assert fit_tail([5, 1, 9, 7, 2], 3) == fit_tail([9, 7, 5], 10)


def test_eta_larger_than_data_uses_everything():
    w = fit_tail([1.0, 2.0, 3.5], 20)
    assert w.tail_size_used == 3


def test_zero_distances_are_dropped():
    assert fit_tail([0.0, 0.0, 1.0, 2.0], 4) == fit_tail([1.0, 2.0], 4)
    with pytest.raises(InsufficientDataError):
        fit_tail([0.0, 0.0, 3.0], 3)


def test_degenerate_and_insufficient_tails():
    with pytest.raises(DegenerateDataError):
        fit_tail([1.0] * 10, 10)
    with pytest.raises(InsufficientDataError):
        fit_tail([4.0], 5)
    with pytest.raises(InvalidInputError):
        fit_tail([1.0, 2.0], 1)
    with pytest.raises(InvalidInputError):
        fit_tail([1.0, -2.0], 2)


def test_cdf_values():
    one = WeibullModel(1.0, 1.0, 2)
    assert cdf(one, 1.0) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert cdf(one, 0.0) == 0.0
    assert cdf(one, -3.0) == 0.0
    w = WeibullModel(3.7, 2.5, 10)
    assert cdf(w, 2.5) == pytest.approx(1 - math.exp(-1), abs=1e-15)
    assert cdf(w, 50 * 2.5) == pytest.approx(1.0, abs=1e-12)
    np.testing.assert_allclose(cdf(w, np.array([0.0, 2.5])), [0.0, 1 - math.exp(-1)])


@given(st.floats(0.2, 10), st.floats(0.01, 100), st.floats(-10, 100), st.floats(-10, 100))
def test_cdf_monotone(k, lam, a, b):
    w = WeibullModel(k, lam, 2)
    lo, hi = min(a, b), max(a, b)
    assert cdf(w, lo) <= cdf(w, hi)
    assert 0.0 <= cdf(w, lo) <= 1.0


def test_log_likelihood_closed_forms():
    assert log_likelihood(WeibullModel(1.0, 1.0, 2), [1.0]) == -1.0
    expected = math.log(2) - math.log(3) - 1
    assert log_likelihood(WeibullModel(2.0, 3.0, 2), [3.0]) == pytest.approx(expected, abs=1e-15)
    with pytest.raises(InvalidInputError):
        log_likelihood(WeibullModel(1.0, 1.0, 2), [1.0, 0.0])


tails = st.tuples(
    st.sampled_from([0.8, 1.5, 2.0, 5.0]),
    st.sampled_from([0.5, 1.0, 10.0]),
    st.integers(20, 400),
    st.integers(0, 2**32 - 1),
)


@settings(max_examples=30, deadline=None)
@given(tails)
def test_stationarity_at_fit(params):
    k, lam, n, seed = params
    d = weibull_sample(k, lam, n, seed)
    w = fit_tail(d, n)
    dk, dlam = log_likelihood_gradient(w, d)
    assert abs(dk) < 1e-6
    assert abs(dlam) < 1e-6


@settings(max_examples=10, deadline=None)
@given(tails)
def test_dominates_grid_oracle(params):
    k, lam, n, seed = params
    d = weibull_sample(k, lam, n, seed)
    w = fit_tail(d, n)
    assert log_likelihood(w, d) >= grid_log_likelihood_max(d) - 1e-3


@settings(max_examples=30, deadline=None)
@given(tails, st.floats(1e-3, 1e3))
def test_scale_equivariance(params, c):
    k, lam, n, seed = params
    d = weibull_sample(k, lam, n, seed)
    w = fit_tail(d, 20)
    wc = fit_tail(c * d, 20)
    assert wc.shape_k == pytest.approx(w.shape_k, abs=1e-6)
    assert wc.scale_lambda == pytest.approx(c * w.scale_lambda, rel=1e-6)
