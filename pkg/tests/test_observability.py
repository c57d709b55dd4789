import numpy as np
import pytest
from hypothesis import given, strategies as st

from ensemble_ot.errors import DimensionMismatch, NotFound
from ensemble_ot.lti_systems import is_observable_pair, observability_matrix
from ensemble_ot.observability import (
    ensemble_observable_lti,
    kernel_intersection_time,
    output_pushforward,
    unobservable_counterexample,
    unobservable_direction,
)
from ensemble_ot.transport import wasserstein_p
from helpers import random_pair

DI = np.array([[0.0, 1.0], [0.0, 0.0]])


def test_report_examples():
    rep = ensemble_observable_lti(DI, [[1.0, 0.0]])
    assert rep.verdict and rep.as_dict()["observable"]
    rep = ensemble_observable_lti(DI, [[0.0, 1.0]])
    assert not rep.verdict
    assert np.allclose(np.abs(rep.witness), [1.0, 0.0])
    rng = np.random.default_rng(0)
    assert ensemble_observable_lti(rng.normal(size=(3, 3)), np.eye(3)).verdict
    with pytest.raises(DimensionMismatch):
        ensemble_observable_lti(np.eye(2), np.eye(3))


def test_kernel_time_examples():
    with pytest.raises(NotFound):
        kernel_intersection_time(DI, [[1.0, 0.0]], [[0.0, 1.0]], time_grid=[0.0])
    assert kernel_intersection_time(DI, [[1.0, 0.0]], [[0.0, 1.0]], time_grid=[0.0, 0.5, 1.0]) == 0.5
    assert kernel_intersection_time(DI, [[1.0, 0.0]], [[0.0, 1.0]]) == pytest.approx(0.1)
    with pytest.raises(ValueError):
        kernel_intersection_time(DI, [[1.0, 0.0]], np.zeros((0, 2)))
    with pytest.raises(ValueError):
        kernel_intersection_time(DI, [[1.0, 0.0]], [[0.0, 0.0]])
    with pytest.raises(NotFound):
        kernel_intersection_time(DI, [[0.0, 1.0]], [[1.0, 0.0]])


def test_counterexample_examples():
    d0, d1 = unobservable_counterexample(DI, [[0.0, 1.0]])
    assert np.allclose(d0.atoms, [[0, 0]]) and np.allclose(np.abs(d1.atoms), [[1, 0]])
    for t in np.linspace(0, 3, 7):
        assert np.allclose(output_pushforward(DI, [[0.0, 1.0]], d1, t).atoms, 0.0, atol=1e-12)
    assert unobservable_counterexample(DI, [[1.0, 0.0]]) is None
    d0, d1 = unobservable_counterexample(np.zeros((2, 2)), [[1.0, 0.0]])
    assert np.allclose(np.abs(d1.atoms), [[0, 1]])


@given(st.integers(0, 100_000), st.booleans())
def test_verdict_witness_counterexample(seed, observable):
    rng = np.random.default_rng(seed)
    A, C = random_pair(rng, observable)
    rep = ensemble_observable_lti(A, C)
    assert rep.verdict == is_observable_pair(A, C)
    O = observability_matrix(A, C)
    assert rep.verdict == (np.linalg.matrix_rank(O, tol=1e-9 * np.linalg.norm(O, 2)) == A.shape[0])
    if rep.verdict:
        assert unobservable_counterexample(A, C) is None
        return
    v = rep.witness
    assert np.linalg.norm(v) > 0.5 and np.linalg.norm(O @ v) < 1e-8 * np.linalg.norm(v)
    d0, d1 = unobservable_counterexample(A, C)
    for t in np.linspace(0.0, 2.0, 50):
        assert wasserstein_p(output_pushforward(A, C, d0, t), output_pushforward(A, C, d1, t), 1) < 1e-8


def test_kernel_time_success_rate():
    rng = np.random.default_rng(1)
    ok = 0
    for _ in range(200):
        A, C = random_pair(rng, True)
        pts = rng.normal(size=(int(rng.integers(1, 21)), A.shape[0]))
        try:
            kernel_intersection_time(A, C, pts)
            ok += 1
        except NotFound:
            pass
    assert ok >= 198


def test_direction_none_when_observable():
    assert unobservable_direction(DI, [[1.0, 0.0]]) is None
