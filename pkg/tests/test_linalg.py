from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from linbandit.errors import ConfigurationError, NumericError, UsageError
from linbandit.linalg import ridge_init


def test_init_identity_scaling():
    s = ridge_init(2, 2.0)
    assert np.allclose(s.gram, [[2, 0], [0, 2]])
    assert np.allclose(s.gram_inv, [[0.5, 0], [0, 0.5]])
    assert np.allclose(s.estimate, [0, 0])
    assert np.allclose(s.moment, [0, 0])


def test_init_one_dim():
    s = ridge_init(1, 1.0)
    assert np.allclose(s.gram, [[1.0]])
    assert np.allclose(s.estimate, [0.0])


def test_init_trace():
    assert np.trace(ridge_init(50, 2.0).gram) == pytest.approx(100.0)


@pytest.mark.parametrize("dim,lam", [(0, 1.0), (2, 0.0), (2, -1.0), (-3, 2.0)])
def test_init_rejects_bad_config(dim, lam):
    with pytest.raises(ConfigurationError):
        ridge_init(dim, lam)


def test_update_direct_two_by_two():
    # (lam*I + x x^T)^{-1} (y*x) with lam=1, x=[1,0], y=1
    s = ridge_init(2, 1.0).update(np.array([1.0, 0.0]), 1.0)
    assert np.allclose(s.gram, [[2, 0], [0, 1]])
    assert np.allclose(s.estimate, [0.5, 0.0])
    assert s.predict(np.array([1.0, 0.0])) == pytest.approx(0.5)
    assert s.predict(np.array([0.0, 1.0])) == pytest.approx(0.0)


def test_update_zero_context_is_noop():
    s = ridge_init(2, 1.0)
    s.update(np.zeros(2), 5.0)
    assert np.allclose(s.gram, np.eye(2))
    assert np.allclose(s.estimate, [0, 0])
    assert s.total_updates == 1


def test_update_dimension_mismatch():
    s = ridge_init(3, 1.0)
    with pytest.raises(UsageError):
        s.update(np.ones(2), 1.0)
    with pytest.raises(UsageError):
        s.mahalanobis_sq(np.ones(4))
    with pytest.raises(UsageError):
        s.predict(np.ones(2))


def test_update_nonfinite_rejected():
    s = ridge_init(2, 1.0)
    with pytest.raises(NumericError):
        s.update(np.array([np.nan, 0.0]), 1.0)
    with pytest.raises(NumericError):
        s.update(np.ones(2), float("inf"))


def test_incremental_inverse_tracks_direct_inverse():
    rng = np.random.default_rng(0)
    d = 5
    s = ridge_init(d, 1.0)
    gram = np.eye(d)
    for _ in range(200):
        x = rng.standard_normal(d)
        y = float(rng.standard_normal())
        s.update(x, y)
        gram += np.outer(x, x)
        assert np.max(np.abs(s.gram_inv - np.linalg.inv(gram))) < 1e-8


def test_mahalanobis_fresh_state():
    s = ridge_init(2, 2.0)
    assert s.mahalanobis_sq(np.array([1.0, 1.0])) == pytest.approx(1.0)
    assert ridge_init(3, 1.0).mahalanobis_sq(np.zeros(3)) == 0.0


def test_mahalanobis_matches_direct_solve():
    rng = np.random.default_rng(1)
    d = 4
    s = ridge_init(d, 0.5)
    for _ in range(60):
        s.update(rng.standard_normal(d), float(rng.standard_normal()))
    x = rng.standard_normal(d)
    direct = float(x @ np.linalg.inv(s.gram) @ x)
    assert s.mahalanobis_sq(x) == pytest.approx(direct, abs=1e-8)
    assert s.mahalanobis_sq(x) <= (x @ x) / 0.5 + 1e-12


def test_gram_times_inverse_stays_near_identity():
    rng = np.random.default_rng(2)
    d = 6
    s = ridge_init(d, 2.0)
    for i in range(600):   # crosses two refresh boundaries
        s.update(rng.standard_normal(d), float(rng.standard_normal()))
        if i % 31 == 0:
            err = np.max(np.abs(s.gram @ s.gram_inv - np.eye(d)))
            assert err < 1e-6


def test_update_order_equivariance():
    rng = np.random.default_rng(3)
    d = 3
    pairs = [(rng.standard_normal(d), float(rng.standard_normal())) for _ in range(50)]
    a = ridge_init(d, 1.0)
    b = ridge_init(d, 1.0)
    for x, y in pairs:
        a.update(x, y)
    for x, y in reversed(pairs):
        b.update(x, y)
    assert np.allclose(a.gram, b.gram, atol=1e-10)
    assert np.allclose(a.moment, b.moment, atol=1e-10)
    a.refresh()
    b.refresh()
    assert np.max(np.abs(a.estimate - b.estimate)) < 1e-7


def test_repeated_direction_shrinks_quadratic_form():
    rng = np.random.default_rng(4)
    d = 3
    s = ridge_init(d, 1.0)
    x = rng.standard_normal(d)
    prev = s.mahalanobis_sq(x)
    for _ in range(20):
        s.update(x, 1.0)
        cur = s.mahalanobis_sq(x)
        assert cur <= prev + 1e-12
        prev = cur


@settings(max_examples=25, deadline=None)
@given(
    st.lists(
        st.lists(st.floats(-1.0, 1.0), min_size=3, max_size=3),
        min_size=1,
        max_size=40,
    )
)
def test_gram_eigenvalues_bounded(contexts):
    # with ||x|| <= L every eigenvalue stays inside [lam, lam + n L^2]
    lam = 0.7
    s = ridge_init(3, lam)
    L_sq = 3.0   # entries in [-1, 1]
    for x in contexts:
        s.update(np.asarray(x), 1.0)
    eig = np.linalg.eigvalsh(s.gram)
    assert eig.min() >= lam - 1e-9
    assert eig.max() <= lam + len(contexts) * L_sq + 1e-9


def test_sqrt_inv_factorizes_inverse():
    rng = np.random.default_rng(5)
    s = ridge_init(4, 1.5)
    for _ in range(30):
        s.update(rng.standard_normal(4), float(rng.standard_normal()))
    A = s.sqrt_inv()
    assert np.allclose(A @ A.T, s.gram_inv, atol=1e-10)
