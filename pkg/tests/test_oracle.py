import numpy as np
import pytest

from brsup.model import Anchor, Grid, Variogram, build_model
from brsup.oracle import (
    MAX_ORACLE_N, OracleError, ho_dombry_sample, ho_dombry_tables, q_and_m, resampling_oracle,
)


def test_exchangeable_pair(exch2, rng):
    t = ho_dombry_tables(exch2, 1000, rng)
    np.testing.assert_allclose(t.argmax_probs, [0.5, 0.5], atol=1e-12)
    assert np.all(t.argmax_se == 0)  # one-dimensional orthants are exact


def test_q_identities(tri3):
    Q, m = q_and_m(tri3)
    np.testing.assert_allclose(Q, Q.T, atol=1e-14)
    assert np.abs(Q @ np.ones(3)).max() <= 1e-12
    ev = np.linalg.eigvalsh(Q)
    assert ev.min() >= -1e-10 and np.sum(ev > 1e-10) == 2
    # m = -Q sigma/2 - C^-1 1 / (1^T C^-1 1)
    cinv = np.linalg.inv(tri3.cov)
    u = cinv.sum(axis=1)
    np.testing.assert_allclose(m, -Q @ tri3.sigma / 2 - u / u.sum(), atol=1e-12)


def test_singular_and_large_models_rejected(square_small, rng):
    with pytest.raises(OracleError, match="anchor"):
        ho_dombry_tables(build_model(Grid(np.array([[0.0], [1.0]])), Variogram(), Anchor.point(0.0)))
    big = build_model(Grid(np.arange(MAX_ORACLE_N + 1.0)[:, None]), Variogram(), Anchor.point(-0.5))
    with pytest.raises(OracleError):
        ho_dombry_tables(big, 100, rng)


def test_single_point(rng):
    m = build_model(Grid(np.array([[0.0]])), Variogram(), Anchor.point(1.0))
    t = ho_dombry_tables(m, 10, rng)
    np.testing.assert_array_equal(t.argmax_probs, [1.0])
    w, idx = ho_dombry_sample(t, m, rng, 5)
    np.testing.assert_array_equal(w, 0.0)


def test_sample_structure(tri3, rng):
    t = ho_dombry_tables(tri3, 200_000, rng)
    w, idx = ho_dombry_sample(t, tri3, rng, 5000)
    assert np.all(w.max(axis=1) == 0)
    np.testing.assert_array_equal(w.argmax(axis=1), idx)
    freq = np.bincount(idx, minlength=3) / len(idx)
    se = np.sqrt(t.argmax_probs * (1 - t.argmax_probs) / len(idx))
    assert np.all(np.abs(freq - t.argmax_probs) < 3 * np.hypot(se, t.argmax_se) + 1e-12)


def test_permutation_equivariance(tri3, rng):
    perm = np.array([2, 0, 1])
    pts = tri3.grid.points[perm]
    m2 = build_model(Grid(pts), tri3.variogram, tri3.anchor)
    a = ho_dombry_tables(tri3, 400_000, np.random.default_rng(1))
    b = ho_dombry_tables(m2, 400_000, np.random.default_rng(2))
    se = np.hypot(a.argmax_se[perm], b.argmax_se)
    assert np.all(np.abs(a.argmax_probs[perm] - b.argmax_probs) < 4 * se + 1e-12)


def test_resampling_matches_tables(tri3, rng):
    t = ho_dombry_tables(tri3, 400_000, rng)
    r = resampling_oracle(tri3, 400_000, 100_000, rng)
    freq = np.bincount(r.argmax, minlength=3) / len(r)
    # resampling adds variance from the pool; a loose band suffices here
    assert np.abs(freq - t.argmax_probs).max() < 0.01


def test_resampling_single_point_and_c_inf(rng, exch2):
    m = build_model(Grid(np.array([[0.0]])), Variogram(), Anchor.point(0.0))
    r = resampling_oracle(m, 1000, 100, rng)
    assert r.meta["c_inf"] == pytest.approx(1.0)
    r2 = resampling_oracle(exch2, 100_000, 10, rng)
    assert 1.0 <= r2.meta["c_inf"] <= 2.0
