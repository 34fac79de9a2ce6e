import numpy as np
import pytest

from brsup.diagnostics import (
    acf, acf_sup_stat, argmax_frequencies, chain_argmax_se, diagnose, effective_sample_size,
    estimate_c_inf, rhat,
)
from brsup.model import Anchor, Grid, Variogram, build_model, square_model
from brsup.samplers import run_mcmc, variant_1a


def test_c_inf_single_point(rng):
    m = build_model(Grid(np.array([[0.0]])), Variogram(), Anchor.point(1.0))
    est, se = estimate_c_inf(m, 10_000, rng)
    assert abs(est - 1) < 3 * se + 1e-12


def test_c_inf_range(tri3, rng):
    est, se = estimate_c_inf(tri3, 20_000, rng)
    assert 1 - 3 * se <= est <= 3 + 3 * se


def test_c_inf_monotone_under_refinement(rng):
    coarse = square_model(step=2.5)
    fine = square_model(step=1.25)  # contains the coarse grid, same corners
    a, sa = estimate_c_inf(coarse, 100_000, rng)
    b, sb = estimate_c_inf(fine, 100_000, rng)
    assert b >= a - 3 * np.hypot(sa, sb)


def test_acf_iid_and_constant(rng):
    x = rng.standard_normal(20_000)
    r = acf(x, 10)
    assert r[0] == pytest.approx(1.0)
    assert np.all(np.abs(r[1:]) < 3 / np.sqrt(len(x)))
    with pytest.raises(ValueError, match="constant"):
        acf(np.ones(100), 5)


def test_acf_ar1(rng):
    phi, n = 0.7, 200_000
    e = rng.standard_normal(n)
    x = np.empty(n)
    x[0] = e[0]
    for t in range(1, n):
        x[t] = phi * x[t - 1] + e[t]
    r = acf(x, 5)
    np.testing.assert_allclose(r, phi ** np.arange(6), atol=0.01)
    ess = effective_sample_size(x)
    assert ess == pytest.approx(n * (1 - phi) / (1 + phi), rel=0.1)


def test_ess_bounds(rng):
    for x in (rng.standard_normal(500), np.cumsum(rng.standard_normal(500))):
        e = effective_sample_size(x)
        assert 1 <= e <= len(x)


def test_argmax_frequencies():
    freq, se = argmax_frequencies(np.zeros(10, dtype=int), 1)
    np.testing.assert_array_equal(freq, [1.0])
    with pytest.raises(ValueError):
        argmax_frequencies(np.array([], dtype=int), 2)


def test_argmax_exchangeable(exch2, rng):
    ch = run_mcmc(variant_1a(exch2), 40_000, rng)
    freq, se = chain_argmax_se(ch, 2)
    assert np.all(np.abs(freq - 0.5) < 3 * se)


def test_rhat_and_report(tri3, rng):
    chains = [run_mcmc(variant_1a(tri3), 5000, rng).log_sup for _ in range(3)]
    assert rhat(chains) == pytest.approx(1.0, abs=0.05)
    ch = run_mcmc(variant_1a(tri3), 2000, rng)
    rep = diagnose(ch, 3, 20, c_inf=(1.5, 0.01)).to_dict()
    assert rep["acf"][0] == pytest.approx(1.0)
    assert all(abs(v) <= 1 for v in rep["acf"])
    assert 1 <= rep["ess"] <= 2000
    assert sum(rep["argmax_freq"]) == pytest.approx(1.0)
    np.testing.assert_allclose(acf_sup_stat(ch, 20), rep["acf"])
