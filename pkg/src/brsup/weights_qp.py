"""Mixture weights that maximise the acceptance rate of the independence sampler.

The weights minimise ``p^T Sigma p`` over the simplex, where
``Sigma_ik = E exp(W_i + W_k - max_j W_j)``. Each entry is estimated through
the shifted vectors ``W^(i) = W + C[:, i]`` as
``E exp(W^(i)_k - max_j W^(i)_j)``, an average of quantities bounded by one.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from .gauss import _as_rng
from .model import GaussianModel

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SigmaMatrix:
    entries: np.ndarray
    std_err: np.ndarray
    n_mc: int


@dataclass(frozen=True, eq=False)
class QPResult:
    weights: np.ndarray
    objective: float
    kkt_residual: float
    multiplier: float
    iterations: int
    closed_form: bool
    regularized: bool = False


def _shifted_max(w: np.ndarray, cov: np.ndarray, block: int) -> np.ndarray:
    """``out[r, i] = max_j (w[r, j] + cov[j, i])``."""
    out = np.empty((w.shape[0], cov.shape[1]))
    for start in range(0, w.shape[0], block):
        chunk = w[start:start + block]
        out[start:start + block] = (chunk[:, :, None] + cov[None, :, :]).max(axis=1)
    return out


def estimate_sigma(model: GaussianModel, n_mc: int, rng, block: int = 8) -> SigmaMatrix:
    """Monte-Carlo estimate of ``Sigma`` from shifted spectral draws.

    Every row ``i`` reuses the same base draws ``W_r`` shifted by ``C[:, i]``
    (common random numbers), which turns the estimator into one max-plus pass
    and one matrix product. The result is symmetrized.
    """
    if n_mc < 1:
        raise ValueError("n_mc must be positive")
    rng = _as_rng(rng)
    cov = np.asarray(model.cov)
    z = rng.standard_normal((n_mc, model.rank))
    w = z @ model.factor.T - 0.5 * model.sigma
    top = w.max(axis=1, keepdims=True)
    m = _shifted_max(w, cov, block)
    # exp(w_k + C_ki - m_i) split as exp(w_k - top) * exp(top - m_i) * exp(C_ki)
    a = np.exp(w - top)
    b = np.exp(top - m)
    first = (a.T @ b) / n_mc * np.exp(cov)
    second = ((a * a).T @ (b * b)) / n_mc * np.exp(2.0 * cov)
    var = np.clip(second - first**2, 0.0, None) / max(n_mc - 1, 1)
    # row i of the estimate is E_i[. k]; transpose puts shift index first
    est = first.T
    sym = 0.5 * (est + est.T)
    se = 0.5 * np.sqrt(var.T + var)
    sym = np.clip(sym, np.finfo(float).tiny, 1.0)
    return SigmaMatrix(entries=sym, std_err=se, n_mc=n_mc)


def _kkt(sigma: np.ndarray, p: np.ndarray, floor: float):
    g = 2.0 * sigma @ p
    free = p > floor + 1e-12
    nu = g[free].mean() if free.any() else g.min()
    mu = g - nu
    stat = np.abs(mu[free]).max(initial=0.0)
    dual = max(0.0, -mu[~free].min(initial=0.0))
    primal = max(abs(p.sum() - 1.0), max(0.0, floor - p.min()))
    scale = max(1.0, np.abs(g).max())
    return max(stat, dual, primal) / scale, nu


def kkt_residual(sigma: np.ndarray, p: np.ndarray, floor: float = 0.0) -> float:
    """Scaled violation of the optimality conditions of the weight program."""
    return _kkt(np.asarray(sigma, dtype=float), np.asarray(p, dtype=float), floor)[0]


def _closed_form(sigma: np.ndarray):
    try:
        x = np.linalg.solve(sigma, np.ones(len(sigma)))
    except np.linalg.LinAlgError:
        return None
    total = x.sum()
    if not np.isfinite(total) or total <= 0:
        return None
    return x / total


def _equality_qp(sigma, free, fixed_val, budget):
    """Minimise ``p^T Sigma p`` over free entries with ``sum(p_free) = budget``."""
    f = np.flatnonzero(free)
    k = len(f)
    kkt = np.zeros((k + 1, k + 1))
    kkt[:k, :k] = 2.0 * sigma[np.ix_(f, f)]
    kkt[:k, k] = 1.0
    kkt[k, :k] = 1.0
    rhs = np.zeros(k + 1)
    rhs[:k] = -2.0 * sigma[np.ix_(f, ~free)] @ np.full((~free).sum(), fixed_val)
    rhs[k] = budget
    sol = np.linalg.lstsq(kkt, rhs, rcond=None)[0]
    return sol[:k]


def solve_weights_qp(sigma, floor: float = 0.0, max_iter: int = 10_000, tol: float = 1e-10) -> QPResult:
    """Minimise ``p^T Sigma p`` subject to ``sum(p) = 1`` and ``p >= floor``.

    The unconstrained minimiser ``Sigma^{-1} 1 / (1^T Sigma^{-1} 1)`` is
    returned when it is feasible; otherwise a primal active-set method runs
    from a feasible point whose working set is seeded with the infeasible
    entries of that minimiser.
    """
    s = np.asarray(getattr(sigma, "entries", sigma), dtype=float)
    s = 0.5 * (s + s.T)
    n = len(s)
    if floor < 0 or floor * n >= 1:
        raise ValueError("floor must satisfy 0 <= floor < 1/N")
    regularized = False
    eig_min = np.linalg.eigvalsh(s).min()
    if eig_min < -1e-10 * max(np.trace(s), 1e-300):
        delta = 1e-10 * np.trace(s) / n - eig_min
        warnings.warn(f"Sigma is indefinite (min eigenvalue {eig_min:.3e}); adding {delta:.3e} I")
        s = s + delta * np.eye(n)
        regularized = True

    p0 = _closed_form(s)
    if p0 is not None and p0.min() >= floor:
        res, nu = _kkt(s, p0, floor)
        if res <= 1e-8:
            return QPResult(p0, float(p0 @ s @ p0), res, nu, 0, True, regularized)

    # feasible start: working set at the floor, uniform mass on the rest
    active = np.zeros(n, dtype=bool) if p0 is None else p0 < floor
    if active.all():
        active[:] = False
    p = np.full(n, floor)
    p[~active] = (1.0 - floor * active.sum()) / (~active).sum()

    it = 0
    for it in range(1, max_iter + 1):
        free = ~active
        target = np.full(n, floor)
        target[free] = _equality_qp(s, free, floor, 1.0 - floor * active.sum())
        step = target - p
        if np.abs(step).max() <= tol:
            g = 2.0 * s @ p
            nu = g[free].mean()
            mu = g - nu
            mu[free] = 0.0
            j = int(np.argmin(mu))
            if mu[j] >= -tol * max(1.0, np.abs(g).max()):
                break
            active[j] = False
            continue
        # largest step keeping free entries above the floor
        shrinking = free & (step < -tol)
        alpha = 1.0
        blocking = -1
        if shrinking.any():
            ratios = (p[shrinking] - floor) / -step[shrinking]
            k = int(np.argmin(ratios))
            if ratios[k] < 1.0:
                alpha = max(ratios[k], 0.0)
                blocking = int(np.flatnonzero(shrinking)[k])
        p = p + alpha * step
        if blocking >= 0:
            p[blocking] = floor
            active[blocking] = True
    else:
        log.warning("active-set iteration limit %d reached", max_iter)

    p = np.clip(p, floor, None)
    p[~active] += (1.0 - p.sum()) / max((~active).sum(), 1)
    res, nu = _kkt(s, p, floor)
    return QPResult(p, float(p @ s @ p), res, nu, it, False, regularized)
