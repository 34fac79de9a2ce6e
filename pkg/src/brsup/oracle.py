"""Small-N ground truth for ``W^max``.

``ho_dombry_tables`` computes the probabilities of each location being the
argmax from the matrix ``Q = C^-1 - C^-1 1 1^T C^-1 / (1^T C^-1 1)`` and the
vector ``m = -Q sigma/2 - C^-1 1 / (1^T C^-1 1)``. Given the argmax ``i``,
the remaining log-values relative to the maximum are Gaussian with mean
``Q_{-i}^-1 m_{-i}`` and covariance ``Q_{-i}^-1``, conditioned to be
non-positive.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import norm

from .gauss import _as_rng, sample_spectral
from .model import GaussianModel
from .samplers import SampleBatch

MAX_ORACLE_N = 6


class OracleError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OracleTables:
    Q: np.ndarray
    m: np.ndarray
    argmax_probs: np.ndarray
    argmax_se: np.ndarray
    orthant: np.ndarray
    orthant_se: np.ndarray

    def conditional(self, i: int):
        """Mean and covariance of the non-argmax coordinates given argmax ``i``."""
        keep = np.arange(len(self.m)) != i
        qi = self.Q[np.ix_(keep, keep)]
        cov = np.linalg.inv(qi)
        cov = 0.5 * (cov + cov.T)
        return cov @ self.m[keep], cov


def q_and_m(model: GaussianModel) -> tuple[np.ndarray, np.ndarray]:
    cov = np.asarray(model.cov)
    if model.rank < model.n:
        raise OracleError(
            "covariance is singular; use an anchor off the grid (e.g. a point "
            "anchor outside the locations) so that C is invertible"
        )
    cinv = np.linalg.inv(cov)
    cinv = 0.5 * (cinv + cinv.T)
    u = cinv.sum(axis=1)
    a = u.sum()
    Q = cinv - np.outer(u, u) / a
    Q = 0.5 * (Q + Q.T)
    s = model.sigma
    m = -(0.5 * s + (1.0 - 0.5 * s @ u) / a) @ cinv
    return Q, m


def _orthant(mean: np.ndarray, cov: np.ndarray, n_mc: int, rng) -> tuple[float, float]:
    """``P(X <= 0)`` for ``X ~ N(mean, cov)``; exact in one dimension."""
    if len(mean) == 1:
        return float(norm.cdf(-mean[0] / np.sqrt(cov[0, 0]))), 0.0
    L = np.linalg.cholesky(cov)
    hits = 0
    for start in range(0, n_mc, 1 << 16):
        size = min(1 << 16, n_mc - start)
        x = rng.standard_normal((size, len(mean))) @ L.T + mean
        hits += int(np.all(x <= 0, axis=1).sum())
    prob = hits / n_mc
    return prob, float(np.sqrt(prob * (1 - prob) / n_mc))


def ho_dombry_tables(model: GaussianModel, n_cdf_mc: int = 1_000_000, rng=None) -> OracleTables:
    """Argmax probabilities with delta-method standard errors."""
    n = model.n
    if n > MAX_ORACLE_N:
        raise OracleError(f"oracle limited to N <= {MAX_ORACLE_N}")
    rng = _as_rng(rng)
    if n == 1:
        one = np.ones(1)
        return OracleTables(np.zeros((1, 1)), np.zeros(1), one, np.zeros(1), one, np.zeros(1))
    Q, m = q_and_m(model)
    logw = np.empty(n)
    phi = np.empty(n)
    phi_se = np.empty(n)
    for i in range(n):
        keep = np.arange(n) != i
        qi = Q[np.ix_(keep, keep)]
        mi = m[keep]
        cov = np.linalg.inv(qi)
        cov = 0.5 * (cov + cov.T)
        mu = cov @ mi
        _, logdet = np.linalg.slogdet(qi)
        logw[i] = -0.5 * logdet + 0.5 * mi @ mu
        phi[i], phi_se[i] = _orthant(mu, cov, n_cdf_mc, rng)
    a = np.exp(logw - logw.max())
    t = a * phi
    probs = t / t.sum()
    # d probs_i / d phi_k = probs_i (delta_ik - probs_k) / phi_k
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(phi > 0, phi_se / phi, 0.0)
    jac = probs[:, None] * (np.eye(n) - probs[None, :]) * rel[None, :]
    se = np.sqrt((jac**2).sum(axis=1))
    return OracleTables(Q=Q, m=m, argmax_probs=probs, argmax_se=se, orthant=phi, orthant_se=phi_se)


def ho_dombry_sample(
    tables: OracleTables, model: GaussianModel, rng, size: int = 1, max_tries: int = 10_000_000
) -> tuple[np.ndarray, np.ndarray]:
    """Sup-normalized draws ``W^max - max(W^max)`` and their argmax indices."""
    rng = _as_rng(rng)
    n = model.n
    out = np.zeros((size, n))
    idx = rng.choice(n, size=size, p=tables.argmax_probs)
    if n == 1:
        return out, idx
    for i in np.unique(idx):
        rows = np.flatnonzero(idx == i)
        mean, cov = tables.conditional(int(i))
        L = np.linalg.cholesky(cov)
        keep = np.arange(n) != i
        need = len(rows)
        got = []
        tries = 0
        while need > 0:
            batch = max(64, int(2 * need / max(tables.orthant[i], 1e-3)))
            x = rng.standard_normal((batch, n - 1)) @ L.T + mean
            ok = x[np.all(x <= 0, axis=1)][:need]
            got.append(ok)
            need -= len(ok)
            tries += batch
            if tries > max_tries and need > 0:
                raise OracleError("truncated Gaussian rejection stalled; try a smaller N")
        vals = np.concatenate(got)
        block = np.zeros((len(rows), n))
        block[:, keep] = vals
        out[rows] = block
    return out, idx


def resampling_oracle(model: GaussianModel, n_pool: int, n_out: int, rng) -> SampleBatch:
    """Approximate ``W^max`` draws by resampling spectral draws with weights ``max exp(w)``.

    ``meta["c_inf"]`` holds the mean weight, an estimate of the extremal coefficient.
    """
    rng = _as_rng(rng)
    pool = sample_spectral(model, rng, n_pool)
    top = pool.max(axis=1)
    wts = np.exp(top - top.max())
    pick = rng.choice(n_pool, size=n_out, replace=True, p=wts / wts.sum())
    chosen = pool[pick]
    return SampleBatch(
        variant="resample",
        log_sup=chosen.max(axis=1),
        argmax=chosen.argmax(axis=1),
        proposal_counts=np.ones(n_out, dtype=np.intp),
        samples=chosen,
        meta={"c_inf": float(np.exp(top).mean())},
    )
