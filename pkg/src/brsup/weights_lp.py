"""Explicit bounds for rejection sampling with inflated Gaussian mixtures.

For a group ``I`` of mixture components, a target index ``j`` and convex
weights ``lam`` over ``I``::

    c_I^(j)(eps, lam) = (1 - eps)^(N/2) * exp(-(1 - eps)/eps * sum_k lam_k gamma(t_k - t_j)
                                            + (1 - eps)^2/(2 eps) * sum_kl lam_k lam_l gamma(t_k - t_l))

bounds ``sum_k lam_k g_{k,eps} / f_j`` from below. Summing over a partition
``J^(j)`` and minimising over ``j`` gives ``C_groups(p, eps)``, a valid
acceptance constant. The mixture weights are tuned by alternating a
max-min linear program in ``p`` with a one-dimensional search in ``eps``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .model import GaussianModel
from .simplex import SimplexResult, simplex

log = logging.getLogger(__name__)

EPS_BRACKET = (1e-6, 1.0 - 1e-6)


def c_lower_bound(model: GaussianModel, I, j: int, eps: float, lam) -> float:
    """Bound ``c_I^(j)(eps, lam)``; at ``eps = 0`` the limiting value (0 or 1)."""
    idx = np.atleast_1d(np.asarray(I, dtype=np.intp))
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    if lam.shape != idx.shape or np.any(lam < 0) or abs(lam.sum() - 1) > 1e-9:
        raise ValueError("lam must be a probability vector over I")
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    to_j = model.gamma[idx, j]
    if eps == 0:
        return 1.0 if np.all(to_j == 0) else 0.0
    quad = lam @ model.gamma[np.ix_(idx, idx)] @ lam
    return math.exp(_log_c(model.n, eps, lam @ to_j, quad))


def _log_c(n, eps, lin, quad):
    return 0.5 * n * np.log1p(-eps) - (1 - eps) / eps * lin + (1 - eps) ** 2 / (2 * eps) * quad


@dataclass(frozen=True, eq=False)
class PartitionSet:
    """Partitions ``J^(j)`` of the index set, one per target location ``j``.

    ``labels[j, i]`` is the group of ``i`` within ``J^(j)``; group ids are
    global, so ``labels`` values run over ``0 .. n_groups - 1`` and
    ``group_target[g]`` recovers ``j``.
    """

    labels: np.ndarray
    group_target: np.ndarray
    pair_group: np.ndarray = field(repr=False)
    pair_k: np.ndarray = field(repr=False)
    pair_l: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.labels.shape[0]

    @property
    def n_groups(self) -> int:
        return len(self.group_target)

    def groups(self, j: int) -> list[np.ndarray]:
        row = self.labels[j]
        ids = np.unique(row)
        return [np.flatnonzero(row == g) for g in ids]

    def group_sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_groups)


def _make_partitions(local: np.ndarray) -> PartitionSet:
    """Build a PartitionSet from per-row local labels ``0 .. G_j - 1``."""
    n = local.shape[0]
    counts = local.max(axis=1) + 1
    offsets = np.concatenate(([0], np.cumsum(counts)[:-1]))
    labels = local + offsets[:, None]
    group_target = np.repeat(np.arange(n), counts)
    # within-group index pairs, handled by group size to stay vectorized
    flat = labels.ravel()
    order = np.argsort(flat, kind="stable")
    sizes = np.bincount(flat, minlength=len(group_target))
    starts = np.concatenate(([0], np.cumsum(sizes)[:-1]))
    members = order % n
    pg, pk, pl = [], [], []
    for size in np.unique(sizes):
        gids = np.flatnonzero(sizes == size)
        mem = members[starts[gids][:, None] + np.arange(size)]
        pg.append(np.repeat(gids, size * size))
        pk.append(np.repeat(mem, size, axis=1).ravel())
        pl.append(np.tile(mem, (1, size)).ravel())
    return PartitionSet(
        labels=labels,
        group_target=group_target,
        pair_group=np.concatenate(pg),
        pair_k=np.concatenate(pk),
        pair_l=np.concatenate(pl),
    )


def singleton_partitions(n: int) -> PartitionSet:
    return _make_partitions(np.tile(np.arange(n), (n, 1)))


def build_partitions(model: GaussianModel, tol: float = 1e-9) -> PartitionSet:
    """Group indices by their variogram distance to each ``t_j``.

    Sorted distances are split wherever consecutive values differ by more
    than ``tol``; ``tol = 0`` pools exact ties only.
    """
    if tol < 0:
        raise ValueError("tol must be non-negative")
    gam = model.gamma
    n = model.n
    local = np.empty((n, n), dtype=np.intp)
    for j in range(n):
        order = np.argsort(gam[:, j], kind="stable")
        vals = gam[order, j]
        breaks = np.concatenate(([0], np.diff(vals) > tol))
        local[j, order] = np.cumsum(breaks)
    return _make_partitions(local)


@dataclass(frozen=True, eq=False)
class GroupTerms:
    """Per-group mass ``|p_I|``, linear term and quadratic term for fixed weights."""

    mass: np.ndarray
    lin: np.ndarray
    quad: np.ndarray
    target: np.ndarray
    n: int

    def log_c(self, eps: float) -> np.ndarray:
        return _log_c(self.n, float(eps), self.lin, self.quad)

    def value(self, eps) -> np.ndarray:
        """``min_j sum_{I in J^(j)} |p_I| c_I^(j)(eps, lam_I)`` for each eps."""
        eps_arr = np.atleast_1d(np.asarray(eps, dtype=float))
        out = np.empty(len(eps_arr))
        for k, e in enumerate(eps_arr):
            if e == 0:
                # only the group {j} survives the limit
                contrib = np.where(self.lin == 0, self.mass, 0.0)
            else:
                contrib = self.mass * np.exp(self.log_c(e))
            out[k] = np.bincount(self.target, weights=contrib, minlength=self.n).min()
        return out if np.ndim(eps) else float(out[0])


def group_terms(model: GaussianModel, parts: PartitionSet, p, lam_from=None) -> GroupTerms:
    """Group terms with ``lam_I = q_I / |q_I|`` for ``q = lam_from`` (default ``p``).

    Groups where ``q`` has no mass get uniform ``lam``.
    """
    p = np.asarray(p, dtype=float)
    q = p if lam_from is None else np.asarray(lam_from, dtype=float)
    n = model.n
    labels = parts.labels
    ng = parts.n_groups
    tgt = parts.group_target
    mass = np.bincount(labels.ravel(), weights=np.tile(p, n), minlength=ng)
    qmass = np.bincount(labels.ravel(), weights=np.tile(q, n), minlength=ng)
    sizes = parts.group_sizes()
    # lam[j, i] for member i of the group of i in J^(j)
    gm = qmass[labels]
    lam = np.where(gm > 0, q[None, :] / np.where(gm > 0, gm, 1.0), 1.0 / sizes[labels])
    gam = model.gamma
    lin = np.bincount(labels.ravel(), weights=(lam * gam.T).ravel(), minlength=ng)
    jj = tgt[parts.pair_group]
    pw = lam[jj, parts.pair_k] * lam[jj, parts.pair_l] * gam[parts.pair_k, parts.pair_l]
    quad = np.bincount(parts.pair_group, weights=pw, minlength=ng)
    lin[np.abs(lin) < 1e-300] = 0.0
    return GroupTerms(mass=mass, lin=lin, quad=quad, target=tgt, n=n)


def c_groups(model: GaussianModel, parts: PartitionSet, p, eps: float) -> float:
    """Explicit acceptance constant ``C_groups(p, eps)``; empty groups contribute 0."""
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    return group_terms(model, parts, p).value(eps)


def cost_matrix(model: GaussianModel, parts: PartitionSet, eps: float, lam_from) -> np.ndarray:
    """``c[i, j] = c_I^(j)(eps, lam(I))`` for the group ``I`` of ``J^(j)`` holding ``i``."""
    terms = group_terms(model, parts, lam_from)
    if eps == 0:
        logc = np.where(terms.lin == 0, 0.0, -np.inf)
    else:
        logc = terms.log_c(eps)
    return np.exp(logc[parts.labels]).T


@dataclass(frozen=True, eq=False)
class LPResult:
    weights: np.ndarray
    value: float
    simplex: SimplexResult


def solve_lp_simplex(costs) -> LPResult:
    """Maximise ``min_j sum_i p_i c[i, j]`` over the probability simplex.

    Solves the standard form ``max z+ - z-`` with ``z+ - z- + s_j = c[:, j]^T p``,
    ``sum(p) = 1`` and all variables non-negative, starting from the best
    single-component vertex.
    """
    c = np.asarray(costs, dtype=float)
    n = c.shape[0]
    if c.shape != (n, n) or np.any(c < 0):
        raise ValueError("costs must be a non-negative square matrix")
    cmax = c.max()
    if cmax <= 0:
        raise ValueError("all costs vanish")
    cs = c / cmax
    # costs this small cannot move the optimum but upset the pivoting
    cs[cs < 1e-14] = 0.0
    # columns: p_0..p_{n-1}, z+, z-, s_0..s_{n-1}
    nv = 2 * n + 2
    A = np.zeros((n + 1, nv))
    A[:n, :n] = -cs.T
    A[:n, n] = 1.0
    A[:n, n + 1] = -1.0
    A[:n, n + 2:] = np.eye(n)
    A[n, :n] = 1.0
    b = np.zeros(n + 1)
    b[n] = 1.0
    obj = np.zeros(nv)
    obj[n] = 1.0
    obj[n + 1] = -1.0
    k = int(np.argmax(cs.min(axis=1)))
    jstar = int(np.argmin(cs[k]))
    slacks = [n + 2 + j for j in range(n) if j != jstar]
    res = simplex(obj, A, b, [k, n] + slacks, perturb=1e-7)
    p = np.clip(res.x[:n], 0.0, None)
    p /= p.sum()
    if res.bland_activated:
        log.info("LP solve used the Bland anti-cycling rule")
    return LPResult(weights=p, value=float((p @ c).min()), simplex=res)


def maximize_eps(terms: GroupTerms, n_scan: int = 41, n_golden: int = 60, bracket=EPS_BRACKET):
    """Maximise ``C_groups(p, .)`` over ``eps`` in ``{0} u bracket``.

    A log-spaced scan locates the best cell, golden-section search in
    ``log(eps)`` refines it. ``eps = 0`` (value ``min_j p_j``) wins ties.
    """
    lo, hi = np.log(bracket[0]), np.log(bracket[1])
    grid = np.linspace(lo, hi, n_scan)
    vals = terms.value(np.exp(grid))
    k = int(np.argmax(vals))
    a, b = grid[max(k - 1, 0)], grid[min(k + 1, n_scan - 1)]
    invphi = (math.sqrt(5) - 1) / 2
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = terms.value(math.exp(x1)), terms.value(math.exp(x2))
    for _ in range(n_golden):
        if f1 >= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = terms.value(math.exp(x1))
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = terms.value(math.exp(x2))
    cands = [(vals[k], grid[k]), (f1, x1), (f2, x2)]
    best_val, best_x = max(cands, key=lambda t: t[0])
    zero_val = terms.value(0.0)
    if zero_val >= best_val:
        return 0.0, float(zero_val)
    return float(math.exp(best_x)), float(best_val)


@dataclass(frozen=True, eq=False)
class ProposalOptimum:
    weights: np.ndarray
    epsilon: float
    c_groups: float
    trace: list = field(default_factory=list)
    stalled: bool = False


def _eps_starts(n: int, n_start: int) -> np.ndarray:
    lo, hi = EPS_BRACKET
    return np.clip(np.geomspace(0.25 / n, 8.0 / n, n_start), lo, hi)


def optimize_proposal(
    model: GaussianModel,
    parts: PartitionSet | None = None,
    eps0: float | None = None,
    max_iter: int = 20,
    tol: float = 1e-4,
    n_start: int = 8,
    halvings: int = 4,
) -> ProposalOptimum:
    """Alternate the weight LP (for fixed ``eps`` and ``lam``) and the ``eps`` search.

    Start: with ``eps0`` given, uniform weights and ``eps0``. With
    ``eps0=None`` each of ``n_start`` values log-spaced over
    ``[1/(4N), 8/N]`` is tried: one LP with uniform ``lam`` followed by the
    ``eps`` search, and the best pair is kept.

    Each round solves the LP with ``lam_I = p_I / |p_I|`` and moves towards
    its solution, halving the step up to ``halvings`` times until
    ``C_groups`` (with ``eps`` re-optimised) increases. Stops when the
    relative gain drops below ``tol`` or after ``max_iter`` rounds; if no
    step improves, the run ends with ``stalled=True``.
    """
    parts = build_partitions(model) if parts is None else parts
    n = model.n
    u = np.full(n, 1.0 / n)
    trace = []
    if eps0 is None:
        best = (c_groups(model, parts, u, 0.0), u, 0.0)
        for e in _eps_starts(n, n_start):
            lp = solve_lp_simplex(cost_matrix(model, parts, float(e), u))
            eps, val = maximize_eps(group_terms(model, parts, lp.weights))
            trace.append({"iter": 0, "eps0": float(e), "epsilon": eps, "c_groups": val,
                          "lp_value": lp.value, "simplex_iterations": lp.simplex.iterations})
            if val > best[0]:
                best = (val, lp.weights, eps)
    else:
        if not 0 < eps0 < 1:
            raise ValueError("eps0 must lie in (0, 1)")
        best = (c_groups(model, parts, u, eps0), u, eps0)
        trace.append({"iter": 0, "eps0": eps0, "epsilon": eps0, "c_groups": best[0], "lp_value": None})
    stalled = False
    for it in range(1, max_iter + 1):
        val, p, eps = best
        lp = solve_lp_simplex(cost_matrix(model, parts, eps, p))
        step = 1.0
        for _ in range(halvings + 1):
            q = (1.0 - step) * p + step * lp.weights
            e_new, v_new = maximize_eps(group_terms(model, parts, q))
            if v_new > val:
                break
            step *= 0.5
        else:
            stalled = True
            trace.append({"iter": it, "epsilon": eps, "c_groups": val, "lp_value": lp.value,
                          "step": 0.0, "simplex_iterations": lp.simplex.iterations})
            break
        trace.append({"iter": it, "epsilon": e_new, "c_groups": v_new, "lp_value": lp.value,
                      "step": step, "simplex_iterations": lp.simplex.iterations,
                      "bland": lp.simplex.bland_activated})
        log.info("round %d: eps=%.4g C_groups=%.6g step=%g", it, e_new, v_new, step)
        best = (v_new, q, e_new)
        if v_new - val <= tol * val:
            break
    return ProposalOptimum(weights=best[1], epsilon=best[2], c_groups=best[0], trace=trace, stalled=stalled)
