"""Primal simplex for ``max c^T x`` s.t. ``A x = b``, ``x >= 0``.

Revised simplex with a fresh LU factorization of the basis at every pivot,
which keeps badly scaled, highly degenerate problems stable at the sizes
used here (a few thousand columns). Dantzig's largest-coefficient rule
drives pivoting; once a run of degenerate pivots grows long, Bland's rule
takes over until the objective moves again, so no basis can repeat.
Heavily degenerate problems can also be solved on a randomly perturbed
right-hand side (``perturb``); the final basis is then re-evaluated on the
original ``b``, which leaves it optimal whenever it stays feasible.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lu_factor, lu_solve

log = logging.getLogger(__name__)


class SimplexError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class SimplexResult:
    x: np.ndarray
    objective: float
    basis: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    iterations: int
    bland_activated: bool


def simplex(
    c: np.ndarray,
    A: np.ndarray,
    b: np.ndarray,
    basis,
    tol: float = 1e-11,
    max_iter: int = 100_000,
    degenerate_switch: int = 50,
    pivot_tol: float = 1e-9,
    perturb: float = 0.0,
) -> SimplexResult:
    """Maximise ``c @ x`` from the feasible basis ``basis`` (column indices).

    ``tol`` is the optimality tolerance on reduced costs (relative to
    ``max |c|``); ``pivot_tol`` is the smallest admissible pivot element.
    ``perturb > 0`` pivots on ``b + B d`` with ``B`` the starting basis and
    ``d = perturb * max(1, max |b|) * U(0, 1)`` (fixed internal seed), so
    every starting basic variable is strictly positive.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    m, n = A.shape
    basis = np.array(basis, dtype=np.intp)
    if basis.shape != (m,):
        raise SimplexError("basis must name one column per row")
    scale = max(1.0, np.abs(c).max())
    b_orig = b
    if perturb > 0:
        d = perturb * max(1.0, np.abs(b).max()) * np.random.default_rng(0).random(m)
        b = b + A[:, basis] @ d
    bland = bland_used = False
    degenerate_run = 0
    it = 0
    for it in range(1, max_iter + 1):
        lu = lu_factor(A[:, basis])
        xb = lu_solve(lu, b)
        if it == 1 and xb.min() < -1e-9 * max(1.0, np.abs(xb).max()):
            raise SimplexError("starting basis is not primal feasible")
        xb = np.maximum(xb, 0.0)
        duals = lu_solve(lu, c[basis], trans=1)
        red = c - duals @ A
        red[basis] = 0.0
        improving = np.flatnonzero(red > tol * scale)
        if len(improving) == 0:
            break
        enter = int(improving[0]) if bland else int(improving[np.argmax(red[improving])])
        col = lu_solve(lu, A[:, enter])
        rows = np.flatnonzero(col > pivot_tol)
        if len(rows) == 0:
            raise SimplexError("problem is unbounded")
        ratios = xb[rows] / col[rows]
        best = ratios.min()
        ties = rows[ratios <= best + tol * max(1.0, best)]
        if len(ties) == 1:
            leave = int(ties[0])
        elif bland:
            leave = int(ties[np.argmin(basis[ties])])
        else:
            leave = int(ties[np.argmax(col[ties])])
        # steps that barely move the objective count as degenerate
        if best * red[enter] <= tol * scale:
            degenerate_run += 1
            if degenerate_run >= degenerate_switch and not bland:
                bland = bland_used = True
                log.debug("simplex: Bland's rule after %d degenerate pivots", degenerate_run)
        else:
            degenerate_run = 0
            bland = False
        basis[leave] = enter
    else:
        raise SimplexError(f"iteration limit {max_iter} reached")
    if perturb > 0:
        # reduced costs do not depend on b, so a feasible basis stays optimal
        xb_orig = lu_solve(lu, b_orig)
        if xb_orig.min() >= -1e-9 * max(1.0, np.abs(xb_orig).max()):
            xb = np.maximum(xb_orig, 0.0)
        else:
            log.warning("simplex: final basis infeasible for the unperturbed b; keeping perturbed solution")
    x = np.zeros(n)
    x[basis] = xb
    return SimplexResult(
        x=x,
        objective=float(c @ x),
        basis=basis,
        duals=duals,
        reduced_costs=c - duals @ A,
        iterations=it,
        bland_activated=bland_used,
    )
