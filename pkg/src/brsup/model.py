"""Finite-grid Gaussian models behind Brown-Resnick spectral vectors.

A model holds the covariance ``C`` of ``W(t) = G(t) - Var G(t) / 2`` on a
finite set of locations, where ``G`` is a centred Gaussian process with
stationary increments pinned down by an anchor (a single location or the
average over a set of reference locations).
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import lapack


class ModelError(ValueError):
    """Raised when a covariance matrix cannot be factorized."""


@dataclass(frozen=True)
class Grid:
    """Ordered set of distinct locations ``t_1, ..., t_N`` in ``R^d``."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise ValueError("grid needs at least one point")
        if len(np.unique(pts, axis=0)) != len(pts):
            raise ValueError("grid points must be pairwise distinct")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    @classmethod
    def regular(cls, axes: Sequence[tuple[float, float, float]]) -> "Grid":
        """Cartesian grid from ``(start, stop, step)`` per dimension.

        Points are ordered with the first coordinate varying slowest.
        """
        ticks = []
        for start, stop, step in axes:
            if step <= 0 or stop < start:
                raise ValueError(f"bad axis {(start, stop, step)}")
            count = int(round((stop - start) / step)) + 1
            ticks.append(np.linspace(start, start + (count - 1) * step, count))
        return cls(np.array(list(itertools.product(*ticks)), dtype=float))

    def bounding_corners(self) -> np.ndarray:
        lo, hi = self.points.min(axis=0), self.points.max(axis=0)
        return np.array(list(itertools.product(*zip(lo, hi))), dtype=float)


@dataclass(frozen=True)
class Variogram:
    """Fractional-power variogram ``gamma(h) = ||h / scale||^alpha``."""

    scale: float = 1.0
    alpha: float = 1.0
    family: str = "power"

    def __post_init__(self):
        if self.family != "power":
            raise ValueError(f"unsupported variogram family {self.family!r}")
        if not self.scale > 0:
            raise ValueError("scale must be positive")
        if not 0 < self.alpha <= 2:
            raise ValueError("alpha must lie in (0, 2]")

    def __call__(self, h) -> np.ndarray | float:
        h = np.asarray(h, dtype=float)
        if h.ndim == 0:
            h = h[None]
        r = np.linalg.norm(h, axis=-1) / self.scale
        out = r**self.alpha
        return float(out) if out.ndim == 0 else out

    def pairwise(self, a: np.ndarray, b: np.ndarray | None = None) -> np.ndarray:
        """Matrix ``gamma(a_i - b_j)``."""
        b = a if b is None else b
        return self(a[:, None, :] - b[None, :, :])


def eval_variogram(v: Variogram, h) -> float:
    return v(h)


@dataclass(frozen=True)
class Anchor:
    """How the Gaussian process with stationary increments is pinned.

    ``kind="point"`` sets ``G(location) = 0``; ``kind="corners"`` subtracts
    the average of ``G`` over the corners of the grid's bounding box.
    """

    kind: str = "corners"
    location: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ("point", "corners"):
            raise ValueError(f"unknown anchor kind {self.kind!r}")
        if self.kind == "point" and self.location is None:
            raise ValueError("point anchor needs a location")

    @classmethod
    def point(cls, location) -> "Anchor":
        return cls("point", tuple(float(x) for x in np.atleast_1d(location)))

    @classmethod
    def corners(cls) -> "Anchor":
        return cls("corners")

    def references(self, grid: Grid) -> np.ndarray:
        if self.kind == "point":
            loc = np.asarray(self.location, dtype=float)[None, :]
            if loc.shape[1] != grid.dim:
                raise ValueError("anchor dimension does not match grid")
            return loc
        return grid.bounding_corners()


@dataclass(frozen=True, eq=False)
class GaussianModel:
    """Covariance structure of the spectral vector ``W`` on a grid.

    Attributes
    ----------
    cov : (N, N) covariance matrix ``C`` of ``W``.
    sigma : variances ``diag(C)``.
    factor : (N, r) matrix ``F`` of full column rank with ``F F^T = C``.
    factor_pinv : (r, N) left inverse of ``factor``; turns ``w + sigma/2``
        into the latent coordinates used for quadratic forms.
    gamma : (N, N) variogram matrix ``gamma(t_i - t_j)``.
    degenerate_index : index ``i*`` with ``C[i*, i*] == 0`` if any.
    """

    grid: Grid
    variogram: Variogram
    anchor: Anchor
    cov: np.ndarray
    sigma: np.ndarray
    factor: np.ndarray
    factor_pinv: np.ndarray
    gamma: np.ndarray
    degenerate_index: int | None = None
    pivots: np.ndarray = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def rank(self) -> int:
        return self.factor.shape[1]

    def quad_form(self, w: np.ndarray) -> np.ndarray:
        """``(w + sigma/2)^T C^+ (w + sigma/2)`` for rows of ``w``.

        Exact for ``w`` in the support of the model, i.e. ``w + sigma/2`` in
        the range of ``C``.
        """
        y = (np.asarray(w) + 0.5 * self.sigma) @ self.factor_pinv.T
        return np.einsum("...i,...i->...", y, y)


def anchored_covariance(grid: Grid, v: Variogram, anchor: Anchor) -> np.ndarray:
    """Covariance of ``G(t) = G0(t) - mean_a G0(a)`` over reference points ``a``.

    Bilinear expansion in increments of ``G0`` gives
    ``C_ij = m_i + m_j - gamma(t_i - t_j) - mean_{a,a'} gamma(a - a')`` with
    ``m_i = mean_a gamma(t_i - a)``.
    """
    refs = anchor.references(grid)
    g_pts = v.pairwise(grid.points)
    m = v.pairwise(grid.points, refs).mean(axis=1)
    g_refs = v.pairwise(refs).mean()
    cov = m[:, None] + m[None, :] - g_pts - g_refs
    return 0.5 * (cov + cov.T)


def pivoted_factor(cov: np.ndarray, rtol: float = 1e-10):
    """Rank-revealing Cholesky factor ``F`` (N x r) with ``F F^T = cov``.

    Pivots below ``rtol * max(diag)`` terminate the factorization. The
    remaining Schur complement must vanish to the same tolerance, otherwise
    the matrix is not positive semidefinite and ``ModelError`` is raised.
    """
    n = cov.shape[0]
    scale = float(np.max(np.diag(cov), initial=0.0))
    if scale <= 0:
        if np.any(np.abs(cov) > 0):
            raise ModelError("covariance has non-positive diagonal but nonzero entries")
        return np.zeros((n, 0)), np.arange(n)
    c, piv, rank, info = lapack.dpstrf(cov, lower=1, tol=rtol * scale)
    if info < 0:
        raise ModelError(f"dpstrf failed with info={info}")
    piv = piv - 1
    low = np.tril(c)[:, :rank]
    factor = np.zeros((n, rank))
    factor[piv] = low
    resid = cov - factor @ factor.T
    bad = np.linalg.norm(resid) > 1e-8 * max(np.linalg.norm(cov), 1.0)
    if bad:
        rest = piv[rank:]
        schur = np.diag(resid)[rest] if len(rest) else np.array([0.0])
        raise ModelError(
            f"covariance is not positive semidefinite: smallest pivot "
            f"{schur.min():.3e} (relative {schur.min() / scale:.3e})"
        )
    return factor, piv


def build_model(
    grid: Grid, variogram: Variogram, anchor: Anchor | None = None, rtol: float = 1e-10
) -> GaussianModel:
    """Assemble the anchored covariance, its factor and the variogram matrix."""
    anchor = Anchor.corners() if anchor is None else anchor
    cov = anchored_covariance(grid, variogram, anchor)
    sigma = np.diag(cov).copy()
    scale = max(float(sigma.max()), 1.0)
    zero = np.flatnonzero(sigma <= rtol * scale)
    for i in zero:
        cov[i, :] = 0.0
        cov[:, i] = 0.0
        sigma[i] = 0.0
    factor, piv = pivoted_factor(cov, rtol)
    factor[zero] = 0.0
    if factor.shape[1]:
        factor_pinv = np.linalg.solve(factor.T @ factor, factor.T)
    else:
        factor_pinv = np.zeros((0, grid.n))
    gamma = variogram.pairwise(grid.points)
    for arr in (cov, sigma, factor, factor_pinv, gamma, piv):
        arr.setflags(write=False)
    return GaussianModel(
        grid=grid,
        variogram=variogram,
        anchor=anchor,
        cov=cov,
        sigma=sigma,
        factor=factor,
        factor_pinv=factor_pinv,
        gamma=gamma,
        degenerate_index=int(zero[0]) if len(zero) else None,
        pivots=piv,
    )


def square_grid(step: float = 0.2) -> Grid:
    """The square ``{0, step, ..., 5}^2`` used in the reference illustration."""
    return Grid.regular([(0.0, 5.0, step), (0.0, 5.0, step)])


def square_model(step: float = 0.2) -> GaussianModel:
    return build_model(square_grid(step), Variogram(scale=5.0, alpha=1.5), Anchor.corners())
