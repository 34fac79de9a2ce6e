"""Gaussian sampling kernels and log-density pieces for spectral vectors.

All draws use ``w = F z * s + shift - sigma / 2`` with ``F`` the model's
rank-revealing factor, so degenerate coordinates stay pinned automatically.
Callers pass ``numpy.random.Generator`` instances; one generator per stream.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .model import GaussianModel


def _as_rng(rng) -> np.random.Generator:
    return rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)


def _latent(model: GaussianModel, rng, size):
    shape = (model.rank,) if size is None else (size, model.rank)
    return _as_rng(rng).standard_normal(shape)


def sample_spectral(model: GaussianModel, rng, size: int | None = None) -> np.ndarray:
    """Draw ``W`` with ``E exp(W_i) = 1``: mean ``-sigma/2``, covariance ``C``."""
    z = _latent(model, rng, size)
    return z @ model.factor.T - 0.5 * model.sigma


def sample_inflated(
    model: GaussianModel, i, eps: float, rng, size: int | None = None
) -> np.ndarray:
    """Draw from ``g_{i,eps}``: mean ``C[:, i] - sigma/2``, covariance ``C / (1 - eps)``.

    ``i`` may be an integer or, with ``size`` given, an array of component
    indices of length ``size``.
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    z = _latent(model, rng, size)
    y = z / np.sqrt(1.0 - eps) + model.factor[i]
    return y @ model.factor.T - 0.5 * model.sigma


def sample_shifted(model: GaussianModel, i, rng, size: int | None = None) -> np.ndarray:
    """Draw ``W^(i)``, distributed as ``W + C[:, i]`` (density ``exp(w_i) f(w)``)."""
    return sample_inflated(model, i, 0.0, rng, size)


@dataclass(frozen=True, eq=False)
class ProposalMixture:
    """Mixture ``sum_i p_i g_{i,eps}``; ``eps = 0`` gives ``sum_i p_i f_i``.

    ``weights=None`` stands for the plain spectral density ``f`` itself
    (the proposal of the original independence sampler).
    """

    model: GaussianModel
    weights: np.ndarray | None = None
    epsilon: float = 0.0

    def __post_init__(self):
        if self.weights is not None:
            p = np.asarray(self.weights, dtype=float)
            if p.shape != (self.model.n,):
                raise ValueError("weights must have one entry per grid point")
            if np.any(p < -1e-12) or abs(p.sum() - 1.0) > 1e-9:
                raise ValueError("weights must lie on the probability simplex")
            p = np.clip(p, 0.0, None)
            p = p / p.sum()
            p.setflags(write=False)
            object.__setattr__(self, "weights", p)
        if not 0 <= self.epsilon < 1:
            raise ValueError("epsilon must lie in [0, 1)")

    @classmethod
    def uniform(cls, model: GaussianModel, epsilon: float = 0.0) -> "ProposalMixture":
        return cls(model, np.full(model.n, 1.0 / model.n), epsilon)

    @property
    def is_plain(self) -> bool:
        return self.weights is None

    @property
    def log_weights(self) -> np.ndarray:
        with np.errstate(divide="ignore"):
            return np.log(self.weights)

    def draw(self, rng, size: int):
        """Return ``(w, idx, y)``: samples, component indices, latent coordinates.

        ``y`` satisfies ``w + sigma/2 = F y``; the quadratic form is ``|y|^2``.
        """
        rng = _as_rng(rng)
        m = self.model
        if self.is_plain:
            z = rng.standard_normal((size, m.rank))
            return z @ m.factor.T - 0.5 * m.sigma, np.full(size, -1), z
        idx = rng.choice(m.n, size=size, p=self.weights)
        z = rng.standard_normal((size, m.rank))
        y = z / np.sqrt(1.0 - self.epsilon) + m.factor[idx]
        return y @ m.factor.T - 0.5 * m.sigma, idx, y

    def sample(self, rng, size: int) -> np.ndarray:
        return self.draw(rng, size)[0]


def log_density_ratio_terms(mixture: ProposalMixture, w: np.ndarray, quad: bool = True):
    """Scalars shared by all acceptance formulas, evaluated row-wise.

    Returns
    -------
    wmax : ``max_j w_j``
    lse : ``log sum_i p_i exp((1 - eps) w_i)``
    qf : ``(w + sigma/2)^T C^+ (w + sigma/2)`` (``None`` if ``quad`` is false)
    """
    w = np.asarray(w, dtype=float)
    wmax = w.max(axis=-1)
    if mixture.is_plain:
        lse = None
    else:
        lse = logsumexp(mixture.log_weights + (1.0 - mixture.epsilon) * w, axis=-1)
    qf = mixture.model.quad_form(w) if quad else None
    return wmax, lse, qf
