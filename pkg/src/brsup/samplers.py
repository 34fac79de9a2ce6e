"""Independence-sampler MCMC and exact rejection sampling of ``W^max``.

Variants
--------
1A  Metropolis-Hastings with the spectral density ``f`` as proposal.
1B  Metropolis-Hastings with the mixture ``sum_i p_i f_i``.
2A  Rejection sampling from ``N^-1 sum_i f_i`` with ``C = 1/N``.
2B  Rejection sampling from ``sum_i p_i g_{i,eps}`` with ``C = C_groups(p, eps)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .gauss import ProposalMixture, _as_rng, log_density_ratio_terms
from .model import GaussianModel


class BoundViolation(ArithmeticError):
    """An acceptance probability exceeded one: the constant is not a valid bound."""


BOUND_SLACK = 1e-9


@dataclass(eq=False)
class Chain:
    """Output of a Metropolis-Hastings run (burn-in excluded from ``states``)."""

    variant: str
    log_sup: np.ndarray
    argmax: np.ndarray
    accepted: np.ndarray
    states: np.ndarray | None = None
    burn_in: int = 0
    burn_in_accepted: int = 0

    def __len__(self) -> int:
        return len(self.log_sup)

    @property
    def acceptance_rate(self) -> float:
        """Fraction of accepted proposals over the whole run, burn-in included."""
        total = len(self.accepted) + self.burn_in
        return float((self.accepted.sum() + self.burn_in_accepted) / total)


@dataclass(eq=False)
class SampleBatch:
    """Independent draws of ``W^max`` with per-sample proposal counts."""

    variant: str
    log_sup: np.ndarray
    argmax: np.ndarray
    proposal_counts: np.ndarray
    samples: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.log_sup)

    @property
    def mean_proposals(self) -> float:
        return float(self.proposal_counts.mean())


def _log_target_ratio(mixture: ProposalMixture, w: np.ndarray) -> np.ndarray:
    """``log(f_max / f_prop)`` up to a constant."""
    wmax, lse, _ = log_density_ratio_terms(mixture, w, quad=False)
    return wmax if mixture.is_plain else wmax - lse


def mcmc_acceptance(w_old, w_new, mixture: ProposalMixture) -> float:
    """Metropolis-Hastings acceptance probability for an independence proposal."""
    with np.errstate(invalid="ignore"):
        d = _log_target_ratio(mixture, np.asarray(w_new)) - _log_target_ratio(mixture, np.asarray(w_old))
    # 0/0 is read as 0
    if np.isnan(d):
        return 0.0
    return float(np.exp(min(d, 0.0)))


def iter_mcmc(
    mixture: ProposalMixture, n_steps: int, rng, burn_in: int = 1000, batch: int = 1024
) -> Iterator[tuple[np.ndarray | None, np.ndarray]]:
    """Yield ``(states, accepted)`` blocks of a chain after burn-in.

    The initial state is drawn from the proposal. Burn-in blocks are yielded
    too, flagged by ``states`` being ``None``; their acceptance flags count.
    """
    rng = _as_rng(rng)
    state = mixture.sample(rng, 1)[0]
    cur = _log_target_ratio(mixture, state)
    remaining_burn = burn_in
    remaining = n_steps
    while remaining_burn > 0 or remaining > 0:
        size = min(batch, remaining_burn) if remaining_burn > 0 else min(batch, remaining)
        props = mixture.sample(rng, size)
        lr = _log_target_ratio(mixture, props)
        logu = np.log(rng.random(size))
        take = np.empty(size, dtype=bool)
        src = np.empty(size, dtype=np.intp)
        last = -1
        for k in range(size):
            if logu[k] < lr[k] - cur:
                cur = lr[k]
                last = k
                take[k] = True
            else:
                take[k] = False
            src[k] = last
        out = np.where(src[:, None] >= 0, props[np.maximum(src, 0)], state)
        if last >= 0:
            state = props[last]
        if remaining_burn > 0:
            remaining_burn -= size
            yield None, take
        else:
            remaining -= size
            yield out, take


def run_mcmc(
    mixture: ProposalMixture,
    n_steps: int,
    rng,
    burn_in: int = 1000,
    keep_states: bool = True,
    batch: int = 1024,
) -> Chain:
    """Run the independence sampler targeting ``f_max``.

    A plain mixture (``weights=None``) gives variant 1A, weighted mixtures 1B.
    """
    if mixture.epsilon != 0:
        raise ValueError("the MCMC proposal uses eps = 0")
    log_sup, argmax, acc, states = [], [], [], []
    burn_acc = 0
    for block, take in iter_mcmc(mixture, n_steps, rng, burn_in, batch):
        if block is None:
            burn_acc += int(take.sum())
            continue
        log_sup.append(block.max(axis=1))
        argmax.append(block.argmax(axis=1))
        acc.append(take)
        if keep_states:
            states.append(block)
    cat = (lambda xs, dt: np.concatenate(xs) if xs else np.empty(0, dtype=dt))
    return Chain(
        variant="1A" if mixture.is_plain else "1B",
        log_sup=cat(log_sup, float),
        argmax=cat(argmax, np.intp),
        accepted=cat(acc, bool),
        states=(cat(states, float).reshape(-1, mixture.model.n) if keep_states else None),
        burn_in=burn_in,
        burn_in_accepted=burn_acc,
    )


def log_rejection_acceptance(mixture: ProposalMixture, C: float, w, qf=None) -> np.ndarray:
    """Log acceptance probability of rejection sampling for proposals ``w``.

    ``log C - eps/2 * Q(w) - N/2 * log(1 - eps) - log sum_i p_i exp((1-eps) w_i - max w)``.
    """
    eps = mixture.epsilon
    w = np.asarray(w, dtype=float)
    wmax, lse, _ = log_density_ratio_terms(mixture, w, quad=False)
    out = np.log(C) - (lse - wmax)
    if eps > 0:
        if qf is None:
            qf = mixture.model.quad_form(w)
        out = out - 0.5 * eps * qf - 0.5 * mixture.model.n * np.log1p(-eps)
    return out


def rejection_acceptance(w, mixture: ProposalMixture, C: float, qf=None, check: bool = True):
    """Acceptance probability; raises ``BoundViolation`` if it exceeds one."""
    lp = log_rejection_acceptance(mixture, C, w, qf)
    if check and np.any(lp > np.log1p(BOUND_SLACK)):
        raise BoundViolation(f"acceptance probability {np.exp(lp.max()):.12g} > 1; C={C!r} is not a valid bound")
    prob = np.exp(np.minimum(lp, 0.0))
    return float(prob) if prob.ndim == 0 else prob


def iter_rejection(
    mixture: ProposalMixture, C: float, n_samples: int, rng, batch: int = 2048
) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(samples, proposal_counts)`` blocks of accepted draws.

    Counts include the accepted proposal itself.
    """
    if mixture.is_plain:
        raise ValueError("rejection sampling needs a weighted mixture")
    rng = _as_rng(rng)
    remaining = n_samples
    pending = 0
    while remaining > 0:
        w, _, y = mixture.draw(rng, batch)
        qf = np.einsum("ij,ij->i", y, y) if mixture.epsilon > 0 else None
        prob = rejection_acceptance(w, mixture, C, qf)
        u = rng.random(batch)
        hits = np.flatnonzero(u <= prob)
        if len(hits) == 0:
            pending += batch
            continue
        hits = hits[:remaining]
        counts = np.diff(np.concatenate(([-1], hits)))
        counts[0] += pending
        pending = batch - 1 - hits[-1]
        remaining -= len(hits)
        yield w[hits], counts


def run_rejection(
    mixture: ProposalMixture,
    C: float,
    n_samples: int,
    rng,
    keep_samples: bool = True,
    batch: int = 2048,
    variant: str | None = None,
) -> SampleBatch:
    """Draw ``n_samples`` exact, independent realizations of ``W^max``."""
    log_sup, argmax, counts, samples = [], [], [], []
    for block, cnt in iter_rejection(mixture, C, n_samples, rng, batch):
        log_sup.append(block.max(axis=1))
        argmax.append(block.argmax(axis=1))
        counts.append(cnt)
        if keep_samples:
            samples.append(block)
    if variant is None:
        variant = "2A" if mixture.epsilon == 0 else "2B"
    return SampleBatch(
        variant=variant,
        log_sup=np.concatenate(log_sup),
        argmax=np.concatenate(argmax),
        proposal_counts=np.concatenate(counts),
        samples=np.concatenate(samples) if keep_samples else None,
        meta={"C": float(C), "epsilon": float(mixture.epsilon)},
    )


def variant_1a(model: GaussianModel) -> ProposalMixture:
    return ProposalMixture(model)


def variant_2a(model: GaussianModel) -> tuple[ProposalMixture, float]:
    return ProposalMixture.uniform(model), 1.0 / model.n
