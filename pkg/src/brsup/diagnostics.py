"""Chain and batch diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .gauss import _as_rng, sample_spectral
from .model import GaussianModel


def estimate_c_inf(model: GaussianModel, n_mc: int, rng, block: int = 4096) -> tuple[float, float]:
    """Extremal coefficient ``E max_i exp(W_i)`` with its Monte-Carlo standard error."""
    if n_mc < 2:
        raise ValueError("n_mc must be at least 2")
    rng = _as_rng(rng)
    vals = np.empty(n_mc)
    for start in range(0, n_mc, block):
        size = min(block, n_mc - start)
        vals[start:start + size] = np.exp(sample_spectral(model, rng, size).max(axis=1))
    return float(vals.mean()), float(vals.std(ddof=1) / np.sqrt(n_mc))


def acf(x, max_lag: int) -> np.ndarray:
    """Biased (``1/n``) autocorrelation estimate for lags ``0..max_lag``."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n <= max_lag:
        raise ValueError("series must be longer than max_lag")
    d = x - x.mean()
    var = d @ d / n
    if not var > 0:
        raise ValueError("series is constant; autocorrelation undefined")
    size = 1 << int(np.ceil(np.log2(2 * n)))
    f = np.fft.rfft(d, size)
    cov = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1] / n
    return cov / var


def acf_sup_stat(chain, max_lag: int) -> np.ndarray:
    """ACF of ``||exp(W^(k))||_inf`` along a chain (or of a given log-sup series)."""
    log_sup = chain if isinstance(chain, (np.ndarray, list, tuple)) else chain.log_sup
    return acf(np.exp(np.asarray(log_sup, dtype=float)), max_lag)


def effective_sample_size(x) -> float:
    """ESS with Geyer's initial positive sequence truncation."""
    x = np.asarray(x, dtype=float)
    n = len(x)
    if n < 4:
        return float(n)
    try:
        rho = acf(x, n - 1)
    except ValueError:
        return float(n)
    tau = -1.0
    for k in range(0, n - 1, 2):
        pair = rho[k] + rho[k + 1]
        if pair < 0:
            break
        tau += 2.0 * pair
    return float(min(max(n / max(tau, 1e-12), 1.0), n))


def _argmax_array(obj) -> np.ndarray:
    if isinstance(obj, (np.ndarray, list, tuple)):
        return np.asarray(obj, dtype=np.intp)
    return np.asarray(obj.argmax, dtype=np.intp)


def argmax_frequencies(argmax, n: int, ess: float | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Empirical distribution of the argmax index and binomial standard errors.

    ``argmax`` may be an index array or any object with an ``argmax`` array
    (chains, batches). ``ess`` replaces the sample size in the standard
    errors, for autocorrelated chains.
    """
    idx = _argmax_array(argmax)
    if idx.size == 0:
        raise ValueError("empty batch")
    freq = np.bincount(idx, minlength=n) / idx.size
    m = idx.size if ess is None else ess
    return freq, np.sqrt(freq * (1 - freq) / m)


def chain_argmax_se(argmax, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Argmax frequencies with per-index ESS-corrected standard errors."""
    idx = _argmax_array(argmax)
    freq, _ = argmax_frequencies(idx, n)
    se = np.zeros(n)
    for i in range(n):
        ind = (idx == i).astype(float)
        ess = effective_sample_size(ind)
        se[i] = np.sqrt(freq[i] * (1 - freq[i]) / ess)
    return freq, se


def rhat(chains) -> float:
    """Potential scale reduction across equally long scalar chains."""
    x = np.asarray(chains, dtype=float)
    m, n = x.shape
    if m < 2 or n < 2:
        raise ValueError("need at least two chains of length two")
    w = x.var(axis=1, ddof=1).mean()
    b = n * x.mean(axis=1).var(ddof=1)
    return float(np.sqrt(((n - 1) / n * w + b / n) / w))


@dataclass
class DiagnosticsReport:
    n: int
    acceptance_rate: float | None
    acf: list
    ess: float
    argmax_freq: list
    c_inf_hat: float | None = None
    c_inf_se: float | None = None
    mean_proposals: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def diagnose(result, n_points: int, max_lag: int = 50, c_inf=None) -> DiagnosticsReport:
    """Summarise a ``Chain`` or ``SampleBatch``."""
    series = np.exp(result.log_sup)
    lags = min(max_lag, len(series) - 1)
    try:
        rho = acf(series, lags).tolist()
    except ValueError:
        rho = []
    freq, _ = argmax_frequencies(result.argmax, n_points)
    return DiagnosticsReport(
        n=len(series),
        acceptance_rate=getattr(result, "acceptance_rate", None),
        acf=rho,
        ess=effective_sample_size(series),
        argmax_freq=freq.tolist(),
        c_inf_hat=None if c_inf is None else c_inf[0],
        c_inf_se=None if c_inf is None else c_inf[1],
        mean_proposals=getattr(result, "mean_proposals", None),
    )
