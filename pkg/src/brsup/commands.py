"""Implementations of the CLI subcommands.

Each ``cmd_*`` takes a validated ``RunConfig``, an integer seed and an
output directory, writes its files and returns the metadata dictionary it
stored in ``meta.json`` (or ``report.json``). Random streams for the stages
of a command are spawned from ``SeedSequence(seed)``, so outputs depend on
``(config, seed)`` only.
"""
from __future__ import annotations

import csv
import json
import time
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, config_dict
from .diagnostics import acf, argmax_frequencies, diagnose, effective_sample_size, estimate_c_inf
from .gauss import ProposalMixture
from .model import Anchor, Grid, GaussianModel, Variogram, build_model
from .oracle import ho_dombry_sample, ho_dombry_tables
from .samplers import iter_mcmc, iter_rejection, run_mcmc, run_rejection
from .weights_lp import build_partitions, c_groups, optimize_proposal
from .weights_qp import estimate_sigma, solve_weights_qp

# Reference figures for the square-grid reproduction and the bands used to
# judge them (acceptance rates absolute, proposal counts relative).
REFERENCE = {
    "acceptance_1A": (0.656, 0.02, "abs"),
    "acceptance_1B": (0.855, 0.02, "abs"),
    "mean_proposals_2A": (203.1, 0.05, "rel"),
    "mean_proposals_2B": (45.9, 0.30, "rel"),
}


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_column(path: Path, name: str, values) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(name + "\n")
        for v in values:
            fh.write(_fmt(v) + "\n")


def _write_table(path: Path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(header)
        for row in rows:
            out.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_weights(path: Path) -> np.ndarray:
    try:
        with open(path) as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
    except OSError:
        raise ConfigError(f"weights file {path} not found; run weights-qp or weights-lp first "
                          "and point [paths] weights at its weights.csv") from None
    try:
        return np.array([float(x) for x in lines[1:]])
    except ValueError:
        raise ConfigError(f"weights file {path} is not a one-column CSV with header 'p'") from None


def model_from_config(cfg: RunConfig) -> GaussianModel:
    grid = Grid(np.array(cfg.points, dtype=float)) if cfg.points is not None else Grid.regular(cfg.axes)
    anchor = Anchor.corners() if cfg.anchor == "corners" else Anchor.point(cfg.anchor_location)
    return build_model(grid, Variogram(scale=cfg.scale, alpha=cfg.alpha), anchor)


def _streams(seed: int, k: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(k)]


def _base_meta(cfg: RunConfig, seed: int, model: GaussianModel) -> dict:
    return {"seed": int(seed), "n_points": model.n, "rank": model.rank, "config": config_dict(cfg)}


def cmd_weights_qp(cfg: RunConfig, seed: int, out: Path) -> dict:
    model = model_from_config(cfg)
    (rng,) = _streams(seed, 1)
    sig = estimate_sigma(model, cfg.n_sigma, rng)
    qp = solve_weights_qp(sig.entries, floor=cfg.floor)
    with open(out / "sigma.csv", "w") as fh:
        for row in sig.entries:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
    _write_column(out / "weights.csv", "p", qp.weights)
    meta = _base_meta(cfg, seed, model)
    meta.update({
        "n_mc": sig.n_mc,
        "objective": qp.objective,
        "kkt_residual": qp.kkt_residual,
        "closed_form": qp.closed_form,
        "iterations": qp.iterations,
        "regularized": qp.regularized,
        "floor": cfg.floor,
    })
    _write_json(out / "meta.json", meta)
    return meta


def cmd_weights_lp(cfg: RunConfig, seed: int, out: Path) -> dict:
    model = model_from_config(cfg)
    opt = optimize_proposal(model, eps0=cfg.eps0, max_iter=cfg.max_iter, tol=cfg.tol)
    _write_column(out / "weights.csv", "p", opt.weights)
    meta = _base_meta(cfg, seed, model)
    meta.update({
        "epsilon": opt.epsilon,
        "c_groups": opt.c_groups,
        "n_times_c_groups": opt.c_groups * model.n,
        "stalled": opt.stalled,
        "trace": opt.trace,
    })
    _write_json(out / "meta.json", meta)
    return meta


def _mixture_for(cfg: RunConfig, model: GaussianModel):
    """Proposal mixture and rejection constant for ``cfg.variant``."""
    v = cfg.variant
    if v == "1A":
        return ProposalMixture(model), None
    if v == "2A":
        return ProposalMixture.uniform(model), 1.0 / model.n
    if v == "1B":
        if cfg.weights is None:
            raise ConfigError("variant 1B needs [paths] weights (weights.csv from weights-qp)")
        p = read_weights(cfg.resolve(cfg.weights))
        if p.shape != (model.n,):
            raise ConfigError(f"weights file has {p.size} entries, grid has {model.n}")
        return ProposalMixture(model, p), None
    # 2B
    if cfg.lp_meta is None:
        raise ConfigError("variant 2B needs [paths] lp_meta (meta.json from weights-lp)")
    meta_path = cfg.resolve(cfg.lp_meta)
    try:
        lp = json.loads(meta_path.read_text())
        eps = float(lp["epsilon"])
    except (OSError, ValueError, KeyError):
        raise ConfigError(f"cannot read epsilon from {meta_path}; run weights-lp first") from None
    wpath = cfg.resolve(cfg.weights) if cfg.weights is not None else meta_path.parent / "weights.csv"
    p = read_weights(wpath)
    if p.shape != (model.n,):
        raise ConfigError(f"weights file has {p.size} entries, grid has {model.n}")
    # recompute the bound rather than trusting the file
    C = c_groups(model, build_partitions(model), p, eps)
    return ProposalMixture(model, p, eps), C


def cmd_sample(cfg: RunConfig, seed: int, out: Path) -> dict:
    model = model_from_config(cfg)
    mixture, C = _mixture_for(cfg, model)
    (rng,) = _streams(seed, 1)
    meta = _base_meta(cfg, seed, model)
    meta["variant"] = cfg.variant
    header = ",".join(f"w{i}" for i in range(model.n))
    with open(out / "samples.csv", "w") as fs, open(out / "summary.csv", "w") as fsum:
        fs.write(header + "\n")
        if C is None:
            fsum.write("log_sup,argmax,accepted\n")
            acc = burn_acc = step = 0
            for block, take in iter_mcmc(mixture, cfg.n_steps, rng, burn_in=cfg.burn_in):
                if block is None:
                    burn_acc += int(take.sum())
                    continue
                for k in range(len(block)):
                    if step % cfg.thin == 0:
                        fs.write(",".join(_fmt(v) for v in block[k]) + "\n")
                    fsum.write(f"{_fmt(block[k].max())},{int(block[k].argmax())},{int(take[k])}\n")
                    step += 1
                acc += int(take.sum())
            meta.update({
                "n_steps": cfg.n_steps,
                "burn_in": cfg.burn_in,
                "thin": cfg.thin,
                "acceptance_rate": (acc + burn_acc) / (cfg.n_steps + cfg.burn_in),
                "acceptance_rate_after_burn_in": acc / cfg.n_steps,
            })
        else:
            fsum.write("log_sup,argmax,proposals\n")
            total = 0
            for block, counts in iter_rejection(mixture, C, cfg.n_samples, rng):
                for k in range(len(block)):
                    fs.write(",".join(_fmt(v) for v in block[k]) + "\n")
                    fsum.write(f"{_fmt(block[k].max())},{int(block[k].argmax())},{int(counts[k])}\n")
                total += int(counts.sum())
            meta.update({
                "n_samples": cfg.n_samples,
                "C": C,
                "epsilon": mixture.epsilon,
                "mean_proposals": total / cfg.n_samples,
            })
    _write_json(out / "meta.json", meta)
    return meta


def cmd_oracle(cfg: RunConfig, seed: int, out: Path) -> dict:
    model = model_from_config(cfg)
    r_tab, r_smp = _streams(seed, 2)
    tables = ho_dombry_tables(model, cfg.n_cdf, r_tab)
    w, idx = ho_dombry_sample(tables, model, r_smp, cfg.n_samples)
    meta = _base_meta(cfg, seed, model)
    meta.update({
        "Q": tables.Q.tolist(),
        "m": tables.m.tolist(),
        "argmax_probs": tables.argmax_probs.tolist(),
        "argmax_se": tables.argmax_se.tolist(),
        "orthant": tables.orthant.tolist(),
        "orthant_se": tables.orthant_se.tolist(),
    })
    _write_json(out / "tables.json", meta)
    _write_table(out / "samples.csv", ["argmax"] + [f"w{i}" for i in range(model.n)],
                 ([int(i)] + [float(v) for v in row] for i, row in zip(idx, w)))
    return meta


def _read_summary(path: Path):
    try:
        with open(path) as fh:
            rows = list(csv.reader(fh))
    except OSError:
        raise ConfigError(f"{path} not found; run the sample subcommand first "
                          "and point [paths] samples (or --input) at its output directory") from None
    head, body = rows[0], rows[1:]
    cols = {name: [r[k] for r in body] for k, name in enumerate(head)}
    return cols


def cmd_diagnose(cfg: RunConfig, seed: int, out: Path, source: Path | None = None) -> dict:
    source = source if source is not None else cfg.resolve(cfg.samples)
    if source is None:
        raise ConfigError("diagnose needs --input DIR or [paths] samples")
    cols = _read_summary(Path(source) / "summary.csv")
    try:
        run_meta = json.loads((Path(source) / "meta.json").read_text())
    except (OSError, ValueError):
        run_meta = {}
    log_sup = np.array(cols["log_sup"], dtype=float)
    argmax = np.array(cols["argmax"], dtype=np.intp)
    model = model_from_config(cfg)
    (rng,) = _streams(seed, 1)
    c_inf = estimate_c_inf(model, cfg.n_cinf, rng)
    series = np.exp(log_sup)
    max_lag = min(50, len(series) - 1)
    try:
        rho = acf(series, max_lag).tolist()
    except ValueError:
        rho = []
    freq, se = argmax_frequencies(argmax, model.n, effective_sample_size(series))
    report = {
        "seed": int(seed),
        "source": str(source),
        "variant": run_meta.get("variant"),
        "n": len(series),
        "acceptance_rate": run_meta.get("acceptance_rate"),
        "mean_proposals": run_meta.get("mean_proposals"),
        "ess": effective_sample_size(series),
        "acf": rho,
        "argmax_freq": freq.tolist(),
        "argmax_se": se.tolist(),
        "c_inf_hat": c_inf[0],
        "c_inf_se": c_inf[1],
        "n_over_c_inf": model.n / c_inf[0],
    }
    _write_json(out / "report.json", report)
    _write_table(out / "acf.csv", ["lag", "acf"], ([k, r] for k, r in enumerate(rho)))
    return report


def _judge(name: str, value: float) -> dict:
    ref, tol, kind = REFERENCE[name]
    err = abs(value - ref) if kind == "abs" else abs(value - ref) / ref
    return {"quantity": name, "reference": ref, "value": value, "tolerance": tol,
            "tolerance_kind": kind, "within": bool(err <= tol)}


def cmd_reproduce(cfg: RunConfig, seed: int, out: Path) -> dict:
    """Full pipeline on the configured model with a comparison table.

    Wall-clock timings are reported on stderr by the CLI, not stored, so
    ``report.json`` is a pure function of ``(config, seed)``.
    """
    model = model_from_config(cfg)
    r_cinf, r_1a, r_sig, r_1b, r_2a, r_2b = _streams(seed, 6)
    timings = {}

    t0 = time.perf_counter()
    c_inf, c_inf_se = estimate_c_inf(model, cfg.n_cinf, r_cinf)
    timings["c_inf"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ch_1a = run_mcmc(ProposalMixture(model), cfg.n_steps, r_1a, burn_in=cfg.burn_in, keep_states=False)
    timings["1A"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    sig = estimate_sigma(model, cfg.n_sigma, r_sig)
    qp = solve_weights_qp(sig.entries, floor=cfg.floor)
    timings["weights_qp"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    ch_1b = run_mcmc(ProposalMixture(model, qp.weights), cfg.n_steps, r_1b, burn_in=cfg.burn_in,
                     keep_states=False)
    timings["1B"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    b_2a = run_rejection(ProposalMixture.uniform(model), 1.0 / model.n, cfg.n_samples, r_2a,
                         keep_samples=False)
    timings["2A"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    opt = optimize_proposal(model, eps0=cfg.eps0, max_iter=cfg.max_iter, tol=cfg.tol)
    timings["weights_lp"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    b_2b = run_rejection(ProposalMixture(model, opt.weights, opt.epsilon), opt.c_groups,
                         cfg.n_samples, r_2b, keep_samples=False)
    timings["2B"] = time.perf_counter() - t0

    max_lag = min(50, cfg.n_steps - 1)
    acf_1a = acf(np.exp(ch_1a.log_sup), max_lag)
    acf_1b = acf(np.exp(ch_1b.log_sup), max_lag)
    table = [
        _judge("acceptance_1A", ch_1a.acceptance_rate),
        _judge("acceptance_1B", ch_1b.acceptance_rate),
        _judge("mean_proposals_2A", b_2a.mean_proposals),
        _judge("mean_proposals_2B", b_2b.mean_proposals),
    ]
    report = _base_meta(cfg, seed, model)
    report.update({
        "comparison": table,
        "c_inf_hat": c_inf,
        "c_inf_se": c_inf_se,
        "n_over_c_inf": model.n / c_inf,
        "qp": {"kkt_residual": qp.kkt_residual, "objective": qp.objective, "closed_form": qp.closed_form},
        "lp": {"epsilon": opt.epsilon, "c_groups": opt.c_groups, "n_times_c_groups": opt.c_groups * model.n,
               "stalled": opt.stalled, "trace": opt.trace},
        "improvement_2B_over_2A": b_2a.mean_proposals / b_2b.mean_proposals,
        "predicted_mean_proposals_2B": 1.0 / (c_inf * opt.c_groups),
        "acf_lag5": {"1A": float(acf_1a[min(5, max_lag)]), "1B": float(acf_1b[min(5, max_lag)])},
        "diagnostics": {
            "1A": diagnose(ch_1a, model.n, max_lag).to_dict(),
            "1B": diagnose(ch_1b, model.n, max_lag).to_dict(),
            "2A": diagnose(b_2a, model.n, max_lag).to_dict(),
            "2B": diagnose(b_2b, model.n, max_lag).to_dict(),
        },
    })
    _write_json(out / "report.json", report)
    pts = model.grid.points
    coords = [f"x{k}" for k in range(pts.shape[1])]
    _write_table(out / "weights_qp.csv", coords + ["p"],
                 ([*map(float, pts[i]), float(qp.weights[i])] for i in range(model.n)))
    _write_table(out / "weights_lp.csv", coords + ["p"],
                 ([*map(float, pts[i]), float(opt.weights[i])] for i in range(model.n)))
    _write_table(out / "acf.csv", ["lag", "acf_1A", "acf_1B"],
                 ([k, float(acf_1a[k]), float(acf_1b[k])] for k in range(max_lag + 1)))
    report["_timings"] = timings
    return report
