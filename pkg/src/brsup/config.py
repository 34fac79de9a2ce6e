"""Run configuration: an INI file with one section per concern.

Example::

    [grid]
    axes = 0:5:0.2, 0:5:0.2

    [variogram]
    family = power
    scale = 5
    alpha = 1.5

    [anchor]
    mode = corners

    [sampler]
    variant = 1B
    n_steps = 100000
    n_samples = 1000
    burn_in = 1000
    thin = 1

    [mc]
    n_sigma = 10000
    n_cinf = 100000
    n_cdf = 1000000

    [optimizer]
    eps0 = auto
    floor = 0
    max_iter = 20
    tol = 1e-4

    [paths]
    weights = qp/weights.csv
    lp_meta = lp/meta.json
    samples = run/

``thin`` keeps every k-th MCMC state in ``samples.csv``; per-step
summaries are always complete. ``axes`` lists ``start:stop:step`` per dimension (stop inclusive); a grid
can instead be given as ``points = x,y; x,y; ...``. Relative paths are
resolved against the directory of the config file.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import asdict, dataclass, field
from pathlib import Path

VARIANTS = ("1A", "1B", "2A", "2B")


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending section/key."""


@dataclass(frozen=True)
class RunConfig:
    axes: tuple = ((0.0, 5.0, 0.2), (0.0, 5.0, 0.2))
    points: tuple | None = None
    family: str = "power"
    scale: float = 5.0
    alpha: float = 1.5
    anchor: str = "corners"
    anchor_location: tuple | None = None
    variant: str = "1B"
    n_steps: int = 100_000
    n_samples: int = 1000
    burn_in: int = 1000
    thin: int = 1
    n_sigma: int = 10_000
    n_cinf: int = 100_000
    n_cdf: int = 1_000_000
    eps0: float | None = None
    floor: float = 0.0
    max_iter: int = 20
    tol: float = 1e-4
    weights: str | None = None
    lp_meta: str | None = None
    samples: str | None = None
    base_dir: str = field(default=".", compare=False)

    def resolve(self, path: str | None) -> Path | None:
        if path is None:
            return None
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


_COUNTS = ("n_steps", "n_samples", "thin", "n_sigma", "n_cinf", "n_cdf", "max_iter")


def _floats(text: str, where: str) -> tuple:
    try:
        return tuple(float(x) for x in text.replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"{where}: expected numbers, got {text!r}") from None


def _parse_axes(text: str) -> tuple:
    axes = []
    for k, part in enumerate(text.split(",")):
        bits = part.strip().split(":")
        if len(bits) != 3:
            raise ConfigError(f"[grid] axes: item {k + 1} {part.strip()!r} is not start:stop:step")
        axes.append(_floats(" ".join(bits), "[grid] axes"))
    if not axes:
        raise ConfigError("[grid] axes: empty")
    return tuple(axes)


def _parse_points(text: str) -> tuple:
    rows = [r for r in text.split(";") if r.strip()]
    pts = tuple(_floats(r, "[grid] points") for r in rows)
    if not pts or len({len(p) for p in pts}) != 1:
        raise ConfigError("[grid] points: need at least one point, all of the same dimension")
    return pts


def parse_config(text: str, base_dir: str = ".") -> RunConfig:
    """Parse INI text into a validated ``RunConfig``."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {
        "grid": {"axes", "points"},
        "variogram": {"family", "scale", "alpha"},
        "anchor": {"mode", "location"},
        "sampler": {"variant", "n_steps", "n_samples", "burn_in", "thin"},
        "mc": {"n_sigma", "n_cinf", "n_cdf"},
        "optimizer": {"eps0", "floor", "max_iter", "tol"},
        "paths": {"weights", "lp_meta", "samples"},
    }
    for sec in cp.sections():
        if sec not in known:
            raise ConfigError(f"unknown section [{sec}]")
        for key in cp[sec]:
            if key not in known[sec]:
                raise ConfigError(f"[{sec}] unknown key {key!r}")

    kw: dict = {"base_dir": base_dir}

    def get(sec, key, conv, name=None):
        if cp.has_option(sec, key):
            raw = cp.get(sec, key).strip()
            try:
                kw[name or key] = conv(raw)
            except ConfigError:
                raise
            except (TypeError, ValueError):
                raise ConfigError(f"[{sec}] {key}: cannot parse {raw!r}") from None

    get("grid", "axes", _parse_axes)
    get("grid", "points", _parse_points)
    get("variogram", "family", str.lower)
    get("variogram", "scale", float)
    get("variogram", "alpha", float)
    get("anchor", "mode", str.lower, "anchor")
    get("anchor", "location", lambda s: _floats(s, "[anchor] location"), "anchor_location")
    get("sampler", "variant", str.upper)
    for key in ("n_steps", "n_samples", "burn_in", "thin"):
        get("sampler", key, int)
    for key in ("n_sigma", "n_cinf", "n_cdf"):
        get("mc", key, int)
    get("optimizer", "eps0", lambda s: None if s.lower() == "auto" else float(s))
    get("optimizer", "floor", float)
    get("optimizer", "max_iter", int)
    get("optimizer", "tol", float)
    for key in ("weights", "lp_meta", "samples"):
        get("paths", key, str)
    cfg = RunConfig(**kw)
    validate(cfg)
    return cfg


def validate(cfg: RunConfig) -> None:
    for name in _COUNTS:
        if getattr(cfg, name) < 1:
            raise ConfigError(f"{name} must be at least 1")
    if cfg.burn_in < 0:
        raise ConfigError("[sampler] burn_in must be non-negative")
    if cfg.variant not in VARIANTS:
        raise ConfigError(f"[sampler] variant must be one of {', '.join(VARIANTS)}")
    if cfg.family != "power":
        raise ConfigError("[variogram] family: only 'power' is available")
    if not cfg.scale > 0 or not 0 < cfg.alpha <= 2:
        raise ConfigError("[variogram] need scale > 0 and 0 < alpha <= 2")
    if cfg.anchor not in ("corners", "point"):
        raise ConfigError("[anchor] mode must be 'corners' or 'point'")
    dim = len(cfg.points[0]) if cfg.points else len(cfg.axes)
    if cfg.anchor == "point" and (cfg.anchor_location is None or len(cfg.anchor_location) != dim):
        raise ConfigError(f"[anchor] point mode needs a location with {dim} coordinates")
    if cfg.points is None:
        for start, stop, step in cfg.axes:
            if not step > 0 or stop < start:
                raise ConfigError("[grid] axes need step > 0 and stop >= start")
    if cfg.eps0 is not None and not 0 < cfg.eps0 < 1:
        raise ConfigError("[optimizer] eps0 must lie in (0, 1) or be 'auto'")
    if cfg.floor < 0:
        raise ConfigError("[optimizer] floor must be non-negative")


def _num(x) -> str:
    return repr(float(x))


def emit_config(cfg: RunConfig) -> str:
    """Render ``cfg`` as INI text that parses back to an equal config."""
    cp = configparser.ConfigParser(interpolation=None)
    grid = {}
    if cfg.points is not None:
        grid["points"] = "; ".join(", ".join(_num(v) for v in p) for p in cfg.points)
    else:
        grid["axes"] = ", ".join(":".join(_num(v) for v in ax) for ax in cfg.axes)
    cp["grid"] = grid
    cp["variogram"] = {"family": cfg.family, "scale": _num(cfg.scale), "alpha": _num(cfg.alpha)}
    anchor = {"mode": cfg.anchor}
    if cfg.anchor_location is not None:
        anchor["location"] = ", ".join(_num(v) for v in cfg.anchor_location)
    cp["anchor"] = anchor
    cp["sampler"] = {k: str(getattr(cfg, k)) for k in ("variant", "n_steps", "n_samples", "burn_in", "thin")}
    cp["mc"] = {k: str(getattr(cfg, k)) for k in ("n_sigma", "n_cinf", "n_cdf")}
    cp["optimizer"] = {
        "eps0": "auto" if cfg.eps0 is None else repr(float(cfg.eps0)),
        "floor": repr(float(cfg.floor)),
        "max_iter": str(cfg.max_iter),
        "tol": repr(float(cfg.tol)),
    }
    paths = {k: getattr(cfg, k) for k in ("weights", "lp_meta", "samples") if getattr(cfg, k) is not None}
    if paths:
        cp["paths"] = paths
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, base_dir=str(path.parent))


def config_dict(cfg: RunConfig) -> dict:
    d = asdict(cfg)
    d.pop("base_dir")
    return d
