import json
import time

import pytest
from hypothesis import given, settings, strategies as st

from brsup.cli import EXIT_CONFIG, EXIT_NUMERIC, main
from brsup.config import ConfigError, RunConfig, emit_config, parse_config

ONE_POINT = """
[grid]
points = 0, 0
[anchor]
mode = point
location = 0, 0
[sampler]
n_steps = 50
n_samples = 20
burn_in = 5
[mc]
n_sigma = 100
n_cinf = 100
n_cdf = 100
"""

TRIANGLE = """
[grid]
points = 0, 0; 1, 0; 0, 1
[variogram]
scale = 1
alpha = 1.5
[anchor]
mode = point
location = 0.333, 0.333
[sampler]
variant = 1A
n_steps = 2000
n_samples = 500
burn_in = 100
[mc]
n_sigma = 2000
n_cinf = 2000
n_cdf = 20000
"""


def _write(tmp_path, text, name="run.ini"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_config_round_trip_examples():
    for text in (ONE_POINT, TRIANGLE, "[grid]\naxes = 0:5:0.2, 0:5:0.2\n"):
        cfg = parse_config(text)
        again = parse_config(emit_config(cfg))
        assert again == cfg
        assert emit_config(again) == emit_config(cfg)


@settings(max_examples=40, deadline=None)
@given(
    step=st.floats(0.05, 2.0, allow_nan=False),
    scale=st.floats(0.1, 50.0),
    alpha=st.floats(0.05, 2.0),
    variant=st.sampled_from(["1A", "1B", "2A", "2B"]),
    counts=st.tuples(*[st.integers(1, 10**7)] * 4),
    eps0=st.one_of(st.none(), st.floats(1e-6, 0.99)),
)
def test_config_round_trip_property(step, scale, alpha, variant, counts, eps0):
    cfg = RunConfig(axes=((0.0, 3.0, step), (-1.0, 1.0, step / 2)), scale=scale, alpha=alpha,
                    variant=variant, n_steps=counts[0], n_samples=counts[1], n_sigma=counts[2],
                    n_cdf=counts[3], eps0=eps0)
    assert parse_config(emit_config(cfg)) == cfg


@pytest.mark.parametrize("text, match", [
    ("[grid]\naxes = 0:1\n", "start:stop:step"),
    ("[sampler]\nvariant = 3C\n", "variant"),
    ("[sampler]\nn_steps = zero\n", "n_steps"),
    ("[bogus]\nx = 1\n", "unknown section"),
    ("[anchor]\nmode = point\n", "location"),
    ("[mc]\nn_sigma = 0\n", "n_sigma"),
])
def test_config_errors_name_the_field(text, match):
    with pytest.raises(ConfigError, match=match):
        parse_config(text)


def test_weights_qp_single_point(tmp_path):
    cfg = _write(tmp_path, ONE_POINT)
    assert main(["weights-qp", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "qp")]) == 0
    assert (tmp_path / "qp" / "weights.csv").read_text() == "p\n1\n"
    meta = json.loads((tmp_path / "qp" / "meta.json").read_text())
    assert meta["kkt_residual"] <= 1e-8


def test_weights_lp_single_point(tmp_path):
    cfg = _write(tmp_path, ONE_POINT)
    assert main(["weights-lp", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "lp")]) == 0
    assert (tmp_path / "lp" / "weights.csv").read_text() == "p\n1\n"


@pytest.mark.parametrize("variant", ["1A", "2A"])
def test_sample_single_point_all_zero(tmp_path, variant):
    cfg = _write(tmp_path, ONE_POINT.replace("[sampler]", f"[sampler]\nvariant = {variant}"))
    out = tmp_path / variant
    assert main(["sample", "--config", str(cfg), "--seed", "3", "--out", str(out)]) == 0
    rows = (out / "samples.csv").read_text().split()
    assert rows[0] == "w0" and set(rows[1:]) == {"0"}


def test_pipeline_and_determinism(tmp_path):
    cfg = _write(tmp_path, TRIANGLE + "[paths]\nweights = qp/weights.csv\nlp_meta = lp/meta.json\n")
    base = ["--config", str(cfg), "--seed", "99"]
    assert main(["weights-qp", *base, "--out", str(tmp_path / "qp")]) == 0
    assert main(["weights-lp", *base, "--out", str(tmp_path / "lp")]) == 0
    outputs = {}
    for variant in ("1A", "1B", "2A", "2B"):
        text = cfg.read_text().replace("variant = 1A", f"variant = {variant}")
        vcfg = _write(tmp_path, text, f"{variant}.ini")
        for rep in (1, 2):
            out = tmp_path / f"{variant}_{rep}"
            assert main(["sample", "--config", str(vcfg), "--seed", "5", "--out", str(out)]) == 0
            outputs[variant, rep] = [(out / f).read_bytes() for f in ("samples.csv", "summary.csv", "meta.json")]
        assert outputs[variant, 1] == outputs[variant, 2]
    # reruns of the weight commands are byte-identical too
    assert main(["weights-qp", *base, "--out", str(tmp_path / "qp2")]) == 0
    assert (tmp_path / "qp" / "weights.csv").read_bytes() == (tmp_path / "qp2" / "weights.csv").read_bytes()
    assert main(["diagnose", *base, "--out", str(tmp_path / "diag"), "--input", str(tmp_path / "1B_1")]) == 0
    rep = json.loads((tmp_path / "diag" / "report.json").read_text())
    assert rep["variant"] == "1B" and rep["n"] == 2000
    assert main(["oracle", *base, "--out", str(tmp_path / "orc")]) == 0
    tables = json.loads((tmp_path / "orc" / "tables.json").read_text())
    assert sum(tables["argmax_probs"]) == pytest.approx(1.0)


def test_missing_weights_is_config_error(tmp_path, capsys):
    cfg = _write(tmp_path, TRIANGLE.replace("variant = 1A", "variant = 1B"))
    assert main(["sample", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == EXIT_CONFIG
    assert "weights" in capsys.readouterr().err
    cfg2 = _write(tmp_path, TRIANGLE.replace("variant = 1A", "variant = 1B") + "[paths]\nweights = nope.csv\n", "b.ini")
    assert main(["sample", "--config", str(cfg2), "--seed", "1", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_bad_config_exit_code(tmp_path):
    cfg = _write(tmp_path, "[grid]\naxes = 1\n")
    assert main(["sample", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == EXIT_CONFIG


def test_numerical_failure_exit_code(tmp_path):
    # the oracle needs a nonsingular covariance
    text = TRIANGLE.replace("mode = point\nlocation = 0.333, 0.333", "mode = corners")
    cfg = _write(tmp_path, text.replace("points = 0, 0; 1, 0; 0, 1", "points = 0, 0; 1, 0; 0, 1; 1, 1"))
    assert main(["oracle", "--config", str(cfg), "--seed", "1", "--out", str(tmp_path / "o")]) == EXIT_NUMERIC


def test_reproduce_scaled_down(tmp_path):
    cfg = _write(tmp_path, "[grid]\naxes = 0:5:0.5, 0:5:0.5\n[sampler]\nn_steps = 20000\nn_samples = 1000\n")
    t0 = time.perf_counter()
    assert main(["reproduce-s4", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "r")]) == 0
    assert time.perf_counter() - t0 < 60
    rep = json.loads((tmp_path / "r" / "report.json").read_text())
    names = [row["quantity"] for row in rep["comparison"]]
    assert names == ["acceptance_1A", "acceptance_1B", "mean_proposals_2A", "mean_proposals_2B"]
    for f in ("weights_qp.csv", "weights_lp.csv", "acf.csv"):
        assert (tmp_path / "r" / f).exists()
    assert main(["reproduce-s4", "--config", str(cfg), "--seed", "4", "--out", str(tmp_path / "r2")]) == 0
    assert (tmp_path / "r" / "report.json").read_bytes() == (tmp_path / "r2" / "report.json").read_bytes()
