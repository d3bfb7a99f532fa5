import json
import os
import re

import numpy as np
import pytest

from fastswitch import ExperimentConfig, PlotSpec, ValidationError, emit_svg
from fastswitch.cli import Outputs, main

AVERAGE = """
kind = "average"
out = "{out}"

[model]
preset = "paper_example"

[sim]
T = 20.0
h = 0.01
"""

SINGLE_REGIME = """
kind = "simulate"
out = "{out}"
seed = 3

[model]
generator = [[0.0]]

[model.holling]
r = [1.0]
K = [5.0]
m = [1.0]
a = [1.0]
b = [1.0]
d = [1.0]
e = [1.6]
f = [0.02]
lam = [1.0]
rho = [1.0]

[sim]
eps = 1.0
delta = 0.0
h = 0.01
T = 5.0
"""


def _write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text.format(out=str(tmp_path / "out").replace("\\", "/")))
    return str(p)


def test_validate_ok(tmp_path, capsys):
    assert main(["validate", _write(tmp_path, AVERAGE)]) == 0
    assert "valid" in capsys.readouterr().out


def test_validate_lists_every_error(tmp_path, capsys):
    bad = """
kind = "closeness"
seed = -1
[sim]
h = -1.0
bogus = 2
[closeness]
gamma = -0.5
"""
    assert main(["validate", _write(tmp_path, bad)]) == 2
    err = capsys.readouterr().err
    for part in ("seed", "bogus", "[regimes]"):
        assert part in err


def test_failed_validation_writes_nothing(tmp_path):
    bad = AVERAGE.replace('preset = "paper_example"', 'preset = "nope"')
    assert main(["run", _write(tmp_path, bad)]) == 2
    assert not (tmp_path / "out").exists()


def test_run_average(tmp_path):
    assert main(["run", _write(tmp_path, AVERAGE)]) == 0
    d = json.loads((tmp_path / "out" / "average.json").read_text())
    c = d["coefficients"]
    assert abs(c["K"] - 5) < 1e-3 and abs(c["em"] - 1.6) < 1e-3
    src = [e for e in d["equilibria"] if e["classification"] == "source"]
    assert np.abs(np.array(src[0]["location"]) - [1.836, 1.795]).max() < 1e-3
    assert d["config"]["kind"] == "average" and "version" in d
    svg = (tmp_path / "out" / "averaged_phase.svg").read_text()
    assert "<metadata>" in svg and "paper_example" in svg


def test_simulate_deterministic(tmp_path):
    cfg = _write(tmp_path, SINGLE_REGIME)
    assert main(["run", cfg, "--out", str(tmp_path / "a")]) == 0
    assert main(["run", cfg, "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "trajectory.csv").read_text()
    assert a == (tmp_path / "b" / "trajectory.csv").read_text()
    assert a.startswith("# fastswitch")


def test_runtime_error_exit_code(tmp_path, capsys):
    text = SINGLE_REGIME.replace("T = 5.0", "T = 5.0\nguard = 1e-3")
    assert main(["run", _write(tmp_path, text)]) == 3
    assert "hybrid_sde" in capsys.readouterr().err


def test_config_round_trip(tmp_path):
    text = """
kind = "exit"
seed = 2
[model]
preset = "paper_example"
[regimes]
pairs = [[0.01, 0.01], [0.01, 0.001]]
tag = "case2"
[exit]
theta1 = 0.1
theta3 = 0.5
"""
    cfg = ExperimentConfig.loads(text)
    again = ExperimentConfig.loads(cfg.dumps())
    assert again == cfg
    assert again.exit_spec().theta3 == 0.5


def test_outputs_stay_inside(tmp_path):
    out = Outputs(tmp_path / "o", {})
    with pytest.raises(ValidationError):
        out.path("../escape.txt")
    with pytest.raises(ValidationError):
        out.path("/tmp/escape.txt")


def test_plot_series_must_exist(tmp_path):
    out = Outputs(tmp_path / "o", {})
    with pytest.raises(ValidationError, match="unwritten"):
        out.svg("p.svg", PlotSpec("time_series", series=["missing.csv"]), {"a": ([0, 1], [0, 1])})


def test_svg_single_point_and_determinism():
    spec = PlotSpec("time_series", "one", "t", "x")
    a = emit_svg(spec, {"p": ([1.0], [2.0])})
    assert a.count("<circle") == 1 and 'width="800" height="600"' in a
    assert a == emit_svg(PlotSpec("time_series", "one", "t", "x"), {"p": ([1.0], [2.0])})


def test_svg_empty_rejected():
    with pytest.raises(ValidationError):
        emit_svg(PlotSpec("phase_portrait"), {})
    with pytest.raises(ValidationError):
        emit_svg(PlotSpec("phase_portrait"), {"s": ([], [])})


def _polyline(svg):
    pts = re.search(r'points="([^"]+)"', svg).group(1).split()
    return np.array([[float(v) for v in p.split(",")] for p in pts])


def test_svg_hopf_ring(hopf_field):
    from fastswitch import detect_limit_cycle
    c = detect_limit_cycle(hopf_field, np.array([0.5, 0.0]))
    svg = emit_svg(PlotSpec("phase_portrait"), {"cycle": (c.orbit[:, 0], c.orbit[:, 1])})
    pts = _polyline(svg)
    centre = 0.5 * (pts.min(axis=0) + pts.max(axis=0))
    r = np.linalg.norm((pts - centre) / (0.5 * (pts.max(axis=0) - pts.min(axis=0))), axis=1)
    assert np.all(np.abs(r - 1) < 0.02)
    assert np.linalg.norm(pts[0] - pts[-1]) < 5.0


def test_svg_convergence_curve_monotone():
    x, y = np.log10([2e-2, 2e-3, 1e-4]), [0.6, 0.2, 0.08]
    pts = _polyline(emit_svg(PlotSpec("convergence_curve"), {"sw": (x, y)}))
    # screen y grows downward, so decreasing data rises on screen as x decreases
    assert np.all(np.diff(pts[:, 1]) > 0)


def test_svg_heatmap():
    svg = emit_svg(PlotSpec("histogram_heatmap"), {"masses": np.eye(3), "box": ((0, 1), (0, 1))})
    assert svg.count("<rect") == 3 + 2


def test_svg_decimates_long_series():
    t = np.linspace(0, 1, 50_000)
    assert len(_polyline(emit_svg(PlotSpec("time_series"), {"s": (t, t)}))) <= 4001


def test_reproduce_fast(tmp_path):
    out = tmp_path / "rp"
    assert main(["reproduce-paper", "--out", str(out), "--fast", "--T", "20"]) == 0
    svgs = sorted(os.listdir(out))
    assert len([s for s in svgs if s.startswith(("x_", "y_"))]) == 6
    assert len([s for s in svgs if s.startswith("phase_")]) == 3
