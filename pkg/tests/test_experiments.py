import json
import math

import numba
import numpy as np
import pytest

from fastswitch import (
    ConfigurationError,
    ExitSpec,
    HybridModel,
    RegimeSpec,
    ValidationError,
    assumption_audit,
    closeness_probability,
    convergence_sweep,
    exit_time_experiment,
)
from fastswitch.experiments import exit_cdf, wilson_interval

SYM = [[-1.0, 1.0], [1.0, -1.0]]


@numba.njit
def _saddle(x, i):
    out = np.empty(2)
    out[0] = -x[0]
    out[1] = x[1]
    return out


@numba.njit
def _source(x, i):
    return x.copy()


@numba.njit
def _still2(x, i):
    return np.zeros((2, 2))


@numba.njit
def _small_noise(x, i):
    return 0.1 * np.eye(2)


def test_wilson_interval():
    lo, hi = wilson_interval(0, 100)
    assert lo == 0.0 and 0 < hi < 0.05
    lo, hi = wilson_interval(100, 100)
    assert hi == 1.0 and lo > 0.95
    lo, hi = wilson_interval(37, 120)
    assert lo < 37 / 120 < hi
    # textbook value for 5 of 20
    assert wilson_interval(5, 20) == pytest.approx((0.1119, 0.4687), abs=1e-4)


@pytest.mark.parametrize("pairs, tag", [
    ([(1e-2, 1e-2), (1e-3, 1e-2)], "case2"),
    ([(1e-2, 1e-2), (1e-2, 1e-3)], "case3"),
    ([(1e-2, 1e-1), (1e-2, 1e-4)], "case1"),
    ([(1e-2, 1e-1)], "case2"),
])
def test_regime_tag_audit_rejects(pairs, tag):
    with pytest.raises(ValidationError, match=tag):
        RegimeSpec(pairs, tag)


def test_regime_tags_accept():
    RegimeSpec([(1e-1, 1e-1), (1e-2, 1e-2)], "case1")
    RegimeSpec([(1e-2, 1e-2), (1e-2, 1e-3)], "case2")
    RegimeSpec([(1e-2, 1e-2), (1e-3, 1e-2)], "case3")


def test_exit_spec_preconditions():
    with pytest.raises(ValidationError, match="theta1"):
        ExitSpec((0, 0), theta1=0.5, theta3=0.1, H=1.0)
    with pytest.raises(ValidationError, match="H"):
        ExitSpec((0, 0), theta1=0.1, theta3=0.5, H=0.0)


def test_closeness_extremes(example_model):
    reg = RegimeSpec([(1e-2, 1e-2)])
    zero = closeness_probability(example_model, [1, 1], 0, 0.0, 1.0, reg, 50, h=1e-2)
    inf = closeness_probability(example_model, [1, 1], 0, math.inf, 1.0, reg, 50, h=1e-2)
    assert zero.rows[0]["p_hat"] == 1.0 and inf.rows[0]["p_hat"] == 0.0
    for rep in (zero, inf):
        r = rep.rows[0]
        assert 0 <= r["ci_lo"] <= r["p_hat"] <= r["ci_hi"] <= 1


def test_closeness_deterministic_single_regime(decay):
    rep = closeness_probability(decay, [1.0], 0, 0.1, 2.0, RegimeSpec([(1.0, 0.0)], "case2"), 20, h=1e-3)
    assert rep.rows[0]["p_hat"] == 0.0 and rep.rows[0]["n_nonfinite"] == 0


def test_closeness_large_gamma_zero(example_model):
    rep = closeness_probability(example_model, [1, 1], 0, 100.0, 2.0, RegimeSpec([(1e-1, 1e-1)]), 100, h=1e-2)
    assert rep.rows[0]["p_hat"] == 0.0


def test_closeness_report_deterministic(example_model):
    reg = RegimeSpec([(1e-1, 1e-1)])
    a = closeness_probability(example_model, [1, 1], 0, 0.5, 2.0, reg, 100, h=1e-2, seed=3)
    b = closeness_probability(example_model, [1, 1], 0, 0.5, 2.0, reg, 100, h=1e-2, seed=3)
    assert a.rows == b.rows
    assert 0 < a.rows[0]["r_hat"] or a.rows[0]["p_hat"] == 1.0


def test_report_rendering(example_model):
    rep = closeness_probability(example_model, [1, 1], 0, 0.5, 1.0, RegimeSpec([(1e-1, 1e-1)]), 20, h=1e-2)
    d = json.loads(rep.to_json())
    assert d["config"]["gamma"] == 0.5 and d["seed"] == 0 and "version" in d
    lines = rep.to_text().splitlines()
    assert lines[0].startswith("# closeness") and len(lines[2]) == len(lines[3])


def test_exit_source_repels():
    m = HybridModel(2, 2, _source, _small_noise, SYM, name="source")
    spec = ExitSpec((0.0, 0.0), theta1=0.05, theta3=0.3, H=5.0, n_paths=200)
    rep = exit_time_experiment(m, spec, RegimeSpec([(0.1, 0.1)], "case1"), h=1e-2)
    tau = rep.exit_times[(0.1, 0.1)]
    cdf = exit_cdf(tau, [0.5, 1.0, 2.0, 5.0])
    assert np.all(np.diff(cdf) >= 0)
    assert cdf[-1] == 1.0


def test_exit_missing_drift_witness():
    m = HybridModel(2, 2, _saddle, _still2, SYM, name="linear saddle")
    spec = ExitSpec((0.0, 0.0), theta1=0.05, theta3=0.3, H=1.0, n_paths=10)
    with pytest.raises(ConfigurationError, match="case2"):
        exit_time_experiment(m, spec, RegimeSpec([(1e-2, 1e-3)], "case2"))


def test_audit_linear_model_has_no_drift_witness():
    m = HybridModel(2, 2, _saddle, _small_noise, SYM, name="linear saddle")
    rep = assumption_audit(m, [[-1, 1], [-1, 1]])
    (row,) = rep.rows
    assert row["classification"] == "saddle"
    assert row["bf"] == [0.0, 0.0] and row["case2"] is None
    assert row["case3"] == 0 and row["case1"] == 0


def test_audit_example(example_model):
    rep = assumption_audit(example_model, [[0, 6], [0, 6]])
    by_cls = {}
    for r in rep.rows:
        by_cls.setdefault(r["classification"], []).append(r)
    (src,) = by_cls["source"]
    assert all(v > 0 for v in src["bf"]) and all(v > 0 for v in src["bs"])
    assert src["case1"] is not None and src["case3"] is not None
    # sigma at the interior point: diag(lam x, rho y) with lam = (1, 2), rho = (3, 1)
    x, y = src["location"]
    assert src["bs"][0] == pytest.approx(np.hypot(1 * x, 3 * y))
    assert src["bs"][1] == pytest.approx(np.hypot(2 * x, 1 * y))
    for r in by_cls["saddle"]:
        assert r["per_capita"] and r["case2"] is not None and r["case3"] is not None
    assert all(l["finite"] for l in rep.extras["lipschitz"])


def test_exit_boundary_saddle_small(example_model):
    spec = ExitSpec((5.0, 0.0), theta1=0.1, theta3=0.5, H=20.0, n_paths=200)
    rep = exit_time_experiment(example_model, spec, RegimeSpec([(1e-2, 1e-2), (1e-2, 1e-3)], "case2"), h=1e-2)
    for row in rep.rows:
        assert row["p_hat"] > 0.5 and row["passes_eps_plus_delta"]
    taus = rep.exit_times[(1e-2, 1e-2)]
    assert np.all(np.diff(exit_cdf(taus, np.linspace(0, 20, 21))) >= 0)


def test_sweep_degenerate_cycle(hopf_field):
    from conftest import hopf_model
    from fastswitch import detect_limit_cycle
    cyc = detect_limit_cycle(hopf_field, np.array([0.5, 0.0]))
    rep = convergence_sweep(hopf_model(), RegimeSpec([(1.0, 0.0)], "case2"), 20 * cyc.period, 2,
                            x0=cyc.orbit[0], h=1e-3, cycle=cyc, n_proj=64)
    row = rep.rows[0]
    assert row["sw_mean"] < 1e-2
    assert abs(row["x1_mean"] - row["x1_target"]) < 1e-2
