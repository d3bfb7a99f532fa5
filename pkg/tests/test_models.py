import numba
import numpy as np
import pytest

from fastswitch import (
    ConfigurationError,
    PredatorPreyParams,
    SimParams,
    ValidationError,
    average_field,
    integrate_ode,
    moment_diagnostics,
    persistence_functional,
    predator_prey_model,
    simulate_batch,
    stationary_distribution,
)
from fastswitch.models import (
    EXAMPLE_HOLLING,
    averaged_quantities,
    beddington_deangelis,
    fit_holling_coefficients,
    holling_type2,
)

SYM = [[-1.0, 1.0], [1.0, -1.0]]


@numba.njit
def _no_response(x, y, i):
    return 1e-300


def _params(**kw):
    base = dict(a=[1.0, 2.0], b=[0.5, 0.5], c=[1.0, 1.0], d=[0.1, 0.2], f=[1.0, 2.0],
                lam=[1.0, 1.0], rho=[1.0, 1.0], response=holling_type2([1.0, 1.0], [1.0, 1.0], [1.0, 1.0]))
    base.update(kw)
    return PredatorPreyParams(**base)


def test_example_drift_by_hand(example_model):
    # prey: 0.9*(1 - 1/4.737) - 1.2/2 ; predator: -0.85 - 0.03 + 1*1.2/2, both times the density 1
    f = example_model.f([1.0, 1.0], 0)
    assert f[0] == pytest.approx(0.9 * (1 - 1 / 4.737) - 1.2 / 2, abs=1e-14)
    assert f[1] == pytest.approx(-0.85 - 0.03 + 1.2 / 2, abs=1e-14)
    f = example_model.f([2.0, 0.5], 1)
    assert f[0] == pytest.approx(2 * (1.1 * (1 - 2 / 5.238) - 0.5 * 0.8 / 3), abs=1e-14)
    assert f[1] == pytest.approx(0.5 * (-1.15 - 0.01 * 0.5 + 2.5 * 2 * 0.8 / 3), abs=1e-14)


def test_example_diffusion_linear(example_model):
    s = example_model.sigma([2.0, 3.0], 0)
    assert np.array_equal(s, [[2.0, 0.0], [0.0, 9.0]])
    assert example_model.linear_noise == (True, True) and example_model.positive


def test_example_stationary(example_model):
    assert np.allclose(stationary_distribution(example_model.generator), [0.5, 0.5], atol=1e-15)


def test_example_averaged_coefficients(example_field):
    c = fit_holling_coefficients(example_field)
    for k, v in dict(r=1.0, K=5.0, m=1.0, em=1.6, f=0.02, d=1.0).items():
        assert abs(c[k] - v) <= 1e-3, k
    assert c["residual"] <= 1e-12


def test_averaged_field_matches_averaged_quantities(example_model, example_field):
    q = averaged_quantities(example_model.params, [0.5, 0.5])
    rng = np.random.default_rng(3)
    for x, y in rng.uniform(0.01, 6, size=(100, 2)):
        expected = [x * q.phibar(x, y), y * q.psibar(x, y)]
        assert np.abs(example_field(np.array([x, y])) - expected).max() <= 1e-12


def test_persistence_values(example_model):
    ups, ups_bar, q = persistence_functional(example_model)
    assert q.cbar == pytest.approx(1.0) and q.abar == pytest.approx(1.0)
    assert ups_bar((0.0, 0.0)) == pytest.approx(q.cbar)
    k = q.abar / q.bbar
    assert ups_bar((k, 0.0)) == pytest.approx(-q.cbar + k * q.h2(k, 0.0), abs=1e-12)
    # 1.6 * 5/6 = 4/3 > 1 and gamma0 = min(1, 1/3)/2
    assert q.invasion_lhs == pytest.approx(4 / 3, abs=1e-4)
    assert q.gamma0 == pytest.approx(1 / 6, abs=1e-4) and q.gamma0 > 0
    assert q.gamma0_h1 == pytest.approx(0.5 * (-1 + 5 / 6), abs=1e-4)
    assert ups((1.0, 1.0), 0) == pytest.approx(2 * (0.9 * (1 - 1 / 4.737) - 0.6) + (-0.85 - 0.03 + 0.6))


def test_persistence_condition_failure_reports_both_sides():
    p = _params(c=[5.0, 5.0])
    with pytest.raises(ConfigurationError, match="cbar = 5"):
        persistence_functional(p, [0.5, 0.5])


def test_nonpositive_parameter_rejected():
    with pytest.raises(ValidationError, match="parameter c"):
        _params(c=[1.0, 0.0])


def test_response_must_be_positive():
    @numba.njit
    def bad(x, y, i):
        return x - 1.0

    with pytest.raises(ValidationError, match="positive"):
        _params(response=bad)


def test_response_bound_enforced():
    with pytest.raises(ValidationError, match="bound"):
        _params(response_bound=0.1)


def test_beddington_deangelis_accepted():
    p = _params(response=beddington_deangelis(1.0, [1.0, 2.0], 0.5, 0.5))
    m = predator_prey_model(p, SYM)
    assert p.response_bound == pytest.approx(1.0)
    assert np.all(np.isfinite(m.f([1.0, 1.0], 1)))


def test_decoupled_predator_declines():
    p = _params(response=_no_response)
    m = predator_prey_model(p, SYM)
    f = average_field(m, [1.0, 0.0])
    _, z = integrate_ode(f, np.array([1.0, 2.0]), 5.0, 1e-2)
    assert np.all(np.diff(z[:, 1]) < 0)


def test_regime_count_mismatch():
    with pytest.raises(ValidationError):
        predator_prey_model(_params(), [[0.0]])


def test_holling_mapping():
    g = EXAMPLE_HOLLING.to_general()
    assert np.allclose(g.b, np.array(EXAMPLE_HOLLING.r) / np.array(EXAMPLE_HOLLING.K))
    assert np.array_equal(g.c, EXAMPLE_HOLLING.d) and np.array_equal(g.d, EXAMPLE_HOLLING.f)
    assert np.array_equal(g.f, EXAMPLE_HOLLING.e)


def test_moment_diagnostics_constant_equilibrium():
    # single averaged regime, no noise, started at its interior equilibrium
    p = _params(a=[1.0, 1.0], b=[0.5, 0.5], c=[0.2, 0.2], d=[0.1, 0.1], f=[1.0, 1.0])
    m = predator_prey_model(p, SYM)
    from fastswitch import find_equilibria
    eq = [e for e in find_equilibria(average_field(m), [[0.01, 3], [0.01, 3]]) if np.all(e.location > 0.01)][0]
    b = simulate_batch(m, SimParams(eps=1.0, delta=0.0, h=1e-3, T=10.0, scheme="log_euler"), eq.location, 0, 1)
    rep = moment_diagnostics(b)
    z2 = eq.location @ eq.location
    assert abs(rep.final_running - z2) <= 1e-6 * z2 and abs(rep.limsup_proxy - z2) <= 1e-6 * z2
