import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from fastswitch import (
    DiscreteMeasure,
    SimParams,
    Trajectory,
    ValidationError,
    cycle_occupation_measure,
    detect_limit_cycle,
    empirical_occupation,
    energy_distance,
    histogram,
    simulate_path,
    sliced_wasserstein,
)

finite = st.floats(-50, 50, allow_nan=False, allow_infinity=False)


def point_sets(n_max=30):
    return st.integers(1, n_max).flatmap(lambda n: arrays(np.float64, (n, 2), elements=finite))


def weight_sets(n):
    return arrays(np.float64, (n,), elements=st.floats(0.01, 10.0))


@settings(max_examples=60, deadline=None)
@given(point_sets(), point_sets())
def test_metric_properties(a, b):
    mu, nu = DiscreteMeasure(a), DiscreteMeasure(b)
    for d in (sliced_wasserstein, energy_distance):
        assert d(mu, mu) <= 1e-12
        assert d(mu, nu) >= 0
        assert abs(d(mu, nu) - d(nu, mu)) <= 1e-12 * max(1.0, d(mu, nu))


@settings(max_examples=60, deadline=None)
@given(point_sets(), point_sets(), arrays(np.float64, (2,), elements=finite))
def test_translation_invariance(a, b, v):
    mu, nu = DiscreteMeasure(a), DiscreteMeasure(b)
    base = sliced_wasserstein(mu, nu)
    moved = sliced_wasserstein(mu.translated(v), nu.translated(v))
    assert abs(base - moved) <= 1e-12 * max(1.0, np.abs(a).max(), np.abs(b).max(), np.abs(v).max())
    e0 = energy_distance(mu, nu)
    assert abs(e0 - energy_distance(mu.translated(v), nu.translated(v))) <= 1e-12 * max(1.0, 100 * e0)


@settings(max_examples=40, deadline=None)
@given(point_sets(12).flatmap(lambda p: st.tuples(st.just(p), weight_sets(len(p)))))
def test_weighted_identity(pw):
    p, w = pw
    mu = DiscreteMeasure(p, w)
    assert sliced_wasserstein(mu, DiscreteMeasure(p.copy(), w.copy())) <= 1e-12


def test_translation_shift_bounded():
    rng = np.random.default_rng(1)
    mu = DiscreteMeasure(rng.normal(size=(200, 2)))
    v = np.array([0.3, -0.4])
    assert sliced_wasserstein(mu, mu.translated(v)) <= np.linalg.norm(v) + 1e-12


def test_point_masses_projection_average():
    d = sliced_wasserstein(DiscreteMeasure([[0.0, 0.0]]), DiscreteMeasure([[1.0, 0.0]]), n_proj=10_000)
    assert abs(d - 2 / np.pi) <= 0.02 * 2 / np.pi


def test_energy_two_point_masses():
    assert energy_distance(DiscreteMeasure([[0.0, 0.0]]), DiscreteMeasure([[1.0, 0.0]])) == 2.0


def test_exact_1d_wasserstein():
    # W1 between uniform atoms {0, 1} and {0.5, 3} on a line is (0.5 + 2)/2
    mu = DiscreteMeasure([[0.0], [1.0]])
    nu = DiscreteMeasure([[0.5], [3.0]])
    assert abs(sliced_wasserstein(mu, nu, n_proj=3) - 1.25) <= 1e-12


def test_dimension_mismatch():
    with pytest.raises(ValidationError):
        sliced_wasserstein(DiscreteMeasure([[0.0]]), DiscreteMeasure([[0.0, 1.0]]))


def test_deterministic_given_seed():
    rng = np.random.default_rng(2)
    mu, nu = DiscreteMeasure(rng.normal(size=(50, 3))), DiscreteMeasure(rng.normal(size=(60, 3)))
    assert sliced_wasserstein(mu, nu, seed=5) == sliced_wasserstein(mu, nu, seed=5)


def _constant_traj(n=101):
    t = np.linspace(0, 10, n)
    return Trajectory(t, np.tile([1.0, 2.0], (n, 1)), np.zeros(n, int), np.ones(n, bool))


def test_constant_trajectory_occupation():
    mu = empirical_occupation(_constant_traj())
    assert np.allclose(mu.mean(), [1, 2])
    h = histogram(mu, [[0, 4], [0, 4]], 4)
    assert h.masses[1, 2] == pytest.approx(1.0) and h.outside == pytest.approx(0.0)


def test_constant_occupation_burn_idempotent():
    tr = _constant_traj()
    assert sliced_wasserstein(empirical_occupation(tr, burn=1.0), empirical_occupation(tr, burn=7.0)) == 0.0


def test_burn_must_leave_samples():
    with pytest.raises(ValidationError):
        empirical_occupation(_constant_traj(), burn=10.0)


def test_histogram_square():
    mu = DiscreteMeasure([[0.25, 0.25], [0.75, 0.25], [0.25, 0.75], [0.75, 0.75]])
    h = histogram(mu, [[0, 1], [0, 1]], 2)
    assert np.allclose(h.masses, 0.25)


def test_histogram_counts_outside():
    h = histogram(DiscreteMeasure([[0.5, 0.5], [5.0, 5.0]]), [[0, 1], [0, 1]], 2)
    assert h.outside == pytest.approx(0.5)


def test_hopf_cycle_ring(hopf_field):
    mu0 = cycle_occupation_measure(detect_limit_cycle(hopf_field, np.array([0.5, 0.0])))
    h = histogram(mu0, [[-1.5, 1.5], [-1.5, 1.5]], 120)
    xs = 0.5 * (h.edges()[0][1:] + h.edges()[0][:-1])
    X, Y = np.meshgrid(xs, xs, indexing="ij")
    r = np.hypot(X, Y)[h.masses > 0]
    assert h.outside == 0 and np.all(np.abs(r - 1) <= 0.05)


def test_deterministic_cycle_path_near_cycle_measure(hopf_field):
    from conftest import hopf_model
    c = detect_limit_cycle(hopf_field, np.array([0.5, 0.0]))
    tr = simulate_path(hopf_model(), SimParams(eps=1.0, delta=0.0, h=1e-3, T=20 * c.period), c.orbit[0], 0)
    assert sliced_wasserstein(empirical_occupation(tr), cycle_occupation_measure(c)) < 1e-2


def test_stride_self_consistency(example_model):
    tr = simulate_path(example_model, SimParams(eps=1e-3, delta=1e-3, h=1e-3, T=200.0, scheme="log_euler",
                                              record_switches=False), [1.0, 1.0], 0)
    a = empirical_occupation(tr, stride=1)
    b = empirical_occupation(tr, stride=2)
    assert sliced_wasserstein(a, b) < 2e-2


def test_thinned_keeps_mass():
    mu = DiscreteMeasure(np.arange(20.0).reshape(10, 2))
    t = mu.thinned(4)
    assert len(t) <= 4 and abs(t.weights.sum() - 1) <= 1e-12
