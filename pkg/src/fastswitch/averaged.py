"""The averaged vector field ``fbar(x) = sum_i nu_i f(x, i)`` and its flow:
RK4 integration, equilibria, limit cycles and the cycle occupation measure.
"""

import math
import warnings
from dataclasses import dataclass
from dataclasses import field as dc_field

import numba
import numpy as np
from numba.core.errors import NumbaError

from . import _kernels as K
from .ctmc import Generator, stationary_distribution
from .errors import BlowUpError, NoCycleError, ValidationError

RESIDUAL_TOL = 1e-9
HYPERBOLIC_TOL = 1e-8
DEDUP_DIST = 1e-6


class VectorField:
    """Autonomous field ``x -> F(x)`` with an optional compiled twin.

    Parameters
    ----------
    fn : callable
        ``fn(x) -> (d,)`` array.  Compiled with numba when possible.
    dim : int
    """

    def __init__(self, fn, dim):
        self.fn = fn
        self.dim = int(dim)
        self._jit = None

    @property
    def jit(self):
        if self._jit is None:
            try:
                fj = self.fn if isinstance(self.fn, numba.core.registry.CPUDispatcher) else numba.njit(self.fn)
                fj(np.ones(self.dim))
                self._jit = fj
            except NumbaError:
                warnings.warn("vector field could not be compiled; using Python", RuntimeWarning)
                self._jit = False
        return self._jit

    def __call__(self, x):
        return np.asarray(self.fn(np.asarray(x, dtype=float)), dtype=float)

    def scaled(self, c):
        """The field ``c * F``."""
        c = float(c)
        base = self.jit
        if base:
            return VectorField(numba.njit(lambda x: c * base(x)), self.dim)
        return VectorField(lambda x: c * self(x), self.dim)


def _as_field(f, dim=None):
    if isinstance(f, VectorField):
        return f
    if dim is None:
        raise ValidationError("dimension needed to wrap a plain callable")
    return VectorField(f, dim)


def _constant_average(drift, nu):
    m = nu.shape[0]

    def fbar(x):
        out = nu[0] * drift(x, 0)
        for i in range(1, m):
            out = out + nu[i] * drift(x, i)
        return out

    return fbar


@numba.njit
def _stationary_nb(q):
    m = q.shape[0]
    a = q.T.copy()
    a[m - 1, :] = 1.0
    b = np.zeros(m)
    b[m - 1] = 1.0
    return np.linalg.solve(a, b)


def _state_dependent_average(drift, rate_fn):
    def fbar(x):
        nu = _stationary_nb(rate_fn(x))
        out = nu[0] * drift(x, 0)
        for i in range(1, nu.shape[0]):
            out = out + nu[i] * drift(x, i)
        return out

    return fbar


class AveragedField(VectorField):
    """``fbar(x) = sum_i f(x, i) nu_i`` for a hybrid model.

    For a state-dependent generator ``nu`` is recomputed at every ``x``.
    """

    def __init__(self, model, nu=None):
        self.model = model
        if model.state_dependent:
            if nu is not None:
                raise ValidationError("nu is determined pointwise for a state-dependent generator")
            self.nu = None
        else:
            if nu is None:
                nu = stationary_distribution(model.generator)
            nu = np.asarray(nu, dtype=float)
            if nu.shape != (model.n_regimes,):
                raise ValidationError(f"nu has length {nu.shape}, model has {model.n_regimes} regimes")
            if abs(nu.sum() - 1.0) > 1e-12 or np.any(nu < 0):
                raise ValidationError("nu must be a probability vector")
            self.nu = nu
        super().__init__(self._python_average, model.dim)

    def _python_average(self, x):
        x = np.asarray(x, dtype=float)
        nu = self.nu if self.nu is not None else stationary_distribution(self.model.generator.at(x))
        return sum(nu[i] * self.model.f(x, i) for i in range(len(nu)))

    @property
    def jit(self):
        if self._jit is None:
            probe = np.ones(self.dim)
            try:
                drift, _, rate_fn, _ = self.model.kernels(probe)
                if not isinstance(drift, numba.core.registry.CPUDispatcher):
                    raise NumbaError("drift not compiled")
                if self.nu is None:
                    fj = numba.njit(_state_dependent_average(drift, rate_fn))
                else:
                    fj = numba.njit(_constant_average(drift, self.nu.copy()))
                fj(probe)
                self._jit = fj
            except NumbaError:
                self._jit = False
        return self._jit

    def nu_at(self, x):
        if self.nu is not None:
            return self.nu
        return stationary_distribution(self.model.generator.at(x))


def average_field(model, nu=None):
    """Averaged drift of ``model`` under the probability vector ``nu``."""
    return AveragedField(model, nu)


def _rk4_py(field, x0, h, n):
    out = np.empty((n + 1, len(x0)))
    x = np.array(x0, dtype=float)
    out[0] = x
    for k in range(n):
        k1 = field(x)
        k2 = field(x + 0.5 * h * k1)
        k3 = field(x + 0.5 * h * k2)
        k4 = field(x + h * k3)
        x = x + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        out[k + 1] = x
    return out


def _rk4(field, x0, h, n):
    fj = field.jit
    x0 = np.asarray(x0, dtype=float)
    if fj:
        out = np.empty((n + 1, len(x0)))
        K.rk4_run(fj, x0, float(h), int(n), out)
        return out
    return _rk4_py(field, x0, h, n)


def _step(field, x, h):
    fj = field.jit
    if fj:
        return K.rk4_step(fj, np.asarray(x, dtype=float), float(h))
    return _rk4_py(field, x, h, 1)[1]


def integrate_ode(field, x0, T, h, guard=1e6):
    """Fixed-step RK4 on ``[0, T]``; the last step is shortened to land on ``T``.

    Returns
    -------
    times, states : ndarray
    """
    if not h > 0 or not T >= 0:
        raise ValidationError("need h > 0 and T >= 0")
    field = _as_field(field, len(x0))
    n = int(math.floor(T / h + 1e-9))
    if n * h > T:
        n -= 1
    states = _rk4(field, x0, h, n)
    times = np.arange(n + 1) * h
    rest = T - n * h
    if rest > 1e-12 * max(1.0, T):
        states = np.vstack([states, _step(field, states[-1], rest)])
        times = np.append(times, T)
    else:
        times[-1] = T
    bad = ~np.all(np.isfinite(states), axis=1) | (np.linalg.norm(states, axis=1) > guard)
    if bad.any():
        t = times[np.argmax(bad)]
        raise BlowUpError(f"averaged flow left the guard ball |x| <= {guard:g} at t={t:.6g}", time=t)
    return times, states


def flow(field, x0, t, h=1e-3):
    """State of the flow at time ``t`` from ``x0``."""
    return integrate_ode(field, x0, t, h)[1][-1]


def jacobian(field, x):
    """Central finite-difference Jacobian, step ``1e-6 (1 + |x_j|)``."""
    x = np.asarray(x, dtype=float)
    d = len(x)
    J = np.empty((d, d))
    for j in range(d):
        s = 1e-6 * (1.0 + abs(x[j]))
        e = np.zeros(d)
        e[j] = s
        J[:, j] = (field(x + e) - field(x - e)) / (2 * s)
    return J


@dataclass
class Equilibrium:
    """A zero of the averaged field with its linearisation."""

    location: np.ndarray
    eigenvalues: np.ndarray
    classification: str
    jacobian: np.ndarray = dc_field(repr=False)
    beta: np.ndarray = None

    def to_dict(self):
        return {
            "location": self.location.tolist(),
            "eigenvalues": [[float(z.real), float(z.imag)] for z in self.eigenvalues],
            "classification": self.classification,
            "beta": None if self.beta is None else self.beta.tolist(),
        }


def classify(eigenvalues, tol=HYPERBOLIC_TOL):
    re = np.real(eigenvalues)
    if np.any(np.abs(re) <= tol):
        return "nonhyperbolic"
    if np.all(re > 0):
        return "source"
    if np.all(re < 0):
        return "sink"
    return "saddle"


def _newton(field, x, tol, max_iter=60):
    for _ in range(max_iter):
        fx = field(x)
        if not np.all(np.isfinite(fx)):
            return None
        if np.linalg.norm(fx) <= tol * 1e-3:
            return x
        try:
            dx = np.linalg.solve(jacobian(field, x), fx)
        except np.linalg.LinAlgError:
            return None
        x = x - dx
        if not np.all(np.isfinite(x)) or np.linalg.norm(x) > 1e8:
            return None
        if np.linalg.norm(dx) <= 1e-15 * (1 + np.linalg.norm(x)):
            break
    return x if np.linalg.norm(field(x)) <= tol else None


def _make_equilibrium(field, x):
    J = jacobian(field, x)
    ev = np.linalg.eigvals(J)
    ev = ev[np.lexsort((ev.imag, ev.real))]
    cls = classify(ev)
    if cls == "nonhyperbolic":
        warnings.warn(f"nonhyperbolic equilibrium at {x}", RuntimeWarning)
    eq = Equilibrium(x, ev, cls, J)
    if cls == "saddle" and len(x) == 2:
        eq.beta = stable_manifold_normal(eq)
    return eq


def find_equilibria(field, box, n=11, tol=RESIDUAL_TOL):
    """Zeros of ``field`` in a box, by Newton from every node of an ``n^d`` grid.

    Parameters
    ----------
    field : VectorField
    box : sequence of (lo, hi)
        One interval per coordinate; roots outside the closed box are dropped.
    n : int
        Grid nodes per axis (>= 2).
    tol : float
        Residual tolerance ``|F(x*)| <= tol``.

    Returns
    -------
    list of Equilibrium
        Sorted lexicographically by location.  Seeds where Newton diverges
        are skipped, so the list may be empty.
    """
    box = np.asarray(box, dtype=float)
    field = _as_field(field, len(box))
    if box.ndim != 2 or box.shape[1] != 2 or np.any(box[:, 1] < box[:, 0]):
        raise ValidationError("box must be a list of (lo, hi) pairs")
    if n < 2:
        raise ValidationError("need at least 2 grid nodes per axis")
    axes = [np.linspace(lo, hi, n) for lo, hi in box]
    seeds = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, len(box))
    slack = 1e-9 * (1 + np.abs(box).max())
    roots = []
    for s in seeds:
        r = _newton(field, s.copy(), tol)
        if r is None:
            continue
        if np.any(r < box[:, 0] - slack) or np.any(r > box[:, 1] + slack):
            continue
        r = np.where(np.abs(r) < 1e-13, 0.0, r)
        if all(np.linalg.norm(r - q) > DEDUP_DIST for q in roots):
            roots.append(r)
    roots.sort(key=lambda r: tuple(r))
    return [_make_equilibrium(field, r) for r in roots]


def stable_manifold_normal(eq):
    """Unit normal to the stable eigendirection of a planar saddle.

    The sign is fixed so that the largest component is positive.
    """
    if eq.classification != "saddle":
        raise ValidationError(f"stable-manifold normal needs a saddle, got {eq.classification}")
    if len(eq.location) != 2:
        raise ValidationError("stable-manifold normal is implemented for d = 2")
    ev, vecs = np.linalg.eig(eq.jacobian)
    k = int(np.argmin(ev.real))
    if abs(ev[k].imag) > 0:
        raise RuntimeError("complex stable eigenvalue at a planar saddle")
    v = np.real(vecs[:, k])
    v = v / np.linalg.norm(v)
    beta = np.array([-v[1], v[0]])
    if beta[np.argmax(np.abs(beta))] < 0:
        beta = -beta
    return beta


def stable_vector(eq):
    """Unit stable eigenvector of a planar saddle."""
    beta = eq.beta if eq.beta is not None else stable_manifold_normal(eq)
    return np.array([beta[1], -beta[0]])


@dataclass
class PoincareSection:
    """Hyperplane ``normal . (x - anchor) = 0``, crossed in the ``+normal`` direction."""

    anchor: np.ndarray
    normal: np.ndarray
    radius: float = np.inf

    def __post_init__(self):
        self.anchor = np.asarray(self.anchor, dtype=float)
        n = np.asarray(self.normal, dtype=float)
        self.normal = n / np.linalg.norm(n)

    def to_dict(self):
        return {"anchor": self.anchor.tolist(), "normal": self.normal.tolist(), "radius": self.radius}


@dataclass
class LimitCycle:
    """Periodic orbit sampled at ``K`` uniform times over one period."""

    period: float
    orbit: np.ndarray
    section: PoincareSection
    field: VectorField = dc_field(repr=False)
    crossings: np.ndarray = dc_field(default=None, repr=False)
    h: float = 1e-3

    def resample(self, K):
        """Orbit samples at ``K`` uniform times starting from ``orbit[0]``."""
        return _sample_orbit(self.field, self.orbit[0], self.period, K, self.h)

    def time_average(self, g, K=None):
        """``(1/T) int_0^T g(X(t)) dt`` along the cycle (uniform-time rule)."""
        pts = self.orbit if K is None else self.resample(K)
        return float(np.mean([g(p) for p in pts]))

    def to_dict(self):
        return {
            "period": self.period,
            "section": self.section.to_dict(),
            "orbit": self.orbit.tolist(),
        }


def _sample_orbit(field, y0, period, K, h):
    dt = period / K
    sub = max(1, int(math.ceil(dt / h)))
    pts = _rk4(field, y0, dt / sub, K * sub)
    return pts[: K * sub : sub]


def _refine_crossing(field, x, sec, h):
    """Time ``tau in (0, h]`` at which the RK4 partial step from ``x`` hits the section."""
    s0 = sec.normal @ (x - sec.anchor)
    x1 = _step(field, x, h)
    s1 = sec.normal @ (x1 - sec.anchor)
    tau = h * s0 / (s0 - s1)
    for _ in range(8):
        y = _step(field, x, tau)
        g = sec.normal @ (y - sec.anchor)
        dg = sec.normal @ field(y)
        if dg == 0:
            break
        step = g / dg
        tau = min(h, max(0.0, tau - step))
        if abs(step) < 1e-15:
            break
    return tau, _step(field, x, tau)


def detect_limit_cycle(field, seed, burn=200.0, section=None, h=1e-3, K=1024,
                       equilibria=None, max_crossings=1000, tol=1e-8, search_time=10000.0):
    """Locate an attracting periodic orbit with a Poincare return map.

    The flow from ``seed`` is run for ``burn`` time units.  Unless a section
    is given, the hyperplane through the post-burn point orthogonal to the
    field there is used.  Same-direction crossings are located to machine
    precision; iteration stops when two consecutive crossings are within
    ``tol``.  The period is the time between that final pair.

    Raises
    ------
    ValidationError
        ``seed`` lies within ``1e-3`` of an equilibrium.
    NoCycleError
        No crossing within ``search_time``, or the crossings do not settle.
    """
    seed = np.asarray(seed, dtype=float)
    field = _as_field(field, len(seed))
    if K < 8:
        raise ValidationError("K must be at least 8")
    if equilibria is None:
        r = _newton(field, seed.copy(), RESIDUAL_TOL)
        near = [] if r is None else [r]
    else:
        near = [e.location for e in equilibria]
    for q in near:
        if np.linalg.norm(seed - q) < 1e-3:
            raise ValidationError(f"seed {seed} is within 1e-3 of the equilibrium {q}")
    x = integrate_ode(field, seed, burn, h)[1][-1] if burn > 0 else seed
    if section is None:
        fx = field(x)
        if np.linalg.norm(fx) < 1e-10:
            raise NoCycleError("flow settled on an equilibrium during burn-in")
        section = PoincareSection(x - 1e-9 * fx / np.linalg.norm(fx), fx)
    chunk = max(1000, int(20.0 / h))
    t0 = 0.0
    times, points = [], []
    while t0 < search_time and len(points) < max_crossings:
        traj = _rk4(field, x, h, chunk)
        if not np.all(np.isfinite(traj)):
            raise NoCycleError("flow diverged while searching for crossings")
        s = (traj - section.anchor) @ section.normal
        idx = np.nonzero((s[:-1] < 0) & (s[1:] >= 0))[0]
        for k in idx:
            tau, y = _refine_crossing(field, traj[k], section, h)
            if np.linalg.norm(y - section.anchor) > section.radius:
                continue
            times.append(t0 + k * h + tau)
            points.append(y)
            if len(points) >= 2 and np.linalg.norm(points[-1] - points[-2]) <= tol:
                period = times[-1] - times[-2]
                orbit = _sample_orbit(field, points[-1], period, K, h)
                return LimitCycle(period, orbit, section, field, np.array(points), h)
        x = traj[-1]
        t0 += chunk * h
    if not points:
        raise NoCycleError(f"no section crossings within {search_time:g} time units")
    gaps = np.linalg.norm(np.diff(np.array(points), axis=0), axis=1)
    if len(gaps) >= 4 and gaps[-1] > gaps[len(gaps) // 2]:
        raise NoCycleError("unstable or no cycle: crossing gaps are growing")
    raise NoCycleError(f"crossings did not close to {tol:g} (last gap {gaps[-1] if len(gaps) else np.nan:.2e})")


def cycle_occupation_measure(cycle, K=None):
    """Uniform-time discretisation of the occupation measure of the cycle."""
    from .measures import DiscreteMeasure

    if K is not None and K < 8:
        raise ValidationError("K must be at least 8")
    pts = cycle.orbit if K is None or K == len(cycle.orbit) else cycle.resample(K)
    return DiscreteMeasure(pts)
