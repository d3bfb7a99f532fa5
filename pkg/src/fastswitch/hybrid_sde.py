"""Path simulation of switching diffusions

    dX = f(X, a(t)) dt + sqrt(delta) sigma(X, a(t)) dW,

where ``a(t)`` is a finite Markov chain with generator ``Q/eps`` that is
independent of ``W``.  Switching times are sampled exactly; between them the
state is advanced on a uniform grid by Euler-Maruyama, or by Euler in
log-coordinates for models whose noise is linear in each coordinate.
"""

import json
import math
import warnings
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from numba.core.errors import NumbaError
from scipy.integrate import cumulative_trapezoid

from . import _kernels as K
from . import rng as _rng
from ._parallel import pmap
from .ctmc import (
    Generator,
    JumpSkeleton,
    StateDependentGenerator,
    poisson_times,
    sample_jump_skeleton,
)
from .errors import BlowUpError, NumericError, ValidationError

SCHEMES = ("euler_maruyama", "log_euler")
NOISE_CHUNK = 1 << 18


def _jit(fn):
    if isinstance(fn, numba.core.registry.CPUDispatcher):
        return fn
    return numba.njit(fn)


class HybridModel:
    """Drift, diffusion and switching generator of a hybrid SDE.

    Parameters
    ----------
    dim, noise_dim : int
        State dimension ``d`` and Brownian dimension ``m``.
    drift : callable
        ``drift(x, i) -> (d,)`` array.
    diffusion : callable
        ``diffusion(x, i) -> (d, m)`` array (before the ``sqrt(delta)`` factor).
    generator : Generator or StateDependentGenerator
    linear_noise : sequence of bool, optional
        Coordinates ``k`` whose diffusion row is ``x_k`` times a constant vector.
    positive : bool
        State space is the open positive orthant.

    Callbacks are compiled with numba on first use.  If compilation fails
    the simulation falls back to pure Python, which is correct but slow.
    """

    def __init__(self, dim, noise_dim, drift, diffusion, generator,
                 linear_noise=None, positive=False, name="model"):
        if not isinstance(generator, (Generator, StateDependentGenerator)):
            generator = Generator(generator)
        if dim < 1 or noise_dim < 1:
            raise ValidationError("dim and noise_dim must be positive")
        if linear_noise is not None:
            linear_noise = tuple(bool(v) for v in linear_noise)
            if len(linear_noise) != dim:
                raise ValidationError("linear_noise needs one flag per coordinate")
        self.dim = int(dim)
        self.noise_dim = int(noise_dim)
        self.drift = drift
        self.diffusion = diffusion
        self.generator = generator
        self.linear_noise = linear_noise
        self.positive = bool(positive)
        self.name = name
        self._compiled = None

    @property
    def n_regimes(self):
        return self.generator.size

    @property
    def state_dependent(self):
        return isinstance(self.generator, StateDependentGenerator)

    def f(self, x, i):
        return np.asarray(self.drift(np.asarray(x, dtype=float), int(i)), dtype=float)

    def sigma(self, x, i):
        return np.asarray(self.diffusion(np.asarray(x, dtype=float), int(i)), dtype=float)

    def kernels(self, probe):
        """Compiled ``(drift, diffusion, rate_fn, advance)`` or the Python fallback."""
        if self._compiled is None:
            rate_fn = self.generator.rate_fn if self.state_dependent else None
            try:
                dj = _jit(self.drift)
                sj = _jit(self.diffusion)
                dj(probe, 0)
                sj(probe, 0)
                rj = K.no_rates
                if rate_fn is not None:
                    rj = _jit(rate_fn)
                    rj(probe)
                self._compiled = (dj, sj, rj, K.advance)
            except NumbaError as exc:
                warnings.warn(f"model callbacks could not be compiled ({exc.__class__.__name__}); "
                              "using the pure-Python integrator", RuntimeWarning)
                self._compiled = (self.drift, self.diffusion,
                                  rate_fn or K.no_rates.py_func, K.advance.py_func)
        return self._compiled

    def check_linear_noise(self, x, rtol=1e-12):
        """Verify the linear-noise flags at ``x`` and ``1.5 x``."""
        if not self.linear_noise:
            return
        x = np.asarray(x, dtype=float)
        for i in range(self.n_regimes):
            a = self.sigma(x, i)
            b = self.sigma(1.5 * x, i)
            for k, flag in enumerate(self.linear_noise):
                if flag and not np.allclose(a[k] / x[k], b[k] / (1.5 * x[k]), rtol=rtol, atol=0):
                    raise ValidationError(f"diffusion row {k} is not linear in x_{k} (regime {i})")

    def __repr__(self):
        return f"HybridModel({self.name!r}, d={self.dim}, m={self.noise_dim}, m0={self.n_regimes})"


@dataclass(frozen=True)
class SimParams:
    """Numerical parameters of one simulation."""

    eps: float
    delta: float
    h: float
    T: float
    seed: int = 0
    scheme: str = "euler_maruyama"
    burn_in: float = 0.0
    guard: float = 1e6
    record_stride: int = 1
    record_switches: bool = True

    def __post_init__(self):
        errs = []
        if not self.eps > 0:
            errs.append("eps must be positive")
        if not self.delta >= 0:
            errs.append("delta must be nonnegative")
        if not self.h > 0:
            errs.append("h must be positive")
        if not self.T > 0:
            errs.append("T must be positive")
        if self.h > self.T:
            errs.append("h must not exceed T")
        if not 0 <= self.burn_in <= self.T:
            errs.append("burn_in must lie in [0, T]")
        if self.scheme not in SCHEMES:
            errs.append(f"scheme must be one of {SCHEMES}")
        if self.record_stride < 1:
            errs.append("record_stride must be >= 1")
        if not 0 <= self.seed < 2 ** 64:
            errs.append("seed must be a 64-bit nonnegative integer")
        if errs:
            raise ValidationError("; ".join(errs))

    @property
    def n_grid(self):
        r = self.T / self.h
        n = round(r)
        return int(n) if abs(r - n) <= 1e-9 * max(1.0, r) else int(math.ceil(r))

    def grid(self):
        """Recorded grid times ``k*h`` (every ``record_stride``-th) and ``T``."""
        n = self.n_grid
        k = np.arange(0, n + 1, self.record_stride)
        if k[-1] != n:
            k = np.append(k, n)
        t = k * self.h
        t[k == n] = self.T
        return t

    def replace(self, **kw):
        d = asdict(self)
        d.update(kw)
        return SimParams(**d)


@dataclass
class Trajectory:
    """Recorded path: grid samples plus one record at every switching time."""

    times: np.ndarray
    states: np.ndarray
    regimes: np.ndarray
    on_grid: np.ndarray
    params: SimParams = None

    def grid(self):
        """Sub-record of the grid samples only."""
        g = self.on_grid
        return Trajectory(self.times[g], self.states[g], self.regimes[g], self.on_grid[g], self.params)

    def to_csv(self, path):
        d = self.states.shape[1]
        header = ",".join(["t"] + [f"x_{k + 1}" for k in range(d)] + ["regime"])
        data = np.column_stack([self.times, self.states, self.regimes])
        fmt = ["%.17g"] * (d + 1) + ["%d"]
        np.savetxt(path, data, delimiter=",", header=header, comments="", fmt=fmt)

    def __len__(self):
        return len(self.times)


@dataclass
class _PathResult:
    status: int
    aux: float
    x: np.ndarray
    traj: Trajectory = None


def _events(model, p, i0, horizon, sw):
    gen = model.generator
    if isinstance(gen, Generator):
        skel = sample_jump_skeleton(gen, p.eps, i0, horizon, sw)
        return skel.times[1:], skel.states[1:], np.zeros((1, 2)), 1.0
    times = poisson_times(gen.bound / p.eps, horizon, sw)
    u = sw.random((len(times), 2))
    return times, np.full(len(times), -1, dtype=np.int64), u, gen.bound


def _run_path(model, p, x0, i0, path=0, *, skeleton=None, normals=None,
              monitor=K.MONITOR_NONE, ref=None, gamma=0.0, poly=None,
              theta3=0.0, radius=np.inf, record=True):
    x = np.array(x0, dtype=float)
    if x.shape != (model.dim,):
        raise ValidationError(f"x0 must have shape ({model.dim},)")
    if not 0 <= i0 < model.n_regimes:
        raise ValidationError(f"initial regime {i0} out of range")
    log_scheme = p.scheme == "log_euler"
    if log_scheme and (not model.linear_noise or not all(model.linear_noise) or np.any(x <= 0)):
        raise ValidationError("log_euler needs linear noise in every coordinate and a positive x0")
    drift, diff, rate_fn, advance = model.kernels(x)
    sw, dif = _rng.path_streams(p.seed, path)
    if skeleton is not None:
        if model.state_dependent:
            raise ValidationError("a fixed skeleton needs a constant generator")
        if skeleton.states[0] != i0 or skeleton.horizon < p.T:
            raise ValidationError("skeleton does not match i0 or horizon")
        keep = skeleton.times[1:] <= p.T
        ev_t, ev_next = skeleton.times[1:][keep], skeleton.states[1:][keep].astype(np.int64)
        ev_u, qbar = np.zeros((1, 2)), 1.0
    else:
        ev_t, ev_next, ev_u, qbar = _events(model, p, i0, p.T, sw)
    n_grid = p.n_grid
    m = model.noise_dim
    if record:
        n_rec = len(p.grid()) + (len(ev_t) if p.record_switches else 0)
    else:
        n_rec = 0
    rec_t = np.empty(n_rec)
    rec_x = np.empty((n_rec, model.dim))
    rec_i = np.empty(n_rec, dtype=np.int64)
    rec_g = np.empty(n_rec, dtype=np.bool_)
    stride = p.record_stride if record else n_grid + 2
    rec_switch = bool(record and p.record_switches)
    if ref is None:
        ref = np.zeros((1, model.dim))
    if poly is None:
        poly = np.zeros((1, model.dim))
    supplied = normals is not None
    if supplied:
        noise = np.ascontiguousarray(normals, dtype=float)
    elif p.delta > 0:
        noise = dif.standard_normal(m * min(NOISE_CHUNK, n_grid + len(ev_t) + 1))
    else:
        noise = np.zeros(0)
    ivars = np.zeros(6, dtype=np.int64)
    ivars[K.I_REGIME] = i0
    fvars = np.zeros(2)
    if monitor == K.MONITOR_CLOSENESS:
        fvars[K.F_AUX] = 0.0
    while True:
        advance(drift, diff, rate_fn, x, ivars, fvars,
                p.h, n_grid, p.T, p.delta, log_scheme, p.guard,
                ev_t, ev_next, ev_u, qbar, noise, m,
                rec_t, rec_x, rec_i, rec_g, stride, rec_switch,
                monitor, ref, gamma, poly, theta3, radius)
        status = ivars[K.I_STATUS]
        if status != K.NEED_NOISE:
            break
        if supplied:
            raise ValidationError("supplied normals exhausted")
        noise = dif.standard_normal(m * NOISE_CHUNK)
        ivars[K.I_NOISE] = 0
        ivars[K.I_STATUS] = 0
    traj = None
    if record:
        r = ivars[K.I_REC]
        traj = Trajectory(rec_t[:r], rec_x[:r], rec_i[:r], rec_g[:r], p)
    return _PathResult(int(status), float(fvars[K.F_AUX]), x, traj)


def _raise_for(res, p, path=None):
    where = "" if path is None else f"path {path}: "
    if res.status == K.BLOWUP:
        raise BlowUpError(f"{where}state left the guard ball |x| <= {p.guard:g} at t={res.aux:.6g}",
                          time=res.aux, path=path)
    if res.status == K.NONFINITE:
        raise NumericError(f"{where}non-finite or nonpositive state at t={res.aux:.6g}",
                           time=res.aux, path=path)


def simulate_path(model, p, x0, i0=0, *, path=0, skeleton=None, normals=None):
    """Simulate one path on ``[0, p.T]``.

    Parameters
    ----------
    model : HybridModel
    p : SimParams
    x0 : array_like
        Initial state.
    i0 : int
        Initial regime.
    path : int
        Index of the random sub-stream; path ``k`` of a batch uses ``k``.
    skeleton : JumpSkeleton, optional
        Fixed switching record to use instead of sampling one.
    normals : array_like, optional
        Standard normal draws consumed ``m`` per substep, in place of the
        path's diffusion stream.

    Returns
    -------
    Trajectory
    """
    if p.scheme == "log_euler":
        model.check_linear_noise(np.asarray(x0, dtype=float))
    res = _run_path(model, p, x0, i0, path, skeleton=skeleton, normals=normals)
    _raise_for(res, p)
    return res.traj


@dataclass
class BatchSummary:
    """Per-time ensemble statistics on the recorded grid."""

    times: np.ndarray
    mean: np.ndarray
    second_moment: np.ndarray
    n_paths: int
    params: SimParams
    x0: tuple
    i0: int
    trajectories: list = field(default=None, repr=False)

    def to_dict(self):
        return {
            "seed": self.params.seed,
            "n_paths": self.n_paths,
            "params": asdict(self.params),
            "x0": list(self.x0),
            "i0": self.i0,
            "times": self.times.tolist(),
            "mean": self.mean.tolist(),
            "second_moment": self.second_moment.tolist(),
        }

    def to_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh)


def simulate_batch(model, p, x0, i0=0, n_paths=1, keep=False, threads=None):
    """Simulate ``n_paths`` independent paths and reduce them on the grid.

    Path ``k`` uses random sub-stream ``k``, so the first ``n`` paths of a
    larger batch are identical to a batch of size ``n``.
    """
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    if p.scheme == "log_euler":
        model.check_linear_noise(np.asarray(x0, dtype=float))
    # compile once before any worker threads start
    model.kernels(np.asarray(x0, dtype=float))

    def one(k):
        res = _run_path(model, p, x0, i0, k)
        _raise_for(res, p, path=k)
        return res.traj.grid()

    trajs = pmap(one, range(n_paths), threads)
    states = np.stack([t.states for t in trajs])
    mean = states.mean(axis=0)
    second = (states ** 2).sum(axis=2).mean(axis=0)
    return BatchSummary(trajs[0].times, mean, second, n_paths, p,
                        tuple(float(v) for v in x0), int(i0), trajs if keep else None)


def empirical_second_moment_course(batch):
    """Running average ``(1/t) int_0^t E|Z|^2 ds`` and pointwise ``E|Z(t)|^2``.

    ``batch`` is a BatchSummary or a list of Trajectory objects sharing a grid.
    Returns ``(times, running_average, pointwise)``; the running average at
    ``t = 0`` is the pointwise value.
    """
    if isinstance(batch, BatchSummary):
        t, pointwise = batch.times, batch.second_moment
    else:
        trajs = [tr.grid() for tr in batch]
        if not trajs:
            raise ValidationError("empty batch")
        t = trajs[0].times
        pointwise = np.mean([(tr.states ** 2).sum(axis=1) for tr in trajs], axis=0)
    integral = cumulative_trapezoid(pointwise, t, initial=0.0)
    running = np.empty_like(pointwise)
    running[0] = pointwise[0]
    running[1:] = integral[1:] / t[1:]
    return t, running, pointwise


def integrate_switching_ode(model, skeleton, x0, h, T):
    """Explicit Euler for ``dx = f(x, a(t)) dt`` along a fixed switching record.

    Plain NumPy reference with the same step-cutting rule as the path
    simulator; records every grid point and every switch.
    """
    p = SimParams(eps=1.0, delta=0.0, h=h, T=T)
    n = p.n_grid
    x = np.array(x0, dtype=float)
    sw_t = skeleton.times[1:][skeleton.times[1:] <= T]
    sw_s = skeleton.states[1:][: len(sw_t)]
    regime = int(skeleton.states[0])
    t, k, e = 0.0, 0, 0
    times, states, regs, grid = [], [], [], []
    while k <= n:
        tg = k * h if k < n else T
        te = sw_t[e] if e < len(sw_t) else np.inf
        tn = min(tg, te)
        dt = tn - t
        if dt > 0:
            fx = model.f(x, regime)
            x = np.array([x[j] + fx[j] * dt for j in range(len(x))])
            t = tn
        if e < len(sw_t) and te == tn:
            e += 1
            if sw_s[e - 1] != regime:
                regime = int(sw_s[e - 1])
                times.append(tn), states.append(x.copy()), regs.append(regime), grid.append(False)
        if tg == tn:
            times.append(tn), states.append(x.copy()), regs.append(regime), grid.append(True)
            k += 1
    return Trajectory(np.array(times), np.array(states), np.array(regs), np.array(grid), p)
