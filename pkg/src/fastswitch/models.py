"""Predator-prey presets with regime-dependent coefficients.

General form (per-capita rates, regime ``i``)::

    phi(x, y, i) = a_i - b_i x - y h(x, y, i)          prey
    psi(x, y, i) = -c_i - d_i y + f_i x h(x, y, i)     predator

    dX = X phi dt + sqrt(delta) lam_i X dW1
    dY = Y psi dt + sqrt(delta) rho_i Y dW2

The Holling type II preset is written with its own letters
``r, K, m, a, b, d, e, f``; :meth:`HollingParams.to_general` maps them onto
the general form:

    a <- r,  b <- r/K,  h <- m / (a + b x),  c <- d,  d <- f,  f <- e
"""

from dataclasses import dataclass, field
from functools import lru_cache

import numba
import numpy as np
from scipy import stats

from .ctmc import Generator, stationary_distribution
from .errors import ConfigurationError, ValidationError
from .hybrid_sde import HybridModel, empirical_second_moment_course


def holling_type2(m, a, b):
    """``h(x, y, i) = m_i / (a_i + b_i x)``."""
    m, a, b = (np.asarray(v, dtype=float).copy() for v in (m, a, b))

    @numba.njit
    def h(x, y, i):
        return m[i] / (a[i] + b[i] * x)

    return h


def beddington_deangelis(m1, m2, m3, m4):
    """``h(x, y, i) = m1 / (m2_i + m3 x + m4 y)``."""
    m2 = np.asarray(m2, dtype=float).copy()
    m1, m3, m4 = float(m1), float(m3), float(m4)

    @numba.njit
    def h(x, y, i):
        return m1 / (m2[i] + m3 * x + m4 * y)

    return h


@dataclass
class PredatorPreyParams:
    """Per-regime coefficients of the general predator-prey system."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: np.ndarray
    f: np.ndarray
    lam: np.ndarray
    rho: np.ndarray
    response: object
    response_bound: float = None
    probe_box: tuple = ((0.0, 10.0), (0.0, 10.0))
    probe_n: int = 64

    def __post_init__(self):
        names = ("a", "b", "c", "d", "f", "lam", "rho")
        arrs = {k: np.atleast_1d(np.asarray(getattr(self, k), dtype=float)) for k in names}
        m0 = len(arrs["a"])
        for k, v in arrs.items():
            if v.shape != (m0,):
                raise ValidationError(f"parameter {k} needs {m0} entries, got {v.shape}")
            if np.any(v <= 0) or not np.all(np.isfinite(v)):
                raise ValidationError(f"parameter {k} must be positive in every regime: {v.tolist()}")
            setattr(self, k, v)
        (x0, x1), (y0, y1) = self.probe_box
        xs = np.linspace(x0, x1, self.probe_n)
        ys = np.linspace(y0, y1, self.probe_n)
        vals = np.array([[[self.response(x, y, i) for y in ys] for x in xs] for i in range(m0)])
        if not np.all(np.isfinite(vals)) or np.any(vals <= 0):
            raise ValidationError("functional response must be positive and finite on the probe grid")
        if self.response_bound is None:
            self.response_bound = float(vals.max())
        elif vals.max() > self.response_bound:
            raise ValidationError(f"functional response exceeds its bound {self.response_bound}")

    @property
    def n_regimes(self):
        return len(self.a)


@dataclass
class HollingParams:
    """Holling type II switching model in its own notation."""

    r: tuple
    K: tuple
    m: tuple
    a: tuple
    b: tuple
    d: tuple
    e: tuple
    f: tuple
    lam: tuple
    rho: tuple

    def to_general(self):
        r, K = np.asarray(self.r, float), np.asarray(self.K, float)
        return PredatorPreyParams(
            a=r, b=r / K, c=np.asarray(self.d, float), d=np.asarray(self.f, float),
            f=np.asarray(self.e, float), lam=self.lam, rho=self.rho,
            response=holling_type2(self.m, self.a, self.b))

    def to_dict(self):
        return {k: list(map(float, getattr(self, k))) for k in
                ("r", "K", "m", "a", "b", "d", "e", "f", "lam", "rho")}


def predator_prey_model(p, Q, name="predator_prey"):
    """Hybrid model for the general predator-prey system.

    Noise is linear in each coordinate on independent channels, so the model
    carries linear-noise flags and lives in the open positive quadrant.
    """
    Q = Q if isinstance(Q, Generator) else Generator(Q)
    if Q.size != p.n_regimes:
        raise ValidationError(f"generator has {Q.size} regimes, parameters have {p.n_regimes}")
    a, b, c, d, f = (v.copy() for v in (p.a, p.b, p.c, p.d, p.f))
    lam, rho = p.lam.copy(), p.rho.copy()
    h = p.response if isinstance(p.response, numba.core.registry.CPUDispatcher) else numba.njit(p.response)

    @numba.njit
    def drift(z, i):
        x = z[0]
        y = z[1]
        hv = h(x, y, i)
        out = np.empty(2)
        out[0] = x * (a[i] - b[i] * x - y * hv)
        out[1] = y * (-c[i] - d[i] * y + f[i] * x * hv)
        return out

    @numba.njit
    def diffusion(z, i):
        g = np.zeros((2, 2))
        g[0, 0] = lam[i] * z[0]
        g[1, 1] = rho[i] * z[1]
        return g

    model = HybridModel(2, 2, drift, diffusion, Q, linear_noise=(True, True), positive=True, name=name)
    model.params = p
    return model


EXAMPLE_HOLLING = HollingParams(
    r=(0.9, 1.1), K=(4.737, 5.238), m=(1.2, 0.8), a=(1.0, 1.0), b=(1.0, 1.0),
    d=(0.85, 1.15), e=(1.0, 2.5), f=(0.03, 0.01), lam=(1.0, 2.0), rho=(3.0, 1.0))
EXAMPLE_GENERATOR = ((-1.0, 1.0), (1.0, -1.0))


@lru_cache(maxsize=None)
def paper_example_model():
    """The two-regime Holling type II example with symmetric switching.

    Predator noise is ``rho(i) * y dW2`` (linear in the predator density).
    """
    model = predator_prey_model(EXAMPLE_HOLLING.to_general(), EXAMPLE_GENERATOR, name="paper_example")
    model.holling = EXAMPLE_HOLLING
    return model


def fit_holling_coefficients(field, a=1.0, b=1.0):
    """Read ``(r, K, m, em, f, d)`` off an averaged Holling II field.

    Assumes the averaged field has the form
    ``x r (1 - x/K) - m x y/(a + b x)`` and
    ``y (-d + em x/(a + b x) - f y)`` with regime-independent ``a, b``.
    ``residual`` is the misfit at an extra probe point.
    """
    def prey(x, y):
        return field(np.array([x, y]))[0] / x

    def pred(x, y):
        return field(np.array([x, y]))[1] / y

    slope = prey(1.0, 0.0) - prey(2.0, 0.0)
    r = prey(1.0, 0.0) + slope
    m = (r - slope - prey(1.0, 1.0)) * (a + b)
    fc = pred(0.0, 1.0) - pred(0.0, 2.0)
    dd = -pred(0.0, 1.0) - fc
    em = (pred(1.0, 1.0) + dd + fc) * (a + b)
    x, y = 2.5, 1.5
    model_val = np.array([x * r * (1 - x * slope / r) - m * x * y / (a + b * x),
                          y * (-dd + em * x / (a + b * x) - fc * y)])
    resid = float(np.abs(model_val - field(np.array([x, y]))).max())
    return {"r": r, "K": r / slope, "m": m, "em": em, "f": fc, "d": dd, "residual": resid}


@dataclass
class AveragedPPQuantities:
    """nu-averaged coefficients of the general predator-prey system."""

    abar: float
    bbar: float
    cbar: float
    dbar: float
    h1: object = field(repr=False)
    h2: object = field(repr=False)
    gamma0: float = None
    gamma0_h1: float = None
    invasion_lhs: float = None

    def phibar(self, x, y):
        return self.abar - self.bbar * x - y * self.h1(x, y)

    def psibar(self, x, y):
        return -self.cbar - self.dbar * y + x * self.h2(x, y)


def averaged_quantities(p, nu):
    """Averages ``abar..dbar``, ``h1 = sum h nu``, ``h2 = sum f h nu`` and ``gamma0``.

    ``gamma0`` uses ``h2`` in the boundary term (the predator invasion rate
    at the prey-only equilibrium); ``gamma0_h1`` is the same expression
    with ``h1``.
    """
    nu = np.asarray(nu, dtype=float)
    resp = p.response
    f = p.f

    def h1(x, y):
        return sum(nu[i] * resp(x, y, i) for i in range(len(nu)))

    def h2(x, y):
        return sum(nu[i] * f[i] * resp(x, y, i) for i in range(len(nu)))

    q = AveragedPPQuantities(float(nu @ p.a), float(nu @ p.b), float(nu @ p.c), float(nu @ p.d), h1, h2)
    k = q.abar / q.bbar
    q.invasion_lhs = k * h2(k, 0.0)
    q.gamma0 = 0.5 * min(q.cbar, -q.cbar + q.invasion_lhs)
    q.gamma0_h1 = 0.5 * min(q.cbar, -q.cbar + k * h1(k, 0.0))
    return q


def _params_and_nu(p, nu):
    if isinstance(p, HybridModel):
        model = p
        p = model.params
        if nu is None:
            nu = stationary_distribution(model.generator)
    if nu is None:
        raise ValidationError("nu is required with bare parameters")
    return p, np.asarray(nu, dtype=float)


def persistence_functional(p, nu=None):
    """Weighted per-capita growth ``Upsilon = (2 cbar/abar) phi + psi``.

    Returns
    -------
    upsilon : callable ``(z, i) -> float``
    upsilon_bar : callable ``z -> float`` (averaged coefficients)
    quantities : AveragedPPQuantities
        Carries ``gamma0``.

    Raises
    ------
    ConfigurationError
        If ``(abar/bbar) h2(abar/bbar, 0) > cbar`` fails.
    """
    p, nu = _params_and_nu(p, nu)
    q = averaged_quantities(p, nu)
    if not q.invasion_lhs > q.cbar:
        raise ConfigurationError(
            f"predator cannot invade the prey-only state: (abar/bbar) h2(abar/bbar, 0) = "
            f"{q.invasion_lhs:.6g} is not greater than cbar = {q.cbar:.6g}")
    w = 2.0 * q.cbar / q.abar

    def upsilon(z, i):
        x, y = z
        hv = p.response(x, y, i)
        phi = p.a[i] - p.b[i] * x - y * hv
        psi = -p.c[i] - p.d[i] * y + p.f[i] * x * hv
        return w * phi + psi

    def upsilon_bar(z):
        x, y = z
        return w * q.phibar(x, y) + q.psibar(x, y)

    return upsilon, upsilon_bar, q


@dataclass
class MomentReport:
    """Second-moment diagnostics of a batch."""

    times: np.ndarray = field(repr=False)
    running: np.ndarray = field(repr=False)
    pointwise: np.ndarray = field(repr=False)
    sup_pointwise: float
    limsup_proxy: float
    final_running: float
    slope: float
    slope_ci: tuple
    bounded: bool

    def running_at(self, t):
        return float(np.interp(t, self.times, self.running))

    def to_dict(self):
        return {
            "sup_pointwise": self.sup_pointwise,
            "limsup_proxy": self.limsup_proxy,
            "final_running": self.final_running,
            "slope": self.slope,
            "slope_ci": list(self.slope_ci),
            "bounded": self.bounded,
        }


def moment_diagnostics(batch, n_blocks=10):
    """Boundedness checks for ``E|Z(t)|^2``.

    ``limsup_proxy`` is the maximum of the pointwise second moment over the
    last quarter of the horizon.  The slope is a least-squares fit to block
    means of the pointwise second moment over the final half, with a 95%
    t-interval.  ``bounded`` asks that the running average over the final
    half stay below three times its maximum over the first half.
    """
    t, running, pointwise = empirical_second_moment_course(batch)
    T = t[-1]
    late = t >= 0.5 * T
    blocks = np.array_split(np.nonzero(late)[0], n_blocks)
    bt = np.array([t[b].mean() for b in blocks])
    bm = np.array([pointwise[b].mean() for b in blocks])
    fit = stats.linregress(bt, bm)
    half = stats.t.ppf(0.975, len(bt) - 2) * fit.stderr
    early = (t > 0) & ~late
    ref = running[early].max() if early.any() else running[0]
    return MomentReport(
        t, running, pointwise,
        sup_pointwise=float(pointwise.max()),
        limsup_proxy=float(pointwise[t >= 0.75 * T].max()),
        final_running=float(running[-1]),
        slope=float(fit.slope),
        slope_ci=(float(fit.slope - half), float(fit.slope + half)),
        bounded=bool(running[late].max() <= 3.0 * ref),
    )
