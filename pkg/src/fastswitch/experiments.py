"""Monte Carlo experiments on switching diffusions near their averaged flow.

Each experiment returns an :class:`ExperimentReport` that echoes every
parameter, carries Wilson intervals for probabilities, and renders as JSON
or as aligned text.
"""

import json
import math
import time
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import _kernels as K
from . import rng as _rng
from ._parallel import pmap
from .averaged import (
    average_field,
    cycle_occupation_measure,
    detect_limit_cycle,
    find_equilibria,
    integrate_ode,
    stable_vector,
)
from .ctmc import Generator, stationary_distribution
from .errors import ConfigurationError, NoCycleError, ValidationError
from .hybrid_sde import SimParams, _run_path
from .measures import empirical_occupation, energy_distance, sliced_wasserstein

CASES = ("case1", "case2", "case3")
WITNESS_TOL = 1e-10


def wilson_interval(k, n, z=1.959963984540054):
    """Wilson score interval for ``k`` successes in ``n`` trials."""
    if n <= 0:
        return (0.0, 1.0)
    p = k / n
    den = 1 + z * z / n
    centre = (p + z * z / (2 * n)) / den
    half = z * math.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / den
    lo = 0.0 if k == 0 else max(0.0, centre - half)
    hi = 1.0 if k == n else min(1.0, centre + half)
    return (lo, hi)


@dataclass
class RegimeSpec:
    """A list of ``(eps, delta)`` pairs with a declared limit of ``delta/eps``.

    ``case1``: ratio tends to a positive finite limit (all ratios within a
    factor 10 of each other); ``case2``: ratio tends to 0 (strictly
    decreasing, or a single ratio below 1); ``case3``: ratio tends to
    infinity (strictly increasing, or a single ratio above 1).
    """

    pairs: list
    tag: str = "case1"

    def __post_init__(self):
        self.pairs = [(float(e), float(d)) for e, d in self.pairs]
        errs = self.problems()
        if errs:
            raise ValidationError("; ".join(errs))

    def problems(self):
        errs = []
        if not self.pairs:
            return ["regime list is empty"]
        if self.tag not in CASES:
            return [f"regime tag must be one of {CASES}, got {self.tag!r}"]
        for e, d in self.pairs:
            if not e > 0 or not d >= 0:
                errs.append(f"pair ({e}, {d}) needs eps > 0 and delta >= 0")
        if errs:
            return errs
        r = np.array([d / e for e, d in self.pairs])
        if self.tag == "case1":
            if np.any(r <= 0) or r.max() > 10 * r.min():
                errs.append(f"case1 needs positive ratios within a factor 10, got {r.tolist()}")
        elif self.tag == "case2":
            ok = r[0] < 1 if len(r) == 1 else np.all(np.diff(r) < 0)
            if not ok:
                errs.append(f"case2 needs delta/eps decreasing toward 0, got {r.tolist()}")
        else:
            ok = r[0] > 1 if len(r) == 1 else np.all(np.diff(r) > 0)
            if not ok:
                errs.append(f"case3 needs delta/eps increasing toward infinity, got {r.tolist()}")
        return errs

    def to_dict(self):
        return {"pairs": [list(p) for p in self.pairs], "tag": self.tag}


@dataclass
class ExitSpec:
    """Exit-time setup around one equilibrium of the averaged flow.

    Parameters
    ----------
    equilibrium : array_like
        Location of the equilibrium (matched against the averaged field's zeros).
    theta1 : float
        Radius of the ball the paths start in.
    theta3 : float
        Exit threshold: distance from the stable-set proxy.
    H : float
        Time budget.
    n_paths : int
    radius : float, optional
        Exits only count while ``|x| <= radius``; defaults to ``|x*| + 1``.
    Delta : float
        Exponent in the lower bounds ``exp(-Delta/(eps+delta))`` and ``exp(-Delta/eps)``.
    """

    equilibrium: tuple
    theta1: float
    theta3: float
    H: float
    n_paths: int = 1000
    radius: float = None
    Delta: float = 1.0

    def __post_init__(self):
        self.equilibrium = tuple(float(v) for v in self.equilibrium)
        errs = []
        if not 0 < self.theta1 < self.theta3:
            errs.append(f"need 0 < theta1 < theta3, got theta1={self.theta1}, theta3={self.theta3}")
        if not self.H > 0:
            errs.append("H must be positive")
        if self.n_paths < 1:
            errs.append("n_paths must be >= 1")
        if not self.Delta > 0:
            errs.append("Delta must be positive")
        if errs:
            raise ValidationError("; ".join(errs))
        if self.radius is None:
            self.radius = float(np.linalg.norm(self.equilibrium)) + 1.0


@dataclass
class ExperimentReport:
    """Result table plus the full resolved configuration."""

    kind: str
    config: dict
    seed: int
    rows: list
    wall_time: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self):
        from . import __version__
        return {"kind": self.kind, "version": __version__, "seed": self.seed,
                "wall_time": self.wall_time, "config": self.config,
                "rows": self.rows, "extras": self.extras}

    def to_json(self, path=None):
        text = json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def to_text(self):
        lines = [f"# {self.kind}  seed={self.seed}  wall={self.wall_time:.2f}s",
                 "# config: " + json.dumps(_jsonable(self.config), sort_keys=True)]
        cols = [k for k in (self.rows[0] if self.rows else {}) if not isinstance(self.rows[0][k], (list, dict))]
        cells = [[_fmt(r[c]) for c in cols] for r in self.rows]
        widths = [max([len(c)] + [len(row[j]) for row in cells]) for j, c in enumerate(cols)]
        lines.append("  ".join(c.rjust(w) for c, w in zip(cols, widths)))
        lines += ["  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in cells]
        return "\n".join(lines) + "\n"


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, tuple):
        return "[" + ", ".join(_fmt(u) for u in v) + "]"
    return str(v)


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return _jsonable(o.tolist())
    if isinstance(o, (np.floating, float)):
        v = float(o)
        return v if math.isfinite(v) else str(v)
    if isinstance(o, np.integer):
        return int(o)
    if isinstance(o, np.bool_):
        return bool(o)
    return o


def _nu(model):
    if isinstance(model.generator, Generator):
        return stationary_distribution(model.generator)
    return None


def _params(eps, delta, h, T, seed, scheme, **kw):
    return SimParams(eps=eps, delta=delta, h=h, T=T, seed=seed, scheme=scheme, **kw)


def _default_scheme(model):
    return "log_euler" if model.positive and model.linear_noise and all(model.linear_noise) else "euler_maruyama"


def closeness_probability(model, x0, i0, gamma, T, regimes, n_paths, *, h=1e-3, seed=0,
                          scheme=None, threads=None):
    """Probability that a path strays at least ``gamma`` from the averaged flow.

    For every ``(eps, delta)`` in ``regimes`` runs ``n_paths`` paths from
    ``(x0, i0)`` and records whether ``max_k |X(t_k) - Xbar(t_k)| >= gamma``
    on the grid ``t_k = k h``, where ``Xbar`` is the RK4 averaged flow on the
    same grid.  Each row holds ``p_hat``, its Wilson interval and
    ``r_hat = -(eps+delta) ln max(p_hat, 1/N)``.  Non-finite paths are
    excluded from ``p_hat`` and counted in ``n_nonfinite``.
    """
    if not gamma >= 0:
        raise ValidationError("gamma must be nonnegative")
    if n_paths < 1:
        raise ValidationError("n_paths must be >= 1")
    regimes = regimes if isinstance(regimes, RegimeSpec) else RegimeSpec(regimes)
    scheme = scheme or _default_scheme(model)
    t0 = time.perf_counter()
    x0 = np.asarray(x0, dtype=float)
    fbar = average_field(model, _nu(model))
    probe = _params(regimes.pairs[0][0], regimes.pairs[0][1], h, T, seed, scheme)
    _, ref = integrate_ode(fbar, x0, T, h)
    if len(ref) != probe.n_grid + 1:
        raise ValidationError("T must be a multiple of h for the closeness grid")
    ref = np.ascontiguousarray(ref)
    model.kernels(x0)
    g = float(gamma) if math.isfinite(gamma) else 1e300
    rows = []
    for eps, delta in regimes.pairs:
        p = _params(eps, delta, h, T, seed, scheme)

        def one(k):
            return _run_path(model, p, x0, i0, k, monitor=K.MONITOR_CLOSENESS,
                             ref=ref, gamma=g, record=False).status

        status = np.array(pmap(one, range(n_paths), threads))
        bad = int(np.sum((status == K.BLOWUP) | (status == K.NONFINITE)))
        hit = int(np.sum(status == K.STOPPED))
        n = n_paths - bad
        p_hat = hit / n if n else float("nan")
        lo, hi = wilson_interval(hit, n)
        r_hat = -(eps + delta) * math.log(max(p_hat, 1.0 / n_paths)) if n else float("nan")
        rows.append({"eps": eps, "delta": delta, "n": n_paths, "n_nonfinite": bad, "hits": hit,
                     "p_hat": p_hat, "ci_lo": lo, "ci_hi": hi, "r_hat": r_hat})
    config = {"model": model.name, "x0": x0.tolist(), "i0": i0, "gamma": gamma, "T": T,
              "h": h, "scheme": scheme, "n_paths": n_paths, "regimes": regimes.to_dict()}
    return ExperimentReport("closeness", config, seed, rows, time.perf_counter() - t0)


def _match_equilibrium(field, x, dim):
    x = np.asarray(x, dtype=float)
    box = np.column_stack([x - 0.5, x + 0.5])
    eqs = find_equilibria(field, box, n=5)
    if not eqs:
        raise ConfigurationError(f"no equilibrium of the averaged field near {x.tolist()}")
    eq = min(eqs, key=lambda e: np.linalg.norm(e.location - x))
    if np.linalg.norm(eq.location - x) > 1e-3:
        raise ConfigurationError(f"nearest equilibrium {eq.location.tolist()} is not within 1e-3 of {x.tolist()}")
    return eq


def stable_set_proxy(field, eq, half_length, n_back=20, dt=0.05):
    """Polyline approximating the stable set of ``eq`` near ``eq``.

    Saddles in the plane: the stable eigenline segment of half-length
    ``half_length``, continued from each end by ``n_back`` backward RK4
    steps of the averaged flow.  Sources: the point itself.
    """
    x = eq.location
    if eq.classification == "source":
        return x[None, :].copy()
    if eq.classification != "saddle" or len(x) != 2:
        raise ConfigurationError(f"stable-set proxy needs a planar saddle or a source, got {eq.classification}")
    v = stable_vector(eq)
    back = field.scaled(-1.0)
    ends = []
    for s in (-1.0, 1.0):
        start = x + s * half_length * v
        pts = [start]
        try:
            _, traj = integrate_ode(back, start, n_back * dt, dt)
            pts = list(traj)
        except Exception:  # backward flow may leave the guard ball; keep the segment
            pass
        ends.append(np.array(pts))
    left = ends[0][::-1]
    return np.ascontiguousarray(np.vstack([left, x[None, :], ends[1]]))


def _start_points(spec, n, seed, positive):
    g = _rng.stream(seed, 0, _rng.INITIAL)
    c = np.array(spec.equilibrium)
    d = len(c)
    out = np.empty((n, d))
    k = 0
    tries = 0
    while k < n:
        u = g.standard_normal((n, d))
        u /= np.linalg.norm(u, axis=1, keepdims=True)
        r = spec.theta1 * g.random(n) ** (1.0 / d)
        cand = c + u * r[:, None]
        if positive:
            cand = cand[np.all(cand > 0, axis=1)]
        take = min(len(cand), n - k)
        out[k:k + take] = cand[:take]
        k += take
        tries += 1
        if tries > 1000:
            raise ConfigurationError("start ball has no room inside the positive orthant")
    return out


def exit_time_experiment(model, spec, regimes, n_paths=None, *, h=1e-3, seed=0, scheme=None,
                         threads=None, box=None):
    """First exit from a neighbourhood of an equilibrium's stable set.

    Paths start uniformly in the ``theta1``-ball around the equilibrium
    (intersected with the open orthant for positive models) with the regime
    drawn from the stationary law.  The exit time is the first grid time
    with ``|x| <= radius`` and distance at least ``theta3`` from
    :func:`stable_set_proxy`.  Rows report ``P{tau <= H}`` with its Wilson
    interval and both lower bounds ``exp(-Delta/(eps+delta))`` and
    ``exp(-Delta/eps)``.  ``extras["exit_times"]`` holds per-cell exit
    times (``inf`` when censored) on a common set of random streams, so
    the empirical CDF is monotone in ``H``.

    Raises
    ------
    ConfigurationError
        If the equilibrium is not found, or the regime tag's condition has
        no witness at it.
    """
    regimes = regimes if isinstance(regimes, RegimeSpec) else RegimeSpec(*regimes)
    n_paths = spec.n_paths if n_paths is None else n_paths
    scheme = scheme or _default_scheme(model)
    t0 = time.perf_counter()
    nu = _nu(model)
    fbar = average_field(model, nu)
    eq = _match_equilibrium(fbar, spec.equilibrium, model.dim)
    if eq.classification not in ("saddle", "source"):
        raise ConfigurationError(f"equilibrium at {eq.location.tolist()} is a {eq.classification}; "
                                 "exit experiments need a saddle or a source")
    wit = _witness(model, eq)
    if wit[regimes.tag] is None:
        need = {"case1": "beta'f or beta'sigma", "case2": "beta'f", "case3": "beta'sigma"}[regimes.tag]
        raise ConfigurationError(
            f"{regimes.tag} needs some regime with {need} nonzero at {eq.location.tolist()}; "
            f"|beta'f| = {wit['bf']}, |beta'sigma| = {wit['bs']}")
    poly = stable_set_proxy(fbar, eq, 2.0 * spec.theta3)
    starts = _start_points(spec, n_paths, seed, model.positive)
    ig = _rng.stream(seed, 1, _rng.INITIAL)
    p_reg = nu if nu is not None else np.full(model.n_regimes, 1.0 / model.n_regimes)
    regs = ig.choice(model.n_regimes, size=n_paths, p=p_reg)
    model.kernels(starts[0])
    rows, taus = [], {}
    for eps, delta in regimes.pairs:
        p = _params(eps, delta, h, spec.H, seed, scheme)

        def one(k):
            r = _run_path(model, p, starts[k], int(regs[k]), k, monitor=K.MONITOR_EXIT,
                          poly=poly, theta3=spec.theta3, radius=spec.radius, record=False)
            if r.status == K.STOPPED:
                return r.aux
            if r.status == K.DONE:
                return math.inf
            return math.nan

        tau = np.array(pmap(one, range(n_paths), threads))
        bad = int(np.isnan(tau).sum())
        n = n_paths - bad
        hits = int(np.sum(tau <= spec.H))
        lo, hi = wilson_interval(hits, n)
        b_sum = math.exp(-spec.Delta / (eps + delta))
        b_eps = math.exp(-spec.Delta / eps)
        rows.append({"eps": eps, "delta": delta, "n": n_paths, "n_nonfinite": bad, "hits": hits,
                     "p_hat": hits / n if n else float("nan"), "ci_lo": lo, "ci_hi": hi,
                     "bound_eps_plus_delta": b_sum, "bound_eps": b_eps,
                     "passes_eps_plus_delta": bool(lo > b_sum), "passes_eps": bool(lo > b_eps)})
        taus[(eps, delta)] = tau
    config = {"model": model.name, "spec": asdict(spec), "regimes": regimes.to_dict(),
              "h": h, "scheme": scheme, "n_paths": n_paths}
    rep = ExperimentReport("exit", config, seed, rows, time.perf_counter() - t0,
                           {"equilibrium": eq.to_dict(), "witness": wit, "proxy": poly})
    rep.exit_times = taus
    return rep


def exit_cdf(times, H):
    """Empirical ``P{tau <= H}`` for each entry of ``H`` (non-finite runs excluded)."""
    t = np.asarray(times, dtype=float)
    t = t[~np.isnan(t)]
    return np.array([np.mean(t <= h) for h in np.atleast_1d(H)])


def _t_interval(v):
    v = np.asarray(v, dtype=float)
    m = float(v.mean())
    if len(v) < 2:
        return m, 0.0, (m, m)
    sd = float(v.std(ddof=1))
    half = stats.t.ppf(0.975, len(v) - 1) * sd / math.sqrt(len(v))
    return m, sd, (m - half, m + half)


def convergence_sweep(model, regimes, horizon, n_seeds, *, x0, i0=0, h=1e-4, burn_frac=0.25,
                      cycle=None, n_proj=256, seed=0, scheme=None, record_stride=None,
                      energy_atoms=1000, threads=None, cycle_seed=None):
    """Distance from empirical occupation measures to the cycle measure.

    For every ``(eps, delta)`` and each of ``n_seeds`` random streams, one
    path on ``[0, horizon]`` gives an occupation measure (after discarding
    ``burn_frac`` of the horizon).  Rows hold the mean, sd and 95% t-interval
    of its sliced Wasserstein distance to the averaged cycle's occupation
    measure, a thinned energy-distance cross-check, and the functional
    comparison of ``int g dmu_hat`` with the cycle time average for
    ``g = x_1`` and ``g = |x|^2``.

    Raises
    ------
    NoCycleError
        If the averaged flow has no detectable limit cycle.
    """
    regimes = regimes if isinstance(regimes, RegimeSpec) else RegimeSpec(regimes)
    if n_seeds < 1:
        raise ValidationError("n_seeds must be >= 1")
    if not 0 <= burn_frac < 1:
        raise ValidationError("burn_frac must lie in [0, 1)")
    scheme = scheme or _default_scheme(model)
    t0 = time.perf_counter()
    x0 = np.asarray(x0, dtype=float)
    fbar = average_field(model, _nu(model))
    if cycle is None:
        cycle = detect_limit_cycle(fbar, x0 if cycle_seed is None else np.asarray(cycle_seed, float))
    mu0 = cycle_occupation_measure(cycle)
    targets = {
        "x1": cycle.time_average(lambda z: z[0]),
        "sq": cycle.time_average(lambda z: z @ z),
    }
    if record_stride is None:
        record_stride = max(1, int(round(0.01 / h)))
    model.kernels(x0)
    rows = []
    for eps, delta in regimes.pairs:
        p = _params(eps, delta, h, horizon, seed, scheme, record_stride=record_stride,
                    record_switches=False)

        def one(k):
            r = _run_path(model, p, x0, i0, k)
            if r.status != K.DONE:
                return None
            mu = empirical_occupation(r.traj, burn=burn_frac * horizon)
            return (sliced_wasserstein(mu, mu0, n_proj=n_proj, seed=seed),
                    energy_distance(mu.thinned(energy_atoms), mu0.thinned(energy_atoms)),
                    mu.expect(lambda z: z[:, 0]),
                    mu.expect(lambda z: (z ** 2).sum(axis=1)))

        res = pmap(one, range(n_seeds), threads)
        ok = np.array([r for r in res if r is not None])
        bad = n_seeds - len(ok)
        if len(ok) == 0:
            rows.append({"eps": eps, "delta": delta, "n_seeds": n_seeds, "n_nonfinite": bad})
            continue
        sw_m, sw_sd, sw_ci = _t_interval(ok[:, 0])
        ed_m, _, _ = _t_interval(ok[:, 1])
        row = {"eps": eps, "delta": delta, "n_seeds": n_seeds, "n_nonfinite": bad,
               "sw_mean": sw_m, "sw_sd": sw_sd, "sw_ci_lo": sw_ci[0], "sw_ci_hi": sw_ci[1],
               "energy_mean": ed_m}
        for j, key in ((2, "x1"), (3, "sq")):
            m, sd, _ = _t_interval(ok[:, j])
            row[f"{key}_mean"] = m
            row[f"{key}_sd"] = sd
            row[f"{key}_target"] = targets[key]
            row[f"{key}_within_3sd"] = bool(abs(m - targets[key]) <= 3 * sd)
        row["sw_values"] = ok[:, 0].tolist()
        rows.append(row)
    config = {"model": model.name, "x0": x0.tolist(), "i0": i0, "horizon": horizon,
              "n_seeds": n_seeds, "h": h, "burn_frac": burn_frac, "n_proj": n_proj,
              "scheme": scheme, "record_stride": record_stride, "regimes": regimes.to_dict()}
    return ExperimentReport("sweep", config, seed, rows, time.perf_counter() - t0,
                            {"cycle": cycle.to_dict()})


def _boundary_rates(model, x, i, which):
    """Per-capita rows ``f_k/x_k`` (or ``sigma_k./x_k``), as one-sided limits where ``x_k = 0``."""
    x = np.asarray(x, dtype=float)
    fn = model.f if which == "f" else model.sigma
    base = np.asarray(fn(x, i), dtype=float)
    out = np.empty_like(base)
    for k in range(len(x)):
        if abs(x[k]) > 1e-12:
            out[k] = base[k] / x[k]
        else:
            s = 1e-7
            y = x.copy()
            y[k] = s
            out[k] = np.asarray(fn(y, i), dtype=float)[k] / s
    return out


def _witness(model, eq):
    """``|beta'f(x*, i)|`` and ``|beta'sigma(x*, i)|`` per regime and the witnessing regimes.

    Saddles use the stable-manifold normal; sources use the full vectors.
    For positive models at a point on the boundary of the orthant, the
    rows are per-capita rates (log coordinates), since the raw
    coefficients vanish identically on the invariant boundary.
    """
    x = eq.location
    per_capita = bool(model.positive and np.any(np.abs(x) <= 1e-12))
    bf, bs = [], []
    for i in range(model.n_regimes):
        if per_capita:
            f, s = _boundary_rates(model, x, i, "f"), _boundary_rates(model, x, i, "sigma")
        else:
            f, s = np.asarray(model.f(x, i)), np.asarray(model.sigma(x, i))
        if eq.beta is not None:
            bf.append(float(abs(eq.beta @ f)))
            bs.append(float(np.linalg.norm(eq.beta @ s)))
        else:
            bf.append(float(np.linalg.norm(f)))
            bs.append(float(np.linalg.norm(s)))

    def first(vals):
        idx = [i for i, v in enumerate(vals) if v > WITNESS_TOL]
        return idx[0] if idx else None

    i_f, i_s = first(bf), first(bs)
    return {"per_capita": per_capita, "bf": bf, "bs": bs,
            "case1": i_f if i_f is not None else i_s, "case2": i_f, "case3": i_s}


def assumption_audit(model, box, *, n_pairs=200, seed=0, n_grid=11):
    """Numerical checks of the standing assumptions on a box.

    Reports finite-difference Lipschitz ratios of drift and diffusion on
    random nearby pairs, every equilibrium of the averaged field in the
    box with its classification, and for saddles and sources the per-regime
    values of ``|beta'f|`` and ``|beta'sigma|`` with the regime witnessing
    each of the three cases (``None`` when no regime does).
    """
    t0 = time.perf_counter()
    box = np.asarray(box, dtype=float)
    g = _rng.stream(seed, 2, _rng.INITIAL)
    lo, hi = box[:, 0], box[:, 1]
    xs = lo + (hi - lo) * g.random((n_pairs, model.dim))
    dx = g.standard_normal((n_pairs, model.dim))
    dx *= 1e-4 * (hi - lo).max() / np.linalg.norm(dx, axis=1, keepdims=True)
    ys = np.clip(xs + dx, lo, hi)
    lip = []
    for i in range(model.n_regimes):
        rf, rs = [], []
        for x, y in zip(xs, ys):
            d = np.linalg.norm(x - y)
            if d == 0:
                continue
            rf.append(np.linalg.norm(model.f(x, i) - model.f(y, i)) / d)
            rs.append(np.linalg.norm(model.sigma(x, i) - model.sigma(y, i)) / d)
        lip.append({"regime": i, "drift_max_ratio": float(max(rf)), "diffusion_max_ratio": float(max(rs)),
                    "finite": bool(np.isfinite(rf).all() and np.isfinite(rs).all())})
    fbar = average_field(model, _nu(model))
    rows = []
    for eq in find_equilibria(fbar, box, n=n_grid):
        row = {"location": tuple(float(v) for v in eq.location), "classification": eq.classification}
        if eq.classification in ("saddle", "source"):
            w = _witness(model, eq)
            row.update({"per_capita": w["per_capita"], "case1": w["case1"], "case2": w["case2"],
                        "case3": w["case3"], "bf": w["bf"], "bs": w["bs"]})
        rows.append(row)
    config = {"model": model.name, "box": box.tolist(), "n_pairs": n_pairs, "n_grid": n_grid}
    return ExperimentReport("audit", config, seed, rows, time.perf_counter() - t0, {"lipschitz": lip})
