"""Discrete probability measures on R^d and distances between them."""

import json
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from . import rng as _rng
from .errors import ValidationError


class DiscreteMeasure:
    """Weighted atoms ``sum_k w_k delta_{x_k}``.

    Parameters
    ----------
    points : array_like, shape (n, d)
    weights : array_like, shape (n,), optional
        Positive weights; normalised to sum to one.  Uniform if omitted.
    """

    def __init__(self, points, weights=None):
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        if pts.shape[0] == 0:
            raise ValidationError("measure has no atoms")
        if weights is None:
            w = np.full(pts.shape[0], 1.0 / pts.shape[0])
        else:
            w = np.asarray(weights, dtype=float)
            if w.shape != (pts.shape[0],) or np.any(w <= 0) or not np.all(np.isfinite(w)):
                raise ValidationError("weights must be positive, finite and one per atom")
            w = w / w.sum()
        self.points = pts
        self.weights = w

    @property
    def dim(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    def mean(self):
        return self.weights @ self.points

    def expect(self, g):
        """``int g dmu`` for a vectorised ``g`` mapping (n, d) -> (n,)."""
        return float(self.weights @ np.asarray(g(self.points), dtype=float))

    def translated(self, v):
        return DiscreteMeasure(self.points + np.asarray(v, dtype=float), self.weights)

    def thinned(self, max_atoms):
        """Every k-th atom (reweighted), keeping at most ``max_atoms``."""
        if len(self) <= max_atoms:
            return self
        k = int(np.ceil(len(self) / max_atoms))
        return DiscreteMeasure(self.points[::k], self.weights[::k])

    def to_csv(self, path):
        header = ",".join([f"x_{k + 1}" for k in range(self.dim)] + ["weight"])
        np.savetxt(path, np.column_stack([self.points, self.weights]), delimiter=",",
                   header=header, comments="", fmt="%.17g")


def empirical_occupation(traj, burn=None, stride=1):
    """Equal-weight measure on the grid states of ``traj`` after ``burn``.

    ``burn`` defaults to the quarter of the horizon; every ``stride``-th
    post-burn grid sample becomes an atom.
    """
    g = traj.grid()
    horizon = g.times[-1]
    if burn is None:
        burn = 0.25 * horizon
    if burn >= horizon and len(g.times) > 1:
        raise ValidationError(f"burn-in {burn} is not shorter than the horizon {horizon}")
    pts = g.states[g.times >= burn][::stride]
    if len(pts) == 0:
        raise ValidationError("no samples after burn-in")
    return DiscreteMeasure(pts)


def _w1_columns(pu, wu, pv, wv):
    """Exact 1-D W1 between weighted atom sets, one column per projection."""
    vals = np.concatenate([pu, pv], axis=0)
    w = np.concatenate([wu, -wv])
    order = np.argsort(vals, axis=0, kind="stable")
    sv = np.take_along_axis(vals, order, axis=0)
    cdf = np.cumsum(w[order], axis=0)[:-1]
    return np.sum(np.abs(cdf) * np.diff(sv, axis=0), axis=0)


def _check_pair(mu, nu):
    if len(mu) == 0 or len(nu) == 0:
        raise ValidationError("empty measure")
    if mu.dim != nu.dim:
        raise ValidationError(f"dimension mismatch: {mu.dim} vs {nu.dim}")


def projection_directions(d, n_proj, seed=0):
    """``n_proj`` uniform unit vectors in R^d from the projection stream."""
    g = _rng.stream(seed, 0, _rng.PROJECTION).standard_normal((n_proj, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def sliced_wasserstein(mu, nu, n_proj=256, seed=0, chunk=32):
    """Sliced Wasserstein-1 distance.

    Mean over ``n_proj`` random unit directions of the 1-D W1 distance
    between the projected measures, each computed exactly from the merged
    weighted CDFs.  Deterministic given ``seed``.
    """
    _check_pair(mu, nu)
    if n_proj < 1:
        raise ValidationError("n_proj must be >= 1")
    dirs = projection_directions(mu.dim, n_proj, seed)
    total = 0.0
    for s in range(0, n_proj, chunk):
        D = dirs[s:s + chunk].T
        total += _w1_columns(mu.points @ D, mu.weights, nu.points @ D, nu.weights).sum()
    return float(total / n_proj)


def _mean_distance(a, wa, b, wb, chunk=2048):
    s = 0.0
    for i in range(0, len(a), chunk):
        s += wa[i:i + chunk] @ cdist(a[i:i + chunk], b) @ wb
    return s


def energy_distance(mu, nu):
    """``2 E|X-Y| - E|X-X'| - E|Y-Y'|`` for ``X ~ mu``, ``Y ~ nu`` (not square-rooted)."""
    _check_pair(mu, nu)
    xy = _mean_distance(mu.points, mu.weights, nu.points, nu.weights)
    xx = _mean_distance(mu.points, mu.weights, mu.points, mu.weights)
    yy = _mean_distance(nu.points, nu.weights, nu.points, nu.weights)
    return float(max(2.0 * xy - xx - yy, 0.0))


@dataclass
class GridHistogram:
    """Cell masses of a measure on a rectangular grid."""

    box: np.ndarray
    bins: tuple
    masses: np.ndarray
    outside: float

    def edges(self):
        return [np.linspace(lo, hi, n + 1) for (lo, hi), n in zip(self.box, self.bins)]

    def to_csv(self, path, meta_path=None):
        np.savetxt(path, np.atleast_2d(self.masses), delimiter=",", fmt="%.17g")
        if meta_path is not None:
            with open(meta_path, "w") as fh:
                json.dump({"box": np.asarray(self.box).tolist(), "bins": list(self.bins),
                           "outside": self.outside}, fh, indent=2)


def histogram(mu, box, bins):
    """Accumulate atom masses into a grid over ``box``; out-of-box mass is tallied."""
    box = np.asarray(box, dtype=float)
    if box.shape != (mu.dim, 2) or np.any(box[:, 1] <= box[:, 0]):
        raise ValidationError("box must give one nondegenerate (lo, hi) per coordinate")
    bins = (int(bins),) * mu.dim if np.isscalar(bins) else tuple(int(b) for b in bins)
    if len(bins) != mu.dim or min(bins) < 1:
        raise ValidationError("need at least one bin per axis")
    masses, _ = np.histogramdd(mu.points, bins=bins, range=[tuple(b) for b in box], weights=mu.weights)
    return GridHistogram(box, bins, masses, float(max(0.0, 1.0 - masses.sum())))
