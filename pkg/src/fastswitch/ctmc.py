"""Finite-state switching chains with generator ``Q/eps``.

Regimes are indexed ``0 .. m0-1`` throughout the package.
"""

from dataclasses import dataclass

import numba
import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ValidationError

ROW_SUM_TOL = 1e-12
STATIONARY_TOL = 1e-12


def _as_rate_matrix(rates):
    q = np.array(rates, dtype=float)
    if q.ndim != 2 or q.shape[0] != q.shape[1] or q.shape[0] == 0:
        raise ValidationError(f"generator must be a nonempty square matrix, got shape {q.shape}")
    for i, row in enumerate(q):
        if not np.all(np.isfinite(row)):
            raise ValidationError(f"generator row {i} has non-finite entries")
        off = np.delete(row, i)
        if np.any(off < 0):
            raise ValidationError(f"generator row {i} has a negative off-diagonal rate")
        scale = max(1.0, np.abs(row).max())
        if abs(row.sum()) > ROW_SUM_TOL * scale:
            raise ValidationError(f"generator row {i} sums to {row.sum():.3e}, not 0")
    return q


class Generator:
    """Constant generator of a finite Markov chain.

    Parameters
    ----------
    rates : array_like, shape (m0, m0)
        Rate matrix ``q_ij`` before the ``1/eps`` speed-up.  Off-diagonal
        entries must be nonnegative and rows must sum to zero.
    """

    def __init__(self, rates):
        self.rates = _as_rate_matrix(rates)
        self.rates.setflags(write=False)

    @property
    def size(self):
        return self.rates.shape[0]

    @property
    def exit_rates(self):
        return -np.diag(self.rates)

    def at(self, x=None):
        return self.rates

    def jump_probabilities(self):
        """Embedded jump-chain matrix ``q_ij/|q_ii|`` (zero rows for absorbing states)."""
        q = self.rates
        out = np.zeros_like(q)
        for i in range(self.size):
            r = -q[i, i]
            if r > 0:
                out[i] = q[i] / r
                out[i, i] = 0.0
        return out

    def to_list(self):
        return self.rates.tolist()

    def __repr__(self):
        return f"Generator({self.rates.tolist()!r})"


class StateDependentGenerator:
    """Generator ``x -> Q(x)`` with a global bound on the exit rates.

    Parameters
    ----------
    rate_fn : callable
        ``rate_fn(x)`` returns an ``(m0, m0)`` rate matrix.  It should be
        compilable by numba for fast path simulation.
    bound : float
        ``sup_x max_i |q_ii(x)|``; used as the thinning rate.
    size : int
        Number of regimes.
    probes : array_like, optional
        Points at which ``rate_fn`` is validated on construction.
    """

    def __init__(self, rate_fn, bound, size, probes=None):
        if not np.isfinite(bound) or bound <= 0:
            raise ValidationError("bound must be finite and positive")
        self.rate_fn = rate_fn
        self.bound = float(bound)
        self.size = int(size)
        if probes is not None:
            for x in np.atleast_2d(np.asarray(probes, dtype=float)):
                self.at(x)

    def at(self, x):
        """Validated ``Q(x)``."""
        q = _as_rate_matrix(self.rate_fn(np.asarray(x, dtype=float)))
        if q.shape[0] != self.size:
            raise ValidationError(f"Q(x) has size {q.shape[0]}, expected {self.size}")
        if np.max(-np.diag(q)) > self.bound * (1 + 1e-12):
            raise ValidationError(f"exit rate at x={x} exceeds the declared bound {self.bound}")
        if not check_irreducible(q):
            raise ValidationError(f"Q(x) is reducible at x={x}")
        return q


def check_irreducible(Q):
    """True iff the positive-rate transition graph is strongly connected."""
    q = Q.rates if isinstance(Q, Generator) else _as_rate_matrix(Q)
    adj = (q > 0).astype(int)
    np.fill_diagonal(adj, 0)
    n, _ = connected_components(adj, directed=True, connection="strong")
    return n == 1


def stationary_distribution(Q):
    """Stationary law ``nu`` with ``nu Q = 0`` and ``sum(nu) = 1``.

    One balance equation is replaced by the normalisation row and the
    resulting square system is solved directly.
    """
    q = Q.rates if isinstance(Q, Generator) else _as_rate_matrix(Q)
    if not check_irreducible(q):
        raise ValidationError("generator is reducible; stationary law is not unique")
    m = q.shape[0]
    a = q.T.copy()
    a[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    try:
        nu = np.linalg.solve(a, b)
    except np.linalg.LinAlgError as exc:
        raise ValidationError("singular stationary system") from exc
    resid = np.abs(nu @ q).max()
    if resid > STATIONARY_TOL * max(1.0, np.abs(q).max()) or np.any(nu <= 0):
        raise ValidationError(f"stationary solve failed (residual {resid:.2e})")
    return nu


@dataclass(frozen=True)
class JumpSkeleton:
    """Jump times ``0 = t_0 < t_1 < ...`` and the states entered at them."""

    times: np.ndarray
    states: np.ndarray
    horizon: float
    size: int

    @property
    def n_jumps(self):
        return len(self.times) - 1

    def state_at(self, t):
        k = np.searchsorted(self.times, t, side="right") - 1
        return self.states[k]


@numba.njit(nogil=True, cache=True)
def _skeleton_chunk(exit_rates, prob, cum, E, U, eps, i, t, T, times, states):
    n = 0
    for k in range(E.shape[0]):
        r = exit_rates[i]
        if r <= 0.0:
            return i, t, n, True
        t = t + E[k] * eps / r
        if t > T:
            return i, t, n, True
        u = U[k]
        row = cum[i]
        j = -1
        for c in range(row.shape[0]):
            if c != i and u < row[c]:
                j = c
                break
        if j < 0:
            # u beyond the rounded cumulative sum: last reachable state
            for c in range(row.shape[0] - 1, -1, -1):
                if c != i and prob[i, c] > 0.0:
                    j = c
                    break
        times[n] = t
        states[n] = j
        n += 1
        i = j
    return i, t, n, False


def _jump_tables(Q):
    p = Q.jump_probabilities()
    return Q.exit_rates.astype(float), p, np.cumsum(p, axis=1)


def sample_jump_skeleton(Q, eps, i0, T, rng):
    """Sample the chain with generator ``Q/eps`` on ``[0, T]``.

    Holding times in state ``i`` are exponential with rate ``|q_ii|/eps``
    and the next state is drawn from ``q_ij/|q_ii|``.
    """
    if not isinstance(Q, Generator):
        Q = Generator(Q)
    if eps <= 0 or T <= 0:
        raise ValueError("eps and T must be positive")
    if not 0 <= i0 < Q.size:
        raise ValueError(f"initial state {i0} out of range")
    if Q.size > 1 and np.any(Q.exit_rates == 0):
        raise ValidationError("zero exit rate is only allowed for a single-state chain")
    exit_rates, prob, cum = _jump_tables(Q)
    expected = T * exit_rates.max() / eps
    chunk = int(min(1 << 20, expected + 6 * np.sqrt(expected) + 16))
    times, states = [np.zeros(1)], [np.array([i0], dtype=np.int64)]
    i, t = int(i0), 0.0
    while True:
        E = rng.standard_exponential(chunk)
        U = rng.random(chunk)
        tb = np.empty(chunk)
        sb = np.empty(chunk, dtype=np.int64)
        i, t, n, done = _skeleton_chunk(exit_rates, prob, cum, E, U, float(eps), i, t, float(T), tb, sb)
        times.append(tb[:n])
        states.append(sb[:n])
        if done:
            break
    return JumpSkeleton(np.concatenate(times), np.concatenate(states), float(T), Q.size)


def poisson_times(rate, T, rng):
    """Event times of a homogeneous Poisson process on ``[0, T]``."""
    expected = rate * T
    chunk = int(min(1 << 20, expected + 6 * np.sqrt(expected) + 16))
    out, t = [], 0.0
    while True:
        s = t + np.cumsum(rng.standard_exponential(chunk)) / rate
        if s[-1] > T:
            out.append(s[s <= T])
            break
        out.append(s)
        t = s[-1]
    return np.concatenate(out)


def occupation_fractions(skel):
    """Fraction of ``[0, T]`` spent in each state."""
    ends = np.append(skel.times[1:], skel.horizon)
    dur = ends - skel.times
    frac = np.bincount(skel.states, weights=dur, minlength=skel.size)
    return frac / skel.horizon
