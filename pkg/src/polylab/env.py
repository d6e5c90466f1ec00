"""Random environment: i.i.d. disorder field on Z with heavy or Gaussian tails.

The field omega is position-addressable: each value omega_x is a pure function
of (seed, x), produced by a counter-based generator (splitmix64 finalizer keyed
by seed and site index).  This makes every quantity derived from the field
deterministic and independent of query order, and lets Monte Carlo sweeps
vectorize over sites and replicates.

Marginals:
  * alpha = 2          -- standard Gaussian (mean 0, variance 1).
  * alpha in (0,1)u(1,2) -- signed Pareto: magnitude V with P(V > t) = t^-alpha
    for t >= 1 (inverse CDF), sign + with probability p, - with probability q.
    For alpha in (1,2) the exact mean m = (p - q) * alpha/(alpha - 1) is
    subtracted so the output is exactly centered; the tail then satisfies
    P(omega > t) = p (t + m)^-alpha for t + m >= 1.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

__all__ = [
    "DisorderSpec",
    "Environment",
    "PartialSums",
    "TailEstimate",
    "make_environment",
    "partial_sums",
    "omega_star",
    "coupled_path",
    "tail_bound_estimate",
    "derive_seed",
]

_MASK64 = np.uint64(0xFFFFFFFFFFFFFFFF)
_PHI = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2^64 by design
    with np.errstate(over="ignore"):
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
        return z ^ (z >> np.uint64(31))


def _seed_key(seed: int) -> np.uint64:
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + _PHI)


def _site_hash(seed_key: np.uint64, counter: np.ndarray) -> np.ndarray:
    # splitmix64 stream: state = key + (counter+1) * PHI, output = finalize(state)
    with np.errstate(over="ignore"):
        return _mix64(seed_key + (counter + np.uint64(1)) * _PHI)


def _uniform01(h: np.ndarray) -> np.ndarray:
    # 53-bit uniform, strictly inside (0, 1)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def derive_seed(seed: int, index: int) -> int:
    """Derived seed for an independent replicate stream. Pure in (seed, index).

    Uses a different stream multiplier than the per-site hash so replicate
    streams never alias site streams.
    """
    with np.errstate(over="ignore"):
        h = _mix64(_seed_key(seed) + (np.uint64(index & 0xFFFFFFFFFFFFFFFF) + np.uint64(1)) * _M2)
    return int(h)


@dataclass(frozen=True)
class DisorderSpec:
    """Law of a single disorder variable: tail index, tail weights, seed."""

    alpha: float
    p: float = 0.5
    seed: int = 0

    def __post_init__(self) -> None:
        if self.alpha == 1.0 or not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"tail index must lie in (0,1)u(1,2], got alpha={self.alpha}")
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"positive-tail weight must lie in (0,1], got p={self.p}")

    @property
    def q(self) -> float:
        return 1.0 - self.p

    @property
    def centering(self) -> float:
        """Exact mean of the uncentered signed Pareto; 0 when alpha=2 or alpha<1."""
        a = self.alpha
        if a == 2.0 or a < 1.0:
            return 0.0
        return (self.p - self.q) * a / (a - 1.0)


def _sample_sites(spec: DisorderSpec, seed, x: np.ndarray) -> np.ndarray:
    """omega values at integer sites x (vectorized, pure in (spec, seed, x)).

    `seed` may be an integer or an array broadcastable against x (e.g. a
    column of replicate seeds against a row of sites).
    """
    x = np.asarray(x, dtype=np.int64)
    zig = np.where(x >= 0, 2 * x, -2 * x - 1).astype(np.uint64)  # injective Z -> N
    if np.isscalar(seed) or np.ndim(seed) == 0:
        key = _seed_key(int(seed))
    else:
        key = _mix64(np.asarray(seed, dtype=np.uint64) + _PHI)
    with np.errstate(over="ignore"):
        u1 = _uniform01(_site_hash(key, 2 * zig))
        if spec.alpha == 2.0:
            return ndtri(u1)
        u2 = _uniform01(_site_hash(key, 2 * zig + np.uint64(1)))
    mag = u1 ** (-1.0 / spec.alpha)  # P(mag > t) = t^-alpha, t >= 1
    out = np.where(u2 < spec.p, mag, -mag)
    return out - spec.centering


class Environment:
    """Lazily extendable disorder field with cached partial sums.

    The cache grows monotonically; values are a pure function of (seed, x), so
    concurrent extension writes identical data (idempotent).  All accessors are
    safe for concurrent reads.
    """

    def __init__(self, spec: DisorderSpec):
        self.spec = spec
        self._lock = threading.Lock()
        self._plus = np.empty(0)   # omega_x for x = 0..len-1
        self._minus = np.empty(0)  # omega_x for x = -1..-len
        self._cum_plus = np.empty(0)   # Omega_j^+ = sum_{x=0}^{j} omega_x
        self._cum_minus = np.empty(0)  # Omega_j^- = sum_{x=-j}^{-1} omega_x, j >= 1

    @property
    def centering(self) -> float:
        return self.spec.centering

    def _ensure(self, ell: int) -> None:
        """Extend caches so that sites -ell..ell are materialized."""
        need = ell + 1
        if len(self._plus) >= need and len(self._minus) >= ell:
            return
        with self._lock:
            if len(self._plus) < need:
                n0, n1 = len(self._plus), max(need, 2 * len(self._plus), 16)
                new = _sample_sites(self.spec, self.spec.seed, np.arange(n0, n1))
                self._plus = np.concatenate([self._plus, new])
                self._cum_plus = np.cumsum(self._plus)
            if len(self._minus) < ell:
                n0, n1 = len(self._minus), max(ell, 2 * len(self._minus), 16)
                new = _sample_sites(self.spec, self.spec.seed, -np.arange(n0 + 1, n1 + 1))
                self._minus = np.concatenate([self._minus, new])
                self._cum_minus = np.cumsum(self._minus)

    def omega(self, x: int) -> float:
        """Value at site x (cached)."""
        self._ensure(abs(int(x)))
        return float(self._plus[x] if x >= 0 else self._minus[-x - 1])

    def omega_plus(self, b: int) -> np.ndarray:
        """omega_0..omega_b as an array view."""
        self._ensure(b)
        return self._plus[: b + 1]

    def omega_minus(self, a: int) -> np.ndarray:
        """omega_{-1}..omega_{-a} as an array view."""
        self._ensure(a)
        return self._minus[:a]

    def cum_plus(self, b: int) -> np.ndarray:
        """Omega_j^+ for j = 0..b."""
        self._ensure(b)
        return self._cum_plus[: b + 1]

    def cum_minus(self, a: int) -> np.ndarray:
        """Omega_j^- for j = 0..a (with Omega_0^- = 0)."""
        self._ensure(a)
        out = np.empty(a + 1)
        out[0] = 0.0
        out[1:] = self._cum_minus[:a]
        return out


@dataclass(frozen=True)
class PartialSums:
    """Two-sided prefix sums: plus[j] = Omega_j^+, minus[j] = Omega_j^-, minus[0] = 0."""

    plus: np.ndarray
    minus: np.ndarray

    def __post_init__(self) -> None:
        if len(self.plus) != len(self.minus):
            raise ValueError("plus and minus arrays must cover the same index range")


@dataclass(frozen=True)
class TailEstimate:
    """Monte Carlo estimate of a tail probability with its binomial standard error."""

    p_hat: float
    stderr: float
    reps: int


def make_environment(spec: DisorderSpec) -> Environment:
    """Build the disorder field for a spec.  Raises on invalid tail index."""
    return Environment(spec)


def partial_sums(env: Environment, ell: int) -> PartialSums:
    """Prefix sums Omega_j^{+/-} up to index ell; cached values are reused."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    return PartialSums(plus=env.cum_plus(ell).copy(), minus=env.cum_minus(ell).copy())


def omega_star(env: Environment, ell: int) -> float:
    """max_j |Omega_j^-| + max_j |Omega_j^+| over 0 <= j <= ell."""
    if ell < 0:
        raise ValueError("ell must be >= 0")
    ps = partial_sums(env, ell)
    return float(np.max(np.abs(ps.minus)) + np.max(np.abs(ps.plus)))


def coupled_path(env: Environment, n: float, t: float) -> float:
    """Rescaled partial-sum path X_t^{(n)} coupled to the two-sided limit process.

    X_t^{(n)} = n^{-1/alpha} Omega_{floor(t n)}^+ for t >= 0 and
    -n^{-1/alpha} Omega_{floor(|t| n)}^- for t < 0.  Built from the same omega
    as every other statistic of this environment.
    """
    if n < 1:
        raise ValueError("resolution n must be >= 1")
    scale = float(n) ** (-1.0 / env.spec.alpha)
    j = int(np.floor(abs(t) * n))
    if t >= 0:
        return scale * float(env.cum_plus(j)[j])
    return -scale * float(env.cum_minus(j)[j])


def tail_bound_curve(
    spec: DisorderSpec, ell: int, thresholds, reps: int, chunk: int = 4096
) -> list[TailEstimate]:
    """Monte Carlo estimates of P(Omega_ell^* > T) for several thresholds T,
    sharing one batch of replicate fields.

    Replicate r uses the derived seed derive_seed(spec.seed, r); sampling is
    vectorized per chunk of replicates.
    """
    if reps < 100:
        raise ValueError("reps must be >= 100")
    thresholds = list(thresholds)
    hits = np.zeros(len(thresholds), dtype=np.int64)
    sites = np.arange(-ell, ell + 1)
    for lo in range(0, reps, chunk):
        hi = min(lo + chunk, reps)
        seeds = np.array(
            [derive_seed(spec.seed, r) for r in range(lo, hi)], dtype=np.uint64
        )
        block = _sample_sites(spec, seeds[:, None], sites[None, :])
        plus = np.cumsum(block[:, ell:], axis=1)          # Omega_j^+, j=0..ell
        minus = np.cumsum(block[:, :ell][:, ::-1], axis=1)  # Omega_j^-, j=1..ell
        star = np.max(np.abs(plus), axis=1)
        if ell > 0:
            star = star + np.max(np.abs(minus), axis=1)
        for i, T in enumerate(thresholds):
            hits[i] += int(np.count_nonzero(star > T))
    out = []
    for i in range(len(thresholds)):
        p_hat = hits[i] / reps
        stderr = float(np.sqrt(max(p_hat * (1.0 - p_hat), 1e-300) / reps))
        out.append(TailEstimate(p_hat=p_hat, stderr=stderr, reps=reps))
    return out


def tail_bound_estimate(
    spec: DisorderSpec, ell: int, T: float, reps: int, chunk: int = 4096
) -> TailEstimate:
    """Monte Carlo estimate of P(Omega_ell^* > T); see tail_bound_curve."""
    return tail_bound_curve(spec, ell, [T], reps, chunk)[0]
