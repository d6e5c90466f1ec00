"""Exact distributional computations for the 1D simple symmetric random walk.

Everything here is a pure function of integers.  Probabilities live in the log
domain (a float `log_value`, with -inf encoding zero).  The central objects:

  * confined survival  P(walk started at 0 stays inside [-a, b] for N steps),
  * the joint law of (running min, running max), optionally endpoint-resolved,
  * exact one-sided maximum tails  P(M_N^+ >= m).

Three evaluation branches cover all scales without precision loss:

  dp        -- vector iteration of the killed transfer operator (small N*w),
               the reference implementation.
  spectral  -- sine eigenbasis of the killed operator on a width-w interval
               (eigenvalues cos(j*pi/(w+2))); dominant-mode accurate for
               narrow intervals, w <~ sqrt(N).
  exact     -- reflection-group image sums evaluated on exact big integers
               (path counts), cancellation-free at any depth; used for wide
               intervals where survival differences are tiny relative to the
               survivals themselves.

The joint (min, max) table is assembled by second differencing of confined
survivals; differencing is done on exact integers whenever a float result
would be noise-dominated, so cells remain accurate down to the 2^-N scale.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import gmpy2
import numpy as np
from scipy.special import gammaln

__all__ = [
    "LogProb",
    "SignedLog",
    "RangeLaw",
    "confined_survival_dp",
    "confined_survival_spectral",
    "confined_survival_log",
    "range_joint_law",
    "range_endpoint_joint_law",
    "max_tail",
    "signed_logsumexp",
    "cell_log_prob",
    "cell_endpoint_log",
    "cell_band_log",
    "two_sided_tail_log",
    "feasible_cell",
]

LOG2 = math.log(2.0)
NEG_INF = float("-inf")

# interval width (in units of sqrt(N)) below which the spectral branch is used
SPECTRAL_CROSSOVER = 2.5
# float inclusion-exclusion results within this many nats of the largest corner
# are kept; anything deeper is recomputed on exact integers
FLOAT_GUARD_NATS = 25.0
# largest N for which exact binomial prefix tables are built
EXACT_N_CAP = 20000

_mpz = gmpy2.mpz


@dataclass(frozen=True)
class LogProb:
    """A probability stored as its natural log; -inf encodes exact zero."""

    log_value: float

    def value(self) -> float:
        return math.exp(self.log_value) if self.log_value > NEG_INF else 0.0


@dataclass(frozen=True)
class SignedLog:
    """A signed real stored as (sign, log|x|); sign 0 encodes exact zero."""

    sign: int
    log_abs: float

    @staticmethod
    def zero() -> "SignedLog":
        return SignedLog(0, NEG_INF)

    @staticmethod
    def from_float(x: float) -> "SignedLog":
        if x == 0.0:
            return SignedLog.zero()
        return SignedLog(1 if x > 0 else -1, math.log(abs(x)))

    def to_float(self) -> float:
        return self.sign * math.exp(self.log_abs) if self.sign else 0.0


def signed_logsumexp(logs: np.ndarray, signs: np.ndarray) -> SignedLog:
    """Sum of sign_i * exp(log_i), accumulated in a fixed left-to-right order."""
    logs = np.asarray(logs, dtype=float)
    signs = np.asarray(signs)
    mask = np.isfinite(logs) & (signs != 0)
    if not np.any(mask):
        return SignedLog.zero()
    logs, signs = logs[mask], signs[mask]
    m = float(np.max(logs))
    total = 0.0
    for lg, sg in zip(logs, signs):  # fixed order: reproducible ties/cancellation
        total += sg * math.exp(lg - m)
    if total == 0.0:
        return SignedLog.zero()
    return SignedLog(1 if total > 0 else -1, m + math.log(abs(total)))


# ---------------------------------------------------------------------------
# cached binomial tables
# ---------------------------------------------------------------------------

_CACHE_LOCK = threading.Lock()
_LOG_BINOM: dict[int, np.ndarray] = {}
_LOG_TAIL: dict[int, np.ndarray] = {}
_EXACT_PREFIX: dict[int, list] = {}


def _log_binom_row(N: int) -> np.ndarray:
    """ln C(N, j) for j = 0..N."""
    row = _LOG_BINOM.get(N)
    if row is None:
        j = np.arange(N + 1)
        row = gammaln(N + 1) - gammaln(j + 1) - gammaln(N - j + 1)
        with _CACHE_LOCK:
            _LOG_BINOM[N] = row
    return row


def _log_tail_row(N: int) -> np.ndarray:
    """t[j] = ln sum_{j' >= j} C(N, j'); positive-term suffix accumulation."""
    row = _LOG_TAIL.get(N)
    if row is None:
        lb = _log_binom_row(N)
        row = np.logaddexp.accumulate(lb[::-1])[::-1]
        with _CACHE_LOCK:
            _LOG_TAIL[N] = row
    return row


def _exact_prefix(N: int) -> list:
    """P[j] = sum_{j' <= j} C(N, j') as exact integers."""
    if N > EXACT_N_CAP:
        raise RuntimeError(f"exact integer tables capped at N={EXACT_N_CAP}, requested {N}")
    pref = _EXACT_PREFIX.get(N)
    if pref is None:
        c = _mpz(1)
        acc = _mpz(0)
        pref = []
        for j in range(N + 1):
            if j > 0:
                c = c * (N - j + 1) // j
            acc = acc + c
            pref.append(acc)
        with _CACHE_LOCK:
            if len(_EXACT_PREFIX) > 8:
                _EXACT_PREFIX.clear()
            _EXACT_PREFIX[N] = pref
    return pref


def _log_mpz(x) -> float:
    """Natural log of a positive big integer without float overflow."""
    if x <= 0:
        return NEG_INF
    bl = x.bit_length()
    if bl <= 900:
        return math.log(float(x))
    shift = bl - 64
    return math.log(float(x >> shift)) + shift * LOG2


def _range_count(pref: list, N: int, lo: int, hi: int):
    """sum_{j=lo..hi} C(N, j) with clipping, as an exact integer."""
    lo = max(lo, 0)
    hi = min(hi, N)
    if lo > hi:
        return _mpz(0)
    s = pref[hi]
    if lo > 0:
        s = s - pref[lo - 1]
    return s


# ---------------------------------------------------------------------------
# confined survival: three branches
# ---------------------------------------------------------------------------


def confined_survival_dp(N: int, a: int, b: int) -> LogProb:
    """P(S_n in [-a, b] for all n <= N) by killed transfer-operator iteration.

    Exact up to float rounding; cost O(N * (a+b)).  Serves as the reference
    for the other branches.
    """
    _check_interval(a, b)
    if a + b == 0:
        return LogProb(0.0 if N == 0 else NEG_INF)
    m = a + b + 1
    f = np.zeros(m)
    f[a] = 1.0  # site x corresponds to index x + a
    shift = 0.0
    for _ in range(N):
        g = np.zeros(m)
        g[:-1] += 0.5 * f[1:]
        g[1:] += 0.5 * f[:-1]
        f = g
        top = f.max()
        if top == 0.0:
            return LogProb(NEG_INF)
        if top < 1e-280:  # rescale to dodge underflow on long folded runs
            f /= top
            shift += math.log(top)
    s = float(np.sum(f))
    return LogProb(math.log(s) + shift if s > 0 else NEG_INF)


def _spectral_terms(N: int, a: int, b: int):
    """(log|term|, sign) arrays of the eigen-decomposed survival, j ascending."""
    m = a + b + 1
    P = m + 1
    j = np.arange(1, m + 1, 2)  # even modes have zero aggregated coefficient
    theta = j * math.pi / P
    lam = np.cos(theta)
    # coefficient (2/P) sin(theta (a+1)) cot(theta/2); cot > 0 throughout
    amp = np.sin(theta * (a + 1))
    with np.errstate(divide="ignore"):
        log_coef = (
            math.log(2.0 / P)
            + np.log(np.abs(amp))
            + np.log(np.cos(theta / 2.0))
            - np.log(np.sin(theta / 2.0))
        )
        log_term = N * np.log(np.abs(lam)) + log_coef
    sign = np.sign(amp) * np.where(lam < 0, (-1.0) ** (N % 2), 1.0)
    sign = np.where(lam == 0.0, 0.0 if N > 0 else 1.0, sign)
    return log_term, sign


def confined_survival_spectral(N: int, a: int, b: int) -> LogProb:
    """Same value as the dp branch via the sine eigenbasis.

    survival = sum_j c_j(a) cos(j pi/(w+2))^N over odd modes j; alternating
    terms are accumulated in signed log arithmetic with a fixed order.
    """
    _check_interval(a, b)
    if a + b == 0:
        return LogProb(0.0 if N == 0 else NEG_INF)
    log_term, sign = _spectral_terms(N, a, b)
    acc = signed_logsumexp(log_term, sign)
    if acc.sign <= 0:
        return LogProb(NEG_INF)
    return LogProb(min(acc.log_abs, 0.0))


def _confined_count(N: int, a: int, b: int, pref: list):
    """Exact number of N-step paths staying in [-a, b] (image series on integers)."""
    if a + b == 0:
        return _mpz(1 if N == 0 else 0)
    L = a + b + 2
    j_lo = (N - a + 1) // 2  # ceil((N - a)/2): smallest j with 2j - N >= -a
    j_hi = (N + b) // 2
    if j_lo > j_hi:
        return _mpz(0)
    r_lo = N + b + 1 - j_hi
    r_hi = N + b + 1 - j_lo
    total = _mpz(0)
    # direct images: k with [j_lo + kL, j_hi + kL] meeting [0, N]
    for k in range(-(j_hi // L), (N - j_lo) // L + 1):
        lo = j_lo + k * L
        hi = j_hi + k * L
        if lo < 0:
            lo = 0
        if hi > N:
            hi = N
        s = pref[hi]
        if lo:
            s = s - pref[lo - 1]
        total = total + s
    # reflected images
    for k in range(-(r_hi // L), (N - r_lo) // L + 1):
        lo = r_lo + k * L
        hi = r_hi + k * L
        if lo < 0:
            lo = 0
        if hi > N:
            hi = N
        if lo <= hi:
            s = pref[hi]
            if lo:
                s = s - pref[lo - 1]
            total = total - s
    return total


def _confined_band_count(N: int, a: int, b: int, x0: int, x1: int, pref: list):
    """Exact count of paths staying in [-a, b] and ending in [x0, x1]."""
    if a + b == 0:
        inside = x0 <= 0 <= x1
        return _mpz(1 if (N == 0 and inside) else 0)
    x0 = max(x0, -a)
    x1 = min(x1, b)
    if x0 > x1:
        return _mpz(0)
    L = a + b + 2
    j_lo = (N + x0 + 1) // 2
    j_hi = (N + x1) // 2
    if j_lo > j_hi:
        return _mpz(0)
    r_lo = N + b + 1 - j_hi
    r_hi = N + b + 1 - j_lo
    total = _mpz(0)
    k_min = min(-(j_hi // L), -(r_hi // L)) - 1
    k_max = max((N - j_lo) // L, (N - r_lo) // L) + 1
    for k in range(k_min, k_max + 1):
        total += _range_count(pref, N, j_lo + k * L, j_hi + k * L)
        total -= _range_count(pref, N, r_lo + k * L, r_hi + k * L)
    return total


def confined_survival_log(N: int, a: int, b: int) -> float:
    """Branch-dispatched confined survival (log domain), accurate at all widths."""
    _check_interval(a, b)
    if a + b == 0:
        return 0.0 if N == 0 else NEG_INF
    if a + b + 2 <= SPECTRAL_CROSSOVER * math.sqrt(N) or N > EXACT_N_CAP:
        return confined_survival_spectral(N, a, b).log_value
    cnt = _confined_count(N, a, b, _exact_prefix(N))
    return _log_mpz(cnt) - N * LOG2


def _check_interval(a: int, b: int) -> None:
    if a < 0 or b < 0:
        raise ValueError(f"interval offsets must be nonnegative, got a={a}, b={b}")


# ---------------------------------------------------------------------------
# one-sided maximum tail
# ---------------------------------------------------------------------------


# above this size, binomial tails switch from cached rows to truncated series
_TAIL_ROW_CAP = 1 << 21


def _log_binom_suffix_big(N: int, j0: int) -> float:
    """ln sum_{j >= j0} C(N, j) by a truncated series; needs j0 - N/2 >> sqrt(N)."""
    if j0 > N:
        return NEG_INF
    if 2 * j0 - N < 4.0 * math.sqrt(N):
        raise ValueError("series tail evaluation needs a deviation of several sigma")
    lead = gammaln(N + 1) - gammaln(j0 + 1) - gammaln(N - j0 + 1)
    total = 0.0
    log_rel = 0.0
    j = j0
    while j < N:
        chunk = min(4096, N - j)
        jj = np.arange(j, j + chunk, dtype=float)
        ratios = np.log(N - jj) - np.log(jj + 1.0)
        rel = log_rel + np.concatenate([[0.0], np.cumsum(ratios)])  # length chunk+1
        total += float(np.sum(np.exp(rel[:-1] - 0.0)))
        log_rel = float(rel[-1])
        j += chunk
        if log_rel < -45.0 and ratios[-1] < 0:
            break
    if j == N:
        total += math.exp(log_rel)
    return lead + math.log(total)


def max_tail(N: int, m: int) -> LogProb:
    """P(M_N^+ >= m) = P(S_N >= m) + P(S_N > m), exactly, in the log domain.

    Uses cached full tail rows for moderate N and a truncated binomial series
    for very large N (where m is then required to be several sigma out).
    """
    if m <= 0:
        return LogProb(0.0)
    if m > N:
        return LogProb(NEG_INF)
    j_ge = (N + m + 1) // 2  # smallest j with 2j - N >= m
    j_gt = (N + m) // 2 + 1  # smallest j with 2j - N > m
    if N <= _TAIL_ROW_CAP:
        tails = _log_tail_row(N)
        parts = [tails[j] for j in (j_ge, j_gt) if j <= N]
    else:
        parts = [_log_binom_suffix_big(N, j) for j in (j_ge, j_gt) if j <= N]
    if not parts:
        return LogProb(NEG_INF)
    return LogProb(float(np.logaddexp.reduce(parts)) - N * LOG2)


def two_sided_tail_log(N: int, a: int, b: int) -> float:
    """log P(M_N^- <= -a, M_N^+ >= b), exact (integer arithmetic), a,b >= 1."""
    if a < 1 or b < 1:
        raise ValueError("two-sided tail needs a >= 1 and b >= 1")
    if 2 * min(a, b) + max(a, b) > N:
        return NEG_INF
    pref = _exact_prefix(N)
    total = pref[N]
    cnt = (
        total
        - _confined_count(N, a - 1, N, pref)
        - _confined_count(N, N, b - 1, pref)
        + _confined_count(N, a - 1, b - 1, pref)
    )
    return _log_mpz(cnt) - N * LOG2


def feasible_cell(N: int, a: int, b: int) -> bool:
    """Whether some N-step path has min exactly -a and max exactly b."""
    return a + b >= 1 and 2 * min(a, b) + max(a, b) <= N


# ---------------------------------------------------------------------------
# joint (min, max) law
# ---------------------------------------------------------------------------


@dataclass
class RangeLaw:
    """Joint law of (-min, max) for the N-step walk on a rectangular window.

    rows[a][b] holds log P(M^- = -a, M^+ = b) for 0 <= a <= a_max,
    0 <= b <= b_max; -inf marks infeasible cells.  Mass outside the window is
    kept in `log_overflow` (exact when the integer branch is available, an
    upper bound otherwise).  `endpoint[(a, b)] = (xs, logpmf)` is present only
    for endpoint-extended laws.
    """

    N: int
    a_max: int
    b_max: int
    rows: np.ndarray
    log_overflow: float
    overflow_is_bound: bool = False
    n_bounded_cells: int = 0
    endpoint: dict | None = None

    def log_prob(self, a: int, b: int) -> float:
        if 0 <= a <= self.a_max and 0 <= b <= self.b_max:
            return float(self.rows[a, b])
        return NEG_INF

    def __getitem__(self, key) -> LogProb:
        a, b = key
        return LogProb(self.log_prob(a, b))

    def as_dict(self, drop_zero: bool = True) -> dict:
        out = {}
        for a in range(self.a_max + 1):
            for b in range(self.b_max + 1):
                v = float(self.rows[a, b])
                if not drop_zero or v > NEG_INF:
                    out[(a, b)] = v
        return out

    def total_log_mass(self) -> float:
        """log of (window mass + overflow); should be ~0."""
        flat = self.rows[np.isfinite(self.rows)]
        parts = [float(np.logaddexp.reduce(flat))] if flat.size else []
        if self.log_overflow > NEG_INF:
            parts.append(self.log_overflow)
        return float(np.logaddexp.reduce(parts)) if parts else NEG_INF

    def endpoint_logpmf(self, a: int, b: int):
        if self.endpoint is None:
            raise ValueError("law was built without endpoint extension")
        return self.endpoint[(a, b)]


def _cell_exact(N: int, a: int, b: int, pref: list) -> float:
    """Exact integer inclusion-exclusion for one cell (no sharing)."""
    d = _confined_count(N, a, b, pref)
    if a >= 1:
        d -= _confined_count(N, a - 1, b, pref)
    if b >= 1:
        d -= _confined_count(N, a, b - 1, pref)
    if a >= 1 and b >= 1:
        d += _confined_count(N, a - 1, b - 1, pref)
    if d <= 0:
        return NEG_INF
    return _log_mpz(d) - N * LOG2


def cell_log_prob(N: int, a: int, b: int) -> float:
    """log P(M^- = -a, M^+ = b) for a single cell, exact branch selection."""
    if not feasible_cell(N, a, b):
        return NEG_INF
    if N <= EXACT_N_CAP:
        return _cell_exact(N, a, b, _exact_prefix(N))
    corners = [
        (a, b, 1.0),
        (a - 1, b, -1.0),
        (a, b - 1, -1.0),
        (a - 1, b - 1, 1.0),
    ]
    logs, signs = [], []
    for aa, bb, sg in corners:
        if aa < 0 or bb < 0 or aa + bb == 0:
            continue
        logs.append(confined_survival_log(N, aa, bb))
        signs.append(sg)
    acc = signed_logsumexp(np.array(logs), np.array(signs))
    if acc.sign <= 0:
        return NEG_INF
    return acc.log_abs


def _max_feasible_b(N: int, a: int) -> int:
    """Largest b with a feasible (a, b) cell in row a."""
    if a > N:
        return -1
    return N - 2 * a if 3 * a <= N else (N - a) // 2


_LAW_CACHE: dict[int, RangeLaw] = {}
_LAW_LOCK = threading.Lock()
_BUILD_LOCKS: dict[int, threading.Lock] = {}


def range_joint_law(N: int, a_max: int, b_max: int) -> RangeLaw:
    """Joint (min, max) pmf on the window [0..a_max] x [0..b_max].

    Mass beyond the window is aggregated into the overflow cell; the window
    mass plus overflow is exactly one.  Results are cached per N and served
    from the widest table computed so far; concurrent callers coordinate so a
    table is built once.
    """
    if N < 1:
        raise ValueError("walk length must be >= 1")
    if a_max < 1 or b_max < 1:
        raise ValueError("window must satisfy a_max, b_max >= 1")
    A = min(a_max, N)
    B = min(b_max, N)
    with _LAW_LOCK:
        cached = _LAW_CACHE.get(N)
        build_lock = _BUILD_LOCKS.setdefault(N, threading.Lock())
    if cached is not None and cached.a_max >= A and cached.b_max >= B:
        return _slice_law(cached, N, A, B)
    with build_lock:
        with _LAW_LOCK:
            cached = _LAW_CACHE.get(N)
        if cached is not None and cached.a_max >= A and cached.b_max >= B:
            return _slice_law(cached, N, A, B)
        law = _build_law(N, A, B)
        with _LAW_LOCK:
            prev = _LAW_CACHE.get(N)
            if prev is None or prev.a_max * prev.b_max < A * B:
                if len(_LAW_CACHE) > 4:
                    _LAW_CACHE.clear()
                _LAW_CACHE[N] = law
    return law


def _slice_law(law: RangeLaw, N: int, A: int, B: int) -> RangeLaw:
    if law.a_max == A and law.b_max == B:
        return law
    rows = law.rows[: A + 1, : B + 1]
    log_ov, is_bound = _overflow_log(N, A, B)
    return RangeLaw(
        N=N, a_max=A, b_max=B, rows=rows, log_overflow=log_ov,
        overflow_is_bound=is_bound, n_bounded_cells=law.n_bounded_cells,
    )


def _overflow_log(N: int, A: int, B: int):
    """log(1 - P(confined to [-A, B])); exact when integer tables exist."""
    if A >= N and B >= N:
        return NEG_INF, False
    if N <= EXACT_N_CAP:
        pref = _exact_prefix(N)
        ov = pref[N] - _confined_count(N, A, B, pref)
        return (_log_mpz(ov) - N * LOG2) if ov > 0 else NEG_INF, False
    # conservative union bound by one-sided tails
    bound = np.logaddexp(max_tail(N, B + 1).log_value, max_tail(N, A + 1).log_value)
    return float(min(bound, 0.0)), True


def _build_law(N: int, A: int, B: int) -> RangeLaw:
    """Assemble the cell table row by row.

    Survivals are evaluated only at grid points adjacent to feasible cells.
    In the wide zone the corner counts are exact integers and the second
    difference is done on integers (row-cached); in the narrow zone the
    corners are spectral floats with a noise guard and exact fallback.
    """
    rows = np.full((A + 1, B + 1), NEG_INF)
    pref = _exact_prefix(N) if N <= EXACT_N_CAP else None
    crossover = SPECTRAL_CROSSOVER * math.sqrt(N)
    n_bounded = 0
    log2N = N * LOG2
    prev_f: np.ndarray | None = None  # survival logs, previous grid row
    prev_c: list | None = None        # exact counts, previous grid row
    for a in range(A + 1):
        b_need = min(B, max(_max_feasible_b(N, a), _max_feasible_b(N, a + 1), 0))
        cur_f = np.full(b_need + 2, NEG_INF)
        cur_c: list = [None] * (b_need + 2)
        b_spectral = int(math.floor(crossover - a - 2))  # L <= crossover
        for b in range(b_need + 1):
            if a + b == 0:
                cur_f[0] = 0.0 if N == 0 else NEG_INF
                if pref is not None:
                    cur_c[0] = _mpz(1 if N == 0 else 0)
                continue
            if pref is None or b <= b_spectral:
                cur_f[b] = confined_survival_spectral(N, a, b).log_value
            else:
                c = _confined_count(N, a, b, pref)
                cur_c[b] = c
                cur_f[b] = _log_mpz(c) - log2N
        b_cell_max = min(B, _max_feasible_b(N, a))
        for b in range(b_cell_max + 1):
            if not feasible_cell(N, a, b):
                continue
            exact_zone = pref is not None and (a + b + 2) > crossover
            if exact_zone:
                c00 = cur_c[b]
                if c00 is None:
                    c00 = cur_c[b] = _confined_count(N, a, b, pref)
                d = c00
                if a >= 1:
                    c10 = prev_c[b] if prev_c is not None and b < len(prev_c) else None
                    if c10 is None:
                        c10 = _confined_count(N, a - 1, b, pref)
                        if prev_c is not None and b < len(prev_c):
                            prev_c[b] = c10
                    d = d - c10
                if b >= 1:
                    c01 = cur_c[b - 1]
                    if c01 is None:
                        c01 = cur_c[b - 1] = _confined_count(N, a, b - 1, pref)
                    d = d - c01
                if a >= 1 and b >= 1:
                    c11 = prev_c[b - 1] if prev_c is not None else None
                    if c11 is None:
                        c11 = _confined_count(N, a - 1, b - 1, pref)
                        if prev_c is not None:
                            prev_c[b - 1] = c11
                    d = d + c11
                if d > 0:
                    rows[a, b] = _log_mpz(d) - log2N
                continue
            c00 = cur_f[b]
            c10 = prev_f[b] if (a >= 1 and prev_f is not None and b < len(prev_f)) else NEG_INF
            c01 = cur_f[b - 1] if b >= 1 else NEG_INF
            c11 = prev_f[b - 1] if (a >= 1 and b >= 1 and prev_f is not None) else NEG_INF
            m = max(c00, c10, c01, c11)
            if m == NEG_INF:
                continue
            tot = math.exp(c00 - m)
            if c10 > NEG_INF:
                tot -= math.exp(c10 - m)
            if c01 > NEG_INF:
                tot -= math.exp(c01 - m)
            if c11 > NEG_INF:
                tot += math.exp(c11 - m)
            if tot > 0 and math.log(tot) >= -FLOAT_GUARD_NATS:
                rows[a, b] = m + math.log(tot)
            elif pref is not None:
                rows[a, b] = _cell_exact(N, a, b, pref)
            else:
                # noise-dominated beyond the exact cap: store a sound upper bound
                d = 2 * min(a, b) + max(a, b)
                rows[a, b] = max_tail(N, d).log_value
                n_bounded += 1
        prev_f, prev_c = cur_f, cur_c
    log_ov, is_bound = _overflow_log(N, A, B)
    return RangeLaw(
        N=N, a_max=A, b_max=B, rows=rows, log_overflow=log_ov,
        overflow_is_bound=is_bound, n_bounded_cells=n_bounded,
    )


# ---------------------------------------------------------------------------
# endpoint-resolved laws
# ---------------------------------------------------------------------------


_EDGE_MODES = 64


def _spectral_mode_index(N: int, m: int) -> np.ndarray | None:
    """Modes needed for an e^-46-certified truncation, or None if all of them.

    Mid-spectrum modes j in (J, P-J) obey |cos(j pi / P)|^N <= e^-46 whenever
    N (J pi / P)^2 / 2 >= 46, so keeping the J lowest and J highest suffices.
    """
    if m <= 2 * _EDGE_MODES + 2:
        return None
    P = m + 1
    if N * (_EDGE_MODES * math.pi / P) ** 2 / 2.0 < 46.0:
        return np.arange(1, m + 1)  # not certified; caller should avoid
    return np.concatenate(
        [np.arange(1, _EDGE_MODES + 1), np.arange(m - _EDGE_MODES + 1, m + 1)]
    )


def _endpoint_log_spectral(N: int, a: int, b: int) -> np.ndarray:
    """log psi_{a,b}(x) on the full site grid x = -a..b (off-parity = -inf)."""
    m = a + b + 1
    P = m + 1
    j = _spectral_mode_index(N, m)
    if j is None:
        j = np.arange(1, m + 1)
    theta = j * math.pi / P
    lam = np.cos(theta)
    with np.errstate(divide="ignore"):
        logpow = N * np.log(np.abs(lam))
    sgn = np.where(lam < 0, (-1.0) ** (N % 2), 1.0)
    sgn = np.where(lam == 0.0, 0.0 if N > 0 else 1.0, sgn)
    start = np.sin(theta * (a + 1))
    top = float(np.max(logpow))
    coef = sgn * np.sign(start) * np.exp(
        logpow - top + np.log(np.abs(start), where=start != 0, out=np.full_like(start, NEG_INF))
    )
    sites = np.arange(1, m + 1)
    basis = np.sin(np.outer(theta, sites))  # (mode, site)
    vals = (2.0 / P) * (coef @ basis)
    out = np.full(m, NEG_INF)
    pos = vals > 0
    out[pos] = top + np.log(vals[pos])
    # parity: N steps can only end at x with x ~ N (mod 2)
    x = sites - (a + 1)
    out[(x - N) % 2 != 0] = NEG_INF
    return out


def _endpoint_count(N: int, a: int, b: int, x: int, pref: list):
    """Exact count of paths confined to [-a, b] ending at x."""
    if x < -a or x > b or (N + x) % 2 or abs(x) > N:
        return _mpz(0)
    if a + b == 0:
        return _mpz(1 if N == 0 else 0)
    L = a + b + 2
    j0 = (N + x) // 2
    r0 = N + b + 1 - j0
    total = _mpz(0)
    k_min = min(-(j0 // L), -(r0 // L)) - 1
    k_max = max((N - j0) // L, (N - r0) // L) + 1
    for k in range(k_min, k_max + 1):
        total += _range_count(pref, N, j0 + k * L, j0 + k * L)
        total -= _range_count(pref, N, r0 + k * L, r0 + k * L)
    return total


def cell_endpoint_log(N: int, a: int, b: int) -> tuple[np.ndarray, np.ndarray]:
    """(xs, log pmf) of P(M^- = -a, M^+ = b, S_N = x) over the cell's support.

    Float corner differencing with a noise guard; guarded entries are
    recomputed on exact integers.
    """
    if not feasible_cell(N, a, b):
        return np.empty(0, dtype=int), np.empty(0)
    xs = np.arange(-a + ((N + a) % 2), b + 1, 2)
    corners = [(a, b, 1.0), (a - 1, b, -1.0), (a, b - 1, -1.0), (a - 1, b - 1, 1.0)]
    corner_psi = []
    for aa, bb, sg in corners:
        vec = np.full(len(xs), NEG_INF)
        if aa >= 0 and bb >= 0 and aa + bb >= 1:
            psi = _endpoint_psi_log(N, aa, bb)
            lo = -aa + ((N + aa) % 2)
            idx = (xs - lo) // 2
            ok = (xs >= -aa) & (xs <= bb)
            vec[ok] = psi[idx[ok]]
        corner_psi.append((vec, sg))
    m = np.full(len(xs), NEG_INF)
    for vec, _ in corner_psi:
        m = np.maximum(m, vec)
    tot = np.zeros(len(xs))
    for vec, sg in corner_psi:
        with np.errstate(invalid="ignore"):
            contrib = np.where(np.isfinite(vec), sg * np.exp(vec - m), 0.0)
        tot += contrib
    out = np.full(len(xs), NEG_INF)
    ok = (tot > 0) & np.isfinite(m)
    out[ok] = m[ok] + np.log(tot[ok])
    flagged = np.isfinite(m) & ~((tot > 0) & (np.log(np.maximum(tot, 1e-300)) >= -FLOAT_GUARD_NATS))
    # only repair entries that can matter: anything this far below the cell's
    # peak is below the noise floor of any aggregate built from the pmf
    peak = float(np.max(out[ok])) if np.any(ok) else float(np.max(m[np.isfinite(m)]))
    flagged &= m >= peak - 36.0
    out[np.isfinite(m) & (m < peak - 36.0) & ~ok] = NEG_INF
    if np.any(flagged) and N <= EXACT_N_CAP:
        pref = _exact_prefix(N)
        for i in np.nonzero(flagged)[0]:
            x = int(xs[i])
            d = (
                _endpoint_count(N, a, b, x, pref)
                - _endpoint_count(N, a - 1, b, x, pref)
                - _endpoint_count(N, a, b - 1, x, pref)
                + _endpoint_count(N, a - 1, b - 1, x, pref)
            )
            out[i] = (_log_mpz(d) - N * LOG2) if d > 0 else NEG_INF
    return xs, out


_PSI_CACHE: dict = {}
_PSI_CACHE_MAX = 8192


def _endpoint_psi_log(N: int, a: int, b: int) -> np.ndarray:
    """log of confined endpoint pmf on x = parity-grid of [-a, b].

    Branch choice: reflection images where few are needed (very wide), else
    the certified-truncation spectral form, else full reflection.  Values are
    memoized because adjacent cells share corners.
    """
    key = (N, a, b)
    hit = _PSI_CACHE.get(key)
    if hit is not None:
        return hit
    out = _endpoint_psi_log_impl(N, a, b)
    if len(_PSI_CACHE) >= _PSI_CACHE_MAX:
        _PSI_CACHE.clear()
    _PSI_CACHE[key] = out
    return out


def _endpoint_psi_log_impl(N: int, a: int, b: int) -> np.ndarray:
    xs = np.arange(-a + ((N + a) % 2), b + 1, 2)
    m = a + b + 1
    P = m + 1
    few_images = N // (2 * P) + 2 <= 8
    certified = (
        m <= 2 * _EDGE_MODES + 2
        or N * (_EDGE_MODES * math.pi / P) ** 2 / 2.0 >= 46.0
    )
    if not few_images and certified:
        full = _endpoint_log_spectral(N, a, b)
        lo = -a
        return full[(xs - lo)]
    # reflection series in float: few images in the wide regime
    lb = _log_binom_row(N)

    def logp(y: np.ndarray) -> np.ndarray:
        j = (N + y) // 2
        valid = (np.abs(y) <= N) & ((N + y) % 2 == 0)
        out = np.full(y.shape, NEG_INF)
        out[valid] = lb[j[valid]]
        return out

    L = a + b + 2
    kmax = N // (2 * L) + 2
    m = np.full(len(xs), NEG_INF)
    terms = []
    for k in range(-kmax, kmax + 1):
        t1 = logp(xs + 2 * k * L)
        t2 = logp(2 * (b + 1) - xs + 2 * k * L)
        terms.append((t1, 1.0))
        terms.append((t2, -1.0))
        m = np.maximum(m, np.maximum(t1, t2))
    tot = np.zeros(len(xs))
    for vec, sg in terms:
        tot += np.where(np.isfinite(vec), sg * np.exp(vec - m), 0.0)
    out = np.full(len(xs), NEG_INF)
    ok = (tot > 0) & np.isfinite(m)
    out[ok] = m[ok] + np.log(tot[ok]) - N * LOG2
    return out


def cell_band_log(N: int, a: int, b: int, x0: int, x1: int) -> float:
    """log P(M^- = -a, M^+ = b, x0 <= S_N <= x1), exact integer differencing."""
    if not feasible_cell(N, a, b) or N > EXACT_N_CAP:
        if N > EXACT_N_CAP:
            raise RuntimeError("band-aggregated cells need the exact branch (N too large)")
        return NEG_INF
    pref = _exact_prefix(N)

    def bc(aa, bb):
        if aa < 0 or bb < 0:
            return _mpz(0)
        return _confined_band_count(N, aa, bb, x0, x1, pref)

    d = bc(a, b) - bc(a - 1, b) - bc(a, b - 1) + bc(a - 1, b - 1)
    return (_log_mpz(d) - N * LOG2) if d > 0 else NEG_INF


def range_endpoint_joint_law(N: int, a_max: int, b_max: int) -> RangeLaw:
    """Endpoint-extended joint law: entries (a, b) -> (xs, log pmf over S_N).

    Marginalizing the endpoint reproduces `range_joint_law`.  Materialized
    tables are intended for moderate N; large-N flows stream cells instead.
    """
    law = range_joint_law(N, a_max, b_max)
    if (law.a_max + 1) * (law.b_max + 1) * (law.a_max + law.b_max + 1) > 5e7:
        raise ValueError("endpoint-extended table too large to materialize; stream cells instead")
    endpoint = {}
    for a in range(law.a_max + 1):
        for b in range(law.b_max + 1):
            if law.rows[a, b] > NEG_INF:
                endpoint[(a, b)] = cell_endpoint_log(N, a, b)
    return RangeLaw(
        N=N, a_max=law.a_max, b_max=law.b_max, rows=law.rows,
        log_overflow=law.log_overflow, overflow_is_bound=law.overflow_is_bound,
        n_bounded_cells=law.n_bounded_cells, endpoint=endpoint,
    )
