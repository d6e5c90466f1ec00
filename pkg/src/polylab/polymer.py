"""Partition functions and polymer-measure marginals.

The Gibbs weight of a trajectory depends on it only through the visited
interval [-a, b] = [min, max]:

    weight(a, b) = exp( beta_N * (Omega_b^+ + Omega_a^-) - h_N * (a + b + 1) )

so Z_N is a weighted sum over the exact joint (min, max) law.  Windows are
chosen automatically: they grow geometrically until a rigorous bound on the
weighted mass outside the window is below a relative tolerance, or the window
provably covers every feasible cell (exact completion).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import rates, srw_exact
from .env import Environment
from .srw_exact import NEG_INF, LogProb, RangeLaw, feasible_cell, max_tail

__all__ = [
    "AUTO",
    "PolymerParams",
    "PolymerRangeMarginal",
    "EndpointMarginal",
    "log_partition",
    "log_partition_restricted",
    "polymer_range_marginal",
    "polymer_endpoint_marginal",
    "oracle_log_partition",
]

AUTO = "auto"

RELATIVE_OVERFLOW_TOL = 1e-10
WINDOW_START_FACTOR = 4.0
ORACLE_N_CAP = 20


def _disabled(x) -> bool:
    return x is None or (isinstance(x, float) and math.isinf(x))


@dataclass(frozen=True)
class PolymerParams:
    """Couplings of the size-N polymer: beta_N = beta_hat * N^-gamma,
    h_N = h_hat * N^-zeta.  gamma=None (or +inf) disables the disorder term,
    zeta=None (or +inf) disables the range term."""

    alpha: float
    beta_hat: float
    h_hat: float
    gamma: float | None
    zeta: float | None
    N: int

    def __post_init__(self) -> None:
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.beta_hat < 0:
            raise ValueError("beta_hat must be >= 0")
        if self.alpha == 1.0 or not (0.0 < self.alpha <= 2.0):
            raise ValueError(f"tail index must lie in (0,1)u(1,2], got alpha={self.alpha}")

    @property
    def beta_n(self) -> float:
        if _disabled(self.gamma) or self.beta_hat == 0.0:
            return 0.0
        return self.beta_hat * float(self.N) ** (-self.gamma)

    @property
    def h_n(self) -> float:
        if _disabled(self.zeta) or self.h_hat == 0.0:
            return 0.0
        return self.h_hat * float(self.N) ** (-self.zeta)


def _log_weight_grid(env: Environment, params: PolymerParams, A: int, B: int) -> np.ndarray:
    """log weight(a, b) on [0..A] x [0..B]."""
    beta_n, h_n = params.beta_n, params.h_n
    if beta_n != 0.0:
        col = beta_n * env.cum_minus(A)
        row = beta_n * env.cum_plus(B)
    else:
        col = np.zeros(A + 1)
        row = np.zeros(B + 1)
    aa = np.arange(A + 1)[:, None]
    bb = np.arange(B + 1)[None, :]
    grid = col[:, None] + row[None, :] - h_n * (aa + bb + 1)
    if not np.all(np.isfinite(grid)):
        bad = np.argwhere(~np.isfinite(grid))[0]
        raise OverflowError(
            f"coupling overflow at cell (a={bad[0]}, b={bad[1]}): "
            "beta_N * Omega exceeds the float range; reduce beta_hat or N"
        )
    return grid


def _predicted_xi(params: PolymerParams) -> float:
    """Window sizing exponent from the phase classifier; 1.0 when unresolved."""
    h_sign = 0 if params.h_n == 0.0 else (1 if params.h_hat > 0 else -1)
    try:
        label = rates.classify_region(
            params.alpha, params.gamma, params.zeta, h_sign,
            beta_positive=params.beta_hat > 0,
        )
    except ValueError:
        return 1.0
    if label.xi is None:
        return 1.0
    return max(label.xi, 1.0 / 3.0)


def _exterior_log_bound(
    env: Environment, params: PolymerParams, A: int, B: int
) -> float:
    """log of an upper bound on sum of weight*cellmass outside [0..A]x[0..B].

    Cells are grouped by diagonal w = a + b.  On each diagonal the weight is
    bounded with prefix maxima of the disorder sums and the exact |h| term,
    and the cell mass by the one-sided tail at the minimal travel distance
    2 min(a,b) + max(a,b) over exterior cells of that diagonal.
    """
    N = params.N
    if A >= N and B >= N:
        return NEG_INF
    beta_n, h_n = params.beta_n, params.h_n
    n_cap = N
    if beta_n != 0.0:
        mplus = np.maximum.accumulate(env.cum_plus(n_cap))
        mminus = np.maximum.accumulate(env.cum_minus(n_cap))
    ws = np.arange(min(A, B) + 1, 2 * N + 1)
    parts = []
    tail_cache: dict[int, float] = {}
    for w in ws:
        # minimal two-sided travel distance among exterior cells on diagonal w
        cands = []
        if w > A + B:
            cands.append(w)  # a = 0 or b = 0 reachable
        else:
            if w > B:  # zone b > B: smallest min(a,b) at b = B + 1
                cands.append(w + min(w - B - 1, B + 1))
            if w > A:
                cands.append(w + min(w - A - 1, A + 1))
        if not cands:
            continue
        d = min(cands)
        if d > N:
            break
        lt = tail_cache.get(d)
        if lt is None:
            lt = max_tail(N, d).log_value
            tail_cache[d] = lt
        if lt == NEG_INF:
            continue
        lw = -h_n * (w + 1)
        if beta_n != 0.0:
            j = min(w, n_cap)
            lw += beta_n * (mplus[j] + mminus[j])
        parts.append(lw + lt + math.log(min(w, N) + 1.0))
    if not parts:
        return NEG_INF
    return float(np.logaddexp.reduce(np.array(parts)))


def _resolve_window(env, params, window):
    """Return (A, B) covering all but a negligible weighted mass."""
    N = params.N
    if window != AUTO:
        a_max, b_max = window
        return min(int(a_max), N), min(int(b_max), N)
    xi_hat = _predicted_xi(params)
    size = max(4, math.ceil(WINDOW_START_FACTOR * float(N) ** xi_hat))
    A = B = min(size, N)
    while True:
        if A >= N and B >= N:
            return A, B  # exact completion: every feasible cell covered
        law = srw_exact.range_joint_law(N, A, B)
        logw = _log_weight_grid(env, params, A, B)
        log_z_win = _weighted_logsumexp(logw, law.rows)
        bound = _exterior_log_bound(env, params, A, B)
        if bound <= log_z_win + math.log(RELATIVE_OVERFLOW_TOL):
            return A, B
        A = min(2 * A, N)
        B = min(2 * B, N)


def _weighted_logsumexp(logw: np.ndarray, logp: np.ndarray, mask=None) -> float:
    tot = logw + logp
    if mask is not None:
        tot = np.where(mask, tot, NEG_INF)
    finite = tot[np.isfinite(tot)]
    if finite.size == 0:
        return NEG_INF
    m = float(np.max(finite))
    return m + math.log(float(np.sum(np.exp(finite - m))))


def log_partition(env: Environment, params: PolymerParams, window=AUTO) -> float:
    """log Z_N: weighted log-sum over the exact joint (min, max) law.

    With window=AUTO the window grows until the rigorous exterior bound
    contributes less than 1e-10 relative, or covers all feasible cells.
    """
    A, B = _resolve_window(env, params, window)
    law = srw_exact.range_joint_law(params.N, A, B)
    logw = _log_weight_grid(env, params, A, B)
    return _weighted_logsumexp(logw, law.rows)


def log_partition_restricted(
    env: Environment, params: PolymerParams, predicate, window=AUTO
) -> float:
    """log Z_N restricted to (min, max) cells satisfying the predicate.

    `predicate(a_grid, b_grid)` receives integer grids and returns a boolean
    mask (vectorized).  An empty restriction yields -inf.
    """
    A, B = _resolve_window(env, params, window)
    law = srw_exact.range_joint_law(params.N, A, B)
    logw = _log_weight_grid(env, params, A, B)
    aa, bb = np.meshgrid(np.arange(A + 1), np.arange(B + 1), indexing="ij")
    mask = np.asarray(predicate(aa, bb), dtype=bool)
    return _weighted_logsumexp(logw, law.rows, mask=mask)


@dataclass
class PolymerRangeMarginal:
    """Polymer-measure joint law of (-min, max): log probabilities plus log Z."""

    N: int
    a_max: int
    b_max: int
    rows: np.ndarray
    log_z: float

    def log_prob(self, a: int, b: int) -> float:
        if 0 <= a <= self.a_max and 0 <= b <= self.b_max:
            return float(self.rows[a, b])
        return NEG_INF

    def __getitem__(self, key) -> LogProb:
        return LogProb(self.log_prob(*key))

    def as_dict(self, drop_zero: bool = True) -> dict:
        out = {}
        for a in range(self.a_max + 1):
            for b in range(self.b_max + 1):
                v = float(self.rows[a, b])
                if not drop_zero or v > NEG_INF:
                    out[(a, b)] = v
        return out

    def mass(self, predicate) -> float:
        """Probability of {(a, b): predicate}, predicate vectorized over grids."""
        aa, bb = np.meshgrid(
            np.arange(self.a_max + 1), np.arange(self.b_max + 1), indexing="ij"
        )
        mask = np.asarray(predicate(aa, bb), dtype=bool)
        sel = self.rows[mask]
        sel = sel[np.isfinite(sel)]
        if sel.size == 0:
            return 0.0
        m = float(np.max(sel))
        return math.exp(m) * float(np.sum(np.exp(sel - m)))

    def width_mass(self, lo: float, hi: float) -> float:
        """Probability that the range width M^+ - M^- lies in [lo, hi]."""
        return self.mass(lambda a, b: (a + b >= lo) & (a + b <= hi))


def polymer_range_marginal(
    env: Environment, params: PolymerParams, window=AUTO
) -> PolymerRangeMarginal:
    """Per-cell polymer probabilities P_N(M^- = -a, M^+ = b) with normalizer."""
    A, B = _resolve_window(env, params, window)
    law = srw_exact.range_joint_law(params.N, A, B)
    logw = _log_weight_grid(env, params, A, B)
    log_z = _weighted_logsumexp(logw, law.rows)
    rows = logw + law.rows - log_z
    rows[~np.isfinite(law.rows)] = NEG_INF
    return PolymerRangeMarginal(
        N=params.N, a_max=A, b_max=B, rows=rows, log_z=log_z
    )


@dataclass
class EndpointMarginal:
    """Polymer endpoint pmf on the parity sites of [-a_max, b_max].

    `coverage_deficit` bounds the total variation missed by restricting to the
    highest-probability (min, max) cells.
    """

    N: int
    xs: np.ndarray
    logpmf: np.ndarray
    log_z: float
    coverage_deficit: float

    def pmf(self) -> np.ndarray:
        return np.where(np.isfinite(self.logpmf), np.exp(self.logpmf), 0.0)

    def mass(self, lo: float, hi: float) -> float:
        sel = (self.xs >= lo) & (self.xs <= hi)
        return float(np.sum(self.pmf()[sel]))

    def abs_mass(self, lo: float, hi: float) -> float:
        sel = (np.abs(self.xs) >= lo) & (np.abs(self.xs) <= hi)
        return float(np.sum(self.pmf()[sel]))

    def cdf(self) -> np.ndarray:
        return np.cumsum(self.pmf())


def polymer_endpoint_marginal(
    env: Environment,
    params: PolymerParams,
    window=AUTO,
    coverage: float = 1.0 - 1e-9,
) -> EndpointMarginal:
    """P_N(S_N = x), assembled cell by cell in decreasing posterior order.

    Cells are included until their posterior mass covers `coverage`; the
    remainder is reported as `coverage_deficit` (a total-variation bound).
    """
    marg = polymer_range_marginal(env, params, window)
    N = params.N
    order = np.argsort(marg.rows, axis=None)[::-1]
    post = marg.rows.reshape(-1)
    xs_all = np.arange(-marg.a_max + ((N + marg.a_max) % 2), marg.b_max + 1, 2)
    acc = np.zeros(len(xs_all))
    covered = 0.0
    x0 = xs_all[0]
    for idx in order:
        lp = post[idx]
        if not np.isfinite(lp):
            break
        a, b = divmod(int(idx), marg.b_max + 1)
        cell_mass = math.exp(lp)
        law_cell = srw_exact.range_joint_law(N, marg.a_max, marg.b_max).log_prob(a, b)
        xs, lvals = srw_exact.cell_endpoint_log(N, a, b)
        if len(xs):
            cond = np.exp(lvals - law_cell)  # endpoint law conditional on the cell
            pos = (xs - x0) // 2
            acc[pos] += cell_mass * cond
        covered += cell_mass
        if covered >= coverage:
            break
    with np.errstate(divide="ignore"):
        logpmf = np.where(acc > 0, np.log(np.maximum(acc, 1e-320)), NEG_INF)
    return EndpointMarginal(
        N=N, xs=xs_all, logpmf=logpmf, log_z=marg.log_z,
        coverage_deficit=max(0.0, 1.0 - covered),
    )


def polymer_abs_endpoint_band_mass(
    env: Environment,
    params: PolymerParams,
    lo: float,
    hi: float,
    window=AUTO,
    coverage: float = 1.0 - 1e-7,
) -> float:
    """P_N(|S_N| in [lo, hi]) by exact per-cell band aggregation.

    Avoids materializing the endpoint pmf: each (min, max) cell contributes
    its exact endpoint mass on +/-[lo, hi], cells taken in decreasing
    posterior order until `coverage` of the polymer mass is accounted for.
    """
    marg = polymer_range_marginal(env, params, window)
    N = params.N
    law = srw_exact.range_joint_law(N, marg.a_max, marg.b_max)
    order = np.argsort(marg.rows, axis=None)[::-1]
    post = marg.rows.reshape(-1)
    lo_i, hi_i = int(math.ceil(lo)), int(math.floor(hi))
    total = 0.0
    covered = 0.0
    for idx in order:
        lp = post[idx]
        if not np.isfinite(lp):
            break
        a, b = divmod(int(idx), marg.b_max + 1)
        cell_log = law.log_prob(a, b)
        parts = [srw_exact.cell_band_log(N, a, b, lo_i, hi_i)]
        if lo_i >= 1:  # the mirrored band on the negative axis
            parts.append(srw_exact.cell_band_log(N, a, b, -hi_i, -lo_i))
        else:
            parts.append(srw_exact.cell_band_log(N, a, b, -hi_i, min(-lo_i, lo_i - 1)))
        band = np.logaddexp.reduce([p for p in parts if p > NEG_INF]) if any(
            p > NEG_INF for p in parts
        ) else NEG_INF
        if band > NEG_INF:
            total += math.exp(lp) * math.exp(band - cell_log)
        covered += math.exp(lp)
        if covered >= coverage:
            break
    return float(total)


def _enumerate_stats(N: int):
    """(min, max, endpoint) of every N-step path, vectorized over 2^N paths."""
    ix = np.arange(1 << N, dtype=np.int64)
    bits = ((ix[:, None] >> np.arange(N)) & 1).astype(np.int16)
    steps = 2 * bits - 1
    s = np.cumsum(steps, axis=1)
    mn = np.minimum(0, s.min(axis=1))
    mx = np.maximum(0, s.max(axis=1))
    return mn, mx, s[:, -1]


def oracle_log_partition(env: Environment, params: PolymerParams) -> float:
    """Ground truth by brute force over all 2^N trajectories (N <= 20)."""
    N = params.N
    if N > ORACLE_N_CAP:
        raise ValueError(f"oracle enumeration is capped at N={ORACLE_N_CAP}, got {N}")
    mn, mx, _ = _enumerate_stats(N)
    a = (-mn).astype(np.int64)
    b = mx.astype(np.int64)
    beta_n, h_n = params.beta_n, params.h_n
    logw = -h_n * (a + b + 1.0)
    if beta_n != 0.0:
        logw = logw + beta_n * (env.cum_plus(N)[b] + env.cum_minus(N)[a])
    m = float(np.max(logw))
    return m + math.log(float(np.sum(np.exp(logw - m)))) - N * math.log(2.0)
