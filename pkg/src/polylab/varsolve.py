"""Limiting variational problems on discretized coupled paths.

The normalized log partition function converges, in the stretched phases, to
a supremum of a doubly indexed functional of the two-sided limit process:

    stretch/entropy   Y(u, v) = beta (X_v - X_u) - I(u, v)
    full stretch      Y(u, v) = beta (X_v - X_u),  |u| ^ |v| + v - u <= 1
    stretch/range     Y(u, v) = beta (X_v - X_u) - h (v - u)

These are solved exactly over the lattice {k/n} of a PathGrid built from the
same disorder field as the partition function, so engine and limit can be
compared pairwise per seed.  Windows for the unbounded variants grow by
doubling until an outer shell can no longer compete; hitting the cap yields a
result flagged unconverged rather than a silent answer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import maximum_filter

from . import rates
from .env import Environment

__all__ = [
    "PathGrid",
    "VariationalResult",
    "solve_R2",
    "solve_R3",
    "solve_R4",
    "solve_adaptive",
    "adaptive_window",
    "quasi_maximizers",
    "closed_form_limit",
    "ClosedFormLimit",
]

TIE_TOL = 1e-9
DEFAULT_WINDOW_CAP = 4096.0


@dataclass(frozen=True)
class PathGrid:
    """Rescaled two-sided disorder path on the lattice {k/scale : |k| <= K}.

    plus[k] = scale^{-1/alpha} * Omega_k^+ (site-0 value rides with the plus
    side, matching the weight identity of the partition function), and
    minus[k] = scale^{-1/alpha} * Omega_k^-, so the increment of the limit
    process between u = -i/scale and v = j/scale is minus[i] + plus[j].
    """

    alpha: float
    scale: float
    plus: np.ndarray
    minus: np.ndarray

    @property
    def window(self) -> float:
        return (len(self.plus) - 1) / self.scale

    @staticmethod
    def from_environment(env: Environment, scale: float, window: float) -> "PathGrid":
        if scale < 1:
            raise ValueError("scale must be >= 1")
        k = int(math.ceil(window * scale))
        fac = scale ** (-1.0 / env.spec.alpha)
        return PathGrid(
            alpha=env.spec.alpha,
            scale=float(scale),
            plus=fac * env.cum_plus(k),
            minus=fac * env.cum_minus(k),
        )

    @staticmethod
    def from_function(f, scale: float, window: float, alpha: float = 2.0) -> "PathGrid":
        """Deterministic grid with X_t = f(t); for tests and worked examples."""
        k = int(math.ceil(window * scale))
        t = np.arange(k + 1) / scale
        return PathGrid(
            alpha=alpha, scale=float(scale),
            plus=np.array([f(ti) for ti in t]),
            minus=np.array([-f(-ti) for ti in t]),
        )

    def increment(self, i: int, j: int) -> float:
        """X_{j/scale} - X_{-i/scale} for i, j >= 0."""
        return float(self.minus[i] + self.plus[j])

    def sliced(self, window: float) -> "PathGrid":
        """Restriction to |t| <= window (no resampling)."""
        k = int(math.ceil(window * self.scale))
        if k >= len(self.plus):
            return self
        return PathGrid(
            alpha=self.alpha, scale=self.scale,
            plus=self.plus[: k + 1], minus=self.minus[: k + 1],
        )


@dataclass
class VariationalResult:
    """Supremum of the discrete functional with its quasi-argmax set."""

    value: float
    maximizers: list[tuple[float, float]]
    window: float
    variant: str
    scale: float
    unconverged: bool = False

    def primary_maximizer(self) -> tuple[float, float]:
        return self.maximizers[0]


def _functional_matrix(path: PathGrid, variant: str, beta_hat: float, h_hat, i_max, j_max):
    """Y over the full lattice rectangle; -inf marks infeasible pairs."""
    return _row_functional(path, variant, beta_hat, h_hat, 0, i_max, j_max)


_ROW_CHUNK = 256


def _row_functional(path, variant, beta_hat, h_hat, i_lo, i_hi, j_max):
    """Functional on lattice rows i_lo..i_hi (u = -i/scale), all columns."""
    s = path.scale
    i = np.arange(i_lo, i_hi + 1)
    j = np.arange(j_max + 1)
    base = beta_hat * (path.minus[i_lo : i_hi + 1][:, None] + path.plus[: j_max + 1][None, :])
    if variant == "R2":
        pen = 0.5 * ((np.minimum(i[:, None], j[None, :]) + i[:, None] + j[None, :]) / s) ** 2
        return base - pen
    if variant == "R3":
        infeas = (np.minimum(i[:, None], j[None, :]) + i[:, None] + j[None, :]) > s
        out = base.copy()
        out[infeas] = -np.inf
        return out
    if variant == "R4":
        return base - h_hat * (i[:, None] + j[None, :]) / s
    raise ValueError(f"unknown variant {variant!r}")


def _solve_on_window(
    path: PathGrid, variant: str, beta_hat: float, h_hat=None, one_sided: bool = False
) -> VariationalResult:
    k = len(path.plus) - 1
    i_max = 0 if one_sided else k
    s = path.scale
    value = -np.inf
    for i_lo in range(0, i_max + 1, _ROW_CHUNK):
        i_hi = min(i_lo + _ROW_CHUNK - 1, i_max)
        Y = _row_functional(path, variant, beta_hat, h_hat, i_lo, i_hi, k)
        block = np.max(Y[np.isfinite(Y)]) if np.isfinite(Y).any() else -np.inf
        value = max(value, float(block))
    maximizers = []
    for i_lo in range(0, i_max + 1, _ROW_CHUNK):
        i_hi = min(i_lo + _ROW_CHUNK - 1, i_max)
        Y = _row_functional(path, variant, beta_hat, h_hat, i_lo, i_hi, k)
        for di, j in np.argwhere(Y >= value - TIE_TOL):
            maximizers.append((-(i_lo + float(di)) / s, float(j) / s))
    return VariationalResult(
        value=value, maximizers=maximizers, window=path.window,
        variant=variant, scale=s,
    )


def solve_R2(path: PathGrid, beta_hat: float, one_sided: bool = False) -> VariationalResult:
    """sup of beta (X_v - X_u) - (|u| ^ |v| + v - u)^2 / 2 over the lattice."""
    return _solve_on_window(path, "R2", beta_hat, one_sided=one_sided)


def solve_R3(path: PathGrid, beta_hat: float, one_sided: bool = False) -> VariationalResult:
    """sup of beta (X_v - X_u) under |u| ^ |v| + v - u <= 1 (lattice-exact).

    Needs window >= 1; the constraint bounds the feasible set.
    """
    if path.window < 1.0:
        raise ValueError("window must cover [-1, 1] for the constrained variant")
    return _solve_on_window(path, "R3", beta_hat, one_sided=one_sided)


def solve_R4(
    path: PathGrid, beta_hat: float, h_hat: float, one_sided: bool = False
) -> VariationalResult:
    """sup of beta (X_v - X_u) - h (v - u); finite only for tail index > 1."""
    if h_hat <= 0:
        raise ValueError("linear-penalty variant needs h_hat > 0")
    if path.alpha <= 1.0:
        raise ValueError(
            "supremum diverges for tail index <= 1: the path grows faster than "
            "the linear penalty; no finite value exists"
        )
    return _solve_on_window(path, "R4", beta_hat, h_hat, one_sided=one_sided)


def _shell_margin(path, variant, beta_hat, h_hat, one_sided):
    """Best functional value with max(|u|, v) in the outer half-window."""
    k = len(path.plus) - 1
    half = k // 2
    i_max = 0 if one_sided else k
    best = -np.inf
    for i_lo in range(0, i_max + 1, _ROW_CHUNK):
        i_hi = min(i_lo + _ROW_CHUNK - 1, i_max)
        Y = _row_functional(path, variant, beta_hat, h_hat, i_lo, i_hi, k)
        ii = np.arange(i_lo, i_hi + 1)[:, None]
        jj = np.arange(k + 1)[None, :]
        outer = np.maximum(ii, jj) > half
        sel = Y[outer]
        sel = sel[np.isfinite(sel)]
        if sel.size:
            best = max(best, float(np.max(sel)))
    return best


def natural_window(variant: str, beta_hat: float, h_hat: float | None = None) -> float:
    """Starting window for the doubling rule, sized to the functional's
    typical argmax scale so that a noisy early shell cannot truncate it."""
    if variant == "R2":
        return max(1.0, 2.0 * beta_hat ** (2.0 / 3.0))
    if variant == "R4":
        if not h_hat:
            return 1.0
        return max(1.0, 8.0 * (beta_hat / (2.0 * h_hat)) ** 2)
    return 1.0


def solve_adaptive(
    env_or_path,
    scale: float,
    variant: str,
    beta_hat: float,
    h_hat: float | None = None,
    one_sided: bool = False,
    window_cap: float = DEFAULT_WINDOW_CAP,
    start_window: float | None = None,
) -> VariationalResult:
    """Solve with a doubling window: stop at the first window whose outer
    shell lies more than one unit below the running maximum; cap exceeded
    flags the result unconverged."""
    if variant == "R3":
        path = _as_grid(env_or_path, scale, 1.0)
        return solve_R3(path, beta_hat, one_sided=one_sided)
    window = start_window if start_window is not None else natural_window(variant, beta_hat, h_hat)
    while True:
        path = _as_grid(env_or_path, scale, window)
        res = _solve_on_window(path, variant, beta_hat, h_hat, one_sided)
        shell = _shell_margin(path, variant, beta_hat, h_hat, one_sided)
        if shell <= res.value - 1.0:
            return res
        if window >= window_cap:
            res.unconverged = True
            return res
        window *= 2.0


def _as_grid(env_or_path, scale, window) -> PathGrid:
    if isinstance(env_or_path, PathGrid):
        if env_or_path.window + 1e-12 < window:
            raise ValueError("provided grid is narrower than the requested window")
        return env_or_path.sliced(window)
    return PathGrid.from_environment(env_or_path, scale, window)


def adaptive_window(
    env_or_path, scale: float, variant: str, beta_hat: float, h_hat: float | None = None,
    window_cap: float = DEFAULT_WINDOW_CAP,
) -> tuple[float, bool]:
    """(window, unconverged) chosen by the doubling rule for solve_*."""
    res = solve_adaptive(env_or_path, scale, variant, beta_hat, h_hat, window_cap=window_cap)
    return res.window, res.unconverged


def quasi_maximizers(
    path: PathGrid,
    variant: str,
    beta_hat: float,
    eps: float,
    h_hat: float | None = None,
    one_sided: bool = False,
) -> list[tuple[float, float]]:
    """Lattice pairs whose eps-box attains the global supremum within TIE_TOL.

    Discrete version of the quasi-maximizer set: (u, v) belongs iff the
    functional restricted to {|s-u| <= eps, |t-v| <= eps} reaches the global
    maximum.
    """
    k = len(path.plus) - 1
    i_max = 0 if one_sided else k
    Y = _functional_matrix(path, variant, beta_hat, h_hat, i_max, k)
    value = float(np.max(Y[np.isfinite(Y)]))
    r = int(math.floor(eps * path.scale))
    local = maximum_filter(np.where(np.isfinite(Y), Y, -np.inf), size=2 * r + 1, mode="constant", cval=-np.inf)
    hits = np.argwhere(local >= value - TIE_TOL)
    s = path.scale
    return [(-float(i) / s, float(j) / s) for i, j in hits]


@dataclass(frozen=True)
class ClosedFormLimit:
    """Deterministic limit of the normalized log partition function."""

    value: float
    width: float | None = None
    velocity: float | None = None
    maximizers: tuple[tuple[float, float], ...] = ()


def closed_form_limit(region, beta_hat: float, h_hat: float) -> ClosedFormLimit:
    """Closed-form limit constants for the deterministic regions.

    Regions with a random limit (R2, R3, R4) raise and point to solve_*.
    """
    name = region.region if isinstance(region, rates.RegionLabel) else str(region)
    if name in ("R2", "R3", "R4"):
        raise ValueError(
            f"region {name} has a random limit; use solve_{name} on a coupled path grid"
        )
    ah = abs(h_hat)
    if name == "R1":
        return ClosedFormLimit(value=0.0)
    if name == "R5":
        if h_hat <= 0:
            raise ValueError("folded-phase constant needs h_hat > 0")
        width = math.pi ** (2.0 / 3.0) * h_hat ** (-1.0 / 3.0)
        return ClosedFormLimit(value=-1.5 * (h_hat * math.pi) ** (2.0 / 3.0), width=width)
    if name == "R6":
        return ClosedFormLimit(value=-2.0 * h_hat)
    if name == "R4t":
        return ClosedFormLimit(
            value=0.5 * h_hat * h_hat, maximizers=((0.0, ah), (-ah, 0.0))
        )
    if name == rates.BOUNDARY_R4T_R5T:
        v = math.tanh(ah)
        # sup_{u<=0<=v} { |h|(v-u) - kappa(|u|^|v| + v-u) } = log cosh h,
        # attained one-sidedly at speed tanh |h|
        return ClosedFormLimit(
            value=math.log(math.cosh(ah)), velocity=v,
            maximizers=((0.0, v), (-v, 0.0)),
        )
    if name == "R5t":
        return ClosedFormLimit(value=ah, velocity=1.0, maximizers=((0.0, 1.0), (-1.0, 0.0)))
    raise ValueError(f"no closed-form limit for region {name!r}")
