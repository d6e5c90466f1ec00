"""Closed-form rate functions and the phase-diagram classifier.

The (gamma, zeta) plane splits into regions according to which of the three
effects dominates -- disorder energy N^{xi/alpha - gamma}, range reward or
penalty N^{xi - zeta}, and the walk's entropic cost N^{|2 xi - 1|}.  The
inequality systems differ across tail-index ranges alpha in (1,2], (1/2,1],
(0,1/2] and with the sign of the field amplitude h_hat; each case is encoded
as its own table for auditability.

Boundary handling: comparisons are done in floating point and re-evaluated in
exact rational arithmetic whenever the float result is within `tol` of a tie,
so inputs given as exact rationals classify exactly.  Points on a boundary
line get a boundary label naming the adjacent regions; the single proven
boundary (zeta = 0, h_hat < 0, gamma > -(alpha-1)/alpha) carries its own
label and predictions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

__all__ = [
    "RegionLabel",
    "kappa",
    "rate_I",
    "rate_Ibar",
    "entropic_cost_exponent",
    "classify_region",
    "BOUNDARY_R4T_R5T",
]

INF = float("inf")
BOUNDARY_R4T_R5T = "R4t-R5t"


def kappa(t: float) -> float:
    """Linear-scale rate of the walk's maximum:
    kappa(t) = (1+t)/2 log(1+t) + (1-t)/2 log(1-t) on [0, 1], +inf beyond."""
    if t < 0:
        raise ValueError("kappa is defined for t >= 0")
    if t > 1.0:
        return INF
    if t == 1.0:
        return math.log(2.0)  # continuity: 0 log 0 = 0
    return 0.5 * (1.0 + t) * math.log1p(t) + 0.5 * (1.0 - t) * math.log1p(-t)


def rate_I(u: float, v: float) -> float:
    """Stretching rate: I(u, v) = (|u| ^ |v| + v - u)^2 / 2 for u <= 0 <= v."""
    if u > 0 or v < 0:
        raise ValueError(f"rate_I needs u <= 0 <= v, got ({u}, {v})")
    return 0.5 * (min(-u, v) + v - u) ** 2


def rate_Ibar(u: float, v: float) -> float:
    """Folding rate: pi^2 / (2 (v - u)^2) for u <= 0 <= v; +inf at v = u."""
    if u > 0 or v < 0:
        raise ValueError(f"rate_Ibar needs u <= 0 <= v, got ({u}, {v})")
    if v - u == 0.0:
        return INF
    return math.pi**2 / (2.0 * (v - u) ** 2)


def entropic_cost_exponent(xi: float) -> float:
    """Exponent of N in -log P(end-to-end fluctuations ~ N^xi): |2 xi - 1|."""
    if not 0.0 <= xi <= 1.0:
        raise ValueError("xi must lie in [0, 1]")
    return abs(2.0 * xi - 1.0)


@dataclass(frozen=True)
class RegionLabel:
    """Phase-diagram cell with its predicted exponents and limit object.

    xi is the end-to-end exponent, logz_exponent the theta with
    log Z ~ N^theta (0 where Z -> 1); limit_descriptor names the limiting
    object of the normalized log partition function.  Boundary points carry
    region=None-like 'boundary' with the adjacent region ids.
    """

    region: str
    xi: float | None
    logz_exponent: float | None
    limit_descriptor: str
    adjacent: tuple[str, ...] = ()

    @property
    def is_boundary(self) -> bool:
        return self.region in ("boundary", BOUNDARY_R4T_R5T)


class _Cmp:
    """Three-way comparison with exact rational re-evaluation near ties."""

    def __init__(self, tol: float = 1e-12):
        self.tol = tol

    def lt(self, x, y) -> bool:
        return self._cmp(x, y) < 0

    def gt(self, x, y) -> bool:
        return self._cmp(x, y) > 0

    def eq(self, x, y) -> bool:
        return self._cmp(x, y) == 0

    def _cmp(self, x, y) -> int:
        if x == INF:
            return 0 if y == INF else 1
        if y == INF:
            return -1
        if x == -INF:
            return 0 if y == -INF else -1
        if y == -INF:
            return 1
        fx, fy = float(x), float(y)
        scale = max(1.0, abs(fx), abs(fy))
        if abs(fx - fy) > self.tol * scale:
            return -1 if fx < fy else 1
        ex = x if isinstance(x, Fraction) else Fraction(x)
        ey = y if isinstance(y, Fraction) else Fraction(y)
        return -1 if ex < ey else (1 if ex > ey else 0)


def _lines(alpha: Fraction, zeta) -> dict:
    """Boundary-line ordinates as functions of zeta (exact when zeta exact)."""
    one = Fraction(1)
    return {
        "blue": ((2 * alpha - 1) * zeta - (alpha - 1)) / alpha if zeta != INF else INF,
        "brown": ((2 * alpha + 1) * zeta - (alpha - 1)) / (3 * alpha) if zeta != INF else INF,
        "orange": zeta - (alpha - 1) / alpha if zeta != INF else INF,
        "r1": one / (2 * alpha),
        "r3": (1 - alpha) / alpha,
        "half": Fraction(1, 2),
    }


def _region_tables(alpha: Fraction, h_sign: int):
    """Region -> list of (name, op, line-key or constant) strict constraints.

    Constraints are pairs (lhs, rhs) meaning 'gamma OP value' or
    'zeta OP value' depending on the axis tag.
    """
    lo, mid = alpha <= Fraction(1, 2), Fraction(1, 2) < alpha < 1

    def G(op, key):  # constraint on gamma
        return ("g", op, key)

    def Z(op, val):  # constraint on zeta
        return ("z", op, val)

    r1_threshold = "r3" if lo else "r1"
    tables = {
        "R1": [G(">", r1_threshold), Z(">", Fraction(1, 2))],
        "R3": [G("<", "r3"), G("<", "orange")],
    }
    if not lo:
        tables["R2"] = [G(">", "r3"), G("<", "blue"), G("<", "r1")]
    if h_sign >= 0:
        if alpha > 1:
            tables["R4"] = [
                G(">", "blue"), G(">", "orange"), G("<", "brown"), G("<", "zeta"),
            ]
            tables["R5"] = [G(">", "brown"), Z(">", -1), Z("<", Fraction(1, 2))]
            tables["R6"] = [G(">", "zeta"), Z("<", -1)]
        else:
            r5_low = "min_blue_orange" if mid else "min_r3_orange"
            tables["R5"] = [G(">", r5_low), Z(">", -1), Z("<", Fraction(1, 2))]
            tables["R6"] = [G(">", "orange"), Z("<", 1 / alpha - 2)]
    else:
        if not lo:
            tables["R4t"] = [G(">", "max_blue_r3"), Z(">", 0), Z("<", Fraction(1, 2))]
        else:
            tables["R4t"] = [G(">", "r3"), Z(">", 0), Z("<", Fraction(1, 2))]
        tables["R5t"] = [G(">", "orange"), Z("<", 0)]
    return tables


def _line_value(key, lines, zeta):
    if key == "zeta":
        return zeta
    if key == "min_blue_orange":
        return min(lines["blue"], lines["orange"])
    if key == "min_r3_orange":
        return min(lines["r3"], lines["orange"]) if zeta != INF else lines["r3"]
    if key == "max_blue_r3":
        return max(lines["blue"], lines["r3"])
    if isinstance(key, str):
        return lines[key]
    return key  # constant


def _xi_theta(region: str, alpha: float, gamma, zeta) -> tuple[float, float, str]:
    g = float(gamma) if gamma != INF else INF
    z = float(zeta) if zeta != INF else INF
    a = float(alpha)
    if region == "R1":
        return 0.5, 0.0, "unity"
    if region == "R2":
        xi = a * (1.0 - g) / (2.0 * a - 1.0)
        return xi, xi / a - g, "W_R2"
    if region == "R3":
        return 1.0, 1.0 / a - g, "W_R3"
    if region == "R4":
        xi = a * (z - g) / (a - 1.0)
        return xi, xi - z, "W_R4"
    if region == "R5":
        xi = (1.0 + z) / 3.0
        return xi, xi - z, "R5_constant"
    if region == "R6":
        return 0.0, -z, "R6_constant"
    if region == "R4t":
        xi = 1.0 - z
        return xi, xi - z, "R4t_constant"
    if region == "R5t":
        return 1.0, 1.0 - z, "R5t_constant"
    raise ValueError(f"unknown region {region}")


def classify_region(
    alpha: float,
    gamma,
    zeta,
    h_sign: int,
    beta_positive: bool = True,
    tol: float = 1e-12,
) -> RegionLabel:
    """Identify the phase-diagram cell of (alpha, gamma, zeta, sign of h_hat).

    gamma=None/+inf means no disorder term (equivalently beta_hat = 0);
    zeta=None/+inf means no range term (h_hat = 0 forces h_sign = 0).
    Points on boundary lines return a boundary label with the adjacent region
    ids; the proven zeta=0, h<0 boundary returns its own predictive label.
    """
    if alpha == 1.0 or not (0.0 < alpha <= 2.0):
        raise ValueError(f"tail index must lie in (0,1)u(1,2], got alpha={alpha}")
    if h_sign not in (-1, 0, 1):
        raise ValueError("h_sign must be -1, 0 or +1")
    gamma_eff = INF if (gamma is None or gamma == INF or not beta_positive) else gamma
    zeta_eff = INF if (zeta is None or zeta == INF) else zeta
    if zeta_eff == INF:
        h_sign = 0
    cmp = _Cmp(tol)
    a_frac = Fraction(alpha)
    g = Fraction(gamma_eff) if gamma_eff != INF else INF
    z = Fraction(zeta_eff) if zeta_eff != INF else INF
    lines = _lines(a_frac, z)
    tables = _region_tables(a_frac, h_sign)

    # proven boundary: zeta = 0, h < 0, gamma > -(alpha-1)/alpha
    if h_sign < 0 and z != INF and cmp.eq(z, 0) and g != INF and cmp.gt(g, lines["r3"]):
        return RegionLabel(
            region=BOUNDARY_R4T_R5T, xi=1.0, logz_exponent=1.0,
            limit_descriptor="boundary_constant", adjacent=("R4t", "R5t"),
        )

    def satisfied(constraints, strict: bool) -> bool:
        for axis, op, key in constraints:
            lhs = g if axis == "g" else z
            rhs = _line_value(key, lines, z) if axis == "g" else key
            if lhs == INF and op == ">":
                if rhs == INF:
                    return False
                continue
            if lhs == INF and op == "<":
                return False
            c = cmp._cmp(lhs, rhs)
            if op == ">" and (c < 0 or (strict and c == 0)):
                return False
            if op == "<" and (c > 0 or (strict and c == 0)):
                return False
        return True

    strict_hits = [r for r, cons in tables.items() if satisfied(cons, strict=True)]
    if len(strict_hits) == 1:
        region = strict_hits[0]
        xi, theta, desc = _xi_theta(region, alpha, gamma_eff, zeta_eff)
        return RegionLabel(region=region, xi=xi, logz_exponent=theta, limit_descriptor=desc)
    if len(strict_hits) > 1:  # would indicate a table bug; surface loudly
        raise RuntimeError(f"phase tables overlap at {alpha, gamma, zeta, h_sign}: {strict_hits}")
    adjacent = tuple(sorted(r for r, cons in tables.items() if satisfied(cons, strict=False)))
    return RegionLabel(
        region="boundary", xi=None, logz_exponent=None,
        limit_descriptor="unproven_boundary", adjacent=adjacent,
    )
