"""Indicator-based bounds for double saddle-point systems (N = 2).

The bounds depend only on ten extremal indicators: the spectra of
``E_i = Shat_i^{-1/2} A_i Shat_i^{-1/2}`` (i = 0, 1, 2) and of
``R_i R_i^T`` with ``R_i = Shat_i^{-1/2} B_i Shat_{i-1}^{-1/2}`` (i = 1, 2).
Eigenvalues outside the 2x2 intervals are roots of the cubic

    pi(l) = (gE0 - l) gR2 + p(l) (l - gE2),
    p(l)  = l^2 - l (gE0 - gE1) - gR1 - gE0 gE1,

whose three real roots satisfy ``mu_a < lambda_- < 0 < mu_b < lambda_+ < mu_c``.
Each endpoint of the final union is one of these roots evaluated at a fixed
corner of the indicator box.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

from .config import DEFAULT, Tolerances
from .errors import DegenerateCubic, WrongBlockCount
from .linalg import gen_eig_extremes
from .polynomials import BoundsInterval
from .system import BlockTridiagonalSystem, SchurChain, _dense

__all__ = [
    "DspBounds",
    "IndicatorSet",
    "compute_indicators",
    "dsp_bounds",
    "lambda_pm",
    "p_poly",
    "pi_poly",
    "pi_roots",
    "saddle_intervals",
]


@dataclass(frozen=True)
class IndicatorSet:
    aE0: float
    bE0: float
    aE1: float
    bE1: float
    aE2: float
    bE2: float
    aR1: float
    bR1: float
    aR2: float
    bR2: float

    def __post_init__(self):
        for lo, hi in (("aE0", "bE0"), ("aE1", "bE1"), ("aE2", "bE2"), ("aR1", "bR1"), ("aR2", "bR2")):
            if getattr(self, lo) > getattr(self, hi):
                raise ValueError(f"{lo} exceeds {hi}")
        if self.aE0 <= 0 or self.aR1 <= 0 or self.aR2 <= 0:
            raise ValueError("aE0, aR1 and aR2 must be positive")
        if self.aE1 < 0 or self.aE2 < 0:
            raise ValueError("aE1 and aE2 must be non-negative")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))


def _clip_psd(lo: float, hi: float) -> float:
    # round-off below zero on semi-definite blocks
    if lo < 0 and lo >= -1e-12 * max(abs(hi), 1.0):
        return 0.0
    return lo


def compute_indicators(
    system: BlockTridiagonalSystem, approx: SchurChain, tol: Tolerances = DEFAULT
) -> IndicatorSet:
    """Indicators of a dense N = 2 system for the approximations in ``approx``."""
    if system.N != 2:
        raise WrongBlockCount(f"indicators need exactly three blocks, got N = {system.N}")
    S = approx.complements
    e = []
    for i in range(3):
        lo, hi = gen_eig_extremes(system.diag_blocks[i], S[i], tol)
        e.append((_clip_psd(lo, hi), hi))
    r = []
    for i in (1, 2):
        B = _dense(system.offdiag_blocks[i - 1])
        W = approx.factors[i - 1].solve_lower(B.T)
        r.append(gen_eig_extremes(W.T @ W, S[i], tol))
    return IndicatorSet(
        aE0=e[0][0], bE0=e[0][1], aE1=e[1][0], bE1=e[1][1], aE2=e[2][0], bE2=e[2][1],
        aR1=r[0][0], bR1=r[0][1], aR2=r[1][0], bR2=r[1][1],
    )


def p_poly(lam, gE0, gE1, gR1):
    return lam * lam - lam * (gE0 - gE1) - gR1 - gE0 * gE1


def pi_poly(lam, gE0, gE1, gE2, gR1, gR2):
    return (gE0 - lam) * gR2 + p_poly(lam, gE0, gE1, gR1) * (lam - gE2)


def _pi_prime(lam, gE0, gE1, gE2, gR1, gR2):
    p = p_poly(lam, gE0, gE1, gR1)
    dp = 2.0 * lam - (gE0 - gE1)
    return -gR2 + dp * (lam - gE2) + p


def lambda_pm(gE0: float, gE1: float, gR1: float) -> tuple[float, float]:
    """Roots ``lambda_- < 0 < lambda_+`` of ``p``."""
    c = 0.5 * (gE0 - gE1)
    r = math.sqrt(0.25 * (gE0 + gE1) ** 2 + gR1)
    lm, lp = c - r, c + r
    # the product of the roots is -(gR1 + gE0 gE1); recover the smaller one
    # from it to avoid cancellation
    prod = -(gR1 + gE0 * gE1)
    if c >= 0:
        lm = prod / lp
    else:
        lp = prod / lm
    return lm, lp


def saddle_intervals(ind: IndicatorSet) -> BoundsInterval:
    """Inclusion set for the two-block (N = 1) part of the indicators."""
    neg_lo = lambda_pm(ind.aE0, ind.bE1, ind.bR1)[0]
    neg_hi = lambda_pm(ind.bE0, ind.aE1, ind.aR1)[0]
    pos_hi = lambda_pm(ind.bE0, ind.aE1, ind.bR1)[1]
    return BoundsInterval(neg_lo, neg_hi, ind.aE0, pos_hi)


def _bisect(f, lo: float, hi: float, f_lo: float) -> float:
    """Root of ``f`` in ``[lo, hi]`` given opposite signs at the ends."""
    s_lo = math.copysign(1.0, f_lo)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = f(mid)
        if fm == 0.0:
            return mid
        if math.copysign(1.0, fm) == s_lo:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _polish(x: float, f, df, lo: float, hi: float) -> float:
    fx = f(x)
    for _ in range(3):
        d = df(x)
        if d == 0.0:
            break
        y = x - fx / d
        if not (lo <= y <= hi):
            break
        fy = f(y)
        if abs(fy) >= abs(fx):
            break
        x, fx = y, fy
    return x


def pi_roots(
    gE0: float, gE1: float, gE2: float, gR1: float, gR2: float, tol: Tolerances = DEFAULT
) -> tuple[float, float, float]:
    """The three real roots ``mu_a < mu_b < mu_c`` of the cubic.

    Found by bisection on the sign pattern ``pi(lambda_-) > 0``, ``pi(0) > 0``,
    ``pi(lambda_+) < 0``, with the outer brackets widened until the sign
    flips, followed by Newton polishing.

    Raises
    ------
    DegenerateCubic
        If ``gR2 <= tol.cubic_degenerate``; ``exc.roots`` then holds the
        limiting roots ``sorted(lambda_-, lambda_+, gE2)``.
    """
    lm, lp = lambda_pm(gE0, gE1, gR1)
    if gR2 <= tol.cubic_degenerate:
        raise DegenerateCubic(
            "gamma_R^(2) vanishes; the cubic factors as p(l) (l - gE2)",
            roots=tuple(sorted((lm, lp, float(gE2)))),
        )

    def f(x):
        return pi_poly(x, gE0, gE1, gE2, gR1, gR2)

    def df(x):
        return _pi_prime(x, gE0, gE1, gE2, gR1, gR2)

    width = 1.0
    lo = lm - width
    while f(lo) >= 0:
        width *= 2.0
        lo = lm - width
    mu_a = _polish(_bisect(f, lo, lm, f(lo)), f, df, lo, lm)

    mu_b = _polish(_bisect(f, 0.0, lp, f(0.0)), f, df, 0.0, lp)

    width = 1.0
    hi = lp + width
    while f(hi) <= 0:
        width *= 2.0
        hi = lp + width
    mu_c = _polish(_bisect(f, lp, hi, f(lp)), f, df, lp, hi)
    return mu_a, mu_b, mu_c


@dataclass(frozen=True)
class DspBounds:
    """Inclusion set ``[neg_lo, neg_hi] U [pos_lo, pos_hi]`` plus the values of
    the earlier three-block bounds they refine."""

    neg_lo: float
    neg_hi: float
    pos_lo: float
    pos_hi: float
    bradley_neg_hi: float
    bradley_pos_lo: float

    @property
    def interval(self) -> BoundsInterval:
        return BoundsInterval(self.neg_lo, self.neg_hi, self.pos_lo, self.pos_hi)

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.interval.as_tuple()

    def to_dict(self) -> dict:
        return asdict(self)


def dsp_bounds(ind: IndicatorSet, tol: Tolerances = DEFAULT) -> DspBounds:
    """Final inclusion intervals for ``Phat_D^{-1} A`` from the indicators."""
    neg_lo = pi_roots(ind.aE0, ind.bE1, ind.aE2, ind.bR1, ind.bR2, tol)[0]
    neg_hi = lambda_pm(ind.bE0, ind.aE1, ind.aR1)[0]
    pos_lo = min(ind.aE0, pi_roots(ind.aE0, ind.bE1, ind.aE2, ind.bR1, ind.aR2, tol)[1])
    pos_hi = pi_roots(ind.bE0, ind.aE1, ind.bE2, ind.bR1, ind.bR2, tol)[2]
    bradley_neg_hi = lambda_pm(ind.bE0, 0.0, ind.aR1)[0]
    bradley_pos_lo = min(ind.aE0, pi_roots(ind.aE0, ind.bE1, 0.0, ind.bR1, ind.aR2, tol)[1])
    return DspBounds(neg_lo, neg_hi, pos_lo, pos_hi, bradley_neg_hi, bradley_pos_lo)
