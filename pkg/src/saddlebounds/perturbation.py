"""Eigenvalue inclusion for inexact Schur-complement preconditioners, any N.

With approximations ``Shat_k`` of the complements ``S~_k`` that account for
earlier approximations, the spectrum of ``Phat_D^{-1} A`` lies in
``I_{N+1} + [sigma_minus, sigma_plus]`` where the shift range collects the
eigenvalues of ``(-1)^{k+1} (I - Shat_k^{-1} S~_k)`` over all k. The result
requires the backward-perturbed matrix (whose exact complements are the
``Shat_k``) to satisfy the usual block assumptions; see
:func:`check_hypotheses`.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import DEFAULT, Tolerances
from .linalg import cholesky, gen_eig_extremes, sym_eig
from .errors import NotPositiveDefinite
from .polynomials import BoundsInterval, interval_I
from .system import (
    BlockTridiagonalSystem,
    SchurChain,
    perturbed_complements,
    perturbed_matrix,
)

__all__ = [
    "PerturbationRange",
    "check_hypotheses",
    "minkowski_bounds",
    "perturbation_report",
    "sigma_range",
]


@dataclass(frozen=True)
class PerturbationRange:
    sigma_minus: float
    sigma_plus: float

    def __post_init__(self):
        if self.sigma_minus > self.sigma_plus:
            raise ValueError("sigma_minus must not exceed sigma_plus")


def sigma_range(
    approx: SchurChain, system: BlockTridiagonalSystem, tol: Tolerances = DEFAULT
) -> PerturbationRange:
    """Extreme eigenvalues of ``(-1)^{k+1} (I - Shat_k^{-1} S~_k)`` over all k."""
    tilde = perturbed_complements(system, approx)
    lows, highs = [], []
    for k in range(system.N + 1):
        lo, hi = gen_eig_extremes(tilde[k], approx.complements[k], tol)
        if k % 2 == 0:
            lows.append(lo - 1.0)
            highs.append(hi - 1.0)
        else:
            lows.append(1.0 - hi)
            highs.append(1.0 - lo)
    return PerturbationRange(float(min(lows)), float(max(highs)))


def minkowski_bounds(base: BoundsInterval, rng: PerturbationRange) -> BoundsInterval:
    """Shift both intervals: lower ends by ``sigma_minus``, upper ends by ``sigma_plus``.

    No clamping at zero; check ``result.contains_zero`` to see whether the
    union still separates the spectrum from the origin.
    """
    return BoundsInterval(
        base.neg_lo + rng.sigma_minus,
        base.neg_hi + rng.sigma_plus,
        base.pos_lo + rng.sigma_minus,
        base.pos_hi + rng.sigma_plus,
    )


def check_hypotheses(
    system: BlockTridiagonalSystem, approx: SchurChain, tol: Tolerances = DEFAULT
) -> list[str]:
    """Problems with the perturbed blocks ``Ahat_k``; empty when the bound applies."""
    issues = []
    ahat = perturbed_matrix(system, approx)
    try:
        cholesky(ahat.diag_blocks[0], tol)
    except NotPositiveDefinite:
        issues.append("Ahat_0 is not positive definite")
    for k in range(1, system.N + 1):
        a = ahat.diag_blocks[k]
        w = sym_eig(a, vectors=False, tol=tol)
        scale = max(np.max(np.abs(w)), 1.0)
        if w[0] < -tol.psd_rel * scale:
            issues.append(f"Ahat_{k} is not positive semi-definite (min eigenvalue {w[0]:.3e})")
    return issues


def perturbation_report(
    system: BlockTridiagonalSystem, approx: SchurChain, tol: Tolerances = DEFAULT
) -> dict:
    """JSON-ready summary of the shifted interval for one instance."""
    base = interval_I(system.N + 1) if system.N >= 1 else None
    rng = sigma_range(approx, system, tol)
    shifted = minkowski_bounds(base, rng)
    return {
        "sigma_minus": rng.sigma_minus,
        "sigma_plus": rng.sigma_plus,
        "base_interval": base.to_dict(),
        "shifted_interval": shifted.to_dict(),
        "contains_zero": shifted.contains_zero,
        "hypothesis_issues": check_hypotheses(system, approx, tol),
    }
