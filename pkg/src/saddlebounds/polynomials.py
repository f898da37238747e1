"""The parametric polynomials ``U_k(x, gamma)`` and the exact-preconditioner bounds.

``U_0 = 1``, ``U_1 = x - 1`` and, for ``k >= 1``,
``U_{k+1} = ((-1)^{k+1} (1 - gamma_k) + x) U_k - gamma_k U_{k-1}``.
Eigenvalues of an exactly preconditioned system with ``N + 1`` blocks lie
among the zeros of ``U_1, ..., U_{N+1}`` for Rayleigh quotients
``gamma_k in (0, 1]``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import astuple, dataclass
from itertools import product

import numpy as np

from .errors import DegenerateGamma
from .linalg import tridiag_eig

__all__ = [
    "BoundsInterval",
    "binary_hull",
    "bounds_table",
    "bounds_table_csv",
    "eval_U",
    "interval_I",
    "u_tridiagonal",
    "zeros_P",
    "zeros_U_binary",
    "zeros_U_general",
    "zeros_V",
]


@dataclass(frozen=True)
class BoundsInterval:
    """One negative and one positive interval, ``[neg_lo, neg_hi] U [pos_lo, pos_hi]``."""

    neg_lo: float
    neg_hi: float
    pos_lo: float
    pos_hi: float

    def as_tuple(self) -> tuple[float, float, float, float]:
        return astuple(self)

    @property
    def is_proper(self) -> bool:
        return self.neg_lo <= self.neg_hi < 0 < self.pos_lo <= self.pos_hi

    @property
    def contains_zero(self) -> bool:
        return self.neg_hi >= 0 or self.pos_lo <= 0

    def contains(self, x, atol: float = 0.0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        neg = (x >= self.neg_lo - atol) & (x <= self.neg_hi + atol)
        pos = (x >= self.pos_lo - atol) & (x <= self.pos_hi + atol)
        return neg | pos

    def to_dict(self) -> dict:
        return {"neg_lo": self.neg_lo, "neg_hi": self.neg_hi, "pos_lo": self.pos_lo, "pos_hi": self.pos_hi}


def eval_U(x, gamma) -> np.ndarray | float:
    """Evaluate ``U_{k+1}(x, gamma)`` with ``k = len(gamma)`` by the recurrence."""
    gamma = np.asarray(gamma, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    u_prev = np.ones_like(x)
    u = x - 1.0
    for k, g in enumerate(gamma, start=1):
        u, u_prev = ((-1) ** (k + 1) * (1.0 - g) + x) * u - g * u_prev, u
    return float(u) if u.ndim == 0 else u


def zeros_P(k: int) -> np.ndarray:
    """Zeros of ``P_k = U_k(x, 1)``, descending: ``2 cos((2j - 1) pi / (2k + 1))``."""
    if k < 0:
        raise ValueError("k must be non-negative")
    j = np.arange(1, k + 1)
    return 2.0 * np.cos((2 * j - 1) * np.pi / (2 * k + 1))


def zeros_V(k: int) -> np.ndarray:
    """Zeros of ``V_k = U_k(x, [0, 1, ..., 1])``: ``1`` and the negated zeros of ``P_{k-1}``."""
    if k < 2:
        raise ValueError("V_k is defined here for k >= 2")
    return np.concatenate([[1.0], -zeros_P(k - 1)])


def u_tridiagonal(gamma) -> tuple[np.ndarray, np.ndarray]:
    """Diagonal and off-diagonal of the matrix ``M_{k+1}`` with ``U_{k+1}(x) = det(M_{k+1} + x I)``.

    ``c_1 = -1``, ``c_j = (-1)^j (1 - gamma_{j-1})`` and ``b_j = sqrt(gamma_{j-1})``.
    """
    gamma = np.asarray(gamma, dtype=float).ravel()
    j = np.arange(2, gamma.size + 2)
    diag = np.concatenate([[-1.0], (-1.0) ** j * (1.0 - gamma)])
    return diag, np.sqrt(gamma)


def zeros_U_general(gamma) -> np.ndarray:
    """Zeros of ``U_{k+1}(x, gamma)`` for ``gamma in (0, 1]^k``, ascending.

    Computed as the eigenvalues of ``-M_{k+1}``.

    Raises
    ------
    DegenerateGamma
        If some ``gamma_j <= 0``; use :func:`zeros_U_binary` or treat the
        limit separately.
    """
    gamma = np.asarray(gamma, dtype=float).ravel()
    if np.any(gamma <= 0):
        raise DegenerateGamma("all gamma_j must be positive; zero entries decouple the recurrence")
    diag, off = u_tridiagonal(gamma)
    return np.sort(-tridiag_eig(diag, off))


def zeros_U_binary(gamma) -> np.ndarray:
    """Zeros of ``U_{k+1}(x, gamma)`` for ``gamma in {0, 1}^k``, ascending.

    The vanishing entries split the recurrence into segments of length
    ``k_i``; a segment starting after index ``j`` contributes
    ``2 (-1)^j cos((2s - 1) pi / (2 k_i + 1))``, ``s = 1..k_i``.
    """
    gamma = np.asarray(gamma, dtype=float).ravel()
    if not np.all((gamma == 0) | (gamma == 1)):
        raise ValueError("gamma must be binary")
    k = gamma.size
    cuts = [0] + [j for j in range(1, k + 1) if gamma[j - 1] == 0] + [k + 1]
    out = []
    for start, stop in zip(cuts[:-1], cuts[1:]):
        out.append((-1.0) ** start * zeros_P(stop - start))
    return np.sort(np.concatenate(out))


def _split(z: np.ndarray) -> BoundsInterval:
    neg, pos = z[z < 0], z[z > 0]
    return BoundsInterval(float(neg.min()), float(neg.max()), float(pos.min()), float(pos.max()))


def interval_I(m: int) -> BoundsInterval:
    """Hull ``I_m`` of the zeros of ``U_m`` over all admissible gamma (``m >= 2``).

    Collects the zeros of ``P_j`` and of ``-P_{j-1}`` for ``j = 1..m`` and
    returns one negative and one positive interval.
    """
    if m < 2:
        raise ValueError("m must be at least 2")
    z = np.concatenate([np.concatenate([zeros_P(j), -zeros_P(j - 1)]) for j in range(1, m + 1)])
    return _split(z)


def binary_hull(m: int) -> BoundsInterval:
    """Hull of the zeros of ``U_m`` over all ``2^{m-1}`` binary gamma vectors."""
    z = np.concatenate([zeros_U_binary(g) for g in product((0.0, 1.0), repeat=m - 1)])
    return _split(z)


def bounds_table(max_k: int) -> list[tuple[int, BoundsInterval]]:
    """Rows ``(k, I_{k+1})`` for ``k = 1..max_k``."""
    if max_k < 1:
        raise ValueError("max_k must be at least 1")
    return [(k, interval_I(k + 1)) for k in range(1, max_k + 1)]


CSV_HEADER = ("k", "bound_l_neg", "bound_l_pos", "bound_u_neg", "bound_u_pos")


def bounds_table_csv(max_k: int, digits: int = 4) -> str:
    """CSV text of :func:`bounds_table`.

    Columns follow the printed table: ``bound_l_*`` are the ends of the
    negative interval, ``bound_u_*`` those of the positive one.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for k, b in bounds_table(max_k):
        w.writerow([k] + [f"{v:.{digits}f}" for v in b.as_tuple()])
    return buf.getvalue()

