"""Dense and matrix-free numerical kernels.

Dense factorizations and eigensolvers are thin, validated wrappers around
LAPACK (through numpy/scipy). The Krylov methods, Lanczos with full
reorthogonalization and preconditioned MINRES, are implemented here because
their stopping rules and recorded diagnostics are part of the experiments.

Operators may be given as numpy arrays, scipy sparse matrices or
``scipy.sparse.linalg.LinearOperator`` instances.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack
from scipy.sparse.linalg import LinearOperator, aslinearoperator

from .config import DEFAULT, Tolerances
from .errors import DimensionCap, NoConvergence, NotPositiveDefinite, ShapeMismatch

__all__ = [
    "CholeskyFactor",
    "LDLFactor",
    "LanczosResult",
    "SolveReport",
    "as_operator",
    "cholesky",
    "extremal_eigs",
    "gen_eig_extremes",
    "lanczos",
    "minres",
    "spectrum_edges",
    "sym_eig",
    "symmetric_part",
    "tridiag_eig",
]


def as_operator(a) -> LinearOperator:
    if isinstance(a, LinearOperator):
        return a
    return aslinearoperator(a)


def symmetric_part(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    return 0.5 * (m + m.T)


def _check_square(m: np.ndarray, name: str = "matrix") -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise ShapeMismatch(f"{name} must be a non-empty square matrix, got shape {m.shape}")


# --------------------------------------------------------------------------
# Cholesky
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class CholeskyFactor:
    """Lower-triangular factor ``L`` with ``L @ L.T`` equal to the input."""

    L: np.ndarray

    @property
    def n(self) -> int:
        return self.L.shape[0]

    def solve(self, b):
        """Solve ``(L L^T) x = b``."""
        y = sla.solve_triangular(self.L, b, lower=True, check_finite=False)
        return sla.solve_triangular(self.L, y, lower=True, trans="T", check_finite=False)

    def solve_lower(self, w):
        """Apply ``L^{-1}``."""
        return sla.solve_triangular(self.L, w, lower=True, check_finite=False)

    def solve_upper(self, w):
        """Apply ``L^{-T}``."""
        return sla.solve_triangular(self.L, w, lower=True, trans="T", check_finite=False)

    def congruence(self, a) -> np.ndarray:
        """Return ``L^{-1} a L^{-T}``, symmetrized."""
        c = self.solve_lower(np.asarray(a, dtype=float))
        c = self.solve_lower(c.T)
        return symmetric_part(c)

    def reconstruct(self) -> np.ndarray:
        return self.L @ self.L.T


def cholesky(m, tol: Tolerances = DEFAULT) -> CholeskyFactor:
    """Cholesky factorization with an explicit pivot floor.

    Raises
    ------
    NotPositiveDefinite
        If a pivot falls below ``tol.pivot_rel`` times the largest diagonal
        entry of ``m`` (or LAPACK meets a non-positive pivot).
    """
    m = np.asarray(m, dtype=float)
    _check_square(m)
    dmax = float(np.max(np.abs(np.diag(m))))
    try:
        L = sla.cholesky(m, lower=True, check_finite=True)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(f"matrix is not positive definite ({exc})") from None
    pivots = np.diag(L) ** 2
    floor = tol.pivot_rel * dmax
    if dmax == 0.0 or np.min(pivots) <= floor:
        raise NotPositiveDefinite(
            f"Cholesky pivot {np.min(pivots):.3e} below floor {floor:.3e}"
        )
    return CholeskyFactor(L)


# --------------------------------------------------------------------------
# Dense eigensolvers
# --------------------------------------------------------------------------


class LDLFactor:
    """Bunch-Kaufman ``P L D L^T P^T`` factorization of a dense symmetric matrix."""

    def __init__(self, m, overwrite: bool = False):
        m = np.asarray(m, dtype=float)
        _check_square(m)
        n = m.shape[0]
        self.ldu, self.ipiv, info = lapack.dsytrf(m, lower=1, lwork=max(64 * n, 1), overwrite_a=overwrite)
        if info < 0:
            raise ValueError(f"dsytrf: illegal argument {-info}")
        self.singular = info > 0

    @property
    def n(self) -> int:
        return self.ldu.shape[0]

    def inertia(self) -> tuple[int, int, int]:
        """``(n_positive, n_negative, n_zero)`` read off the block diagonal ``D``."""
        d, ipiv = self.ldu, self.ipiv
        pos = neg = zero = 0
        k = 0
        while k < self.n:
            if ipiv[k] > 0:
                v = d[k, k]
                pos += v > 0
                neg += v < 0
                zero += v == 0
                k += 1
            else:
                w = np.linalg.eigvalsh(np.array([[d[k, k], d[k + 1, k]], [d[k + 1, k], d[k + 1, k + 1]]]))
                pos += int(np.sum(w > 0))
                neg += int(np.sum(w < 0))
                zero += int(np.sum(w == 0))
                k += 2
        return int(pos), int(neg), int(zero)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        x, info = lapack.dsytrs(self.ldu, self.ipiv, b.reshape(self.n, -1), lower=1)
        if info != 0:
            raise ValueError(f"dsytrs failed with info={info}")
        return x.reshape(b.shape)


def sym_eig(m, vectors: bool = True, tol: Tolerances = DEFAULT):
    """Eigen-decomposition of a symmetric matrix, eigenvalues ascending.

    Returns ``(w, V)`` when ``vectors`` is true, otherwise ``w`` only.
    Only the lower triangle of ``m`` is referenced.
    """
    m = np.asarray(m, dtype=float)
    _check_square(m)
    if m.shape[0] > tol.dense_cap:
        raise DimensionCap(
            f"dimension {m.shape[0]} exceeds dense cap {tol.dense_cap}; use extremal_eigs"
        )
    if vectors:
        return np.linalg.eigh(m)
    return np.linalg.eigvalsh(m)


def tridiag_eig(diag, offdiag) -> np.ndarray:
    """All eigenvalues (ascending) of a symmetric tridiagonal matrix."""
    d = np.asarray(diag, dtype=float).ravel()
    e = np.asarray(offdiag, dtype=float).ravel()
    if d.size < 1 or e.size != d.size - 1:
        raise ShapeMismatch(
            f"offdiag must have length len(diag) - 1, got {e.size} and {d.size}"
        )
    if d.size == 1:
        return d.copy()
    # LAPACK stebz: bisection on Sturm counts.
    return sla.eigvalsh_tridiagonal(d, e, lapack_driver="stebz")


def gen_eig_extremes(a, s, tol: Tolerances = DEFAULT) -> tuple[float, float]:
    """Extreme eigenvalues of the pencil ``a v = lambda s v`` with ``s`` SPD.

    Computed as the spectrum of ``L^{-1} a L^{-T}`` where ``s = L L^T``.
    """
    a = _dense(a)
    factor = cholesky(_dense(s), tol)
    w = sym_eig(factor.congruence(a), vectors=False, tol=tol)
    return float(w[0]), float(w[-1])


def _dense(a) -> np.ndarray:
    if hasattr(a, "toarray"):
        return a.toarray()
    return np.asarray(a, dtype=float)


# --------------------------------------------------------------------------
# Lanczos
# --------------------------------------------------------------------------


@dataclass
class LanczosResult:
    """Ritz data of a Lanczos run.

    ``residuals[i]`` bounds the distance of ``ritz[i]`` to the spectrum.
    """

    ritz: np.ndarray
    residuals: np.ndarray
    steps: int
    exhausted: bool
    alpha: np.ndarray = field(repr=False)
    beta: np.ndarray = field(repr=False)

    def converged(self, atol: float) -> np.ndarray:
        return self.ritz[self.residuals <= atol]


def _ritz(alpha, beta, k):
    T = np.diag(alpha[:k])
    if k > 1:
        T += np.diag(beta[: k - 1], 1) + np.diag(beta[: k - 1], -1)
    theta, S = np.linalg.eigh(T)
    return theta, np.abs(beta[k - 1] * S[-1, :])


def lanczos(
    a,
    max_dim: int | None = None,
    inner=None,
    v0=None,
    seed: int = 0,
    stop=None,
    check_every: int = 10,
) -> LanczosResult:
    """Lanczos with full reorthogonalization.

    Without ``inner`` the Ritz values approximate the spectrum of the
    symmetric operator ``a``. With an SPD ``inner`` = H, the recurrence runs in
    the H inner product and approximates the spectrum of ``a @ H`` (equal to
    that of ``H @ a``); this is how a preconditioned operator ``P^{-1} A`` is
    handled when only ``P^{-1}`` can be applied.

    ``stop(result)`` is evaluated every ``check_every`` steps; returning true
    ends the iteration.
    """
    A = as_operator(a)
    n = A.shape[0]
    H = as_operator(inner) if inner is not None else None
    k_max = min(n, max_dim if max_dim is not None else DEFAULT.lanczos_max_dim)

    if v0 is None:
        v0 = np.random.default_rng(seed).standard_normal(n)
    v0 = np.asarray(v0, dtype=float)

    V = np.zeros((k_max, n))
    HV = np.zeros((k_max, n)) if H is not None else V
    alpha = np.zeros(k_max)
    beta = np.zeros(k_max)

    hv = H.matvec(v0) if H is not None else v0
    nrm = np.sqrt(float(v0 @ hv))
    V[0] = v0 / nrm
    if H is not None:
        HV[0] = hv / nrm

    exhausted = False
    k = 0
    result = None
    for j in range(k_max):
        w = A.matvec(HV[j])
        alpha[j] = float(HV[j] @ w)
        # two passes of classical Gram-Schmidt against every previous vector
        for _ in range(2):
            w = w - V[: j + 1].T @ (HV[: j + 1] @ w)
        hw = H.matvec(w) if H is not None else w
        b = np.sqrt(max(float(w @ hw), 0.0))
        beta[j] = b
        k = j + 1
        scale = max(np.max(np.abs(alpha[:k])), np.max(beta[:k]), 1.0)
        if b <= 1e-13 * scale:
            exhausted = True
            beta[j] = 0.0
            break
        if j + 1 < k_max:
            V[j + 1] = w / b
            if H is not None:
                HV[j + 1] = hw / b
        if stop is not None and (k % check_every == 0):
            theta, res = _ritz(alpha, beta, k)
            result = LanczosResult(theta, res, k, False, alpha[:k], beta[:k])
            if stop(result):
                return result

    theta, res = _ritz(alpha, beta, k)
    if exhausted:
        res = np.zeros_like(res)
    return LanczosResult(theta, res, k, exhausted, alpha[:k].copy(), beta[:k].copy())


def extremal_eigs(
    op,
    which: str = "both",
    tol: Tolerances = DEFAULT,
    max_dim: int | None = None,
    inner=None,
    seed: int = 0,
):
    """Smallest and/or largest eigenvalue of a self-adjoint operator.

    ``which`` is ``"smallest"``, ``"largest"`` or ``"both"``. Dense inputs no
    larger than the dense cap are solved directly. Otherwise Lanczos runs until
    the requested Ritz values have residual below ``tol.lanczos_rel`` times
    their magnitude.

    Raises
    ------
    NoConvergence
        When the Krylov budget is exhausted; ``exc.estimate`` holds the best
        Ritz values.
    """
    if which not in ("smallest", "largest", "both"):
        raise ValueError(f"unknown selector {which!r}")

    def pick(lo, hi):
        return {"smallest": lo, "largest": hi, "both": (lo, hi)}[which]

    if inner is None and isinstance(op, np.ndarray) and op.shape[0] <= tol.dense_cap:
        w = sym_eig(op, vectors=False, tol=tol)
        return pick(float(w[0]), float(w[-1]))

    idx = {"smallest": [0], "largest": [-1], "both": [0, -1]}[which]

    def done(r: LanczosResult) -> bool:
        scale = max(np.max(np.abs(r.ritz)), np.finfo(float).tiny)
        return all(r.residuals[i] <= tol.lanczos_rel * max(abs(r.ritz[i]), 1e-3 * scale) for i in idx)

    budget = max_dim if max_dim is not None else min(as_operator(op).shape[0], tol.lanczos_max_dim)
    r = lanczos(op, max_dim=budget, inner=inner, seed=seed, stop=done, check_every=5)
    lo, hi = float(r.ritz[0]), float(r.ritz[-1])
    if not (r.exhausted or done(r)):
        raise NoConvergence(
            f"Lanczos did not converge within {r.steps} steps",
            estimate=pick(lo, hi),
            residual=pick(float(r.residuals[0]), float(r.residuals[-1])),
        )
    return pick(lo, hi)


def spectrum_edges(
    op,
    inner=None,
    rel_tol: float = 1e-8,
    max_dim: int = 600,
    seed: int = 0,
) -> tuple[tuple[float, float, float, float], LanczosResult]:
    """Extremal negative and positive eigenvalues of an indefinite operator.

    Returns ``(neg_lo, neg_hi, pos_lo, pos_hi)`` built from Ritz values whose
    residual is below ``rel_tol`` times the spectral radius, so every reported
    value lies within that distance of a true eigenvalue. The run stops once
    the four edges are all converged.
    """

    def edges(r: LanczosResult):
        radius = max(np.max(np.abs(r.ritz)), np.finfo(float).tiny)
        good = r.ritz[r.residuals <= rel_tol * radius]
        neg, pos = good[good < 0], good[good > 0]
        # an edge counts only if no unconverged Ritz value lies beyond it
        bad = r.ritz[r.residuals > rel_tol * radius]
        if neg.size == 0 or pos.size == 0:
            return None
        e = (neg.min(), neg.max(), pos.min(), pos.max())
        if np.any(bad < e[0]) or np.any(bad > e[3]):
            return None
        if np.any((bad > e[1]) & (bad < e[2])):
            return None
        return tuple(float(x) for x in e)

    r = lanczos(op, max_dim=max_dim, inner=inner, seed=seed, stop=lambda r: edges(r) is not None)
    e = edges(r)
    if e is None:
        radius = np.max(np.abs(r.ritz))
        good = r.ritz[r.residuals <= rel_tol * radius]
        neg, pos = good[good < 0], good[good > 0]
        est = (
            float(neg.min()) if neg.size else np.nan,
            float(neg.max()) if neg.size else np.nan,
            float(pos.min()) if pos.size else np.nan,
            float(pos.max()) if pos.size else np.nan,
        )
        raise NoConvergence(f"spectrum edges not resolved in {r.steps} steps", estimate=est)
    return e, r


# --------------------------------------------------------------------------
# MINRES
# --------------------------------------------------------------------------


@dataclass
class SolveReport:
    """Outcome of a MINRES solve.

    ``relative_residuals`` holds the monitored relative residual per
    iteration (entry 0 is 1); ``preconditioned_residuals`` the recurrence
    estimate of the residual in the ``P^{-1}`` norm, relative to its start.
    ``true_relative_residual`` is ``||b - A x|| / ||b||`` at exit.
    """

    solution: np.ndarray
    iterations: int
    relative_residuals: np.ndarray
    converged: bool
    true_relative_residual: float = np.nan
    preconditioned_residuals: np.ndarray | None = None
    stopping_norm: str = "true"


def minres(
    a,
    b,
    precond=None,
    rel_tol: float = DEFAULT.minres_rel,
    max_iter: int = 1000,
    x0=None,
    callback=None,
    stopping_norm: str = "true",
) -> SolveReport:
    """Preconditioned MINRES (Paige and Saunders).

    ``precond`` applies the inverse of an SPD preconditioner. With
    ``stopping_norm="true"`` the iteration stops once ``||b - A x|| / ||b||``
    drops below ``rel_tol`` (one extra product with ``A`` per step); with
    ``"preconditioned"`` it stops on the cheap recurrence estimate of the
    residual in the ``P^{-1}`` norm relative to its initial value. On hitting ``max_iter`` the last
    iterate is returned with ``converged=False``. ``callback(x)`` is called
    after every iteration.
    """
    A = as_operator(a)
    n = A.shape[0]
    b = np.asarray(b, dtype=float).ravel()
    if b.size != n:
        raise ShapeMismatch(f"rhs has length {b.size}, operator has size {n}")
    if stopping_norm not in ("true", "preconditioned"):
        raise ValueError(f"unknown stopping norm {stopping_norm!r}")
    M = as_operator(precond) if precond is not None else None
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)

    r1 = b - A.matvec(x) if x0 is not None else b.copy()
    y = M.matvec(r1) if M is not None else r1.copy()
    beta1 = float(r1 @ y)
    if beta1 < 0:
        raise NotPositiveDefinite("preconditioner is not positive definite")
    beta1 = np.sqrt(beta1)
    bn = np.linalg.norm(b)
    history, phist = [1.0], [1.0]
    if beta1 == 0.0:
        return SolveReport(x, 0, np.array(history), True, 0.0, np.array(phist), stopping_norm)

    eps = np.finfo(float).eps
    oldb, beta, dbar, epsln = 0.0, beta1, 0.0, 0.0
    phibar, cs, sn = beta1, -1.0, 0.0
    w = np.zeros(n)
    w2 = np.zeros(n)
    r2 = r1.copy()
    converged = False
    itn = 0
    while itn < max_iter:
        itn += 1
        v = y / beta
        y = A.matvec(v)
        if itn >= 2:
            y = y - (beta / oldb) * r1
        alfa = float(v @ y)
        y = y - (alfa / beta) * r2
        r1, r2 = r2, y
        y = M.matvec(r2) if M is not None else r2.copy()
        oldb = beta
        beta2 = float(r2 @ y)
        if beta2 < 0:
            raise NotPositiveDefinite("preconditioner is not positive definite")
        beta = np.sqrt(beta2)

        oldeps = epsln
        delta = cs * dbar + sn * alfa
        gbar = sn * dbar - cs * alfa
        epsln = sn * beta
        dbar = -cs * beta
        gamma = max(np.hypot(gbar, beta), eps)
        cs, sn = gbar / gamma, beta / gamma
        phi = cs * phibar
        phibar = sn * phibar

        w1, w2 = w2, w
        w = (v - oldeps * w1 - delta * w2) / gamma
        x = x + phi * w
        if callback is not None:
            callback(x)

        phist.append(phibar / beta1)
        if stopping_norm == "true":
            history.append(float(np.linalg.norm(b - A.matvec(x)) / bn))
        else:
            history.append(phist[-1])
        if history[-1] <= rel_tol:
            converged = True
            break
        if beta == 0.0:
            converged = True
            break

    true_rel = float(np.linalg.norm(b - A.matvec(x)) / bn)
    return SolveReport(x, itn, np.array(history), converged, true_rel, np.array(phist), stopping_norm)
