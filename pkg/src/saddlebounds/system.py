"""Block tridiagonal multiple saddle-point systems and their Schur chains.

A system with ``N + 1`` blocks has diagonal blocks ``(-1)^k A_k`` and
sub-diagonal couplings ``B_k`` of shape ``n_k x n_{k-1}``::

    [ A_0  B_1^T               ]
    [ B_1  -A_1  B_2^T         ]
    [      B_2   A_2   ...     ]
    [            ...  (-1)^N A_N ]

The block-diagonal preconditioner ``P_D = blkdiag(S_0, ..., S_N)`` uses the
Schur complements ``S_0 = A_0``, ``S_k = A_k + B_k S_{k-1}^{-1} B_k^T``.
Symmetric square roots are replaced by Cholesky factors ``S_k = L_k L_k^T``
throughout; every spectrum involved is unchanged by that substitution.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator

from .config import DEFAULT, Tolerances
from .errors import AssumptionViolated, NotPositiveDefinite, ShapeMismatch
from .linalg import CholeskyFactor, cholesky, sym_eig, symmetric_part

__all__ = [
    "BlockTridiagonalSystem",
    "SchurChain",
    "SymmetrizedSystem",
    "assemble",
    "chain_from_complements",
    "exact_schur_chain",
    "inertia",
    "perturbed_complements",
    "perturbed_matrix",
    "precond_apply_inv",
    "preconditioner_operator",
    "symmetrize",
]


def _is_sparse(m) -> bool:
    return sp.issparse(m)


def _as_block(m):
    if _is_sparse(m):
        return sp.csr_matrix(m, dtype=float)
    return np.atleast_2d(np.asarray(m, dtype=float))


def _dense(m) -> np.ndarray:
    return m.toarray() if _is_sparse(m) else np.asarray(m)


@dataclass(frozen=True, eq=False)
class BlockTridiagonalSystem:
    """Blocks of a multiple saddle-point matrix.

    Use :func:`assemble` to construct validated instances.
    """

    diag_blocks: tuple
    offdiag_blocks: tuple

    @property
    def N(self) -> int:
        return len(self.diag_blocks) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(a.shape[0] for a in self.diag_blocks)

    @property
    def n(self) -> int:
        return sum(self.sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.sizes)])

    def block_slice(self, k: int) -> slice:
        o = self.offsets
        return slice(int(o[k]), int(o[k + 1]))

    def split(self, v) -> list[np.ndarray]:
        return [v[self.block_slice(k)] for k in range(self.N + 1)]

    @property
    def n_positive(self) -> int:
        """Number of positive eigenvalues predicted by Sylvester's law."""
        return sum(n for k, n in enumerate(self.sizes) if k % 2 == 0)

    def matvec(self, v) -> np.ndarray:
        v = np.asarray(v, dtype=float)
        parts = self.split(v)
        out = [((-1) ** k) * (self.diag_blocks[k] @ parts[k]) for k in range(self.N + 1)]
        for k in range(1, self.N + 1):
            B = self.offdiag_blocks[k - 1]
            out[k] = out[k] + B @ parts[k - 1]
            out[k - 1] = out[k - 1] + B.T @ parts[k]
        return np.concatenate(out)

    def operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self.matvec, dtype=float)

    def sparse(self) -> sp.csr_matrix:
        blocks = [[None] * (self.N + 1) for _ in range(self.N + 1)]
        for k, a in enumerate(self.diag_blocks):
            blocks[k][k] = sp.csr_matrix(a) * ((-1) ** k)
        for k in range(1, self.N + 1):
            B = sp.csr_matrix(self.offdiag_blocks[k - 1])
            blocks[k][k - 1] = B
            blocks[k - 1][k] = B.T
        return sp.bmat(blocks, format="csr")

    @cached_property
    def dense(self) -> np.ndarray:
        """Assembled matrix, built on first access."""
        out = np.zeros((self.n, self.n))
        for k, a in enumerate(self.diag_blocks):
            s = self.block_slice(k)
            out[s, s] = ((-1) ** k) * _dense(a)
        for k in range(1, self.N + 1):
            B = _dense(self.offdiag_blocks[k - 1])
            r, c = self.block_slice(k), self.block_slice(k - 1)
            out[r, c] = B
            out[c, r] = B.T
        return out


def _validate(diag, offdiag, tol: Tolerances) -> None:
    try:
        cholesky(_dense(diag[0]), tol)
    except NotPositiveDefinite:
        raise AssumptionViolated("A_0 is not symmetric positive definite") from None
    for k, a in enumerate(diag):
        ad = _dense(a)
        if not np.allclose(ad, ad.T, rtol=0, atol=1e-12 * max(np.abs(ad).max(), 1.0)):
            raise AssumptionViolated(f"A_{k} is not symmetric")
        if k == 0:
            continue
        norm = np.linalg.norm(ad, 2) if ad.any() else 0.0
        lmin = sym_eig(symmetric_part(ad), vectors=False, tol=tol)[0]
        if lmin < -tol.psd_rel * norm:
            raise AssumptionViolated(
                f"A_{k} is not positive semi-definite (min eigenvalue {lmin:.3e})"
            )
    for k, B in enumerate(offdiag, start=1):
        n_k, n_prev = B.shape
        if n_k > n_prev:
            raise AssumptionViolated(f"n_{k} = {n_k} exceeds n_{k - 1} = {n_prev}")
        sv = np.linalg.svd(_dense(B), compute_uv=False)
        if sv[-1] <= tol.rank_rel * sv[0]:
            raise AssumptionViolated(f"B_{k} is not of full row rank")


def assemble(
    diag_blocks,
    offdiag_blocks,
    validate: bool = True,
    tol: Tolerances = DEFAULT,
) -> BlockTridiagonalSystem:
    """Build a system from ``A_0..A_N`` and ``B_1..B_N``.

    Blocks may be dense arrays or scipy sparse matrices.

    Raises
    ------
    ShapeMismatch
        For incompatible block shapes.
    AssumptionViolated
        When ``validate`` is on and A_0 is not SPD, some A_k is not PSD, some
        B_k is rank deficient or the sizes increase.
    """
    diag = tuple(_as_block(a) for a in diag_blocks)
    off = tuple(_as_block(b) for b in offdiag_blocks)
    if len(diag) < 1:
        raise ShapeMismatch("at least one diagonal block is required")
    if len(off) != len(diag) - 1:
        raise ShapeMismatch(f"expected {len(diag) - 1} coupling blocks, got {len(off)}")
    for k, a in enumerate(diag):
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] < 1:
            raise ShapeMismatch(f"A_{k} must be square and non-empty, got {a.shape}")
    for k, B in enumerate(off, start=1):
        expect = (diag[k].shape[0], diag[k - 1].shape[0])
        if B.shape != expect:
            raise ShapeMismatch(f"B_{k} has shape {B.shape}, expected {expect}")
    if validate:
        _validate(diag, off, tol)
    return BlockTridiagonalSystem(diag, off)


def inertia(m, zero_tol: float = 1e-10) -> tuple[int, int, int]:
    """(positive, negative, near-zero) eigenvalue counts of a symmetric matrix."""
    w = sym_eig(m, vectors=False)
    scale = max(np.max(np.abs(w)), np.finfo(float).tiny)
    zero = np.abs(w) <= zero_tol * scale
    return int(np.sum((w > 0) & ~zero)), int(np.sum((w < 0) & ~zero)), int(np.sum(zero))


# --------------------------------------------------------------------------
# Schur chains and the preconditioner
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SchurChain:
    """SPD preconditioner blocks ``S_0..S_N`` with cached Cholesky factors."""

    complements: tuple
    factors: tuple

    @property
    def N(self) -> int:
        return len(self.complements) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(s.shape[0] for s in self.complements)


def chain_from_complements(complements, tol: Tolerances = DEFAULT) -> SchurChain:
    comps = []
    factors = []
    for k, s in enumerate(complements):
        s = symmetric_part(_dense(s))
        try:
            factors.append(cholesky(s, tol))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"S_{k}: {exc}", level=k) from None
        comps.append(s)
    return SchurChain(tuple(comps), tuple(factors))


def _next_complement(A_k, B_k, prev: CholeskyFactor) -> np.ndarray:
    Bd = _dense(B_k)
    # B S^{-1} B^T = (L^{-1} B^T)^T (L^{-1} B^T)
    W = prev.solve_lower(Bd.T)
    return symmetric_part(_dense(A_k) + W.T @ W)


def exact_schur_chain(system: BlockTridiagonalSystem, tol: Tolerances = DEFAULT) -> SchurChain:
    """Exact complements ``S_0 = A_0``, ``S_k = A_k + B_k S_{k-1}^{-1} B_k^T``.

    Raises
    ------
    NotPositiveDefinite
        With ``level`` set to the first k whose complement cannot be factored.
    """
    comps = []
    factors = []
    S = symmetric_part(_dense(system.diag_blocks[0]))
    for k in range(system.N + 1):
        if k > 0:
            S = _next_complement(system.diag_blocks[k], system.offdiag_blocks[k - 1], factors[-1])
        try:
            factors.append(cholesky(S, tol))
        except NotPositiveDefinite as exc:
            raise NotPositiveDefinite(f"Schur complement S_{k}: {exc}", level=k) from None
        comps.append(S)
    return SchurChain(tuple(comps), tuple(factors))


def perturbed_complements(
    system: BlockTridiagonalSystem, approx: SchurChain
) -> tuple[np.ndarray, ...]:
    """Complements ``S~_k`` that account for earlier approximations.

    ``S~_0 = A_0`` and ``S~_k = A_k + B_k Shat_{k-1}^{-1} B_k^T``.
    """
    if approx.sizes != system.sizes:
        raise ShapeMismatch("approximate chain does not match the system block sizes")
    out = [symmetric_part(_dense(system.diag_blocks[0]))]
    for k in range(1, system.N + 1):
        out.append(
            _next_complement(system.diag_blocks[k], system.offdiag_blocks[k - 1], approx.factors[k - 1])
        )
    return tuple(out)


def precond_apply_inv(chain: SchurChain, v) -> np.ndarray:
    """Apply ``P_D^{-1}`` blockwise through the cached factors."""
    v = np.asarray(v, dtype=float)
    total = sum(chain.sizes)
    if v.shape[0] != total:
        raise ShapeMismatch(f"vector has length {v.shape[0]}, preconditioner size is {total}")
    out = np.empty_like(v)
    o = 0
    for f in chain.factors:
        out[o : o + f.n] = f.solve(v[o : o + f.n])
        o += f.n
    return out


def preconditioner_operator(chain: SchurChain) -> LinearOperator:
    n = sum(chain.sizes)
    return LinearOperator((n, n), matvec=lambda v: precond_apply_inv(chain, v), dtype=float)


def precond_dense(chain: SchurChain) -> np.ndarray:
    n = sum(chain.sizes)
    P = np.zeros((n, n))
    o = 0
    for s in chain.complements:
        m = s.shape[0]
        P[o : o + m, o : o + m] = s
        o += m
    return P


# --------------------------------------------------------------------------
# Symmetrized operator
# --------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SymmetrizedSystem:
    """Blocks of ``Q = L^{-1} A L^{-T}`` with ``P_D = L L^T``.

    ``R_blocks[k-1]`` is ``R_k = L_k^{-1} B_k L_{k-1}^{-T}`` and
    ``E_blocks[k]`` is ``E_k = L_k^{-1} A_k L_k^{-T}``.
    """

    R_blocks: tuple
    E_blocks: tuple

    @property
    def N(self) -> int:
        return len(self.E_blocks) - 1

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(e.shape[0] for e in self.E_blocks)

    @cached_property
    def dense(self) -> np.ndarray:
        sizes = self.sizes
        o = np.concatenate([[0], np.cumsum(sizes)])
        Q = np.zeros((o[-1], o[-1]))
        for k, E in enumerate(self.E_blocks):
            Q[o[k] : o[k + 1], o[k] : o[k + 1]] = ((-1) ** k) * E
        for k, R in enumerate(self.R_blocks, start=1):
            Q[o[k] : o[k + 1], o[k - 1] : o[k]] = R
            Q[o[k - 1] : o[k], o[k] : o[k + 1]] = R.T
        return Q

    @property
    def q_operator(self) -> LinearOperator:
        Q = self.dense
        return LinearOperator(Q.shape, matvec=lambda v: Q @ v, dtype=float)

    def rre_residuals(self) -> list[float]:
        """Frobenius norms of ``R_k R_k^T + E_k - I`` for k = 1..N."""
        out = []
        for k, R in enumerate(self.R_blocks, start=1):
            E = self.E_blocks[k]
            out.append(float(np.linalg.norm(R @ R.T + E - np.eye(E.shape[0]))))
        return out


def symmetrize(system: BlockTridiagonalSystem, chain: SchurChain) -> SymmetrizedSystem:
    """Congruence of the system by the Cholesky factors of ``chain``."""
    if chain.sizes != system.sizes:
        raise ShapeMismatch("chain does not match the system block sizes")
    F = chain.factors
    E = tuple(F[k].congruence(_dense(system.diag_blocks[k])) for k in range(system.N + 1))
    R = []
    for k in range(1, system.N + 1):
        B = _dense(system.offdiag_blocks[k - 1])
        X = F[k].solve_lower(B)  # L_k^{-1} B
        R.append(F[k - 1].solve_lower(X.T).T)  # ... L_{k-1}^{-T}
    return SymmetrizedSystem(tuple(R), E)


def perturbed_matrix(
    system: BlockTridiagonalSystem, approx: SchurChain
) -> BlockTridiagonalSystem:
    """System whose exact Schur complements are the approximations ``Shat_k``.

    Its diagonal blocks are ``Ahat_k = A_k + Shat_k - S~_k``. No assumption
    checks are applied to the result.
    """
    tilde = perturbed_complements(system, approx)
    diag = [
        symmetric_part(_dense(system.diag_blocks[k]) + approx.complements[k] - tilde[k])
        for k in range(system.N + 1)
    ]
    return BlockTridiagonalSystem(tuple(diag), system.offdiag_blocks)
