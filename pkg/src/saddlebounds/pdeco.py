"""Boundary-observation optimal control test problem.

    min 1/2 ||y - yhat||^2_{L2(boundary)} + beta/2 ||u||^2_{L2(Omega)}
    s.t. -Lap y + y + u = 0 in Omega = (0, 1)^2,  dy/dn = 0 on the boundary,

discretized with P1 elements on a uniform grid whose cells are split along
the (+1, +1) diagonal. The KKT matrix in the ordering (u, p, y) is the N = 2
system with ``A_0 = beta M``, ``B_1 = M``, ``A_1 = 0``, ``B_2 = L = K + M``
and ``A_2 = Mb``. It is preconditioned with
``blkdiag(beta Mhat, Mhat / beta, beta L M^{-1} L)`` where ``Mhat^{-1}`` is a
fixed number of Chebyshev semi-iteration steps for M with Jacobi splitting.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, splu

from .config import DEFAULT, Tolerances
from .dsp import IndicatorSet, dsp_bounds
from .errors import NoConvergence
from .linalg import LDLFactor, extremal_eigs, minres, sym_eig
from .report import ExperimentReport
from .system import BlockTridiagonalSystem, assemble

__all__ = [
    "ChebyshevSemiIteration",
    "FemMatrices",
    "KKTProblem",
    "assemble_fem",
    "assemble_kkt",
    "boundary_pencil_max",
    "cheb_apply",
    "cheb_omega",
    "desired_state",
    "pdeco_indicators",
    "pdeco_minres",
    "run_pdeco",
]

# Spectrum of diag(M)^{-1} M for P1 triangles.
JACOBI_MASS_INTERVAL = (0.5, 2.0)


@dataclass(frozen=True, eq=False)
class FemMatrices:
    M: sp.csr_matrix
    K: sp.csr_matrix
    Mb: sp.csr_matrix
    h: float
    coords: np.ndarray

    @property
    def L(self) -> sp.csr_matrix:
        return (self.K + self.M).tocsr()

    @property
    def n(self) -> int:
        return self.M.shape[0]

    @property
    def boundary_nodes(self) -> np.ndarray:
        x, y = self.coords[:, 0], self.coords[:, 1]
        eps = 1e-12
        return np.flatnonzero((x < eps) | (x > 1 - eps) | (y < eps) | (y > 1 - eps))


def assemble_fem(h: float) -> FemMatrices:
    """P1 mass, stiffness and boundary-mass matrices on the unit square."""
    nd = round(1.0 / h)
    if not math.isclose(nd * h, 1.0, rel_tol=1e-12) or nd < 1:
        raise ValueError("1/h must be a positive integer")
    h = 1.0 / nd
    n1 = nd + 1
    xs = np.linspace(0.0, 1.0, n1)
    X, Y = np.meshgrid(xs, xs)  # node (i, j) -> index j * n1 + i
    coords = np.column_stack([X.ravel(), Y.ravel()])

    i, j = np.meshgrid(np.arange(nd), np.arange(nd))
    v00 = (j * n1 + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n1
    v11 = v01 + 1
    tris = np.vstack([np.column_stack([v00, v10, v11]), np.column_stack([v00, v11, v01])])

    area = 0.5 * h * h
    mass_local = area / 12.0 * (np.ones((3, 3)) + np.eye(3))
    p = coords[tris]  # (nt, 3, 2)
    # gradients of barycentric coordinates
    d = np.stack([p[:, 2] - p[:, 1], p[:, 0] - p[:, 2], p[:, 1] - p[:, 0]], axis=1)
    grads = np.stack([-d[..., 1], d[..., 0]], axis=2) / (2.0 * area)
    stiff_local = area * np.einsum("tik,tjk->tij", grads, grads)

    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    n = n1 * n1
    M = sp.coo_matrix((np.broadcast_to(mass_local, (len(tris), 3, 3)).ravel(), (rows, cols)), shape=(n, n))
    K = sp.coo_matrix((stiff_local.ravel(), (rows, cols)), shape=(n, n))

    idx = np.arange(nd)
    edges = np.vstack(
        [
            np.column_stack([idx, idx + 1]),  # y = 0
            np.column_stack([nd * n1 + idx, nd * n1 + idx + 1]),  # y = 1
            np.column_stack([idx * n1, (idx + 1) * n1]),  # x = 0
            np.column_stack([idx * n1 + nd, (idx + 1) * n1 + nd]),  # x = 1
        ]
    )
    edge_local = h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
    er = np.repeat(edges, 2, axis=1).ravel()
    ec = np.tile(edges, (1, 2)).ravel()
    Mb = sp.coo_matrix((np.broadcast_to(edge_local, (len(edges), 2, 2)).ravel(), (er, ec)), shape=(n, n))
    return FemMatrices(M.tocsr(), K.tocsr(), Mb.tocsr(), h, coords)


def desired_state(fem: FemMatrices, control=None) -> np.ndarray:
    """State produced by a control through ``-Lap y + y + u = 0`` (Neumann).

    ``control`` is a nodal vector or a callable of ``(x1, x2)``; it defaults
    to ``4 x1 (1 - x1) + x2``.
    """
    if control is None:
        def control(x1, x2):
            return 4.0 * x1 * (1.0 - x1) + x2
    if callable(control):
        u = control(fem.coords[:, 0], fem.coords[:, 1])
    else:
        u = np.asarray(control, dtype=float)
    return splu(fem.L.tocsc()).solve(-(fem.M @ u))


# --------------------------------------------------------------------------
# Chebyshev semi-iteration
# --------------------------------------------------------------------------


def cheb_omega(m: int) -> float:
    """``1 / T_m(5/3)``: half-width of the spectrum of ``Mhat^{-1} M`` around 1."""
    if m < 1:
        raise ValueError("m must be at least 1")
    lo, hi = JACOBI_MASS_INTERVAL
    x = (hi + lo) / (hi - lo)
    return 1.0 / math.cosh(m * math.acosh(x))


class ChebyshevSemiIteration:
    """``m`` steps of Chebyshev-accelerated Jacobi for ``M x = r`` from ``x = 0``.

    The result is a fixed polynomial in ``D^{-1} M`` applied to ``D^{-1} r``,
    hence a symmetric linear operator ``Mhat^{-1}``.
    """

    def __init__(self, M, m: int, interval=JACOBI_MASS_INTERVAL):
        if m < 1:
            raise ValueError("m must be at least 1")
        self.M = sp.csr_matrix(M)
        self.m = m
        self.dinv = 1.0 / self.M.diagonal()
        self.theta = 0.5 * (interval[1] + interval[0])
        self.delta = 0.5 * (interval[1] - interval[0])

    @property
    def shape(self):
        return self.M.shape

    def apply(self, r):
        r = np.asarray(r, dtype=float)
        dinv = self.dinv if r.ndim == 1 else self.dinv[:, None]
        sigma = self.theta / self.delta
        rho = 1.0 / sigma
        d = (dinv * r) / self.theta
        x = d.copy()
        res = r
        for _ in range(self.m - 1):
            res = res - self.M @ d
            rho_new = 1.0 / (2.0 * sigma - rho)
            d = rho_new * rho * d + (2.0 * rho_new / self.delta) * (dinv * res)
            x = x + d
            rho = rho_new
        return x

    __call__ = apply

    def operator(self) -> LinearOperator:
        return LinearOperator(self.shape, matvec=self.apply, matmat=self.apply, dtype=float)


def cheb_apply(fem: FemMatrices, m: int, r) -> np.ndarray:
    """Apply ``Mhat^{-1}`` (``m`` Chebyshev steps) to ``r``."""
    return ChebyshevSemiIteration(fem.M, m).apply(r)


# --------------------------------------------------------------------------
# KKT system and preconditioner
# --------------------------------------------------------------------------


def assemble_kkt(fem: FemMatrices, beta: float, control=None) -> tuple[BlockTridiagonalSystem, np.ndarray]:
    """The N = 2 KKT system in (u, p, y) ordering and its right-hand side."""
    if beta <= 0:
        raise ValueError("beta must be positive")
    n = fem.n
    Z = sp.csr_matrix((n, n))
    system = assemble([beta * fem.M, Z, fem.Mb], [fem.M, fem.L], validate=False)
    yhat = desired_state(fem, control)
    rhs = np.concatenate([np.zeros(n), np.zeros(n), fem.Mb @ yhat])
    return system, rhs


class KKTProblem:
    """A KKT system plus its inexact block-diagonal preconditioner."""

    def __init__(self, fem: FemMatrices, beta: float, m: int, control=None):
        self.fem = fem
        self.beta = beta
        self.m = m
        self.system, self.rhs = assemble_kkt(fem, beta, control)
        self.cheb = ChebyshevSemiIteration(fem.M, m)
        self._lu = splu(fem.L.tocsc())

    @property
    def n(self) -> int:
        return self.system.n

    def s2_inv(self, v):
        """``(beta L M^{-1} L)^{-1} v``: two L-solves and one M-product."""
        return self._lu.solve(self.fem.M @ self._lu.solve(v)) / self.beta

    def precond_inv(self, v) -> np.ndarray:
        n = self.fem.n
        v = np.asarray(v, dtype=float)
        return np.concatenate(
            [
                self.cheb(v[:n]) / self.beta,
                self.beta * self.cheb(v[n : 2 * n]),
                self.s2_inv(v[2 * n :]),
            ]
        )

    def precond_operator(self) -> LinearOperator:
        return LinearOperator((self.n, self.n), matvec=self.precond_inv, dtype=float)

    @cached_property
    def sparse_matrix(self) -> sp.csr_matrix:
        return self.system.sparse()

    def dense_precond_inv_blocks(self) -> list[np.ndarray]:
        n = self.fem.n
        I = np.eye(n)
        mhat_inv = self.cheb(I)
        mhat_inv = 0.5 * (mhat_inv + mhat_inv.T)
        s2 = self._lu.solve(self.fem.M @ self._lu.solve(I)) / self.beta
        return [mhat_inv / self.beta, self.beta * mhat_inv, 0.5 * (s2 + s2.T)]

    @cached_property
    def _mhat_factor(self):
        # Mhat^{-1} is a fixed polynomial in D^{-1} M; its Cholesky factor
        # gives products with Mhat itself
        mi = self.cheb(np.eye(self.fem.n))
        return sla.cho_factor(0.5 * (mi + mi.T), lower=True)

    @cached_property
    def _kkt_lu(self):
        return splu(self.sparse_matrix.tocsc())

    def precond_apply(self, v) -> np.ndarray:
        """Forward product with ``Phat_D``."""
        n = self.fem.n
        v = np.asarray(v, dtype=float)
        mh = lambda x: sla.cho_solve(self._mhat_factor, x)
        y = v[2 * n :]
        s2 = self.beta * (self.fem.L @ self._m_lu.solve(self.fem.L @ y))
        return np.concatenate([self.beta * mh(v[:n]), mh(v[n : 2 * n]) / self.beta, s2])

    @cached_property
    def _m_lu(self):
        return splu(self.fem.M.tocsc())

    def lanczos_spectrum(self, tol: Tolerances = DEFAULT, max_dim: int = 400) -> tuple[float, float, float, float]:
        """Extremal negative and positive eigenvalues of ``Phat_D^{-1} A`` by Lanczos.

        The outer ends come from Lanczos on ``A`` in the ``Phat_D^{-1}`` inner
        product. The ends next to zero are the reciprocals of the extremes of
        ``A^{-1} Phat_D``, which is self-adjoint in the ``Phat_D`` inner product.
        Ends that close a tight cluster and are not resolved within
        ``max_dim`` steps are refined by :meth:`refine_edge`.
        """
        fwd = LinearOperator((self.n, self.n), matvec=self.precond_apply, dtype=float)
        ainv = LinearOperator((self.n, self.n), matvec=self._kkt_lu.solve, dtype=float)
        pinv = self.precond_operator()
        A = self.sparse_matrix
        n_neg = self.system.n - self.system.n_positive

        def edge(op, inner, which, inverted, n_below, side):
            try:
                v = extremal_eigs(op, which, tol=tol, max_dim=max_dim, inner=inner)
                return 1.0 / v if inverted else v
            except NoConvergence as exc:
                est, res = exc.estimate, exc.residual
                if inverted:
                    # a residual r on mu = 1 / lambda is about r / mu^2 on lambda
                    est, res = 1.0 / est, res / est**2
                return self.refine_edge(est, n_below, side, tol, delta=2.0 * res)

        neg_lo = edge(A, pinv, "smallest", False, 0, "below")
        pos_hi = edge(A, pinv, "largest", False, self.n, "above")
        neg_hi = edge(ainv, fwd, "smallest", True, n_neg, "above")
        pos_lo = edge(ainv, fwd, "largest", True, n_neg, "below")
        return neg_lo, neg_hi, pos_lo, pos_hi

    def shifted_dense(self, sigma: float) -> np.ndarray:
        """Dense ``A - sigma Phat_D``."""
        n, beta, fem = self.fem.n, self.beta, self.fem
        mhat = sla.cho_solve(self._mhat_factor, np.eye(n))
        Ld = fem.L.toarray()
        s2 = beta * (Ld @ self._m_lu.solve(Ld))
        out = np.zeros((3 * n, 3 * n))
        out[:n, :n] = beta * fem.M.toarray() - sigma * beta * mhat
        out[:n, n : 2 * n] = fem.M.toarray()
        out[n : 2 * n, :n] = out[:n, n : 2 * n]
        out[n : 2 * n, n : 2 * n] = -(sigma / beta) * mhat
        out[n : 2 * n, 2 * n :] = Ld
        out[2 * n :, n : 2 * n] = Ld
        out[2 * n :, 2 * n :] = fem.Mb.toarray() - sigma * s2
        return 0.5 * (out + out.T)

    def refine_edge(self, estimate: float, n_below: int, side: str, tol: Tolerances = DEFAULT,
                    delta: float | None = None, max_tries: int = 8) -> float:
        """Eigenvalue of ``Phat_D^{-1} A`` next to a shift placed just beyond ``estimate``.

        ``side="below"`` puts the shift ``sigma`` under the estimate and finds
        the eigenvalue just above it; ``side="above"`` the reverse. The shift is
        accepted once the inertia of ``A - sigma Phat_D`` shows exactly
        ``n_below`` eigenvalues below it. Lanczos on
        ``(A - sigma Phat_D)^{-1} Phat_D`` then finds ``1 / (lambda - sigma)``
        as its well separated largest (or smallest) eigenvalue. The distance
        ``|estimate - sigma|`` starts at ``delta`` (typically a multiple of the
        Lanczos residual) and grows tenfold while the inertia rejects it. If
        Lanczos stalls on a tight cluster the shift is moved next to its
        latest estimate and certified again.
        """
        if side not in ("below", "above"):
            raise ValueError(f"unknown side {side!r}")
        sign = -1.0 if side == "below" else 1.0
        floor = 1e-10 * max(1.0, abs(estimate))
        delta = max(delta if delta is not None else 1e-6, floor)
        for _ in range(max_tries):
            sigma = estimate + sign * delta
            f = LDLFactor(self.shifted_dense(sigma), overwrite=True)
            _, neg, zero = f.inertia()
            too_close = neg > n_below if side == "below" else neg < n_below
            if zero or too_close:
                delta *= 10.0
                continue
            if neg != n_below:
                raise NoConvergence(f"shift {sigma:.6g} overshoots into the next interval", estimate=estimate)
            fwd = LinearOperator((self.n, self.n), matvec=self.precond_apply, dtype=float)
            inv = LinearOperator((self.n, self.n), matvec=f.solve, dtype=float)
            try:
                mu = extremal_eigs(inv, "largest" if side == "below" else "smallest", tol=tol, max_dim=600, inner=fwd)
                return sigma + 1.0 / mu
            except NoConvergence as exc:
                # shift too far from a tight cluster: move it next to the new estimate
                mu, res = exc.estimate, exc.residual
                new_est = sigma + 1.0 / mu
                delta = max(min(2.0 * res / mu**2, 0.5 * abs(new_est - sigma)), floor)
                estimate = new_est
        raise NoConvergence("no admissible shift found", estimate=estimate)

    def dense_spectrum(self) -> np.ndarray:
        """All eigenvalues of ``Phat_D^{-1} A`` via ``G^T A G`` with ``Phat_D^{-1} = G G^T``."""
        blocks = self.dense_precond_inv_blocks()
        G = sla.block_diag(*[sla.cholesky(b, lower=True) for b in blocks])
        A = self.sparse_matrix
        C = G.T @ (A @ G)
        return sym_eig(0.5 * (C + C.T), vectors=False)


def pdeco_indicators(fem: FemMatrices, beta: float, m: int, tol: Tolerances = DEFAULT) -> IndicatorSet:
    """Indicators from the Chebyshev interval plus a computed ``beta_E^(2)``.

    ``beta_E^(2)`` is the largest eigenvalue of the pencil
    ``(Mb, beta L M^{-1} L)``, found by Lanczos on the boundary-reduced
    operator ``Gb^T P (beta L M^{-1} L)^{-1} P^T Gb`` where ``P`` selects
    the boundary nodes and ``Gb Gb^T`` is the boundary block of ``Mb``.
    """
    w = cheb_omega(m)
    a, b = 1.0 - w, 1.0 + w
    bE2 = boundary_pencil_max(fem, beta, tol)
    return IndicatorSet(aE0=a, bE0=b, aE1=0.0, bE1=0.0, aE2=0.0, bE2=bE2, aR1=a * a, bR1=b * b, aR2=a, bR2=b)


def boundary_pencil_max(fem: FemMatrices, beta: float, tol: Tolerances = DEFAULT, lu=None) -> float:
    nodes = fem.boundary_nodes
    Gb = sla.cholesky(fem.Mb[nodes][:, nodes].toarray(), lower=True)
    lu = lu or splu(fem.L.tocsc())
    n = fem.n

    def matvec(v):
        z = np.zeros(n)
        z[nodes] = Gb @ v
        z = lu.solve(fem.M @ lu.solve(z)) / beta
        return Gb.T @ z[nodes]

    op = LinearOperator((len(nodes), len(nodes)), matvec=matvec, dtype=float)
    return float(extremal_eigs(op, "largest", tol=tol))


def pdeco_minres(h: float, beta: float, m: int, rel_tol: float = 1e-10, max_iter: int = 2000):
    """MINRES solve of the KKT system with the Chebyshev preconditioner only."""
    prob = KKTProblem(assemble_fem(h), beta, m)
    return minres(prob.sparse_matrix, prob.rhs, precond=prob.precond_operator(), rel_tol=rel_tol, max_iter=max_iter)


def run_pdeco(
    h: float,
    beta: float,
    m: int,
    rel_tol: float = 1e-10,
    dense: bool | None = None,
    max_iter: int = 2000,
    tol: Tolerances = DEFAULT,
) -> ExperimentReport:
    """Bounds, computed extremal eigenvalues and MINRES count for one setting.

    ``dense`` selects a full eigensolve of the preconditioned matrix; by
    default it is used when the KKT dimension fits the dense cap, otherwise
    the extremes come from preconditioned Lanczos.
    """
    t0 = time.perf_counter()
    fem = assemble_fem(h)
    prob = KKTProblem(fem, beta, m)
    ind = pdeco_indicators(fem, beta, m, tol)
    bounds = dsp_bounds(ind, tol)

    sol = minres(prob.sparse_matrix, prob.rhs, precond=prob.precond_operator(), rel_tol=rel_tol, max_iter=max_iter)

    use_dense = prob.n <= tol.dense_cap if dense is None else dense
    if use_dense:
        w = prob.dense_spectrum()
        neg, pos = w[w < 0], w[w > 0]
        comp = (float(neg.min()), float(neg.max()), float(pos.min()), float(pos.max()))
        method = "dense"
    else:
        comp = prob.lanczos_spectrum(tol)
        method = "lanczos"

    return ExperimentReport.build(
        label=f"pdeco h=2^{round(math.log2(fem.h))} beta={beta:g} cheb={m}",
        seed=None,
        system_dims=list(prob.system.sizes),
        theoretical_bounds=bounds,
        computed_extremes=comp,
        minres_iterations=sol.iterations,
        timing=time.perf_counter() - t0,
        metadata={
            "h": fem.h,
            "beta": beta,
            "cheb": m,
            "omega": cheb_omega(m),
            "indicators": ind.to_dict(),
            "eigen_method": method,
            "minres_converged": sol.converged,
            "minres_true_relative_residual": sol.true_relative_residual,
            "minres_stopping_norm": sol.stopping_norm,
        },
    )
