"""Randomized validation drivers.

Three families of instances:

* multi-block systems with exact Schur-complement preconditioners, checked
  against the polynomial intervals ``I_{N+1}``;
* the same systems with perturbed complements, checked against the
  Minkowski-shifted intervals;
* double saddle-point systems with ``A_1 = A_2 = 0`` whose approximate
  complements are built to hit prescribed indicator values, checked against
  the cubic-root bounds.

Every trial draws from its own Philox stream keyed by ``(seed, index)``, so
results do not depend on how trials are distributed over worker processes.
"""

from __future__ import annotations

import itertools
import math
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

from .config import DEFAULT, Tolerances
from .dsp import compute_indicators, dsp_bounds
from .errors import AssumptionViolated, NotPositiveDefinite
from .linalg import cholesky, minres, sym_eig, symmetric_part
from .perturbation import check_hypotheses, minkowski_bounds, sigma_range
from .polynomials import interval_I
from .report import ExperimentReport, RngStream
from .system import (
    BlockTridiagonalSystem,
    assemble,
    chain_from_complements,
    exact_schur_chain,
    preconditioner_operator,
    symmetrize,
)

__all__ = [
    "DSP_GRID_ALPHA",
    "DSP_GRID_BETA",
    "aggregate_grid",
    "default_dsp_grid",
    "dsp_instance",
    "extremes_of",
    "random_dsp_grid",
    "random_multi_batch",
    "random_multi_experiment",
    "random_multi_system",
    "random_perturbation_experiment",
    "run_parallel",
]

MAX_RETRIES = 20

# Lower and upper indicator values of the grid.
DSP_GRID_ALPHA = (0.1, 0.3, 0.9)
DSP_GRID_BETA = (1.2, 1.8, 5.0)


def extremes_of(w: np.ndarray) -> tuple[float, float, float, float]:
    """``(neg_lo, neg_hi, pos_lo, pos_hi)`` of a spectrum; NaN for an empty side."""
    neg, pos = w[w < 0], w[w > 0]
    nan = float("nan")
    return (
        float(neg.min()) if neg.size else nan,
        float(neg.max()) if neg.size else nan,
        float(pos.min()) if pos.size else nan,
        float(pos.max()) if pos.size else nan,
    )


def run_parallel(fn: Callable, jobs: Sequence[tuple], workers: int | None = None) -> list:
    """``[fn(*job) for job in jobs]``, optionally on a process pool; order is preserved."""
    if not workers or workers <= 1 or len(jobs) <= 1:
        return [fn(*job) for job in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, *zip(*jobs), chunksize=max(1, len(jobs) // (4 * workers))))


# --------------------------------------------------------------------------
# multi-block systems
# --------------------------------------------------------------------------


def _shift_psd(a: np.ndarray, factor: float, extra: float = 0.0) -> np.ndarray:
    """Symmetric part of ``a`` shifted by ``factor |lambda_min| + extra``."""
    s = symmetric_part(a)
    lmin = sym_eig(s, vectors=False)[0]
    return s + (factor * abs(lmin) + extra) * np.eye(s.shape[0])


def _block_sizes(rng: np.random.Generator, N: int, n0: int) -> list[int]:
    sizes = [n0]
    for _ in range(N):
        sizes.append(sizes[-1] - math.ceil(10 * rng.random()))
    if sizes[-1] < 1:
        raise ValueError(f"n0 = {n0} is too small for N = {N}")
    return sizes


def random_multi_system(
    rng: np.random.Generator, N: int, variant: str, n0: int = 300, margin: float = 0.0
) -> BlockTridiagonalSystem:
    """One random block system.

    ``variant="diag"``: diagonal ``A_0`` with uniform entries, diagonal
    ``A_k`` with entries ``1e-4 * uniform``. ``variant="dense"``: symmetric
    part of a uniform matrix shifted to be definite (``A_0``) or semi-definite
    (``A_k``). ``B_k`` is uniform. ``margin`` adds ``margin * |lambda_min|``
    to the dense shifts of ``A_k`` (k >= 1), making them definite.
    """
    if variant not in ("diag", "dense"):
        raise ValueError(f"unknown variant {variant!r}")
    sizes = _block_sizes(rng, N, n0)
    diag = []
    for k, n in enumerate(sizes):
        if variant == "diag":
            scale = 1.0 if k == 0 else 1e-4
            diag.append(np.diag(scale * rng.random(n)))
        else:
            a = rng.random((n, n))
            diag.append(_shift_psd(a, 1.01) if k == 0 else _shift_psd(a, 1.0 + margin))
    off = [rng.random((sizes[k], sizes[k - 1])) for k in range(1, N + 1)]
    return assemble(diag, off)


def random_multi_experiment(
    N: int,
    variant: str = "diag",
    seed: int = 0,
    n0: int = 300,
    stream_index: int = 0,
    minres_tol: float = 1e-10,
    tol: Tolerances = DEFAULT,
) -> ExperimentReport:
    """Random ``N + 1``-block system with the exact preconditioner.

    Computes the whole spectrum of ``P_D^{-1} A`` through the congruence with
    the Cholesky factors of ``P_D``, compares its extremes with ``I_{N+1}``
    and solves a system with a uniform random right-hand side by MINRES.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    t0 = time.perf_counter()
    rng = RngStream(seed, stream_index).generator()
    for retries in range(MAX_RETRIES):
        try:
            system = random_multi_system(rng, N, variant, n0)
            chain = exact_schur_chain(system, tol)
            break
        except (AssumptionViolated, NotPositiveDefinite):
            continue
    else:
        raise AssumptionViolated(f"no admissible instance in {MAX_RETRIES} draws")

    w = sym_eig(symmetrize(system, chain).dense, vectors=False, tol=tol)
    b = rng.random(system.n)
    sol = minres(system.dense, b, precond=preconditioner_operator(chain), rel_tol=minres_tol,
                 max_iter=20 * system.n)
    return ExperimentReport.build(
        label=f"random-multi N={N} {variant}",
        seed=seed,
        system_dims=system.sizes,
        theoretical_bounds=interval_I(N + 1),
        computed_extremes=extremes_of(w),
        minres_iterations=sol.iterations,
        timing=time.perf_counter() - t0,
        metadata={
            "N": N,
            "variant": variant,
            "n0": n0,
            "stream_index": stream_index,
            "retries": retries,
            "minres_converged": sol.converged,
            "minres_true_relative_residual": sol.true_relative_residual,
            "n_positive": int(np.sum(w > 0)),
            "n_positive_expected": system.n_positive,
        },
    )


def random_multi_batch(
    Ns: Sequence[int],
    variant: str,
    trials: int,
    seed: int = 0,
    n0: int = 300,
    workers: int | None = None,
) -> list[ExperimentReport]:
    """``trials`` instances per N, in (N, trial) order."""
    jobs = [(N, variant, seed, n0, i * trials + t) for i, N in enumerate(Ns) for t in range(trials)]
    return run_parallel(random_multi_experiment, jobs, workers)


# --------------------------------------------------------------------------
# perturbed complements
# --------------------------------------------------------------------------


def _random_sym_unit(rng: np.random.Generator, n: int) -> np.ndarray:
    z = symmetric_part(rng.standard_normal((n, n)))
    return z / np.linalg.norm(z, 2)


def random_perturbation_experiment(
    N: int,
    seed: int = 0,
    stream_index: int = 0,
    n0: int = 60,
    variant: str = "dense",
    tol: Tolerances = DEFAULT,
) -> ExperimentReport:
    """Random system with inexact complements ``Shat_k = S~_k + Delta_k``.

    ``Delta_k`` combines an indefinite part bounded by the smallest
    eigenvalue of ``A_k`` with a random positive semi-definite part of
    random size, so ``Ahat_k = A_k + Delta_k`` stays semi-definite and the
    perturbation hypotheses hold by construction. They are checked anyway
    and the instance is redrawn if they fail.
    """
    if N < 1:
        raise ValueError("N must be at least 1")
    t0 = time.perf_counter()
    rng = RngStream(seed, stream_index).generator()
    for retries in range(MAX_RETRIES):
        try:
            system = random_multi_system(rng, N, variant, n0, margin=0.25)
            comps, prev = [], None
            for k in range(N + 1):
                A = system.diag_blocks[k]
                if k == 0:
                    tilde = A
                else:
                    W = prev.solve_lower(system.offdiag_blocks[k - 1].T)
                    tilde = symmetric_part(A + W.T @ W)
                n = A.shape[0]
                amin = max(sym_eig(A, vectors=False)[0], 0.0)
                size = 10.0 ** rng.uniform(-3, 0)
                delta = 0.9 * rng.random() * amin * _random_sym_unit(rng, n)
                Y = rng.standard_normal((n, max(1, n // 4)))
                delta += size * rng.random() * np.linalg.norm(tilde, 2) * (Y @ Y.T) / np.linalg.norm(Y @ Y.T, 2)
                s_hat = symmetric_part(tilde + delta)
                prev = cholesky(s_hat, tol)
                comps.append(s_hat)
            approx = chain_from_complements(comps, tol)
            issues = check_hypotheses(system, approx, tol)
            if issues:
                continue
            break
        except (AssumptionViolated, NotPositiveDefinite):
            continue
    else:
        raise AssumptionViolated(f"no admissible instance in {MAX_RETRIES} draws")

    base = interval_I(N + 1)
    rng_sigma = sigma_range(approx, system, tol)
    shifted = minkowski_bounds(base, rng_sigma)
    w = sym_eig(symmetrize(system, approx).dense, vectors=False, tol=tol)
    return ExperimentReport.build(
        label=f"perturbation N={N} {variant}",
        seed=seed,
        system_dims=system.sizes,
        theoretical_bounds=shifted,
        computed_extremes=extremes_of(w),
        minres_iterations=None,
        timing=time.perf_counter() - t0,
        metadata={
            "N": N,
            "stream_index": stream_index,
            "retries": retries,
            "sigma_minus": rng_sigma.sigma_minus,
            "sigma_plus": rng_sigma.sigma_plus,
            "contains_zero": shifted.contains_zero,
            "hypothesis_issues": [],
        },
    )


# --------------------------------------------------------------------------
# double saddle-point grid
# --------------------------------------------------------------------------


def default_dsp_grid() -> list[dict]:
    """All 729 combinations of the lower values for ``(aE0, aR1, aR2)`` and
    upper values for ``(bE0, bR1, bR2)``."""
    keys = ("aE0", "bE0", "aR1", "bR1", "aR2", "bR2")
    pools = [DSP_GRID_ALPHA if k.startswith("a") else DSP_GRID_BETA for k in keys]
    return [dict(zip(keys, combo)) for combo in itertools.product(*pools)]


def _fit_affine(X: np.ndarray, lo: float, hi: float) -> np.ndarray:
    """``a X + b I`` such that ``(a X + b I)^{-1} X`` has spectrum exactly ``[lo, hi]``.

    With ``f(l) = l / (a l + b)`` and ``1 / f = a + b / l`` the two end
    conditions are linear in ``(a, b)``.
    """
    w = sym_eig(X, vectors=False)
    lmin, lmax = float(w[0]), float(w[-1])
    if lmin <= 0:
        raise NotPositiveDefinite("matrix to be fitted is not positive definite")
    if lmax - lmin <= 1e-12 * lmax:
        if not math.isclose(lo, hi):
            raise AssumptionViolated("cannot spread a multiple of the identity")
        return X / lo
    b = (1.0 / lo - 1.0 / hi) / (1.0 / lmin - 1.0 / lmax)
    a = 1.0 / hi - b / lmax
    return symmetric_part(a * X + b * np.eye(X.shape[0]))


def dsp_instance(rng: np.random.Generator, targets: dict, tol: Tolerances = DEFAULT):
    """Random double saddle-point system and approximate complements meeting ``targets``.

    Dimensions are ``round(50 + 10 u)`` redrawn until ``n0 >= n1 >= n2``;
    ``A_0`` is the symmetric part of a Gaussian matrix shifted by
    ``1.01 |lambda_min|``; ``A_1 = A_2 = 0``; ``B_k`` are Gaussian.
    """
    while True:
        sizes = [int(round(50 + 10 * rng.random())) for _ in range(3)]
        if sizes[0] >= sizes[1] >= sizes[2]:
            break
    A0 = _shift_psd(rng.standard_normal((sizes[0], sizes[0])), 1.01)
    B1 = rng.standard_normal((sizes[1], sizes[0]))
    B2 = rng.standard_normal((sizes[2], sizes[1]))
    system = assemble([A0, np.zeros((sizes[1],) * 2), np.zeros((sizes[2],) * 2)], [B1, B2], tol=tol)

    S0 = _fit_affine(A0, targets["aE0"], targets["bE0"])
    f0 = cholesky(S0, tol)
    W = f0.solve_lower(B1.T)
    S1 = _fit_affine(symmetric_part(W.T @ W), targets["aR1"], targets["bR1"])
    f1 = cholesky(S1, tol)
    W = f1.solve_lower(B2.T)
    S2 = _fit_affine(symmetric_part(W.T @ W), targets["aR2"], targets["bR2"])
    return system, chain_from_complements([S0, S1, S2], tol)


def _dsp_trial(case_index: int, targets: dict, seed: int, stream_index: int) -> ExperimentReport:
    t0 = time.perf_counter()
    rng = RngStream(seed, stream_index).generator()
    for retries in range(MAX_RETRIES):
        try:
            system, approx = dsp_instance(rng, targets)
            break
        except (AssumptionViolated, NotPositiveDefinite):
            continue
    else:
        raise AssumptionViolated(f"no admissible instance in {MAX_RETRIES} draws")
    ind = compute_indicators(system, approx)
    bounds = dsp_bounds(ind)
    w = sym_eig(symmetrize(system, approx).dense, vectors=False)
    return ExperimentReport.build(
        label=f"dsp case={case_index}",
        seed=seed,
        system_dims=system.sizes,
        theoretical_bounds=bounds,
        computed_extremes=extremes_of(w),
        minres_iterations=None,
        timing=time.perf_counter() - t0,
        metadata={
            "case": case_index,
            "stream_index": stream_index,
            "targets": dict(targets),
            "indicators": ind.to_dict(),
            "retries": retries,
        },
    )


def random_dsp_grid(
    param_grid: Sequence[dict] | None = None,
    runs_per_case: int = 25,
    seed: int = 0,
    workers: int | None = None,
) -> list[ExperimentReport]:
    """One report per (case, run), in that order."""
    grid = list(param_grid) if param_grid is not None else default_dsp_grid()
    jobs = [
        (c, targets, seed, c * runs_per_case + r)
        for c, targets in enumerate(grid)
        for r in range(runs_per_case)
    ]
    return run_parallel(_dsp_trial, jobs, workers)


def aggregate_grid(reports: Sequence[ExperimentReport]) -> list[dict]:
    """Worst-case extremes per grid case together with its bounds."""
    by_case: dict[int, list[ExperimentReport]] = {}
    for r in reports:
        by_case.setdefault(r.metadata["case"], []).append(r)
    out = []
    for case in sorted(by_case):
        rs = by_case[case]
        e = np.array([r.computed_extremes for r in rs])
        b = rs[0].theoretical_bounds
        out.append(
            {
                "case": case,
                "targets": rs[0].metadata["targets"],
                "runs": len(rs),
                "computed_neg_lo": float(e[:, 0].min()),
                "computed_neg_hi": float(e[:, 1].max()),
                "computed_pos_lo": float(e[:, 2].min()),
                "computed_pos_hi": float(e[:, 3].max()),
                "bound": b.to_dict(),
                "violations": sum(len(r.violations) for r in rs),
            }
        )
    return out
