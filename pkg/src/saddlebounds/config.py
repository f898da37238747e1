"""Central tolerance record shared by every numerical routine."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    # Cholesky pivot floor, relative to the largest diagonal entry.
    pivot_rel: float = 1e-14
    # Largest dimension handed to the dense eigensolver.
    dense_cap: int = 4000
    # Lanczos: relative accuracy of extremal Ritz values, Krylov cap.
    lanczos_rel: float = 1e-8
    lanczos_max_dim: int = 400
    # Assumption checks on user supplied blocks.
    psd_rel: float = 1e-10
    rank_rel: float = 1e-10
    # Relative tolerance of MINRES used throughout the experiments.
    minres_rel: float = 1e-10
    # Threshold below which the cubic degenerates (gamma_R^(2) -> 0).
    cubic_degenerate: float = 1e-14
    # Slack used by containment checks, relative to spectral radius.
    containment_rel: float = 1e-8


DEFAULT = Tolerances()
