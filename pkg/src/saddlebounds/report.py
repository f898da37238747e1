"""Experiment reports, containment checks, RNG streams and CSV/JSON output."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dsp import DspBounds
from .polynomials import BoundsInterval

__all__ = [
    "CSV_COLUMNS",
    "SCHEMA_VERSION",
    "ExperimentReport",
    "RngStream",
    "containment_violations",
    "emit_report",
    "load_reports",
]

SCHEMA_VERSION = 1
ENDPOINTS = ("neg_lo", "neg_hi", "pos_lo", "pos_hi")


@dataclass(frozen=True)
class RngStream:
    """Independent Philox stream for trial ``stream_index`` of a run seeded with ``seed``."""

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if not (0 <= self.seed < 2**64):
            raise ValueError("seed must fit in 64 unsigned bits")
        if self.stream_index < 0:
            raise ValueError("stream_index must be non-negative")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence([self.seed, self.stream_index])
        return np.random.Generator(np.random.Philox(ss))


def containment_violations(bounds, extremes: Sequence[float], rel_tol: float = 1e-8) -> list[str]:
    """Endpoints of ``extremes`` lying outside ``bounds``.

    The slack is ``rel_tol`` times the spectral radius of the computed
    extremes. NaN or missing extremes (an empty sign class) are skipped.
    """
    b = bounds.interval if isinstance(bounds, DspBounds) else bounds
    ext = [float(v) for v in extremes]
    finite = [abs(v) for v in ext if math.isfinite(v)]
    atol = rel_tol * max(finite, default=0.0)
    out = []
    for name, v in zip(ENDPOINTS, ext):
        if not math.isfinite(v):
            continue
        # membership in the union: shifted intervals may overlap across zero
        if not (b.neg_lo - atol <= v <= b.neg_hi + atol or b.pos_lo - atol <= v <= b.pos_hi + atol):
            out.append(f"{name}={v:.12g} outside [{b.neg_lo:.12g}, {b.neg_hi:.12g}] U [{b.pos_lo:.12g}, {b.pos_hi:.12g}]")
    return out


def _bounds_to_dict(b) -> dict:
    if isinstance(b, DspBounds):
        return {"kind": "dsp", **b.to_dict()}
    return {"kind": "interval", **b.to_dict()}


def _bounds_from_dict(d: dict):
    d = dict(d)
    kind = d.pop("kind", "interval")
    return DspBounds(**d) if kind == "dsp" else BoundsInterval(**d)


@dataclass
class ExperimentReport:
    label: str
    seed: int | None
    system_dims: list[int]
    theoretical_bounds: BoundsInterval | DspBounds
    computed_extremes: tuple[float, float, float, float]
    minres_iterations: int | None
    timing: float
    violations: list[str] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    @classmethod
    def build(cls, *, label, seed, system_dims, theoretical_bounds, computed_extremes,
              minres_iterations, timing, metadata=None, rel_tol: float = 1e-8) -> "ExperimentReport":
        ext = tuple(float(v) for v in computed_extremes)
        return cls(
            label=label,
            seed=seed,
            system_dims=[int(n) for n in system_dims],
            theoretical_bounds=theoretical_bounds,
            computed_extremes=ext,
            minres_iterations=None if minres_iterations is None else int(minres_iterations),
            timing=float(timing),
            violations=containment_violations(theoretical_bounds, ext, rel_tol),
            metadata=dict(metadata or {}),
        )

    @property
    def ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "seed": self.seed,
            "system_dims": list(self.system_dims),
            "theoretical_bounds": _bounds_to_dict(self.theoretical_bounds),
            "computed_extremes": list(self.computed_extremes),
            "minres_iterations": self.minres_iterations,
            "timing": self.timing,
            "violations": list(self.violations),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentReport":
        return cls(
            label=d["label"],
            seed=d["seed"],
            system_dims=list(d["system_dims"]),
            theoretical_bounds=_bounds_from_dict(d["theoretical_bounds"]),
            computed_extremes=tuple(d["computed_extremes"]),
            minres_iterations=d["minres_iterations"],
            timing=d["timing"],
            violations=list(d["violations"]),
            metadata=dict(d.get("metadata", {})),
        )


# Stable CSV layout. Bradley columns are empty for plain intervals;
# indicator columns are filled from metadata["indicators"] when present.
INDICATOR_COLUMNS = ("aE0", "bE0", "aE1", "bE1", "aE2", "bE2", "aR1", "bR1", "aR2", "bR2")
CSV_COLUMNS = (
    ("label", "seed", "system_dims")
    + INDICATOR_COLUMNS
    + tuple(f"bound_{e}" for e in ENDPOINTS)
    + ("bradley_neg_hi", "bradley_pos_lo")
    + tuple(f"computed_{e}" for e in ENDPOINTS)
    + ("minres_iterations", "timing", "n_violations")
)


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv_row(r: ExperimentReport, include_timing: bool) -> list[str]:
    b = r.theoretical_bounds
    ind = r.metadata.get("indicators", {})
    row = [r.label, _fmt(r.seed), "x".join(str(n) for n in r.system_dims)]
    row += [_fmt(ind.get(k)) for k in INDICATOR_COLUMNS]
    row += [_fmt(v) for v in b.as_tuple()]
    if isinstance(b, DspBounds):
        row += [_fmt(b.bradley_neg_hi), _fmt(b.bradley_pos_lo)]
    else:
        row += ["", ""]
    row += [_fmt(v) for v in r.computed_extremes]
    row += [_fmt(r.minres_iterations), _fmt(r.timing) if include_timing else "", str(len(r.violations))]
    return row


def emit_report(reports: Iterable[ExperimentReport], format: str, path, include_timing: bool = True) -> None:
    """Write reports as CSV (one row each) or versioned JSON.

    ``include_timing=False`` blanks the wall-clock column so that repeated
    runs give byte-identical files.
    """
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to emit")
    path = Path(path)
    try:
        if format == "csv":
            with path.open("w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(CSV_COLUMNS)
                for r in reports:
                    w.writerow(_csv_row(r, include_timing))
        elif format == "json":
            docs = [r.to_dict() for r in reports]
            if not include_timing:
                for d in docs:
                    d["timing"] = None
            payload = {"schema_version": SCHEMA_VERSION, "reports": docs}
            path.write_text(json.dumps(payload, indent=2) + "\n")
        else:
            raise ValueError(f"unknown format {format!r}")
    except OSError as exc:
        raise OSError(f"could not write report to {path}: {exc}") from exc


def load_reports(path) -> list[ExperimentReport]:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise OSError(f"could not read report from {path}: {exc}") from exc
    if payload.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {payload.get('schema_version')!r}")
    return [ExperimentReport.from_dict(d) for d in payload["reports"]]
