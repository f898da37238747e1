"""Matrix Market files and the JSON manifest for block systems.

A manifest looks like::

    {"N": 2, "sizes": [n0, n1, n2],
     "diag": ["A0.mtx", "A1.mtx", "A2.mtx"],
     "offdiag": ["B1.mtx", "B2.mtx"]}

with paths relative to the manifest's directory.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import scipy.io
import scipy.sparse as sp

from .config import DEFAULT, Tolerances
from .errors import ShapeMismatch
from .system import BlockTridiagonalSystem, assemble

__all__ = ["load_system", "read_matrix", "read_vector", "save_system", "write_matrix", "write_vector"]


def read_matrix(path):
    """Dense array for array-format files, CSR for coordinate files."""
    if not Path(path).is_file():
        raise FileNotFoundError(f"{path}: no such file")
    try:
        m = scipy.io.mmread(str(path))
    except (OSError, ValueError) as exc:
        raise type(exc)(f"{path}: {exc}") from exc
    return m.tocsr() if sp.issparse(m) else np.asarray(m, dtype=float)


def write_matrix(path, m, symmetric: bool | None = None) -> None:
    """Sparse inputs are written in coordinate format, dense ones as arrays.

    ``symmetric=True`` stores only the lower triangle; by default symmetry
    is detected exactly.
    """
    if symmetric is None:
        symmetric = m.shape[0] == m.shape[1] and (
            (m != m.T).nnz == 0 if sp.issparse(m) else np.array_equal(m, np.asarray(m).T)
        )
    try:
        scipy.io.mmwrite(str(path), m, symmetry="symmetric" if symmetric else "general")
    except OSError as exc:
        raise OSError(f"{path}: {exc}") from exc


def read_vector(path) -> np.ndarray:
    v = read_matrix(path)
    v = v.toarray() if sp.issparse(v) else v
    if v.ndim != 2 or v.shape[1] != 1:
        raise ShapeMismatch(f"{path}: expected a single column, got shape {v.shape}")
    return v[:, 0]


def write_vector(path, v) -> None:
    write_matrix(path, np.asarray(v, dtype=float).reshape(-1, 1), symmetric=False)


def save_system(system: BlockTridiagonalSystem, directory, stem: str = "block") -> Path:
    """Write all blocks and a manifest into ``directory``; return the manifest path."""
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    diag, off = [], []
    for k, A in enumerate(system.diag_blocks):
        name = f"{stem}_A{k}.mtx"
        write_matrix(d / name, A)
        diag.append(name)
    for k, B in enumerate(system.offdiag_blocks, start=1):
        name = f"{stem}_B{k}.mtx"
        write_matrix(d / name, B, symmetric=False)
        off.append(name)
    manifest = {"N": system.N, "sizes": list(system.sizes), "diag": diag, "offdiag": off}
    path = d / f"{stem}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def load_system(manifest_path, validate: bool = True, tol: Tolerances = DEFAULT) -> BlockTridiagonalSystem:
    """Read a manifest and its blocks; block assumptions are checked unless ``validate=False``."""
    p = Path(manifest_path)
    try:
        manifest = json.loads(p.read_text())
    except OSError as exc:
        raise OSError(f"{p}: {exc}") from exc
    N, sizes = int(manifest["N"]), [int(n) for n in manifest["sizes"]]
    if len(sizes) != N + 1 or len(manifest["diag"]) != N + 1 or len(manifest["offdiag"]) != N:
        raise ShapeMismatch(f"{p}: block counts do not match N = {N}")
    diag = [read_matrix(p.parent / f) for f in manifest["diag"]]
    off = [read_matrix(p.parent / f) for f in manifest["offdiag"]]
    for k, A in enumerate(diag):
        if A.shape != (sizes[k], sizes[k]):
            raise ShapeMismatch(f"{p}: A_{k} has shape {A.shape}, manifest says {sizes[k]}")
    return assemble(diag, off, validate=validate, tol=tol)
