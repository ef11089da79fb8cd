"""Matrix, snapshot, selection and projector files.

Dense matrices are stored either in MatrixMarket array format
(``.mtx``, column-major) or as headerless CSV with one row per line. All
writers use 17 significant digits so values round-trip exactly.
"""

import json
from pathlib import Path

import numpy as np

from .linalg import as_matrix

__all__ = [
    "read_matrix_market",
    "write_matrix_market",
    "read_csv_matrix",
    "write_csv_matrix",
    "read_matrix",
    "write_matrix",
    "read_snapshots",
    "write_snapshots",
    "write_selection_json",
    "read_selection_json",
    "export_projector",
    "write_json",
]

MM_HEADER = "%%MatrixMarket matrix array real general"


def write_matrix_market(path, A, comment=None):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    lines = [MM_HEADER]
    if comment:
        lines += [f"% {line}" for line in str(comment).splitlines()]
    lines.append(f"{A.shape[0]} {A.shape[1]}")
    lines += [f"{v:.17g}" for v in A.ravel(order="F")]
    Path(path).write_text("\n".join(lines) + "\n")


def read_matrix_market(path):
    with open(path) as fh:
        header = fh.readline().strip()
        tokens = header.lower().split()
        if tokens[:2] != ["%%matrixmarket", "matrix"] or "array" not in tokens:
            raise ValueError(f"{path}: not a MatrixMarket array file")
        if "real" not in tokens or "general" not in tokens:
            raise ValueError(f"{path}: only 'real general' arrays are supported")
        line = fh.readline()
        while line.startswith("%") or not line.strip():
            line = fh.readline()
        rows, cols = (int(t) for t in line.split()[:2])
        data = np.array(fh.read().split(), dtype=float)
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return as_matrix(data.reshape((rows, cols), order="F"), str(path))


def write_csv_matrix(path, A):
    A = np.asarray(A, dtype=float)
    if A.ndim == 1:
        A = A[:, None]
    np.savetxt(path, A, delimiter=",", fmt="%.17g")


def read_csv_matrix(path):
    return as_matrix(np.loadtxt(path, delimiter=",", ndmin=2), str(path))


def read_matrix(path):
    """Read ``.mtx`` as MatrixMarket, anything else as CSV."""
    path = Path(path)
    if path.suffix.lower() == ".mtx":
        return read_matrix_market(path)
    return read_csv_matrix(path)


def write_matrix(path, A):
    path = Path(path)
    if path.suffix.lower() == ".mtx":
        write_matrix_market(path, A)
    else:
        write_csv_matrix(path, A)


def _sidecar(path):
    path = Path(path)
    return path.with_name(path.name + ".json")


def write_snapshots(path, snaps):
    """Write the snapshot matrix and a ``<file>.json`` sidecar of coordinates."""
    write_matrix(path, snaps.matrix)
    write_json(_sidecar(path), {"coordinates": [float(t) for t in snaps.times_or_params]})


def read_snapshots(path):
    from .pod import SnapshotSet

    X = read_matrix(path)
    side = _sidecar(path)
    if side.exists():
        coords = np.asarray(json.loads(side.read_text())["coordinates"], dtype=float)
    else:
        coords = np.arange(X.shape[1], dtype=float)
    return SnapshotSet(X, coords)


def write_json(path, obj):
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def write_selection_json(path, report):
    write_json(path, report.to_dict())


def read_selection_json(path):
    """Return ``(SelectionOperator, dict)`` from a selection JSON file."""
    from .selection import SelectionOperator

    data = json.loads(Path(path).read_text())
    sel = SelectionOperator(np.asarray(data["indices"], dtype=np.intp) - 1, int(data["n"]))
    return sel, data


def export_projector(outdir, proj):
    """Write basis, interpolation matrix and selected indices plus a manifest."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    write_matrix_market(out / "basis.mtx", proj.basis)
    write_matrix_market(out / "interp_matrix.mtx", proj.interp_matrix)
    write_matrix_market(out / "indices.mtx", proj.selection.indices + 1.0, comment="one-based row indices")
    n, m = proj.basis.shape
    manifest = {
        "n": n,
        "m": m,
        "indices": [int(i) + 1 for i in proj.selection.indices],
        "c": float(proj.c),
        "files": {"basis": "basis.mtx", "interp_matrix": "interp_matrix.mtx", "indices": "indices.mtx"},
    }
    write_json(out / "manifest.json", manifest)
    return manifest
