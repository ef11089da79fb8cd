import json

import numpy as np
import pytest

from deimkit.io import (
    export_projector,
    read_matrix,
    read_selection_json,
    read_snapshots,
    write_matrix,
    write_selection_json,
    write_snapshots,
)
from deimkit.linalg import haar_orthonormal
from deimkit.pod import SnapshotSet
from deimkit.projector import build_projector
from deimkit.selection import QdeimrConfig, qdeim_select, qdeimr_select


@pytest.mark.parametrize("name", ["a.mtx", "a.csv"])
def test_matrix_roundtrip(tmp_path, name):
    A = np.random.default_rng(0).standard_normal((7, 3)) * 1e-7
    write_matrix(tmp_path / name, A)
    assert np.array_equal(read_matrix(tmp_path / name), A)


def test_matrix_market_column_major(tmp_path):
    p = tmp_path / "b.mtx"
    p.write_text("%%MatrixMarket matrix array real general\n% c\n2 2\n1\n2\n3\n4\n")
    assert np.array_equal(read_matrix(p), [[1.0, 3.0], [2.0, 4.0]])


@pytest.mark.parametrize("text", ["%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 1\n",
                                  "%%MatrixMarket matrix array real general\n2 2\n1\n2\n",
                                  "%%MatrixMarket matrix array real general\n1 1\nnan\n"])
def test_bad_matrix_market(tmp_path, text):
    p = tmp_path / "c.mtx"
    p.write_text(text)
    with pytest.raises(ValueError):
        read_matrix(p)


def test_snapshots_roundtrip(tmp_path):
    s = SnapshotSet(np.arange(6.0).reshape(2, 3), np.array([0.1, 0.2, 0.3]))
    write_snapshots(tmp_path / "s.csv", s)
    r = read_snapshots(tmp_path / "s.csv")
    assert np.array_equal(r.matrix, s.matrix)
    assert np.array_equal(r.times_or_params, s.times_or_params)


def test_selection_json_one_based(tmp_path):
    U = haar_orthonormal(300, 6, 1)
    rep = qdeimr_select(U, QdeimrConfig(seed=0))
    write_selection_json(tmp_path / "sel.json", rep)
    data = json.loads((tmp_path / "sel.json").read_text())
    assert data["indices"] == [int(i) + 1 for i in rep.selection.indices]
    sel, _ = read_selection_json(tmp_path / "sel.json")
    assert sel == rep.selection


def test_export_projector(tmp_path):
    U = haar_orthonormal(40, 4, 2)
    proj = build_projector(U, qdeim_select(U))
    export_projector(tmp_path / "p", proj)
    assert np.array_equal(read_matrix(tmp_path / "p" / "interp_matrix.mtx"), proj.interp_matrix)
    idx = read_matrix(tmp_path / "p" / "indices.mtx").ravel().astype(int)
    assert list(idx - 1) == list(proj.selection.indices)
