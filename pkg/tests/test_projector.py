import numpy as np
import pytest

from deimkit.exceptions import SingularMatrixError
from deimkit.linalg import haar_orthonormal
from deimkit.projector import apply, build_projector, error_split
from deimkit.selection import condition_number, deim_select, qdeim_select


@pytest.fixture
def basis():
    return haar_orthonormal(120, 7, 0)


def test_identity_block_exact(basis):
    proj = build_projector(basis, qdeim_select(basis))
    idx = proj.selection.indices
    assert np.array_equal(proj.interp_matrix[idx], np.eye(7))


def test_interpolates_selected_entries(basis):
    proj = build_projector(basis, deim_select(basis))
    f = np.random.default_rng(1).standard_normal(120)
    idx = proj.selection.indices
    assert np.array_equal(apply(proj, f)[idx], f[idx])


def test_reproduces_range(basis):
    proj = build_projector(basis, qdeim_select(basis))
    a = np.random.default_rng(2).standard_normal((7, 3))
    F = basis @ a
    assert np.linalg.norm(apply(proj, F) - F) <= 1e-12 * np.linalg.norm(F)


def test_idempotent(basis):
    proj = build_projector(basis, qdeim_select(basis))
    f = np.random.default_rng(3).standard_normal(120)
    once = proj.apply(f)
    assert np.linalg.norm(proj.apply(once) - once) <= 1e-12 * np.linalg.norm(once)


def test_reused_factor_matches_fresh(basis):
    sel, qr = qdeim_select(basis, return_factor=True)
    a, b = build_projector(basis, sel, qr), build_projector(basis, sel)
    assert np.allclose(a.interp_matrix, b.interp_matrix, atol=1e-12)
    assert a.c == pytest.approx(b.c, rel=1e-10)


def test_c_matches_dense_oracle(basis):
    sel = qdeim_select(basis)
    proj = build_projector(basis, sel)
    dense = np.linalg.norm(np.linalg.inv(basis[sel.indices]), 2)
    assert proj.c == pytest.approx(dense, rel=1e-10)
    assert proj.c == pytest.approx(condition_number(basis, sel), rel=1e-12)


def test_error_bound():
    rng = np.random.default_rng(4)
    for s in range(50):
        U = haar_orthonormal(80, 5, s)
        proj = build_projector(U, qdeim_select(U))
        split = error_split(proj, rng.standard_normal(80))
        assert split.deim_err <= split.bound * (1 + 1e-10)
        assert split.orth_err <= split.deim_err * (1 + 1e-12)


def test_singular_selection():
    U = np.zeros((5, 2))
    U[0, 0] = U[1, 1] = 1.0
    with pytest.raises(SingularMatrixError):
        build_projector(U, [0, 2])


def test_shape_checks(basis):
    with pytest.raises(ValueError):
        build_projector(basis, [0, 1])
    proj = build_projector(basis, qdeim_select(basis))
    with pytest.raises(ValueError):
        apply(proj, np.ones(5))
