import itertools

import numpy as np
import pytest

from geotorsion.complexes import (
    KindMismatch,
    SubsetCardinalityMismatch,
    build_complex,
    composition_residuals,
    full_f3,
    matrix_to_csv,
)
from geotorsion.geometry import Realization
from geotorsion.moves import apply_interior_move


def boundary_pairs(tri, k, limit=12):
    subsets = list(itertools.combinations(tri.boundary_order, k))
    pairs = list(itertools.product(subsets, subsets))
    step = max(1, len(pairs) // limit)
    return pairs[::step]


def assert_exact(cx, tol=1e-9):
    res = composition_residuals(cx)
    assert res and max(res.values()) < tol, res
    # the transposed identities
    mats = [np.asarray(m, dtype=float) for m in cx.matrices()]
    for a, b in zip(mats, mats[1:]):
        if a.size and b.size:
            scale = np.abs(a).max() * np.abs(b).max()
            assert np.abs(a.T @ b.T).max() / scale < tol


@pytest.mark.parametrize("k", [0, 1, 2])
def test_boundary_complex_exact(torus, torus_real, k):
    for C, D in boundary_pairs(torus, k):
        assert_exact(build_complex(torus, torus_real, "boundary", C, D))


def test_variant_with_inner_vertex_exact(torus, torus_real):
    res = apply_interior_move(torus, torus_real, "1-4", {"tet": 2}, seed=1)
    tri, real = res.triangulation, res.realization
    assert tri.inner_vertices
    for C, D in boundary_pairs(tri, 2):
        assert_exact(build_complex(tri, real, "boundary", C, D))


@pytest.mark.parametrize("preset", ["identity", "third-turn"])
def test_closed_complex_exact_and_symmetric(glued_presets, preset):
    tri = glued_presets[preset].triangulation
    real = Realization.random(tri.vertices, 2)
    cx = build_complex(tri, real, "closed")
    assert set(composition_residuals(cx)) == {"f2f1", "f3f2", "f4f3", "f5f4"}
    assert_exact(cx)
    f3 = np.asarray(cx.f3, dtype=float)
    assert np.abs(f3 - f3.T).max() / np.abs(f3).max() < 1e-9


def test_boundary_f3_rows_and_columns(torus, torus_real):
    C = torus.boundary_order[:2]
    D = torus.boundary_order[3:5]
    cx = build_complex(torus, torus_real, "boundary", C, D)
    assert cx.f3.shape == (4, 4)
    assert cx.l_edges == tuple(torus.inner_edges) + tuple(C)
    assert cx.w_edges == tuple(torus.inner_edges) + tuple(D)
    full = full_f3(torus, torus_real)
    assert np.allclose(cx.f3, full[np.ix_(cx.w_edges, cx.l_edges)])


def test_kind_errors(torus, torus_real, glued_presets):
    with pytest.raises(KindMismatch):
        build_complex(torus, torus_real, "closed")
    closed = glued_presets["identity"].triangulation
    with pytest.raises(KindMismatch):
        build_complex(closed, Realization.random(closed.vertices, 0), "boundary")
    with pytest.raises(SubsetCardinalityMismatch):
        build_complex(torus, torus_real, "boundary", torus.boundary_order[:1], ())
    with pytest.raises(ValueError, match="inner edge"):
        build_complex(torus, torus_real, "boundary", torus.inner_edges[:1], torus.boundary_order[:1])


def test_matrix_csv():
    text = matrix_to_csv(np.eye(2), ["r0", "r1"], ["c0", "c1"])
    assert text.splitlines()[0] == ",c0,c1"
    assert len(text.splitlines()) == 3
