import numpy as np
import pytest

from geotorsion.catalog import (
    CATALOG,
    GLUED_PRESETS,
    MERIDIANS,
    FACTOR_TABLE,
    FACTOR_ORDER,
    automorphism_order,
    factor_table,
    glued_pair,
    meridian_pairs,
)
from geotorsion.geometry import Realization
from geotorsion.glueing import boundary_automorphisms
from geotorsion.triangulation import FACE_CORNERS


def oriented_edge_vector(tri, names_with_signs):
    v = np.zeros(len(tri.edges))
    for name, sgn in names_with_signs:
        v[tri.edge_index(name)] += sgn
    return v


def face_boundaries(tri, faces):
    """Rows of the cellular boundary map on the given faces, edges oriented by sorted ends."""
    rows = []
    for t, f in faces:
        a, b, c = FACE_CORNERS[f]
        row = np.zeros(len(tri.edges))
        for x, y in ((a, b), (b, c), (c, a)):
            e = tri.tet_edge(t, x, y)
            start = tri.tetrahedra[t][x]
            row[e] += 1 if start == tri.edges[e].ends[0] else -1
        rows.append(row)
    return np.array(rows)


def bounds(cycle, d2) -> bool:
    return np.linalg.matrix_rank(np.vstack([d2, cycle])) == np.linalg.matrix_rank(d2)


def meridian_cycles(tri):
    return [oriented_edge_vector(tri, [(a, 1), (b, -1)]) for a, b in MERIDIANS]


def test_meridians_are_cycles(torus):
    for z in meridian_cycles(torus):
        for v in torus.vertices:
            incidence = sum(z[i] * ((e.ends[1] == v) - (e.ends[0] == v)) for i, e in enumerate(torus.edges))
            assert incidence == 0


def test_meridians_bound_inside_but_not_on_boundary(torus):
    all_faces = [(t, f) for t in range(torus.n_tets) for f in range(4)]
    d2_solid = face_boundaries(torus, all_faces)
    d2_surface = face_boundaries(torus, torus.unglued_faces())
    for z in meridian_cycles(torus):
        assert bounds(z, d2_solid)
        assert not bounds(z, d2_surface)
    # the two meridians are parallel curves on the torus
    z1, z2 = meridian_cycles(torus)
    assert bounds(z1 - z2, d2_surface) or bounds(z1 + z2, d2_surface)


def test_non_meridian_loop_survives(torus):
    # A-B-A through AB_1 and AB_2 is a longitude-type loop: nontrivial in the solid torus
    all_faces = [(t, f) for t in range(torus.n_tets) for f in range(4)]
    z = oriented_edge_vector(torus, [("AB_1", 1), ("AB_2", -1)])
    assert not bounds(z, face_boundaries(torus, all_faces))


def test_meridian_pairs_shape():
    pairs = meridian_pairs()
    assert len(pairs) == 4
    assert all(a.startswith("AD") and b.startswith("BC") for a, b in pairs)


@pytest.mark.parametrize("seed", range(5))
def test_factor_table(torus, seed):
    table, residual = factor_table(torus, Realization.random(torus.vertices, seed))
    assert (table == np.array(FACTOR_TABLE)).all()
    assert residual < 1e-8


def test_table_order_covers_all_edges(torus):
    assert set(FACTOR_ORDER) == set(torus.edge_names)


def test_boundary_automorphism_orders(torus):
    auts = boundary_automorphisms(torus)
    assert len(auts) == 24
    assert sorted({automorphism_order(a) for a in auts}) == [1, 2, 3, 6]


@pytest.mark.parametrize("preset", sorted(GLUED_PRESETS))
def test_glued_presets_close_up(preset):
    entry = glued_pair(preset)
    assert entry.triangulation.is_closed
    assert entry.meta["order"] == GLUED_PRESETS[preset]


def test_catalog_entries_build():
    for name, make in CATALOG.items():
        tri = make().triangulation
        assert tri.n_tets >= 1, name


def test_unknown_preset():
    with pytest.raises(ValueError, match="unknown preset"):
        glued_pair("quarter-turn")


def test_factor_table_by_incidence(torus):
    """Each tetrahedron holding both edges contributes its orientation sign."""
    from geotorsion.numeric import permutation_parity
    from geotorsion.triangulation import LOCAL_EDGES

    pos = {n: k for k, n in enumerate(FACTOR_ORDER)}
    table = np.zeros((14, 14), dtype=int)
    for t, tet in enumerate(torus.tetrahedra):
        sign = permutation_parity(list(tet))
        names = [torus.edges[torus.edge_of[(t, e)]].name for e in LOCAL_EDGES]
        for a in names:
            for b in names:
                table[pos[a], pos[b]] += sign
    assert (table == np.array(FACTOR_TABLE)).all()
