import itertools

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geotorsion.catalog import FILLED_TORUS_TETS, filled_torus, single_tetrahedron, two_tetrahedra
from geotorsion.triangulation import (
    FACE_CORNERS,
    LOCAL_EDGES,
    LabelMismatch,
    NonManifoldGluing,
    OrientationClash,
    RepeatedVertex,
    TriangulationError,
    from_gluings,
    glue_by_labels,
    isomorphic,
    mirror,
    relabel,
)


def naive_edge_classes(tri):
    """Orbits of tetrahedron edges under gluings, by repeated sweeping."""
    label = {(t, e): (t, e) for t in range(tri.n_tets) for e in LOCAL_EDGES}
    changed = True
    while changed:
        changed = False
        for (t, f), g in tri.partner.items():
            cm = g.corner_dict()
            for a, b in itertools.combinations(FACE_CORNERS[f], 2):
                x = (t, (a, b))
                y = (g.to_tet, tuple(sorted((cm[a], cm[b]))))
                lo = min(label[x], label[y])
                for k in (x, y):
                    if label[k] != lo:
                        old = label[k]
                        for kk, v in label.items():
                            if v == old:
                                label[kk] = lo
                        changed = True
    groups = {}
    for k, v in label.items():
        groups.setdefault(v, set()).add(k)
    return sorted(map(frozenset, groups.values()), key=min)


def test_filled_torus_counts(torus):
    assert torus.counts() == (0, 4, 2, 12, 6)
    surf = torus.boundary_surface()
    assert len(surf.triangles) == 8
    assert surf.euler_characteristic == 0
    assert surf.genus == 1


def test_edge_classes_match_sweep(torus):
    ours = sorted((frozenset((t, e) for t, e, _ in edge.incidences) for edge in torus.edges), key=min)
    assert ours == naive_edge_classes(torus)


def test_inner_edges_are_named(torus):
    assert {torus.edges[i].name for i in torus.inner_edges} == {"BC_3", "AD_3"}


def test_json_round_trip(torus):
    data = torus.to_json()
    back = from_gluings(data["tetrahedra"], data["gluings"], data["edge_names"], data["boundary_order"])
    assert back.edge_names == torus.edge_names
    assert back.boundary_order == torus.boundary_order
    assert isomorphic(back, torus)


def test_relabel_is_isomorphic(torus):
    other = relabel(torus, {"A": "P", "B": "Q", "C": "R", "D": "S"})
    assert isomorphic(other, torus)
    assert set(other.vertices) == set("PQRS")


def test_mirror_is_isomorphic_with_reversed_orientation(torus):
    m = mirror(torus)
    assert isomorphic(m, torus)
    assert set(m.edge_names) == set(torus.edge_names)
    names = lambda t: [t.edges[i].name for i in t.boundary_order]
    assert names(m) == names(torus)
    # every tetrahedron is reversed
    assert all(a[:2] == b[1::-1] and a[2:] == b[2:] for a, b in zip(m.tetrahedra, torus.tetrahedra))


def test_not_isomorphic_to_smaller():
    assert not isomorphic(single_tetrahedron().triangulation, two_tetrahedra().triangulation)


def test_repeated_vertex():
    with pytest.raises(RepeatedVertex):
        from_gluings([("A", "A", "C", "D")], [])


def test_double_gluing_rejected():
    tets = [("A", "B", "C", "D"), ("B", "A", "C", "D"), ("B", "A", "C", "D")]
    with pytest.raises(NonManifoldGluing):
        from_gluings(tets, glue_by_labels(tets, [(0, 3, 1, 3), (0, 3, 2, 3)]))


def test_self_gluing_rejected():
    with pytest.raises(NonManifoldGluing):
        from_gluings([("A", "B", "C", "D")], [{"tet": 0, "face": 0, "to_tet": 0, "to_face": 0, "corner_map": [0, 1, 2]}])


def test_orientation_clash_has_hint():
    tets = [("A", "B", "C", "D"), ("A", "B", "C", "E")]
    with pytest.raises(OrientationClash, match="re-order"):
        from_gluings(tets, glue_by_labels(tets, [(0, 3, 1, 3)]))


def test_label_mismatch():
    tets = [("A", "B", "C", "D"), ("B", "A", "E", "F")]
    with pytest.raises(LabelMismatch):
        from_gluings(tets, [{"tet": 0, "face": 3, "to_tet": 1, "to_face": 3, "corner_map": [0, 1, 2]}])


def test_unknown_boundary_edge_in_order(torus):
    with pytest.raises(TriangulationError, match="unknown edge"):
        from_gluings(FILLED_TORUS_TETS, torus.gluings, None, ["nope"])


def test_partial_boundary_order_is_completed():
    tri = two_tetrahedra().triangulation
    first = tri.edges[tri.boundary_order[-1]].name
    again = from_gluings(tri.tetrahedra, tri.gluings, None, [first])
    assert again.edges[again.boundary_order[0]].name == first
    assert sorted(again.boundary_order) == sorted(tri.boundary_order)


def test_closed_double_has_no_boundary(glued_presets):
    closed = glued_presets["third-turn"].triangulation
    assert closed.is_closed
    assert closed.n_tets == 12
    assert not closed.boundary_order


@settings(max_examples=30, deadline=None)
@given(st.permutations(list(range(6))), st.permutations(list("ABCD")))
def test_isomorphic_under_tet_and_label_shuffles(perm, letters):
    base = filled_torus().triangulation
    rename = dict(zip("ABCD", letters))
    tets = [None] * 6
    for old, new in enumerate(perm):
        tets[new] = [rename[v] for v in base.tetrahedra[old]]
    gl = [
        {"tet": perm[g.tet], "face": g.face, "to_tet": perm[g.to_tet], "to_face": g.to_face, "corner_map": list(g.corner_map)}
        for g in base.gluings
    ]
    shuffled = from_gluings(tets, gl)
    assert isomorphic(shuffled, base)
    assert shuffled.counts() == base.counts()
