"""Explicit triangulations: the six-tetrahedron filled torus and its doubles.

Tetrahedra of the filled torus, in construction order:

0, 1  the two tetrahedra ABCD of the initial chain (edges AD_0, BC_0 shared)
2     DABC, opposite orientation, filling the notch at AD_0
      (glued to face ABD of 0 and face ACD of 1)
3     ABCD glued to the free faces ABC, BCD of 2
4     DABC, opposite orientation, filling the notch at BC_0
      (glued to face ABC of 0 and face BCD of 1)
5     ABCD glued to the free faces DAB, DAC of 4

Edge subscripts follow the construction: 1 and 2 for the remaining edges
of tetrahedra 0 and 1, 3 for the two inner edges (BC_3 inside 2 and 3,
AD_3 inside 4 and 5) and 4 for the two new boundary edges.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from geotorsion.triangulation import Triangulation, from_gluings, glue_by_labels

FILLED_TORUS_TETS = (
    ("A", "B", "C", "D"),
    ("A", "B", "C", "D"),
    ("D", "A", "B", "C"),
    ("A", "B", "C", "D"),
    ("D", "A", "B", "C"),
    ("A", "B", "C", "D"),
)

# (tet, face, to_tet, to_face); face i is opposite corner i
FILLED_TORUS_FACES = (
    (0, 2, 2, 3),  # ABD of 0 = DAB of 2
    (1, 1, 2, 2),  # ACD of 1 = DAC of 2
    (3, 3, 2, 0),  # ABC of 3 = ABC of 2
    (3, 0, 2, 1),  # BCD of 3 = DBC of 2
    (0, 3, 4, 0),  # ABC of 0 = ABC of 4
    (1, 0, 4, 1),  # BCD of 1 = DBC of 4
    (5, 2, 4, 3),  # ABD of 5 = DAB of 4
    (5, 1, 4, 2),  # ACD of 5 = DAC of 4
)

FILLED_TORUS_EDGE_NAMES = {
    "AB_1": (0, 0, 1),
    "AC_1": (0, 0, 2),
    "AD_0": (0, 0, 3),
    "BC_0": (0, 1, 2),
    "BD_1": (0, 1, 3),
    "CD_1": (0, 2, 3),
    "AB_2": (1, 0, 1),
    "AC_2": (1, 0, 2),
    "BD_2": (1, 1, 3),
    "CD_2": (1, 2, 3),
    "BC_3": (2, 2, 3),
    "AD_4": (3, 0, 3),
    "AD_3": (4, 0, 1),
    "BC_4": (5, 1, 2),
}

# row/column order of the factor table
FACTOR_ORDER = (
    "AC_1", "AB_1", "AD_4", "BD_1", "CD_1", "AD_0", "AC_2",
    "CD_2", "BC_4", "BD_2", "AB_2", "BC_0", "BC_3", "AD_3",
)

FACTOR_TABLE = (
    (1, 1, 0, 1, 1, 1, 0, 0, 1, 0, 0, 0, 0, 0),
    (1, 1, 1, 1, 1, 0, 0, 0, 1, 0, 0, 0, 0, 0),
    (0, 1, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 1, 0),
    (1, 1, 1, 1, 1, 0, 0, 0, 0, 0, 0, 1, 0, 0),
    (1, 1, 0, 1, 1, 1, 0, 0, 0, 0, 0, 1, 0, 0),
    (1, 0, 0, 0, 1, 1, 0, 0, 0, 1, 1, 2, -1, 0),
    (0, 0, 1, 0, 0, 0, 1, 1, 0, 1, 1, 1, 0, 0),
    (0, 0, 1, 0, 0, 0, 1, 1, 1, 1, 1, 0, 0, 0),
    (1, 1, 0, 0, 0, 0, 0, 1, 1, 1, 0, 0, 0, 1),
    (0, 0, 0, 0, 0, 1, 1, 1, 1, 1, 1, 0, 0, 0),
    (0, 0, 0, 0, 0, 1, 1, 1, 0, 1, 1, 1, 0, 0),
    (0, 0, 0, 1, 1, 2, 1, 0, 0, 0, 1, 1, 0, -1),
    (0, 0, 1, 0, 0, -1, 0, 0, 0, 0, 0, 0, 0, 0),
    (0, 0, 0, 0, 0, 0, 0, 0, 1, 0, 0, -1, 0, 0),
)

# The two meridians of the boundary torus are the loops A-D-A (AD_0, AD_4)
# and C-B-C (BC_0, BC_4); read off the construction, cross-checked by
# homology in the test suite.
MERIDIANS = (("AD_0", "AD_4"), ("BC_0", "BC_4"))


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    triangulation: Triangulation
    notes: str = ""
    meta: dict = field(default_factory=dict)

    def edge(self, name: str) -> int:
        return self.triangulation.edge_index(name)


def filled_torus() -> CatalogEntry:
    tets = FILLED_TORUS_TETS
    tri = from_gluings(
        tets,
        glue_by_labels(tets, FILLED_TORUS_FACES),
        FILLED_TORUS_EDGE_NAMES,
        FACTOR_ORDER[:12],
    )
    return CatalogEntry(
        "filled_torus",
        tri,
        notes="six tetrahedra on four vertices; boundary torus with 8 triangles",
        meta={"meridians": MERIDIANS},
    )


def meridian_halves() -> tuple[str, ...]:
    return tuple(name for pair in MERIDIANS for name in pair)


def meridian_pairs() -> list[tuple[str, str]]:
    """Level-2 edge sets made of one half of each of the two meridians.

    These are the only level-2 sets C (or D) whose invariants can be
    nonzero: the two inner rows of f3 are supported on AD_0/AD_4 and on
    BC_0/BC_4 respectively, so C and D must each hit both supports.
    """
    (a0, a1), (b0, b1) = MERIDIANS
    return [(a, b) for a in (a0, a1) for b in (b0, b1)]


def single_tetrahedron() -> CatalogEntry:
    tri = from_gluings([("A", "B", "C", "D")], [])
    return CatalogEntry("single_tetrahedron", tri, notes="one unglued tetrahedron; boundary sphere")


def two_tetrahedra() -> CatalogEntry:
    tets = [("A", "B", "C", "D"), ("B", "A", "C", "E")]
    tri = from_gluings(tets, glue_by_labels(tets, [(0, 3, 1, 3)]))
    return CatalogEntry("two_tetrahedra", tri, notes="two tetrahedra sharing face ABC")


# Boundary self-maps for gluing two filled tori, named by rotation order.
# The boundary torus admits simplicial automorphisms of order 1, 2, 3 and 6
# only; each preset takes the first one of its order in enumeration order.
GLUED_PRESETS = {"identity": 1, "half-turn": 2, "third-turn": 3, "sixth-turn": 6}


def _compose(a: dict, b: dict) -> dict:
    out = {}
    for face, (img, cm) in a.items():
        img2, cm2 = b[img]
        out[face] = (img2, {c: cm2[cm[c]] for c in cm})
    return out


def automorphism_order(aut: dict, limit: int = 64) -> int:
    ident = {face: (face, {c: c for c in cm}) for face, (_, cm) in aut.items()}
    power, n = aut, 1
    while power != ident:
        if n >= limit:
            raise ValueError("automorphism order exceeds the search limit")
        power, n = _compose(power, aut), n + 1
    return n


def glued_pair(preset: str = "third-turn"):
    """Two filled tori glued along their boundaries by a preset self-map.

    The second copy is the mirror image, so an orientation-preserving
    self-map of the boundary yields an orientation-reversing gluing.
    Returns a CatalogEntry whose meta holds the GluedManifold.
    """
    from geotorsion.glueing import boundary_automorphisms, glue, mirror_pairs
    from geotorsion.triangulation import mirror

    if preset not in GLUED_PRESETS:
        raise ValueError(f"unknown preset {preset!r}; choose from {sorted(GLUED_PRESETS)}")
    torus = filled_torus().triangulation
    want = GLUED_PRESETS[preset]
    aut = next(a for a in boundary_automorphisms(torus) if automorphism_order(a) == want)
    glued = glue(torus, mirror(torus), mirror_pairs(torus, aut))
    vertex_map = {}
    for (t, f), ((t2, _), cm) in aut.items():
        for c, c2 in cm.items():
            vertex_map[torus.tetrahedra[t][c]] = torus.tetrahedra[t2][c2]
    return CatalogEntry(
        f"glued_pair[{preset}]",
        glued.closed,
        notes=f"two filled tori glued by a boundary self-map of order {want}",
        meta={"glued": glued, "order": want, "vertex_map": dict(sorted(vertex_map.items()))},
    )


CATALOG = {
    "filled_torus": filled_torus,
    "single_tetrahedron": single_tetrahedron,
    "two_tetrahedra": two_tetrahedra,
    **{f"glued_pair[{p}]": (lambda p=p: glued_pair(p)) for p in GLUED_PRESETS},
}


def factor_table(tri: Triangulation, real, order=FACTOR_ORDER):
    """f3 divided entrywise by the Jacobian of the tetrahedron ABCD.

    Meaningful for triangulations on the four vertices A, B, C, D, where
    every tetrahedron's Jacobian is +/- that of ABCD.  Returns (rounded
    integer table, max residual from rounding).
    """
    import numpy as np

    from geotorsion.complexes import full_f3
    from geotorsion.geometry import tet_geometry
    from geotorsion.triangulation import LOCAL_EDGE_INDEX

    ref = tet_geometry([real[v] for v in "ABCD"]).jacobian
    pos = {v: i for i, v in enumerate("ABCD")}
    full = np.asarray(full_f3(tri, real), dtype=float)
    idx = [tri.edge_index(n) for n in order]

    def local(e):
        a, b = sorted(pos[v] for v in tri.edges[e].ends)
        return LOCAL_EDGE_INDEX[(a, b)]

    ratio = np.empty((len(idx), len(idx)))
    for r, i in enumerate(idx):
        for c, j in enumerate(idx):
            ratio[r, c] = full[i, j] / float(ref[local(i), local(j)])
    table = np.rint(ratio).astype(int)
    return table, float(np.abs(ratio - table).max())
