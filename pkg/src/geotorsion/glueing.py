"""Gluing two manifolds along a common boundary and the composition formula

    I(M) = c * sum over (C1, D1) of eps * I_{C1,D1}(M1) * I_{E-C1, E-D1}(M2)

where E holds the surface edges left over by the vertex ordering (each
vertex after a starting triangle joined to three earlier ones), eps is
(-1)^(sum of positions of C1 and D1 in E) and c depends only on the
surface and its vertex coordinates.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from geotorsion.complexes import build_f1
from geotorsion.geometry import Realization, edge_length, oriented_volume
from geotorsion.numeric import backend, permutation_parity, reorder_sign
from geotorsion.torsion import VANISHING_THRESHOLD, InvariantVector, invariant_closed, invariant_vector
from geotorsion.triangulation import (
    FACE_CORNERS,
    SurfaceTriangulation,
    Triangulation,
    TriangulationError,
    from_gluings,
    gluing_from_corners,
    relabel,
)


class ConditionUnsatisfied(ValueError):
    def __init__(self, message: str, stuck: Sequence[str] = ()):
        super().__init__(message)
        self.stuck = tuple(stuck)


class BoundaryMismatch(ValueError):
    pass


class OrientationMismatch(ValueError):
    pass


class IncompatibleVectors(ValueError):
    pass


# -- vertex ordering -------------------------------------------------------

@dataclass(frozen=True)
class GlueingData:
    surface: SurfaceTriangulation
    order: tuple[str, ...]
    witnesses: tuple[tuple[str, tuple[str, ...], tuple[str, ...]], ...]  # (vertex, edge names, earlier vertices)
    excluded: tuple[str, ...]
    usable: tuple[str, ...]

    @property
    def s(self) -> int:
        return len(self.excluded)

    def ends(self, name: str) -> tuple[str, str]:
        return dict(self.surface.edges)[name]

    def to_json(self) -> dict:
        return {
            "order": list(self.order),
            "witnesses": {v: list(names) for v, names, _ in self.witnesses},
            "excluded": list(self.excluded),
            "usable": list(self.usable),
            "s": self.s,
        }


def _first_edge(surface: SurfaceTriangulation, a: str, b: str) -> str | None:
    for name, ends in surface.edges:
        if set(ends) == {a, b}:
            return name
    return None


def check_condition(surface: SurfaceTriangulation) -> GlueingData:
    """Greedy three-predecessor vertex ordering of a surface.

    The first three vertices (in the surface's vertex order) that are
    pairwise joined form the starting triangle; then each step adds the
    first remaining vertex joined to three distinct earlier ones, using
    its first three such edges.  Failure is reported for this greedy scan
    only.
    """
    verts = list(surface.vertices)
    if len(verts) < 3:
        raise ConditionUnsatisfied("a surface needs at least three vertices", verts)
    start = None
    for a, b, c in itertools.combinations(verts, 3):
        edges = [_first_edge(surface, x, y) for x, y in ((a, b), (b, c), (c, a))]
        if all(edges):
            start = (a, b, c), edges
            break
    if start is None:
        raise ConditionUnsatisfied("no three vertices of the surface form a triangle", verts)
    order = list(start[0])
    excluded = list(start[1])
    witnesses = [(order[2], tuple(start[1]), tuple(order[:2]))]
    pending = [v for v in verts if v not in order]
    while pending:
        for v in pending:
            names, seen = [], []
            for name, other in surface.neighbours(v):
                if other in order and other not in seen:
                    names.append(name)
                    seen.append(other)
                    if len(names) == 3:
                        break
            if len(names) == 3:
                break
        else:
            raise ConditionUnsatisfied(
                f"vertices {pending} are each joined to fewer than three of {order}", pending
            )
        pending.remove(v)
        order.append(v)
        excluded.extend(names)
        witnesses.append((v, tuple(names), tuple(seen)))
    usable = tuple(n for n in surface.edge_names() if n not in set(excluded))
    return GlueingData(surface, tuple(order), tuple(witnesses), tuple(excluded), usable)


# -- the standard surface ---------------------------------------------------

def _midpoint_labels(g: int) -> list[str]:
    pairs = [("A", "B")] + [(chr(ord("E") + 2 * i), chr(ord("F") + 2 * i)) for i in range(g - 1)]
    out = []
    for x, y in pairs:
        out += [x, y, x, y]
    return out


def standard_boundary(g: int) -> SurfaceTriangulation:
    """The 4g-gon surface: corners D, centre C, side midpoints A, B, A, B, E, F, ...

    Triangles: (C, m_k, m_k+1) around the centre and (m_k, D, m_k+1) at each
    corner.  Sides a_i, a_i^-1 (and b_i, b_i^-1) are identified, so their
    halves pair up into single edges.
    """
    if g < 1:
        raise ValueError("genus must be at least 1")
    n = 4 * g
    mids = _midpoint_labels(g)
    # half-sides: (k, 0) from corner k to midpoint k, (k, 1) from midpoint k to corner k+1
    half_class = {}
    for i in range(g):
        for s, s_inv in ((4 * i, 4 * i + 2), (4 * i + 1, 4 * i + 3)):
            # s runs corner s -> s+1; s_inv runs the same curve backwards
            half_class[(s, 0)] = half_class[(s_inv, 1)] = ("side", s, 0)
            half_class[(s, 1)] = half_class[(s_inv, 0)] = ("side", s, 1)
    raw = []  # (key, ends)
    key_of = {}

    def edge(key, a, b):
        if key not in key_of:
            key_of[key] = len(raw)
            raw.append((key, tuple(sorted((a, b)))))
        return key

    triangles = []
    for k in range(n):
        m0, m1 = mids[k], mids[(k + 1) % n]
        chord = edge(("chord", k), m0, m1)
        spoke0 = edge(("spoke", k), "C", m0)
        spoke1 = edge(("spoke", (k + 1) % n), "C", m1)
        triangles.append((("C", m0, m1), (spoke0, chord, spoke1)))
        h0 = edge(half_class[(k, 1)], m0, "D")
        h1 = edge(half_class[((k + 1) % n, 0)], "D", m1)
        triangles.append(((m0, "D", m1), (h0, h1, chord)))
    counters: dict = {}
    names = {}
    for key, (a, b) in raw:
        c = counters.get((a, b), 0)
        counters[(a, b)] = c + 1
        names[key] = f"{a}{b}_{c}"
    order = ["A", "B", "C", "D"] + [v for v in dict.fromkeys(mids) if v not in "AB"]
    edges = tuple((names[key], ends) for key, ends in raw)
    tris = tuple((labels, tuple(names[k] for k in keys)) for labels, keys in triangles)
    return SurfaceTriangulation(tuple(order), edges, tris)


# -- the factor c -----------------------------------------------------------

def _point(coords: Mapping, v: str):
    b = backend()
    p = coords[v] if not isinstance(coords, Realization) else coords[v]
    return [b.scalar(x) for x in p]


def _f2_block(data: GlueingData, real: Realization):
    """(minor f1, (minor f2) on the surface) for the vertex ordering."""
    b = backend()
    verts = list(data.order)
    f1 = build_f1(None, real, verts)
    a, bb, c = verts[:3]
    f1_rows = [0, 1, 2, 4, 5, 8]  # x_A y_A z_A y_B z_B z_C
    m1 = b.det(f1[np.ix_(f1_rows, range(6))])
    cols = [k for k in range(3 * len(verts)) if k not in f1_rows]
    col_pos = {k: i for i, k in enumerate(cols)}
    f2 = b.zeros((len(data.excluded), len(cols)))
    for r, name in enumerate(data.excluded):
        p, q = data.ends(name)
        xp, xq = _point(real, p), _point(real, q)
        diff = [xp[i] - xq[i] for i in range(3)]
        length = b.sqrt(sum(d * d for d in diff))
        for i in range(3):
            for v, sgn in ((p, 1), (q, -1)):
                k = 3 * verts.index(v) + i
                if k in col_pos:
                    f2[r, col_pos[k]] = sgn * diff[i] / length
    return m1, b.det(f2)


def c_factor(data: GlueingData, real: Realization):
    """(-1)^s / (prod_{E} l^2 * (6V_ABCD * ...)^2), the volumes being formal."""
    b = backend()
    prod = b.scalar(1)
    for name in data.usable:
        p, q = data.ends(name)
        prod = prod * edge_length(_point(real, p), _point(real, q)) ** 2
    vols = b.scalar(1)
    for v, _, earlier in data.witnesses[1:]:
        vols = vols * 6 * oriented_volume(*(_point(real, x) for x in (*earlier, v)))
    return (-1) ** data.s / (prod * vols**2)


def c_factor_from_minors(data: GlueingData, real: Realization):
    """(minor f1)^2 / ((-1)^s ((minor f2) on the surface)^2 prod over surface edges of l^2)."""
    m1, m2 = _f2_block(data, real)
    prod = backend().scalar(1)
    for name, (p, q) in data.surface.edges:
        prod = prod * edge_length(_point(real, p), _point(real, q)) ** 2
    return m1 * m1 / ((-1) ** data.s * m2 * m2 * prod)


# -- vectors ----------------------------------------------------------------

def reorder_vector(vec: InvariantVector, order: Sequence[str]) -> InvariantVector:
    """Re-key a vector to another boundary-edge ordering.

    A component is a minor whose C columns and D rows follow the edge
    order, so reordering multiplies it by the two permutation signs.
    """
    order = tuple(order)
    if set(order) != set(vec.edge_order):
        raise IncompatibleVectors("the new ordering must list the same edges")
    pos = {n: k for k, n in enumerate(order)}
    comps = {}
    for (C, D), v in vec.components.items():
        C2 = tuple(sorted(C, key=pos.__getitem__))
        D2 = tuple(sorted(D, key=pos.__getitem__))
        comps[(C2, D2)] = reorder_sign(C, C2) * reorder_sign(D, D2) * v
    return InvariantVector(order, comps, vec.levels, dict(vec.boundary_coords), dict(vec.meta))


@dataclass(frozen=True)
class ScalarProductResult:
    value: float
    c: float
    raw_sum: float
    terms: int


def scalar_product(
    v1: InvariantVector, v2: InvariantVector, data: GlueingData, real: Realization, parallel: bool = False
) -> ScalarProductResult:
    usable = tuple(data.usable)
    for name, vec in (("first", v1), ("second", v2)):
        if tuple(vec.edge_order) != usable:
            raise IncompatibleVectors(f"the {name} vector is not ordered by the usable edge set {list(usable)}")
        for v, p in vec.boundary_coords.items():
            if v in real and tuple(real[v]) != tuple(p):
                raise IncompatibleVectors(f"the {name} vector used other coordinates for boundary vertex {v}")
    n = len(usable)
    idx = list(range(n))
    total = backend().scalar(0)
    terms = 0
    for k in range(n + 1):
        for C in itertools.combinations(idx, k):
            Cc = tuple(i for i in idx if i not in C)
            for D in itertools.combinations(idx, k):
                Dc = tuple(i for i in idx if i not in D)
                eps = (-1) ** (sum(C) + sum(D))
                key1 = (tuple(usable[i] for i in C), tuple(usable[i] for i in D))
                key2 = (tuple(usable[i] for i in Cc), tuple(usable[i] for i in Dc))
                try:
                    total = total + eps * v1.components[key1] * v2.components[key2]
                except KeyError as exc:
                    raise IncompatibleVectors(f"missing component {exc.args[0]}") from None
                terms += 1
    c = c_factor(data, real)
    return ScalarProductResult(c * total, c, total, terms)


# -- gluing -----------------------------------------------------------------

@dataclass(frozen=True)
class FacePairing:
    face1: tuple[int, int]
    face2: tuple[int, int]
    corners: tuple[tuple[int, int], ...]  # (corner of face1's tet, corner of face2's tet)


def identification_by_labels(m1: Triangulation, m2: Triangulation, vertex_map: Mapping[str, str] | None = None) -> list[FacePairing]:
    """Pair boundary faces of m1 and m2 that carry the same labels.

    ``vertex_map`` (m1 label -> m2 label) is applied first.  Needs every
    boundary triangle to be determined by its labels.
    """
    vmap = dict(vertex_map or {})
    index2: dict[frozenset, tuple[int, int]] = {}
    for t, f in m2.unglued_faces():
        key = frozenset(m2.tetrahedra[t][c] for c in FACE_CORNERS[f])
        if key in index2:
            raise BoundaryMismatch("two boundary triangles of the second manifold share their vertex labels")
        index2[key] = (t, f)
    out = []
    for t, f in m1.unglued_faces():
        labels = {c: vmap.get(m1.tetrahedra[t][c], m1.tetrahedra[t][c]) for c in FACE_CORNERS[f]}
        key = frozenset(labels.values())
        if key not in index2:
            raise BoundaryMismatch(f"no boundary triangle with labels {sorted(key)} in the second manifold")
        t2, f2 = index2[key]
        pos2 = {v: c for c, v in enumerate(m2.tetrahedra[t2])}
        out.append(FacePairing((t, f), (t2, f2), tuple((c, pos2[labels[c]]) for c in FACE_CORNERS[f])))
    return out


_SWAP = {0: 1, 1: 0, 2: 2, 3: 3}


def mirror_pairs(tri: Triangulation, automorphism: Mapping | None = None) -> list[FacePairing]:
    """Identification of ``tri`` with ``mirror(tri)``, optionally twisted by a
    boundary automorphism of ``tri`` (as returned by boundary_automorphisms)."""
    out = []
    for t, f in tri.unglued_faces():
        if automorphism is None:
            (t2, f2), cm = (t, f), {c: c for c in FACE_CORNERS[f]}
        else:
            (t2, f2), cm = automorphism[(t, f)]
        out.append(FacePairing((t, f), (t2, _SWAP[f2]), tuple((c, _SWAP[cm[c]]) for c in FACE_CORNERS[f])))
    return out


def identification_to_json(pairs: Sequence[FacePairing]) -> list[dict]:
    return [{"face1": list(p.face1), "face2": list(p.face2), "corners": [list(x) for x in p.corners]} for p in pairs]


def identification_from_json(data) -> list[FacePairing]:
    if isinstance(data, (str, bytes)):
        data = json.loads(data)
    out = []
    for n, item in enumerate(data):
        extra = set(item) - {"face1", "face2", "corners"}
        if extra:
            raise ValueError(f"identification entry {n} has unknown field(s) {sorted(extra)}")
        out.append(
            FacePairing(tuple(item["face1"]), tuple(item["face2"]), tuple(tuple(int(x) for x in c) for c in item["corners"]))
        )
    return out


@dataclass(frozen=True)
class GluedManifold:
    """The closed result together with both halves in a shared naming.

    ``second`` is M2 relabelled so that its boundary vertices and edges
    carry M1's labels and names; its inner vertices and edges are primed
    where needed to keep them apart from M1's.
    """

    closed: Triangulation
    first: Triangulation
    second: Triangulation
    data: GlueingData
    pairs: tuple[FacePairing, ...] = field(repr=False)

    def boundary_labels(self) -> tuple[str, ...]:
        return self.data.surface.vertices

    def random_realization(self, seed: int = 0) -> Realization:
        return Realization.random(self.closed.vertices, seed)

    def vectors(self, real: Realization, parallel: bool = False) -> tuple[InvariantVector, InvariantVector]:
        levels = tuple(range(len(self.data.usable) + 1))
        v1 = invariant_vector(self.first, real, levels, edges=self.data.usable, parallel=parallel)
        v2 = invariant_vector(self.second, real, levels, edges=self.data.usable, parallel=parallel)
        return reorder_vector(v1, self.data.usable), reorder_vector(v2, self.data.usable)

    def compare(self, real: Realization, parallel: bool = False, threshold: float = VANISHING_THRESHOLD) -> dict:
        """I(M) directly and as a scalar product.  I is dimensionless, so both
        values below ``threshold`` count as agreement."""
        direct = invariant_closed(self.closed, real)
        v1, v2 = self.vectors(real, parallel)
        sp = scalar_product(v1, v2, self.data, real)
        scale = max(abs(float(direct)), abs(float(sp.value)))
        vanish = scale < threshold
        return {
            "direct": float(direct),
            "scalar_product": float(sp.value),
            "c": float(sp.c),
            "terms": sp.terms,
            "discrepancy": 0.0 if vanish else abs(float(direct) - float(sp.value)) / scale,
            "both_vanish": vanish,
        }


def _prime(name: str, taken: set) -> str:
    while name in taken:
        name += "'"
    return name


def glue(m1: Triangulation, m2: Triangulation, pairs: Sequence[FacePairing]) -> GluedManifold:
    faces1 = set(m1.unglued_faces())
    faces2 = set(m2.unglued_faces())
    seen1 = [p.face1 for p in pairs]
    seen2 = [p.face2 for p in pairs]
    if sorted(seen1) != sorted(faces1) or sorted(seen2) != sorted(faces2):
        raise BoundaryMismatch("the identification must pair every boundary triangle of both manifolds exactly once")

    # vertex map m2 -> m1 on the boundary, and edge-class map
    vmap: dict[str, str] = {}
    emap: dict[int, int] = {}
    for p in pairs:
        (t1, f1), (t2, f2) = p.face1, p.face2
        cm = dict(p.corners)
        if sorted(cm) != list(FACE_CORNERS[f1]) or sorted(cm.values()) != list(FACE_CORNERS[f2]):
            raise BoundaryMismatch(f"corner bijection {p.corners} does not match faces {p.face1}, {p.face2}")
        for c, c2 in cm.items():
            a, b = m2.tetrahedra[t2][c2], m1.tetrahedra[t1][c]
            if vmap.setdefault(a, b) != b:
                raise BoundaryMismatch(f"vertex {a!r} of the second manifold is sent to both {vmap[a]!r} and {b!r}")
        for x, y in itertools.combinations(FACE_CORNERS[f1], 2):
            e1 = m1.tet_edge(t1, x, y)
            e2 = m2.tet_edge(t2, cm[x], cm[y])
            if emap.setdefault(e2, e1) != e1:
                raise BoundaryMismatch(f"edge {m2.edges[e2].name} of the second manifold meets two different edges")
    if len(set(vmap.values())) != len(vmap):
        raise BoundaryMismatch("the identification is not injective on vertices")
    if len(set(emap.values())) != len(emap):
        raise BoundaryMismatch("the identification is not injective on edges")

    taken_v = set(m1.vertices)
    for v in m2.inner_vertices:
        vmap[v] = _prime(v, taken_v)
        taken_v.add(vmap[v])
    taken_e = set(m1.edge_names)
    rename = {}
    for i, e in enumerate(m2.edges):
        if i in emap:
            rename[e.name] = m1.edges[emap[i]].name
    # give inner edges temporary unique names, then primed final names
    for i, e in enumerate(m2.edges):
        if i not in emap:
            new = _prime(e.name, taken_e | set(rename.values()))
            rename[e.name] = new
            taken_e.add(new)
    order = [m1.edges[i].name for i in m1.boundary_order]
    second = relabel(m2, vmap, rename)
    second = from_gluings(
        second.tetrahedra, second.gluings,
        {e.name: (e.incidences[0][0], *e.incidences[0][1]) for e in second.edges}, order,
    )

    n1 = m1.n_tets
    tets = list(m1.tetrahedra) + list(second.tetrahedra)
    gl = list(m1.gluings)
    for g in second.gluings:
        gl.append(gluing_from_corners(g.tet + n1, g.face, g.to_tet + n1, g.to_face, g.corner_dict()))
    for p in pairs:
        (t1, f1), (t2, f2) = p.face1, p.face2
        gl.append(gluing_from_corners(t1, f1, t2 + n1, f2, dict(p.corners)))
    names = {e.name: (e.incidences[0][0], *e.incidences[0][1]) for e in m1.edges}
    for e in second.edges:
        if e.name not in names:
            t, (a, b), _ = e.incidences[0]
            names[e.name] = (t + n1, a, b)
    try:
        closed = from_gluings(tets, gl, names)
    except TriangulationError as exc:
        if "orientation" in str(exc):
            raise OrientationMismatch(
                "the identification does not reverse orientation; the boundaries must be oppositely oriented"
            ) from None
        raise BoundaryMismatch(str(exc)) from None
    if not closed.is_closed:
        raise BoundaryMismatch("gluing left unglued faces")
    data = check_condition(m1.boundary_surface())
    return GluedManifold(closed, m1, second, data, tuple(pairs))


# -- surface automorphisms --------------------------------------------------

def _face_cycle(tri: Triangulation, t: int, f: int) -> tuple[int, int, int]:
    """Corners of a boundary face listed in its induced orientation."""
    c = list(FACE_CORNERS[f])
    if f % 2:
        c[0], c[1] = c[1], c[0]
    return tuple(c)


def boundary_automorphisms(tri: Triangulation, orientation_preserving: bool = True) -> list[dict]:
    """Simplicial self-maps of the boundary surface, by exhaustive propagation.

    Each result maps ``(tet, face)`` to ``((tet', face'), {corner: corner'})``.
    """
    faces = tri.unglued_faces()
    # neighbour across each side: side = (face, frozenset of 2 corners)
    side_of_edge: dict[int, list] = {}
    for t, f in faces:
        for x, y in itertools.combinations(FACE_CORNERS[f], 2):
            side_of_edge.setdefault(tri.tet_edge(t, x, y), []).append(((t, f), x, y))

    def across(face, x, y):
        e = tri.tet_edge(face[0], x, y)
        lab = {tri.tetrahedra[face[0]][x]: x, tri.tetrahedra[face[0]][y]: y}
        for other, a, b in side_of_edge[e]:
            if (other, {a, b}) != (face, {x, y}):
                la, lb = tri.tetrahedra[other[0]][a], tri.tetrahedra[other[0]][b]
                # match corners through the shared edge's labels
                return other, {lab[la]: a, lab[lb]: b}
        raise ValueError("boundary edge with one side")

    def orient_sign(face, cm_face, image, cm):
        src = _face_cycle(tri, *face)
        dst = _face_cycle(tri, *image)
        return permutation_parity([dst.index(cm[c]) for c in src])

    out = []
    f0 = faces[0]
    for image in faces:
        for perm in itertools.permutations(FACE_CORNERS[image[1]]):
            start = dict(zip(FACE_CORNERS[f0[1]], perm))
            fmap = {f0: (image, start)}
            stack = [f0]
            ok = True
            while stack and ok:
                face = stack.pop()
                img, cm = fmap[face]
                for x, y in itertools.combinations(FACE_CORNERS[face[1]], 2):
                    nb, share = across(face, x, y)
                    nb_img, share_img = across(img, cm[x], cm[y])
                    ncm = {share[x]: share_img[cm[x]], share[y]: share_img[cm[y]]}
                    third = next(c for c in FACE_CORNERS[nb[1]] if c not in ncm)
                    third_img = next(c for c in FACE_CORNERS[nb_img[1]] if c not in ncm.values())
                    ncm[third] = third_img
                    if nb in fmap:
                        if fmap[nb] != (nb_img, ncm):
                            ok = False
                            break
                    else:
                        fmap[nb] = (nb_img, ncm)
                        stack.append(nb)
            if not ok or len(fmap) != len(faces):
                continue
            if len({v[0] for v in fmap.values()}) != len(faces):
                continue
            # vertex map must be well defined on labels
            vm = {}
            for (t, f), ((t2, f2), cm) in fmap.items():
                for c, c2 in cm.items():
                    a, b = tri.tetrahedra[t][c], tri.tetrahedra[t2][c2]
                    if vm.setdefault(a, b) != b:
                        ok = False
            if not ok:
                continue
            sign = orient_sign(f0, None, image, start)
            if orientation_preserving and sign != 1:
                continue
            out.append(fmap)
    return out
