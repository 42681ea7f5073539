"""Pachner moves and the linear maps they induce on boundary invariants.

Interior moves (2-3, 3-2, 1-4, 4-1) replace a small region by another
triangulation of the same ball and leave every I_{C,D} unchanged.  They
are performed by labelling the corners of the removed tetrahedra with
*roles* (corner classes under the region's internal gluings), writing the
new tetrahedra as role tuples, and reattaching the region's outer faces
by role.

Boundary moves (2-2, 1-3, 3-1) glue one tetrahedron T onto the boundary.
They change the boundary triangulation, and the invariant vectors before
and after are related by an explicit matrix built from T alone: expand
det(F_old + J_T) over pairs of row/column subsets of T's edges.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from geotorsion.geometry import (
    DegenerateTetrahedron,
    Realization,
    edge_length,
    tet_geometry,
    tet_points,
)
from geotorsion.numeric import backend, reorder_sign
from geotorsion.torsion import InvariantVector
from geotorsion.triangulation import (
    FACE_CORNERS,
    LOCAL_EDGES,
    Triangulation,
    TriangulationError,
    _UnionFind,
    face_orientation,
    from_gluings,
    gluing_from_corners,
    isomorphic,
)

INTERIOR_KINDS = ("2-3", "3-2", "1-4", "4-1")
BOUNDARY_KINDS = ("2-2", "1-3", "3-1")
JITTER = 0.05


class SiteNotApplicable(ValueError):
    """The requested move cannot be performed at the given site."""


@dataclass(frozen=True)
class MoveRecord:
    kind: str
    site: dict
    tet: int | None = None  # the glued tetrahedron, boundary moves only
    new_vertex: str | None = None
    coords: tuple | None = None
    tail_inner: tuple[str, ...] = ()  # boundary edges that became inner and stay in the f3 minor
    removed_edges: tuple[str, ...] = ()
    added_edges: tuple[str, ...] = ()

    def to_json(self) -> dict:
        out = {"kind": self.kind, "site": self.site}
        if self.new_vertex is not None:
            out["new_vertex"] = {"label": self.new_vertex, "coords": list(self.coords)}
        if self.removed_edges:
            out["removed_edges"] = list(self.removed_edges)
        if self.added_edges:
            out["added_edges"] = list(self.added_edges)
        return out


@dataclass(frozen=True)
class MoveResult:
    triangulation: Triangulation
    realization: Realization
    record: MoveRecord


# -- helpers ----------------------------------------------------------------

def fresh_label(tri: Triangulation) -> str:
    used = set(tri.vertices)
    for c in "EFGHIJKLMNOPQRSTUVWXYZ":
        if c not in used:
            return c
    n = 0
    while f"V{n}" in used:
        n += 1
    return f"V{n}"


def _edge_names_for(tri: Triangulation) -> dict[str, tuple[int, int, int]]:
    out = {}
    for e in tri.edges:
        t, (a, b), _ = e.incidences[0]
        out[e.name] = (t, a, b)
    return out


def _jittered_point(points, rng: np.random.Generator):
    pts = np.asarray(points, dtype=float)
    centre = pts.mean(axis=0)
    shortest = min(np.linalg.norm(p - q) for p, q in itertools.combinations(pts, 2))
    return tuple(centre + rng.uniform(-JITTER, JITTER, size=3) * shortest)


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def _check_geometry(tri: Triangulation, real: Realization, tets: Sequence[int]) -> None:
    for t in tets:
        tet_geometry(tet_points(tri, real, t))


# -- interior moves ---------------------------------------------------------

def _region_roles(tri: Triangulation, removed: Sequence[int], internal: set) -> dict:
    """Corner classes of the removed tetrahedra under the internal gluings."""
    uf = _UnionFind()
    for t in removed:
        for c in range(4):
            uf.find((t, c))
    for t, f in internal:
        g = tri.partner[(t, f)]
        for c, c2 in g.corner_dict().items():
            uf.union((t, c), (g.to_tet, c2))
    index = {}
    roles = {}
    for t in removed:
        for c in range(4):
            r = uf.find((t, c))
            roles[(t, c)] = index.setdefault(r, len(index))
    for t in removed:
        if len({roles[(t, c)] for c in range(4)}) != 4:
            raise SiteNotApplicable(f"tetrahedron {t} meets itself inside the region")
    return roles


def _rebuild(tri: Triangulation, removed: Sequence[int], roles: dict, internal: set, new_tets, role_label) -> Triangulation:
    removed = list(removed)
    gone = set(removed)
    keep = [t for t in range(tri.n_tets) if t not in gone]
    index = {t: i for i, t in enumerate(keep)}
    base = len(keep)
    shapes = [list(T) for T in new_tets]

    outer = {}
    for t in removed:
        for f in range(4):
            if (t, f) in internal:
                continue
            key = frozenset(roles[(t, c)] for c in FACE_CORNERS[f])
            if key in outer:
                raise SiteNotApplicable("the region's boundary contains the same triangle twice")
            outer[key] = (t, f)

    for T in shapes:
        for f in range(4):
            key = frozenset(T[c] for c in FACE_CORNERS[f])
            if key in outer:
                t, g = outer[key]
                _, s_old = face_orientation([roles[(t, c)] for c in range(4)], g)
                _, s_new = face_orientation(T, f)
                if s_old != s_new:
                    T[0], T[1] = T[1], T[0]
                break
        else:
            raise SiteNotApplicable("a new tetrahedron has no face on the region's boundary")

    faces: dict[frozenset, list] = {}
    for j, T in enumerate(shapes):
        for f in range(4):
            faces.setdefault(frozenset(T[c] for c in FACE_CORNERS[f]), []).append((base + j, f))

    gluings = [
        gluing_from_corners(index[g.tet], g.face, index[g.to_tet], g.to_face, g.corner_dict())
        for g in tri.gluings
        if g.tet in index and g.to_tet in index
    ]
    done = set()
    for key, (t, f) in outer.items():
        if len(faces.get(key, ())) != 1:
            raise SiteNotApplicable("new tetrahedra do not match the region's boundary")
        n, nf = faces[key][0]
        g = tri.partner.get((t, f))
        if g is None or (t, f) in done:
            continue
        T = shapes[n - base]
        old_corner = {roles[(t, c)]: c for c in range(4)}
        cm = g.corner_dict()
        if g.to_tet in index:
            corners = {c: cm[old_corner[T[c]]] for c in FACE_CORNERS[nf]}
            gluings.append(gluing_from_corners(n, nf, index[g.to_tet], g.to_face, corners))
        else:
            t3, f3 = g.to_tet, g.to_face
            n3, nf3 = faces[frozenset(roles[(t3, c)] for c in FACE_CORNERS[f3])][0]
            pos3 = {r: c for c, r in enumerate(shapes[n3 - base])}
            corners = {c: pos3[roles[(t3, cm[old_corner[T[c]]])]] for c in FACE_CORNERS[nf]}
            gluings.append(gluing_from_corners(n, nf, n3, nf3, corners))
            done.add((t3, f3))
        done.add((t, f))
    for key, fs in faces.items():
        if key in outer:
            continue
        if len(fs) != 2:
            raise SiteNotApplicable("new tetrahedra do not pair up along their shared faces")
        (n1, f1), (n2, f2) = fs
        pos2 = {r: c for c, r in enumerate(shapes[n2 - base])}
        T1 = shapes[n1 - base]
        gluings.append(gluing_from_corners(n1, f1, n2, f2, {c: pos2[T1[c]] for c in FACE_CORNERS[f1]}))

    # carry edge names over, through kept tetrahedra or through roles
    names = {}
    for e in tri.edges:
        rep = None
        for t, (a, b), _ in e.incidences:
            if t in index:
                rep = (index[t], a, b)
                break
        if rep is None:
            for t, (a, b), _ in e.incidences:
                ra, rb = roles[(t, a)], roles[(t, b)]
                for j, T in enumerate(shapes):
                    if ra in T and rb in T:
                        rep = (base + j, T.index(ra), T.index(rb))
                        break
                if rep is not None:
                    break
        if rep is not None:
            names[e.name] = rep
    tets = [tri.tetrahedra[t] for t in keep] + [tuple(role_label[r] for r in T) for T in shapes]
    try:
        probe = from_gluings(tets, gluings, names)
    except TriangulationError as exc:
        raise SiteNotApplicable(f"move produces an invalid triangulation: {exc}") from None
    alive = set(probe.edge_names)
    order = [tri.edges[i].name for i in tri.boundary_order if tri.edges[i].name in alive]
    return from_gluings(tets, gluings, names, order)


def _site_tet(tri: Triangulation, site: Mapping) -> int:
    t = int(site["tet"])
    if not 0 <= t < tri.n_tets:
        raise SiteNotApplicable(f"no tetrahedron {t}")
    return t


def _move_23(tri: Triangulation, site: Mapping):
    t1, f1 = _site_tet(tri, site), int(site["face"])
    g = tri.partner.get((t1, f1))
    if g is None:
        raise SiteNotApplicable(f"face {f1} of tetrahedron {t1} is on the boundary")
    if g.to_tet == t1:
        raise SiteNotApplicable("the face is glued to its own tetrahedron")
    internal = {(t1, f1), (g.to_tet, g.to_face)}
    roles = _region_roles(tri, [t1, g.to_tet], internal)
    q = roles[(g.to_tet, g.to_face)]
    base_roles = [roles[(t1, c)] for c in range(4)]
    new = []
    for c in FACE_CORNERS[f1]:
        T = list(base_roles)
        T[c] = q
        new.append(T)
    return [t1, g.to_tet], roles, internal, new


def _move_32(tri: Triangulation, site: Mapping):
    e = tri.edges[tri.edge_index(site["edge"])]
    if e.boundary:
        raise SiteNotApplicable(f"edge {e.name} is on the boundary")
    tets = [t for t, _, _ in e.incidences]
    if len(tets) != 3 or len(set(tets)) != 3:
        raise SiteNotApplicable(f"edge {e.name} has degree {len(tets)}; a 3-2 move needs three distinct tetrahedra")
    internal = set()
    for t, (a, b), _ in e.incidences:
        for f in range(4):
            if f not in (a, b):
                internal.add((t, f))
    roles = _region_roles(tri, tets, internal)
    t0, (a, b), _ = e.incidences[0]
    p, q = roles[(t0, a)], roles[(t0, b)]
    others = sorted(set(roles.values()) - {p, q})
    if len(others) != 3:
        raise SiteNotApplicable(f"the star of {e.name} is not a triangular bipyramid")
    return tets, roles, internal, [others + [p], others + [q]]


def _move_14(tri: Triangulation, site: Mapping, label: str):
    t = _site_tet(tri, site)
    roles = {(t, c): c for c in range(4)}
    new = []
    for c in range(4):
        T = [0, 1, 2, 3]
        T[c] = 4
        new.append(T)
    return [t], roles, set(), new


def _move_41(tri: Triangulation, site: Mapping):
    v = str(site["vertex"])
    if v not in tri.vertices:
        raise SiteNotApplicable(f"no vertex {v!r}")
    if v in tri.boundary_vertices:
        raise SiteNotApplicable(f"vertex {v} is on the boundary")
    tets = [t for t, tet in enumerate(tri.tetrahedra) if v in tet]
    if len(tets) != 4:
        raise SiteNotApplicable(f"vertex {v} lies in {len(tets)} tetrahedra; a 4-1 move needs four")
    internal = set()
    for t in tets:
        c = tri.tetrahedra[t].index(v)
        internal.update((t, f) for f in range(4) if f != c)
    roles = _region_roles(tri, tets, internal)
    centre = roles[(tets[0], tri.tetrahedra[tets[0]].index(v))]
    others = sorted(set(roles.values()) - {centre})
    if len(others) != 4:
        raise SiteNotApplicable(f"the star of {v} is not a tetrahedron")
    return tets, roles, internal, [others]


def apply_interior_move(
    tri: Triangulation,
    real: Realization,
    kind: str,
    site: Mapping,
    seed: int | np.random.Generator = 0,
    coords: Sequence[float] | None = None,
    label: str | None = None,
) -> MoveResult:
    """Perform an interior Pachner move.

    Sites: ``{"tet", "face"}`` for 2-3, ``{"edge"}`` for 3-2, ``{"tet"}``
    for 1-4 (optionally ``coords``/``label`` for the new vertex) and
    ``{"vertex"}`` for 4-1.
    """
    site = dict(site)
    new_vertex = None
    if kind == "2-3":
        removed, roles, internal, new = _move_23(tri, site)
    elif kind == "3-2":
        removed, roles, internal, new = _move_32(tri, site)
    elif kind == "1-4":
        new_vertex = label or fresh_label(tri)
        if new_vertex in tri.vertices:
            raise SiteNotApplicable(f"vertex label {new_vertex!r} is already in use")
        removed, roles, internal, new = _move_14(tri, site, new_vertex)
    elif kind == "4-1":
        removed, roles, internal, new = _move_41(tri, site)
    else:
        raise ValueError(f"unknown interior move {kind!r}; expected one of {INTERIOR_KINDS}")

    role_label = {}
    for (t, c), r in roles.items():
        role_label[r] = tri.tetrahedra[t][c]
    if new_vertex is not None:
        role_label[4] = new_vertex
    after = _rebuild(tri, removed, roles, internal, new, role_label)
    fresh = range(after.n_tets - len(new), after.n_tets)

    if kind == "1-4":
        rng = _rng(seed)
        pts = [real[v] for v in tri.tetrahedra[removed[0]]]
        for _ in range(100):
            point = tuple(float(x) for x in (coords if coords is not None else _jittered_point(pts, rng)))
            new_real = real.updated({new_vertex: point})
            try:
                _check_geometry(after, new_real, fresh)
                break
            except DegenerateTetrahedron:
                if coords is not None:
                    raise
        else:
            raise DegenerateTetrahedron("could not place the new vertex without degenerate tetrahedra")
        record = MoveRecord(kind, site, new_vertex=new_vertex, coords=point)
    else:
        new_real = real
        if kind == "4-1":
            new_real = Realization({k: v for k, v in real.coords.items() if k != site["vertex"]})
        _check_geometry(after, new_real, fresh)
        record = MoveRecord(kind, site)
    before_names, after_names = set(tri.edge_names), set(after.edge_names)
    record = MoveRecord(
        record.kind, record.site, None, record.new_vertex, record.coords, (),
        tuple(n for n in tri.edge_names if n not in after_names),
        tuple(n for n in after.edge_names if n not in before_names),
    )
    return MoveResult(after, new_real, record)


# -- boundary moves ---------------------------------------------------------

def _boundary_faces_with(tri: Triangulation, pred) -> list[tuple[int, int]]:
    return [(t, f) for t, f in tri.unglued_faces() if pred(t, f)]


def _face_labels(tri: Triangulation, t: int, f: int) -> tuple[str, ...]:
    return tuple(tri.tetrahedra[t][c] for c in FACE_CORNERS[f])


def _attach(tri: Triangulation, labels: Sequence[str], targets: Sequence[tuple[int, int]]) -> Triangulation:
    """Glue a new tetrahedron with vertex ``labels`` onto boundary faces ``targets``."""
    T = list(labels)
    n = tri.n_tets
    t0, f0 = targets[0]
    _, s_old = face_orientation(tri.tetrahedra[t0], f0)
    key0 = set(_face_labels(tri, t0, f0))
    nf0 = next(f for f in range(4) if {T[c] for c in FACE_CORNERS[f]} == key0)
    if face_orientation(T, nf0)[1] == s_old:
        T[0], T[1] = T[1], T[0]
    gluings = list(tri.gluings)
    pos = {v: c for c, v in enumerate(T)}
    for t, f in targets:
        key = set(_face_labels(tri, t, f))
        nf = next(g for g in range(4) if {T[c] for c in FACE_CORNERS[g]} == key)
        gluings.append(gluing_from_corners(n, nf, t, f, {pos[tri.tetrahedra[t][c]]: c for c in FACE_CORNERS[f]}))
    tets = list(tri.tetrahedra) + [tuple(T)]
    names = _edge_names_for(tri)
    try:
        probe = from_gluings(tets, gluings, names)
    except TriangulationError as exc:
        raise SiteNotApplicable(f"move produces an invalid triangulation: {exc}") from None
    alive = {probe.edges[i].name for i in probe.boundary_order}
    order = [tri.edges[i].name for i in tri.boundary_order if tri.edges[i].name in alive]
    return from_gluings(tets, gluings, names, order)


def apply_boundary_move(
    tri: Triangulation,
    real: Realization,
    kind: str,
    site: Mapping,
    seed: int | np.random.Generator = 0,
    coords: Sequence[float] | None = None,
    label: str | None = None,
) -> MoveResult:
    """Glue one tetrahedron onto the boundary.

    Sites: ``{"edge"}`` for 2-2 (the boundary edge that becomes inner),
    ``{"tet", "face"}`` for 1-3 (the boundary face that gets covered) and
    ``{"vertex"}`` for 3-1 (a boundary vertex of boundary degree three).
    """
    site = dict(site)
    new_real = real
    new_vertex = None
    point = None
    tail = ()
    if kind == "2-2":
        e = tri.edge_index(site["edge"])
        edge = tri.edges[e]
        if not edge.boundary:
            raise SiteNotApplicable(f"edge {edge.name} is not a boundary edge")
        faces = _boundary_faces_with(
            tri, lambda t, f: any(tri.tet_edge(t, a, b) == e for a, b in itertools.combinations(FACE_CORNERS[f], 2))
        )
        if len(faces) != 2:
            raise SiteNotApplicable(f"edge {edge.name} lies on {len(faces)} boundary triangles")
        B, C = edge.ends
        apex = []
        for t, f in faces:
            rest = [v for v in _face_labels(tri, t, f) if v not in (B, C)]
            if len(rest) != 1:
                raise SiteNotApplicable(f"a boundary triangle at {edge.name} has a repeated vertex")
            apex.append(rest[0])
        A, D = apex
        if A == D:
            raise SiteNotApplicable(f"the two triangles at {edge.name} share their opposite vertex {A}")
        after = _attach(tri, (A, B, C, D), faces)
        tail = (edge.name,)
    elif kind == "1-3":
        t, f = int(site["tet"]), int(site["face"])
        if (t, f) in tri.partner or not 0 <= t < tri.n_tets:
            raise SiteNotApplicable(f"face {f} of tetrahedron {t} is not a boundary face")
        new_vertex = label or fresh_label(tri)
        if new_vertex in tri.vertices:
            raise SiteNotApplicable(f"vertex label {new_vertex!r} is already in use")
        A, B, C = _face_labels(tri, t, f)
        after = _attach(tri, (A, B, C, new_vertex), [(t, f)])
        rng = _rng(seed)
        pts = [real[v] for v in (A, B, C)]
        for _ in range(100):
            if coords is not None:
                point = tuple(float(x) for x in coords)
            else:
                arr = np.asarray(pts, dtype=float)
                scale = min(np.linalg.norm(p - q) for p, q in itertools.combinations(arr, 2))
                point = tuple(arr.mean(axis=0) + rng.uniform(-0.5, 0.5, size=3) * scale)
            new_real = real.updated({new_vertex: point})
            try:
                _check_geometry(after, new_real, [after.n_tets - 1])
                break
            except DegenerateTetrahedron:
                if coords is not None:
                    raise
        else:
            raise DegenerateTetrahedron("could not place the new vertex without a degenerate tetrahedron")
    elif kind == "3-1":
        v = str(site["vertex"])
        if v not in tri.boundary_vertices:
            raise SiteNotApplicable(f"{v!r} is not a boundary vertex")
        faces = _boundary_faces_with(tri, lambda t, f: v in _face_labels(tri, t, f))
        if len(faces) != 3:
            raise SiteNotApplicable(f"vertex {v} lies on {len(faces)} boundary triangles; a 3-1 move needs three")
        link = set()
        for t, f in faces:
            link.update(x for x in _face_labels(tri, t, f) if x != v)
        if len(link) != 3:
            raise SiteNotApplicable(f"the boundary link of {v} is not a triangle on three distinct vertices")
        A, B, C = sorted(link)
        after = _attach(tri, (v, A, B, C), faces)
    else:
        raise ValueError(f"unknown boundary move {kind!r}; expected one of {BOUNDARY_KINDS}")
    if kind != "1-3":
        _check_geometry(after, new_real, [after.n_tets - 1])
    before_b = {tri.edges[i].name for i in tri.boundary_order}
    after_b = {after.edges[i].name for i in after.boundary_order}
    record = MoveRecord(
        kind, site, after.n_tets - 1, new_vertex, point, tail,
        tuple(tri.edges[i].name for i in tri.boundary_order if tri.edges[i].name not in after_b),
        tuple(after.edges[i].name for i in after.boundary_order if after.edges[i].name not in before_b),
    )
    return MoveResult(after, new_real, record)


def apply_move(tri, real, kind, site, **kw) -> MoveResult:
    if kind in INTERIOR_KINDS:
        return apply_interior_move(tri, real, kind, site, **kw)
    if kind in BOUNDARY_KINDS:
        return apply_boundary_move(tri, real, kind, site, **kw)
    raise ValueError(f"unknown move {kind!r}")


# -- determinant of a sum ---------------------------------------------------

@dataclass(frozen=True)
class ExpansionTerm:
    rows: tuple[int, ...]
    cols: tuple[int, ...]
    sign: int
    minor_a: object
    minor_b: object

    @property
    def value(self):
        return self.sign * self.minor_a * self.minor_b


def _complement(n: int, idx: Sequence[int]) -> list[int]:
    s = set(idx)
    return [i for i in range(n) if i not in s]


def det_sum_expansion(a, b) -> list[ExpansionTerm]:
    """det(A + B) as a sum over equal-size row/column subsets (r, k):

        sign(r, k) * det A[r, k] * det B[r', k']

    with r', k' the complements and sign = (-1)^(sum r + sum k).
    """
    a = np.asarray(a)
    b = np.asarray(b)
    n = a.shape[0]
    if a.shape != (n, n) or b.shape != (n, n):
        raise ValueError("det_sum_expansion needs two square matrices of the same size")
    det = backend().det
    terms = []
    for size in range(n + 1):
        for r in itertools.combinations(range(n), size):
            rc = _complement(n, r)
            for k in itertools.combinations(range(n), size):
                kc = _complement(n, k)
                ma = det(a[np.ix_(r, k)]) if size else det(a[:0, :0])
                mb = det(b[np.ix_(rc, kc)]) if size < n else det(b[:0, :0])
                terms.append(ExpansionTerm(r, k, (-1) ** (sum(r) + sum(k)), ma, mb))
    return terms


# -- induced transform on invariant vectors ----------------------------------

Key = tuple[tuple[str, ...], tuple[str, ...]]


@dataclass
class MoveTransform:
    """Sparse matrix A with vec I(after) = A vec I(before).

    ``entries`` maps each target key (C', D') to ``[(source key, coef), ...]``.
    Targets cover levels ``0..level``; sources may reach one level higher
    for a 2-2 move.
    """

    kind: str
    source_order: tuple[str, ...]
    target_order: tuple[str, ...]
    level: int
    prefactor: object
    entries: dict[Key, list[tuple[Key, object]]] = field(default_factory=dict)

    @property
    def source_levels(self) -> range:
        top = max((len(s[0]) for terms in self.entries.values() for s, _ in terms), default=0)
        return range(top + 1)

    def apply(self, vec: InvariantVector) -> InvariantVector:
        if tuple(vec.edge_order) != self.source_order:
            raise ValueError("invariant vector edge order does not match the transform's source")
        comps = {}
        for key, terms in self.entries.items():
            total = backend().scalar(0)
            for src, coef in terms:
                try:
                    total = total + coef * vec.components[src]
                except KeyError:
                    raise ValueError(f"source vector lacks component C={list(src[0])}, D={list(src[1])}") from None
            comps[key] = total
        return InvariantVector(self.target_order, comps, tuple(range(self.level + 1)))

    def nnz(self) -> int:
        return sum(len(t) for t in self.entries.values())

    def triplets(self) -> list[dict]:
        out = []
        for (C, D), terms in self.entries.items():
            for (C0, D0), coef in terms:
                out.append({"C": list(C), "D": list(D), "C_old": list(C0), "D_old": list(D0), "coef": float(coef)})
        return out

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "level": self.level,
            "prefactor": float(self.prefactor),
            "source_order": list(self.source_order),
            "target_order": list(self.target_order),
            "entries": self.triplets(),
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)


def _tet_class_jacobian(tri: Triangulation, real: Realization, t: int):
    g = tet_geometry(tet_points(tri, real, t))
    names = [tri.edges[tri.edge_of[(t, e)]].name for e in LOCAL_EDGES]
    jac: dict[tuple[str, str], object] = {}
    for a in range(6):
        for c in range(6):
            k = (names[a], names[c])
            jac[k] = jac.get(k, 0) + g.jacobian[a, c]
    return g, names, jac


def boundary_move_transform(
    before: Triangulation,
    after: Triangulation,
    record: MoveRecord,
    real: Realization,
    level: int,
) -> MoveTransform:
    """The matrix relating invariant vectors across a boundary move.

    Only the two boundary edge orders, the glued tetrahedron's edges and
    its Jacobian enter; nothing else about the manifold does.
    """
    if record.kind not in BOUNDARY_KINDS:
        raise ValueError(f"{record.kind} is not a boundary move")
    g, t_names, jac = _tet_class_jacobian(after, real, record.tet)
    six_v = 6 * g.volume
    if record.kind == "2-2":
        p, q = after.edges[after.edge_index(record.tail_inner[0])].ends
        pre = -six_v / edge_length(real.point(p), real.point(q)) ** 2
    elif record.kind == "1-3":
        pre = -six_v
    else:
        pre = 1 / six_v

    old_order = tuple(before.edges[i].name for i in before.boundary_order)
    new_order = tuple(after.edges[i].name for i in after.boundary_order)
    old_pos = {n: k for k, n in enumerate(old_order)}
    t_set = set(t_names)
    det = backend().det
    tail = list(record.tail_inner)

    out = MoveTransform(record.kind, old_order, new_order, level, pre)
    for k in range(level + 1):
        for C in itertools.combinations(new_order, k):
            rows_c = tail + list(C)
            kc = [i for i, n in enumerate(rows_c) if n in t_set]
            for D in itertools.combinations(new_order, k):
                rows_d = tail + list(D)
                rd = [i for i, n in enumerate(rows_d) if n in t_set]
                terms: dict[Key, object] = {}
                for size in range(min(len(rd), len(kc)) + 1):
                    for r in itertools.combinations(rd, size):
                        rest_d = [n for i, n in enumerate(rows_d) if i not in r]
                        if any(n not in old_pos for n in rest_d):
                            continue
                        for kk in itertools.combinations(kc, size):
                            rest_c = [n for i, n in enumerate(rows_c) if i not in kk]
                            if any(n not in old_pos for n in rest_c):
                                continue
                            sub = backend().zeros((size, size))
                            for x, i in enumerate(r):
                                for y, j in enumerate(kk):
                                    sub[x, y] = jac.get((rows_d[i], rows_c[j]), 0)
                            mj = det(sub)
                            if mj == 0:
                                continue
                            d_old = tuple(sorted(rest_d, key=old_pos.__getitem__))
                            c_old = tuple(sorted(rest_c, key=old_pos.__getitem__))
                            sgn = (-1) ** (sum(r) + sum(kk))
                            sgn *= reorder_sign(rest_d, d_old) * reorder_sign(rest_c, c_old)
                            key = (c_old, d_old)
                            terms[key] = terms.get(key, 0) + sgn * mj * pre
                out.entries[(C, D)] = sorted(terms.items())
    return out


def invariant_vector_for_transform(tri, real, transform: MoveTransform, **kw) -> InvariantVector:
    """Source vector with every level the transform reads."""
    from geotorsion.torsion import invariant_vector

    top = min(max(transform.source_levels), len(tri.boundary_order))
    return invariant_vector(tri, real, tuple(range(top + 1)), **kw)


def compose_transforms(first: MoveTransform, second: MoveTransform) -> MoveTransform:
    """The transform of ``first`` followed by ``second``."""
    if second.source_order != first.target_order:
        raise ValueError("the second transform does not start where the first one ends")
    out = MoveTransform(
        f"{first.kind},{second.kind}", first.source_order, second.target_order,
        second.level, first.prefactor * second.prefactor,
    )
    for key, terms in second.entries.items():
        acc: dict[Key, object] = {}
        for mid, c2 in terms:
            if mid not in first.entries:
                raise ValueError(f"the first transform lacks level {len(mid[0])}; build it at a higher level")
            for src, c1 in first.entries[mid]:
                acc[src] = acc.get(src, 0) + c2 * c1
        out.entries[key] = sorted(acc.items())
    return out


def reorder_transform(transform: MoveTransform, order: Sequence[str]) -> MoveTransform:
    """Re-key the target side to another ordering of the same boundary edges."""
    order = tuple(order)
    if set(order) != set(transform.target_order):
        raise ValueError("the new ordering must list the same edges")
    pos = {n: k for k, n in enumerate(order)}
    out = MoveTransform(transform.kind, transform.source_order, order, transform.level, transform.prefactor)
    for (C, D), terms in transform.entries.items():
        C2 = tuple(sorted(C, key=pos.__getitem__))
        D2 = tuple(sorted(D, key=pos.__getitem__))
        sgn = reorder_sign(C, C2) * reorder_sign(D, D2)
        out.entries[(C2, D2)] = [(src, sgn * c) for src, c in terms]
    return out


def chain_transform(tri: Triangulation, real: Realization, steps: Sequence[Mapping], level: int, seed: int = 0):
    """Run a boundary-move script and compose its transforms up to ``level``.

    A 2-2 move reads one level above its own, so earlier steps are built
    correspondingly higher.  Returns (transform, final MoveResult).
    """
    results = run_script(tri, real, steps, seed)
    if not results:
        raise ValueError("an empty chain has no transform")
    if any(r.record.kind not in BOUNDARY_KINDS for r in results):
        raise ValueError("chain_transform takes boundary moves only")
    need = [level]
    for r in reversed(results[1:]):
        need.append(need[-1] + (r.record.kind == "2-2"))
    need.reverse()
    total = None
    before = tri
    for r, lvl in zip(results, need):
        A = boundary_move_transform(before, r.triangulation, r.record, r.realization, lvl)
        total = A if total is None else compose_transforms(total, A)
        before = r.triangulation
    return total, results[-1]


def compare_chains(tri, real, chain_a, chain_b, level: int, seed: int = 0) -> dict:
    """Transforms of two move chains that end on the same edge set.

    Whether both chains always give the same matrix is open; this reports
    the largest entry difference alongside the agreement of A vec I.
    """
    from geotorsion.torsion import invariant_vector

    A, res_a = chain_transform(tri, real, chain_a, level, seed)
    B, res_b = chain_transform(tri, real, chain_b, level, seed)
    if set(A.target_order) != set(B.target_order):
        raise ValueError("the chains end on different boundary edge sets")
    B = reorder_transform(B, A.target_order)
    diff = 0.0
    scale = 0.0
    for key in set(A.entries) | set(B.entries):
        a = dict(A.entries.get(key, []))
        b = dict(B.entries.get(key, []))
        for src in set(a) | set(b):
            va, vb = float(a.get(src, 0)), float(b.get(src, 0))
            diff = max(diff, abs(va - vb))
            scale = max(scale, abs(va), abs(vb))
    top = max(max(len(s[0]) for t in A.entries.values() for s, _ in t), level)
    src = invariant_vector(tri, real, tuple(range(min(top, len(tri.boundary_order)) + 1)))
    va, vb = A.apply(src), B.apply(src)
    vec_gap = max(abs(float(va.components[k]) - float(vb.components[k])) for k in va.components)
    return {
        "matrix_difference": diff / scale if scale else 0.0,
        "vector_difference": vec_gap / (va.max_abs() or 1.0),
        "nnz": (A.nnz(), B.nnz()),
        "same_triangulation": set(res_a.triangulation.edge_names) == set(res_b.triangulation.edge_names)
        and isomorphic(res_a.triangulation, res_b.triangulation),
    }


def load_script(path_or_text) -> list[dict]:
    """A move script: a JSON list of ``{"kind": ..., <site fields>}`` objects."""
    text = path_or_text
    if not str(path_or_text).lstrip().startswith("["):
        with open(path_or_text) as fh:
            text = fh.read()
    steps = json.loads(text)
    if not isinstance(steps, list):
        raise ValueError("a move script must be a JSON list")
    allowed = {"kind", "tet", "face", "edge", "vertex", "coords", "label"}
    for n, s in enumerate(steps):
        extra = set(s) - allowed
        if extra:
            raise ValueError(f"move {n} has unknown field(s) {sorted(extra)}")
        if s.get("kind") not in INTERIOR_KINDS + BOUNDARY_KINDS:
            raise ValueError(f"move {n} has unknown kind {s.get('kind')!r}")
    return steps


def run_script(tri: Triangulation, real: Realization, steps: Sequence[Mapping], seed: int = 0) -> list[MoveResult]:
    rng = np.random.default_rng(seed)
    results = []
    for s in steps:
        site = {k: v for k, v in s.items() if k in ("tet", "face", "edge", "vertex")}
        res = apply_move(tri, real, s["kind"], site, seed=rng, coords=s.get("coords"), label=s.get("label"))
        results.append(res)
        tri, real = res.triangulation, res.realization
    return results
