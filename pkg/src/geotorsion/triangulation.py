"""Combinatorial (pseudo-)triangulations of oriented 3-manifolds.

A triangulation is a list of tetrahedra, each a 4-tuple of vertex labels
whose tuple order is the positive orientation, together with face
gluings.  Face ``i`` of a tetrahedron is the face opposite corner ``i``;
its corners are listed in increasing order (``FACE_CORNERS[i]``).  A gluing
``corner_map`` sends the j-th corner of the face to the ``corner_map[j]``-th
corner of the partner face.

Vertex labels are vertex identities: gluings must respect labels.  Edges
are never given directly, because several edges may join the same pair of
vertices; they are derived as orbits of tetrahedron edges under gluings.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from geotorsion.numeric import permutation_parity

FACE_CORNERS = {f: tuple(c for c in range(4) if c != f) for f in range(4)}
LOCAL_EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))
LOCAL_EDGE_INDEX = {e: k for k, e in enumerate(LOCAL_EDGES)}


class TriangulationError(ValueError):
    """Base class for invalid triangulation input."""


class RepeatedVertex(TriangulationError):
    pass


class NonManifoldGluing(TriangulationError):
    pass


class OrientationClash(TriangulationError):
    pass


class LabelMismatch(TriangulationError):
    pass


@dataclass(frozen=True)
class Gluing:
    tet: int
    face: int
    to_tet: int
    to_face: int
    corner_map: tuple[int, int, int]

    def corner_dict(self) -> dict[int, int]:
        """Map from corners of ``tet`` on the glued face to corners of ``to_tet``."""
        src = FACE_CORNERS[self.face]
        dst = FACE_CORNERS[self.to_face]
        return {src[j]: dst[self.corner_map[j]] for j in range(3)}

    def reversed(self) -> "Gluing":
        inv = [0, 0, 0]
        for j, k in enumerate(self.corner_map):
            inv[k] = j
        return Gluing(self.to_tet, self.to_face, self.tet, self.face, tuple(inv))


def gluing_from_corners(tet: int, face: int, to_tet: int, to_face: int, corners: Mapping[int, int]) -> Gluing:
    """Build a :class:`Gluing` from an explicit corner-to-corner dict."""
    dst = FACE_CORNERS[to_face]
    cmap = tuple(dst.index(corners[c]) for c in FACE_CORNERS[face])
    return Gluing(tet, face, to_tet, to_face, cmap)


def face_orientation(tet: Sequence, face: int) -> tuple[tuple, int]:
    """Induced boundary orientation of a face as (sorted keys, sign)."""
    rest = [tet[c] for c in FACE_CORNERS[face]]
    return tuple(sorted(rest)), (-1) ** face * permutation_parity(rest)


@dataclass(frozen=True)
class Edge:
    name: str
    ends: tuple[str, str]
    incidences: tuple[tuple[int, tuple[int, int], int], ...]
    boundary: bool

    @property
    def tets(self) -> tuple[int, ...]:
        return tuple(t for t, _, _ in self.incidences)


@dataclass(frozen=True)
class SurfaceTriangulation:
    """A closed triangulated surface (the boundary of a 3-manifold)."""

    vertices: tuple[str, ...]
    edges: tuple[tuple[str, tuple[str, str]], ...]
    triangles: tuple[tuple[tuple[str, str, str], tuple[str, str, str]], ...]
    faces: tuple[tuple[int, int], ...] = ()

    @property
    def euler_characteristic(self) -> int:
        return len(self.vertices) - len(self.edges) + len(self.triangles)

    @property
    def is_empty(self) -> bool:
        return not self.triangles

    def components(self) -> list[set[str]]:
        parent = {v: v for v in self.vertices}

        def find(v):
            while parent[v] != v:
                parent[v] = parent[parent[v]]
                v = parent[v]
            return v

        for _, (a, b) in self.edges:
            parent[find(a)] = find(b)
        groups: dict[str, set[str]] = defaultdict(set)
        for v in self.vertices:
            groups[find(v)].add(v)
        return list(groups.values())

    @property
    def genus(self) -> int:
        comps = self.components()
        if len(comps) > 1:
            raise TriangulationError("genus is only defined for a connected surface")
        if self.is_empty:
            return 0
        return (2 - self.euler_characteristic) // 2

    def edge_names(self) -> list[str]:
        return [name for name, _ in self.edges]

    def neighbours(self, v: str) -> list[tuple[str, str]]:
        """(edge name, other endpoint) pairs at vertex ``v``, in edge order."""
        out = []
        for name, (a, b) in self.edges:
            if a == v:
                out.append((name, b))
            elif b == v:
                out.append((name, a))
        return out


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        self.parent.setdefault(x, x)
        while self.parent[x] != x:
            self.parent[x] = self.parent[self.parent[x]]
            x = self.parent[x]
        return x

    def union(self, a, b):
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra


@dataclass(frozen=True)
class Triangulation:
    tetrahedra: tuple[tuple[str, str, str, str], ...]
    gluings: tuple[Gluing, ...]
    partner: Mapping[tuple[int, int], Gluing] = field(repr=False)
    vertices: tuple[str, ...] = field(repr=False)
    boundary_vertices: frozenset = field(repr=False)
    edges: tuple[Edge, ...] = field(repr=False)
    edge_of: Mapping[tuple[int, tuple[int, int]], int] = field(repr=False)
    boundary_order: tuple[int, ...] = field(repr=False)

    # -- derived views ---------------------------------------------------
    @property
    def n_tets(self) -> int:
        return len(self.tetrahedra)

    @property
    def is_closed(self) -> bool:
        return len(self.partner) == 4 * self.n_tets

    @property
    def inner_vertices(self) -> tuple[str, ...]:
        return tuple(v for v in self.vertices if v not in self.boundary_vertices)

    @property
    def inner_edges(self) -> tuple[int, ...]:
        return tuple(i for i, e in enumerate(self.edges) if not e.boundary)

    @property
    def boundary_edges(self) -> tuple[int, ...]:
        return self.boundary_order

    @property
    def edge_names(self) -> tuple[str, ...]:
        return tuple(e.name for e in self.edges)

    def edge_index(self, name: str) -> int:
        for i, e in enumerate(self.edges):
            if e.name == name:
                return i
        raise KeyError(f"no edge named {name!r}")

    def tet_edge(self, tet: int, a: int, b: int) -> int:
        return self.edge_of[(tet, (min(a, b), max(a, b)))]

    def unglued_faces(self) -> list[tuple[int, int]]:
        return [(t, f) for t in range(self.n_tets) for f in range(4) if (t, f) not in self.partner]

    def counts(self) -> tuple[int, int, int, int, int]:
        """(inner vertices, boundary vertices, inner edges, boundary edges, tetrahedra)."""
        nb = len(self.boundary_order)
        return (
            len(self.vertices) - len(self.boundary_vertices),
            len(self.boundary_vertices),
            len(self.edges) - nb,
            nb,
            self.n_tets,
        )

    def boundary_surface(self) -> SurfaceTriangulation:
        faces = self.unglued_faces()
        verts = [v for v in self.vertices if v in self.boundary_vertices]
        edges = tuple((self.edges[i].name, self.edges[i].ends) for i in self.boundary_order)
        triangles = []
        for t, f in faces:
            tet = self.tetrahedra[t]
            corners = FACE_CORNERS[f]
            # induced orientation: (-1)^f times the remaining corners in order
            labels = [tet[c] for c in corners]
            if f % 2:
                labels[0], labels[1] = labels[1], labels[0]
            names = tuple(
                self.edges[self.tet_edge(t, corners[i], corners[j])].name for i, j in ((0, 1), (1, 2), (0, 2))
            )
            triangles.append((tuple(labels), names))
        return SurfaceTriangulation(tuple(verts), edges, tuple(triangles), tuple(faces))

    def to_json(self) -> dict:
        data = {
            "tetrahedra": [list(t) for t in self.tetrahedra],
            "gluings": [
                {"tet": g.tet, "face": g.face, "to_tet": g.to_tet, "to_face": g.to_face, "corner_map": list(g.corner_map)}
                for g in self.gluings
            ],
        }
        names = {}
        for e in self.edges:
            t, (a, b), _ = e.incidences[0]
            names[e.name] = [t, a, b]
        data["edge_names"] = names
        data["boundary_order"] = [self.edges[i].name for i in self.boundary_order]
        return data


def _normalise_gluings(n_tets: int, gluings: Iterable) -> tuple[dict, list[Gluing]]:
    partner: dict[tuple[int, int], Gluing] = {}
    unique: list[Gluing] = []
    for g in gluings:
        if not isinstance(g, Gluing):
            g = Gluing(int(g["tet"]), int(g["face"]), int(g["to_tet"]), int(g["to_face"]), tuple(g["corner_map"]))
        for t, f in ((g.tet, g.face), (g.to_tet, g.to_face)):
            if not (0 <= t < n_tets and 0 <= f < 4):
                raise TriangulationError(f"gluing {g} references a face that does not exist")
        if sorted(g.corner_map) != [0, 1, 2]:
            raise TriangulationError(f"gluing {g} has a corner_map that is not a permutation of 0,1,2")
        if (g.tet, g.face) == (g.to_tet, g.to_face):
            raise NonManifoldGluing(f"face {g.face} of tetrahedron {g.tet} is glued to itself")
        rev = g.reversed()
        existing = partner.get((g.tet, g.face))
        if existing is not None:
            if existing == g:
                continue  # the same gluing listed from both sides
            raise NonManifoldGluing(f"face {g.face} of tetrahedron {g.tet} is glued twice")
        if (g.to_tet, g.to_face) in partner:
            raise NonManifoldGluing(f"face {g.to_face} of tetrahedron {g.to_tet} is glued twice")
        partner[(g.tet, g.face)] = g
        partner[(g.to_tet, g.to_face)] = rev
        unique.append(g)
    return partner, unique


def _check_orientation(tets, partner) -> None:
    bad = []
    for (t, f), g in partner.items():
        if (t, f) > (g.to_tet, g.to_face):
            continue
        sgn = permutation_parity(list(g.corner_map))
        if (-1) ** f * sgn != -((-1) ** g.to_face):
            bad.append(g)
    if not bad:
        return
    # try to decide whether some re-orientation would have worked
    flip: dict[int, int] = {}
    orientable = True
    for start in range(len(tets)):
        if start in flip:
            continue
        flip[start] = 1
        stack = [start]
        while stack and orientable:
            t = stack.pop()
            for f in range(4):
                g = partner.get((t, f))
                if g is None:
                    continue
                sgn = permutation_parity(list(g.corner_map))
                consistent = (-1) ** f * sgn == -((-1) ** g.to_face)
                want = flip[t] if consistent else -flip[t]
                if g.to_tet in flip:
                    if flip[g.to_tet] != want:
                        orientable = False
                else:
                    flip[g.to_tet] = want
                    stack.append(g.to_tet)
    hint = (
        "re-order the vertex tuples of some tetrahedra to fix this"
        if orientable
        else "the gluings admit no consistent orientation"
    )
    g = bad[0]
    raise OrientationClash(
        f"gluing of tet {g.tet} face {g.face} to tet {g.to_tet} face {g.to_face} preserves orientation; {hint}"
    )


def from_gluings(
    tetrahedra: Sequence[Sequence[str]],
    gluings: Iterable,
    edge_names: Mapping[str, Sequence[int]] | None = None,
    boundary_order: Sequence[str] | None = None,
) -> Triangulation:
    """Validate the input and derive vertex/edge classes and boundary flags."""
    tets = tuple(tuple(str(v) for v in t) for t in tetrahedra)
    if not tets:
        raise TriangulationError("a triangulation needs at least one tetrahedron")
    for i, t in enumerate(tets):
        if len(t) != 4:
            raise TriangulationError(f"tetrahedron {i} has {len(t)} vertices, expected 4")
        if len(set(t)) != 4:
            raise RepeatedVertex(f"tetrahedron {i} = {t} does not have four distinct vertices")
    partner, unique = _normalise_gluings(len(tets), gluings)

    for (t, f), g in partner.items():
        for c, c2 in g.corner_dict().items():
            if tets[t][c] != tets[g.to_tet][c2]:
                raise LabelMismatch(
                    f"gluing tet {t} face {f} -> tet {g.to_tet} face {g.to_face} sends vertex "
                    f"{tets[t][c]!r} to {tets[g.to_tet][c2]!r}"
                )
    _check_orientation(tets, partner)

    uf = _UnionFind()
    for t in range(len(tets)):
        for e in LOCAL_EDGES:
            uf.find((t, e))
    for (t, f), g in partner.items():
        cm = g.corner_dict()
        for a, b in itertools.combinations(FACE_CORNERS[f], 2):
            a2, b2 = cm[a], cm[b]
            uf.union((t, (a, b)), (g.to_tet, (min(a2, b2), max(a2, b2))))

    boundary_slots = set()
    boundary_vertices = set()
    for t in range(len(tets)):
        for f in range(4):
            if (t, f) in partner:
                continue
            for a, b in itertools.combinations(FACE_CORNERS[f], 2):
                boundary_slots.add((t, (a, b)))
            for c in FACE_CORNERS[f]:
                boundary_vertices.add(tets[t][c])

    root_index: dict = {}
    members: list[list] = []
    for t in range(len(tets)):
        for e in LOCAL_EDGES:
            r = uf.find((t, e))
            if r not in root_index:
                root_index[r] = len(members)
                members.append([])
            members[root_index[r]].append((t, e))
    edge_of = {m: root_index[uf.find(m)] for grp in members for m in grp}

    # names
    fixed: dict[int, str] = {}
    for name, rep in (edge_names or {}).items():
        t, a, b = (int(x) for x in rep)
        key = (t, (min(a, b), max(a, b)))
        if key not in edge_of:
            raise TriangulationError(f"edge name {name!r} points at a non-existent tetrahedron edge {rep}")
        idx = edge_of[key]
        if idx in fixed and fixed[idx] != name:
            raise TriangulationError(f"edge {fixed[idx]!r} and {name!r} name the same edge")
        fixed[idx] = name
    if len(set(fixed.values())) != len(fixed):
        raise TriangulationError("two different edges were given the same name")
    used = set(fixed.values())
    counters: dict[tuple[str, str], int] = defaultdict(int)
    edges = []
    for idx, grp in enumerate(members):
        t0, (a, b) = grp[0]
        ends = tuple(sorted((tets[t0][a], tets[t0][b])))
        name = fixed.get(idx)
        if name is None:
            while True:
                name = f"{ends[0]}{ends[1]}_{counters[ends]}"
                counters[ends] += 1
                if name not in used:
                    break
            used.add(name)
        inc = tuple((t, e, permutation_parity(list(tets[t]))) for t, e in grp)
        is_bdry = any(m in boundary_slots for m in grp)
        edges.append(Edge(name, ends, inc, is_bdry))

    vertices = []
    for t in tets:
        for v in t:
            if v not in vertices:
                vertices.append(v)

    bdry_default = [i for i, e in enumerate(edges) if e.boundary]
    if boundary_order is None:
        order = bdry_default
    else:
        lookup = {e.name: i for i, e in enumerate(edges)}
        try:
            order = [lookup[n] for n in boundary_order]
        except KeyError as exc:
            raise TriangulationError(f"boundary_order names an unknown edge {exc.args[0]!r}") from None
        if len(set(order)) != len(order) or not set(order) <= set(bdry_default):
            raise TriangulationError("boundary_order must list distinct boundary edges")
        # unlisted boundary edges follow in first-appearance order
        order = order + [i for i in bdry_default if i not in set(order)]

    return Triangulation(
        tetrahedra=tets,
        gluings=tuple(unique),
        partner=partner,
        vertices=tuple(vertices),
        boundary_vertices=frozenset(boundary_vertices),
        edges=tuple(edges),
        edge_of=edge_of,
        boundary_order=tuple(order),
    )


def glue_by_labels(tetrahedra: Sequence[Sequence[str]], pairs: Iterable[tuple[int, int, int, int]]) -> list[Gluing]:
    """Gluings for ``(tet, face, to_tet, to_face)`` records whose corners match by label."""
    out = []
    for t, f, t2, f2 in pairs:
        pos2 = {v: i for i, v in enumerate(tetrahedra[t2])}
        corners = {c: pos2[tetrahedra[t][c]] for c in FACE_CORNERS[f]}
        if sorted(corners.values()) != list(FACE_CORNERS[f2]):
            raise LabelMismatch(f"faces ({t},{f}) and ({t2},{f2}) do not carry the same labels")
        out.append(gluing_from_corners(t, f, t2, f2, corners))
    return out


def relabel(tri: Triangulation, mapping: Mapping[str, str], rename_edges: Mapping[str, str] | None = None) -> Triangulation:
    """Rename vertices (and optionally edges); combinatorics are unchanged."""
    tets = [[mapping.get(v, v) for v in t] for t in tri.tetrahedra]
    names = {}
    for e in tri.edges:
        t, (a, b), _ = e.incidences[0]
        new = (rename_edges or {}).get(e.name, e.name)
        names[new] = (t, a, b)
    order = [(rename_edges or {}).get(tri.edges[i].name, tri.edges[i].name) for i in tri.boundary_order]
    return from_gluings(tets, tri.gluings, names, order)


def mirror(tri: Triangulation) -> Triangulation:
    """The same triangulation with every tetrahedron's orientation reversed."""
    swap = {0: 1, 1: 0, 2: 2, 3: 3}
    tets = [[t[swap[c]] for c in range(4)] for t in tri.tetrahedra]
    gl = []
    for g in tri.gluings:
        cm = {swap[c]: swap[c2] for c, c2 in g.corner_dict().items()}
        gl.append(gluing_from_corners(g.tet, swap[g.face], g.to_tet, swap[g.to_face], cm))
    names = {}
    for e in tri.edges:
        t, (a, b), _ = e.incidences[0]
        names[e.name] = (t, swap[a], swap[b])
    order = [tri.edges[i].name for i in tri.boundary_order]
    return from_gluings(tets, gl, names, order)


def isomorphic(a: Triangulation, b: Triangulation) -> bool:
    """Combinatorial isomorphism of face-pairings (labels ignored).

    Tries every image of tetrahedron 0 under every corner permutation and
    propagates through the gluings; exact for connected triangulations.
    """
    if a.n_tets != b.n_tets or len(a.partner) != len(b.partner):
        return False
    n = a.n_tets
    for start in range(n):
        for perm in itertools.permutations(range(4)):
            tet_map = {0: (start, perm)}
            used = {start}
            stack = [0]
            ok = True
            while stack and ok:
                t = stack.pop()
                t2, p = tet_map[t]
                for f in range(4):
                    ga = a.partner.get((t, f))
                    gb = b.partner.get((t2, p[f]))
                    if (ga is None) != (gb is None):
                        ok = False
                        break
                    if ga is None:
                        continue
                    ca = ga.corner_dict()
                    cb = gb.corner_dict()
                    # corner c of a's neighbour corresponds to ...
                    q = [None] * 4
                    for c in FACE_CORNERS[f]:
                        q[ca[c]] = cb[p[c]]
                    q[ga.to_face] = gb.to_face
                    if ga.to_tet in tet_map:
                        if tet_map[ga.to_tet] != (gb.to_tet, tuple(q)):
                            ok = False
                            break
                    else:
                        if gb.to_tet in used:
                            ok = False
                            break
                        tet_map[ga.to_tet] = (gb.to_tet, tuple(q))
                        used.add(gb.to_tet)
                        stack.append(ga.to_tet)
            if ok and len(tet_map) == n:
                return True
    return False
