"""Matrices of the closed complex and of the contracted boundary complex.

Closed::

    0 -> e(3) -f1-> (dx) -f2-> (dl) -f3-> (domega) -f4-> (dx*) -f5-> e(3)* -> 0

with f4 = -f2^T and f5 = f1^T.  Boundary, for subsets C, D of boundary
edges with |C| = |D|::

    0 -> (dx_inner) -f2-> (dl_inner, dl_C) -f3-> (domega, dalpha_D) -f4-> (dx*_inner) -> 0

Edges are ordered by class index; in boundary complexes the inner edges
come first, followed by C (columns) or D (rows) in the triangulation's
stored boundary-edge order.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from geotorsion.geometry import Realization, TetGeometry, all_tet_geometry
from geotorsion.numeric import backend
from geotorsion.triangulation import LOCAL_EDGES, Triangulation

AXES = ("x", "y", "z")


class KindMismatch(ValueError):
    pass


class SubsetCardinalityMismatch(ValueError):
    pass


def coordinate_labels(vertices: Sequence[str]) -> list[tuple[str, str]]:
    return [(v, a) for v in vertices for a in AXES]


def build_f1(tri: Triangulation, real: Realization, vertices: Sequence[str] | None = None) -> np.ndarray:
    """Action of the 3 translations and 3 axis rotations on vertex coordinates."""
    vertices = tri.vertices if vertices is None else vertices
    b = backend()
    f1 = b.zeros((3 * len(vertices), 6))
    for n, v in enumerate(vertices):
        x, y, z = real.point(v)
        r = 3 * n
        for a in range(3):
            f1[r + a, a] = b.scalar(1)
        # omega x p for omega = e_x, e_y, e_z
        f1[r + 1, 3], f1[r + 2, 3] = -z, y
        f1[r, 4], f1[r + 2, 4] = z, -x
        f1[r, 5], f1[r + 1, 5] = -y, x
    return f1


def build_f2(tri: Triangulation, real: Realization, vertices: Sequence[str], edges: Sequence[int]) -> np.ndarray:
    """d(length)/d(coordinate) for the given edge rows and vertex columns."""
    b = backend()
    col = {v: 3 * n for n, v in enumerate(vertices)}
    f2 = b.zeros((len(edges), 3 * len(vertices)))
    for r, e in enumerate(edges):
        p, q = tri.edges[e].ends
        xp, xq = real.point(p), real.point(q)
        diff = [xp[a] - xq[a] for a in range(3)]
        length = b.sqrt(sum(d * d for d in diff))
        if length == 0:
            raise ArithmeticError(f"edge {tri.edges[e].name} has zero length")
        for a in range(3):
            if p in col:
                f2[r, col[p] + a] = diff[a] / length
            if q in col:
                f2[r, col[q] + a] = -diff[a] / length
    return f2


def full_f3(tri: Triangulation, real: Realization, geoms: Sequence[TetGeometry] | None = None) -> np.ndarray:
    """d(-sum of dihedral angles)/d(length) over every pair of edge classes.

    A tetrahedron meeting a class at several local edges contributes once
    per local edge, on both the row and the column side.
    """
    geoms = all_tet_geometry(tri, real) if geoms is None else geoms
    n = len(tri.edges)
    f3 = backend().zeros((n, n))
    for t, g in enumerate(geoms):
        idx = [tri.edge_of[(t, e)] for e in LOCAL_EDGES]
        for a in range(6):
            for c in range(6):
                f3[idx[a], idx[c]] += g.jacobian[a, c]
    return f3


def build_f3(tri: Triangulation, real: Realization, row_edges: Sequence[int], col_edges: Sequence[int], full=None) -> np.ndarray:
    full = full_f3(tri, real) if full is None else full
    return full[np.ix_(list(row_edges), list(col_edges))] if len(row_edges) and len(col_edges) else backend().zeros(
        (len(row_edges), len(col_edges))
    )


@dataclass(frozen=True)
class GeometricComplex:
    kind: str
    vertices: tuple[str, ...]
    coords: tuple[tuple[str, str], ...]
    l_edges: tuple[int, ...]
    w_edges: tuple[int, ...]
    f2: np.ndarray
    f3: np.ndarray
    f4: np.ndarray
    f1: np.ndarray | None = None
    f5: np.ndarray | None = None
    C: tuple[int, ...] = ()
    D: tuple[int, ...] = ()

    def matrices(self) -> list[np.ndarray]:
        if self.kind == "closed":
            return [self.f1, self.f2, self.f3, self.f4, self.f5]
        return [self.f2, self.f3, self.f4]


def boundary_index_lists(tri: Triangulation, C: Sequence[int], D: Sequence[int]) -> tuple[list[int], list[int]]:
    """(column edges, row edges) of the boundary f3: inner first, then C or D."""
    order = {e: k for k, e in enumerate(tri.boundary_order)}
    for name, subset in (("C", C), ("D", D)):
        bad = [tri.edges[e].name for e in subset if e not in order]
        if bad:
            raise ValueError(f"{name} must contain boundary edges only; got inner edge(s) {bad}")
        if len(set(subset)) != len(subset):
            raise ValueError(f"{name} contains repeated edges")
    inner = list(tri.inner_edges)
    cols = inner + sorted(C, key=order.__getitem__)
    rows = inner + sorted(D, key=order.__getitem__)
    return cols, rows


def build_complex(
    tri: Triangulation,
    real: Realization,
    kind: str = "closed",
    C: Sequence[int] = (),
    D: Sequence[int] = (),
    full=None,
) -> GeometricComplex:
    if kind == "closed":
        if not tri.is_closed:
            raise KindMismatch("a closed complex needs a triangulation without boundary")
        verts = tri.vertices
        edges = list(range(len(tri.edges)))
        f1 = build_f1(tri, real, verts)
        f2 = build_f2(tri, real, verts, edges)
        f3 = build_f3(tri, real, edges, edges, full)
        return GeometricComplex(
            "closed", tuple(verts), tuple(coordinate_labels(verts)), tuple(edges), tuple(edges),
            f2, f3, -f2.T, f1=f1, f5=f1.T,
        )
    if kind != "boundary":
        raise KindMismatch(f"unknown complex kind {kind!r}")
    if tri.is_closed:
        raise KindMismatch("a boundary complex needs a triangulation with nonempty boundary")
    if len(C) != len(D):
        raise SubsetCardinalityMismatch(f"|C| = {len(C)} but |D| = {len(D)}")
    cols, rows = boundary_index_lists(tri, C, D)
    verts = tri.inner_vertices
    f2 = build_f2(tri, real, verts, cols)
    f2_rows = build_f2(tri, real, verts, rows)
    f3 = build_f3(tri, real, rows, cols, full)
    order = {e: k for k, e in enumerate(tri.boundary_order)}
    return GeometricComplex(
        "boundary", tuple(verts), tuple(coordinate_labels(verts)), tuple(cols), tuple(rows),
        f2, f3, -f2_rows.T,
        C=tuple(sorted(C, key=order.__getitem__)), D=tuple(sorted(D, key=order.__getitem__)),
    )


def composition_residuals(cx: GeometricComplex) -> dict[str, float]:
    """Max-abs of successive compositions, each scaled by the operand sizes."""
    out = {}
    mats = cx.matrices()
    first = 1 if cx.kind == "closed" else 2
    for k in range(len(mats) - 1):
        a, b = mats[k], mats[k + 1]
        key = f"f{first + k + 1}f{first + k}"
        if a.size == 0 or b.size == 0:
            out[key] = 0.0
            continue
        prod = np.asarray(b @ a, dtype=float)
        scale = float(np.abs(np.asarray(a, dtype=float)).max()) * float(np.abs(np.asarray(b, dtype=float)).max()) or 1.0
        out[key] = float(np.abs(prod).max()) / scale
    return out


def matrix_to_csv(m: np.ndarray, row_names: Sequence[str], col_names: Sequence[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([""] + list(col_names))
    for name, row in zip(row_names, np.asarray(m, dtype=float)):
        w.writerow([name] + [repr(float(x)) for x in row])
    return buf.getvalue()
