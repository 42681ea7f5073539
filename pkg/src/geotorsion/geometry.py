"""Euclidean kernels: lengths, oriented volumes, dihedral angles and their
derivatives with respect to edge lengths.

Dihedral angles of a tetrahedron carry the sign of its oriented volume.
The Jacobian ``J`` of a tetrahedron is ``d(-phi_i)/d(l_j)`` over its six
local edges, in ``LOCAL_EDGES`` order.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from geotorsion.numeric import backend
from geotorsion.triangulation import LOCAL_EDGES, LOCAL_EDGE_INDEX, Triangulation

DEGENERACY_TOL = 1e-10


class DegenerateTetrahedron(ArithmeticError):
    pass


class Realization:
    """Vertex label -> (x, y, z)."""

    def __init__(self, coords: Mapping[str, Sequence[float]]):
        self.coords = {str(k): tuple(float(c) for c in v) for k, v in coords.items()}
        for k, v in self.coords.items():
            if len(v) != 3:
                raise ValueError(f"vertex {k!r} needs three coordinates, got {len(v)}")

    def __getitem__(self, label: str) -> tuple[float, float, float]:
        try:
            return self.coords[label]
        except KeyError:
            raise KeyError(f"realization has no coordinates for vertex {label!r}") from None

    def __contains__(self, label) -> bool:
        return label in self.coords

    def __eq__(self, other) -> bool:
        return isinstance(other, Realization) and self.coords == other.coords

    def __repr__(self) -> str:
        return f"Realization({self.coords!r})"

    def point(self, label: str):
        b = backend()
        return [b.scalar(c) for c in self[label]]

    def updated(self, changes: Mapping[str, Sequence[float]]) -> "Realization":
        merged = dict(self.coords)
        merged.update({k: tuple(v) for k, v in changes.items()})
        return Realization(merged)

    def scaled(self, factor: float) -> "Realization":
        return Realization({k: tuple(factor * c for c in v) for k, v in self.coords.items()})

    @classmethod
    def random(cls, labels: Sequence[str], seed: int | np.random.Generator = 0) -> "Realization":
        """Uniform coordinates in [-1, 1]^3, fully determined by ``seed``."""
        rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
        pts = rng.uniform(-1.0, 1.0, size=(len(labels), 3))
        return cls({lab: tuple(p) for lab, p in zip(labels, pts)})

    def to_json(self) -> dict:
        return {"coords": {k: list(v) for k, v in self.coords.items()}}

    @classmethod
    def from_json(cls, data: Mapping) -> "Realization":
        extra = set(data) - {"coords"}
        if extra:
            raise ValueError(f"unknown realization field(s): {sorted(extra)}")
        return cls(data["coords"])

    @classmethod
    def load(cls, path) -> "Realization":
        with open(path) as fh:
            return cls.from_json(json.load(fh))


def edge_length(p, q):
    b = backend()
    return b.sqrt(sum((b.scalar(qi) - b.scalar(pi)) ** 2 for pi, qi in zip(p, q)))


def oriented_volume(a, b, c, d):
    """(1/6) det[b - a, c - a, d - a] with the three vectors as columns."""
    bk = backend()
    a, b, c, d = ([bk.scalar(x) for x in p] for p in (a, b, c, d))
    u = [b[i] - a[i] for i in range(3)]
    v = [c[i] - a[i] for i in range(3)]
    w = [d[i] - a[i] for i in range(3)]
    det = (
        u[0] * (v[1] * w[2] - v[2] * w[1])
        - v[0] * (u[1] * w[2] - u[2] * w[1])
        + w[0] * (u[1] * v[2] - u[2] * v[1])
    )
    return det / 6


@dataclass(frozen=True)
class TetGeometry:
    lengths: tuple
    volume: object
    dihedral: tuple
    jacobian: np.ndarray

    @property
    def sign(self) -> int:
        return 1 if self.volume > 0 else -1


def _dot_gradients(i, j, k, m):
    """Dot products of a=p_j-p_i, b=p_k-p_i, c=p_m-p_i as linear forms in
    the squared lengths, returned as coefficient vectors over LOCAL_EDGES."""

    def e(x, y):
        return LOCAL_EDGE_INDEX[(min(x, y), max(x, y))]

    def form(*terms):
        vec = [0.0] * 6
        for coef, x, y in terms:
            vec[e(x, y)] += coef
        return vec

    aa = form((1, i, j))
    bb = form((1, i, k))
    cc = form((1, i, m))
    ab = form((0.5, i, j), (0.5, i, k), (-0.5, j, k))
    ac = form((0.5, i, j), (0.5, i, m), (-0.5, j, m))
    bc = form((0.5, i, k), (0.5, i, m), (-0.5, k, m))
    return aa, bb, cc, ab, ac, bc


_GRADIENTS = {}
for _i, _j in LOCAL_EDGES:
    _k, _m = (c for c in range(4) if c not in (_i, _j))
    _GRADIENTS[(_i, _j)] = _dot_gradients(_i, _j, _k, _m)


def _unsigned_angle_and_gradient(d, six_v):
    """Unsigned dihedral angles and d(phi)/d(d) for squared lengths ``d``.

    ``six_v`` is |6V|; it supplies sin(phi) = |6V| l / sqrt(PQ) without a
    cancellation-prone sqrt(1 - cos^2).
    """
    b = backend()
    angles = []
    grads = []
    for i, j in LOCAL_EDGES:
        forms = _GRADIENTS[(i, j)]
        aa, bb, cc, ab, ac, bc = (sum(c * x for c, x in zip(f, d)) for f in forms)
        daa, dbb, dcc, dab, dac, dbc = forms
        n = aa * bc - ab * ac
        p = aa * bb - ab * ab
        q = aa * cc - ac * ac
        pq = p * q
        root = b.sqrt(pq)
        cos_phi = n / root
        sin_phi = six_v * b.sqrt(aa) / root
        angles.append(b.atan2(sin_phi, cos_phi))
        g = []
        for s in range(6):
            dn = daa[s] * bc + aa * dbc[s] - dab[s] * ac - ab * dac[s]
            dp = daa[s] * bb + aa * dbb[s] - 2 * ab * dab[s]
            dq = daa[s] * cc + aa * dcc[s] - 2 * ac * dac[s]
            dcos = dn / root - n * (dp * q + p * dq) / (2 * pq * root)
            g.append(-dcos / sin_phi)
        grads.append(g)
    return angles, grads


def tet_geometry(points: Sequence[Sequence[float]]) -> TetGeometry:
    """Lengths, oriented volume, signed dihedral angles and Jacobian.

    ``points`` are the four corners in the tetrahedron's positive order.
    Raises :class:`DegenerateTetrahedron` when |6V| < 1e-10 (mean l)^3.
    """
    b = backend()
    pts = [[b.scalar(c) for c in p] for p in points]
    lengths = [edge_length(pts[i], pts[j]) for i, j in LOCAL_EDGES]
    vol = oriented_volume(*pts)
    mean_l = sum(lengths) / 6
    if abs(6 * vol) <= DEGENERACY_TOL * mean_l**3:
        raise DegenerateTetrahedron(f"tetrahedron is degenerate: 6V = {float(6 * vol):.3e}")
    sign = 1 if vol > 0 else -1
    d = [x * x for x in lengths]
    angles, grads = _unsigned_angle_and_gradient(d, abs(6 * vol))
    jac = b.zeros((6, 6))
    for r in range(6):
        for s in range(6):
            # d(phi)/d(l) = d(phi)/d(d) * 2l, then negate and apply orientation sign
            jac[r, s] = -sign * grads[r][s] * 2 * lengths[s]
    return TetGeometry(tuple(lengths), vol, tuple(sign * a for a in angles), jac)


def dihedral_from_coordinates(points) -> list[float]:
    """Unsigned dihedral angles via face normals (independent check path)."""
    p = np.asarray(points, dtype=float)
    out = []
    for i, j in LOCAL_EDGES:
        k, m = (c for c in range(4) if c not in (i, j))
        axis = p[j] - p[i]
        axis /= np.linalg.norm(axis)
        u = p[k] - p[i]
        v = p[m] - p[i]
        u -= axis * (u @ axis)
        v -= axis * (v @ axis)
        out.append(float(np.arccos(np.clip(u @ v / np.linalg.norm(u) / np.linalg.norm(v), -1, 1))))
    return out


def tet_points(tri: Triangulation, real: Realization, tet: int):
    return [real.point(v) for v in tri.tetrahedra[tet]]


def all_tet_geometry(tri: Triangulation, real: Realization) -> list[TetGeometry]:
    return [tet_geometry(tet_points(tri, real, t)) for t in range(tri.n_tets)]


def _reduce(angle):
    b = backend()
    two_pi = 2 * b.pi
    r = angle - two_pi * round(float(angle / two_pi))
    if r <= -b.pi:
        r += two_pi
    elif r > b.pi:
        r -= two_pi
    return r


def _angle_sum(tri: Triangulation, real: Realization, edge: int, geoms=None):
    geoms = geoms if geoms is not None else {}
    total = backend().scalar(0)
    for t, e, _ in tri.edges[edge].incidences:
        if t not in geoms:
            geoms[t] = tet_geometry(tet_points(tri, real, t))
        total = total + geoms[t].dihedral[LOCAL_EDGE_INDEX[e]]
    return total


def deficit_angle(edge: int, tri: Triangulation, real: Realization, geoms=None):
    """omega = -(sum of signed dihedral angles around an inner edge), in (-pi, pi]."""
    if tri.edges[edge].boundary:
        raise ValueError(f"edge {tri.edges[edge].name} is a boundary edge; use boundary_alpha")
    return _reduce(-_angle_sum(tri, real, edge, geoms))


def boundary_alpha(edge: int, tri: Triangulation, real: Realization, geoms=None):
    """alpha = -(sum of signed dihedral angles over the partial star), in (-pi, pi]."""
    if not tri.edges[edge].boundary:
        raise ValueError(f"edge {tri.edges[edge].name} is inner; use deficit_angle")
    return _reduce(-_angle_sum(tri, real, edge, geoms))
