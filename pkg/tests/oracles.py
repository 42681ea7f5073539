"""Independent reference computations shared by the test modules."""

import mpmath
import numpy as np

from geotorsion.geometry import oriented_volume
from geotorsion.triangulation import LOCAL_EDGES


def embed(lengths):
    """Corner coordinates with the given six edge lengths (LOCAL_EDGES order), in mpmath."""
    l01, l02, l03, l12, l13, l23 = (mpmath.mpf(x) for x in lengths)
    x2 = (l01**2 + l02**2 - l12**2) / (2 * l01)
    y2 = mpmath.sqrt(l02**2 - x2**2)
    x3 = (l01**2 + l03**2 - l13**2) / (2 * l01)
    y3 = (l03**2 - l23**2 + x2**2 + y2**2 - 2 * x3 * x2) / (2 * y2)
    z3 = mpmath.sqrt(l03**2 - x3**2 - y3**2)
    return [(0, 0, 0), (l01, 0, 0), (x2, y2, 0), (x3, y3, z3)]


def angles_from_lengths(lengths):
    """Dihedral angles through face normals of the embedded tetrahedron."""
    p = [mpmath.matrix(list(map(mpmath.mpf, q))) for q in embed(lengths)]
    out = []
    for i, j in LOCAL_EDGES:
        k, m = (c for c in range(4) if c not in (i, j))
        axis = p[j] - p[i]
        axis /= mpmath.norm(axis)
        u = p[k] - p[i]
        v = p[m] - p[i]
        u -= axis * mpmath.fdot(u, axis)
        v -= axis * mpmath.fdot(v, axis)
        out.append(mpmath.acos(mpmath.fdot(u, v) / (mpmath.norm(u) * mpmath.norm(v))))
    return out


def positive_tets(n, seed=0):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < n:
        p = rng.uniform(-1, 1, size=(4, 3))
        vol = oriented_volume(*p)
        if vol < 0:
            p[[0, 1]] = p[[1, 0]]
        out.append(p)
    return out


def relative_gap(a, b) -> float:
    """Max componentwise difference of two invariant vectors over their max entry."""
    keys = set(a.components) | set(b.components)
    scale = max(abs(float(a.components.get(k, 0.0))) for k in keys)
    return max(abs(float(a.components.get(k, 0.0)) - float(b.components.get(k, 0.0))) for k in keys) / scale


def fd_jacobian(points, h="1e-15", dps=40):
    """-d(angle)/d(length) by central differences in extended arithmetic.

    Lengths come straight from the coordinates at full precision; rounding
    them to doubles first would describe a slightly different tetrahedron,
    which matters for slivers.
    """
    out = np.empty((6, 6))
    with mpmath.workdps(dps):
        h = mpmath.mpf(h)
        pts = [[mpmath.mpf(float(x)) for x in q] for q in points]
        base = [mpmath.sqrt(sum((pts[j][k] - pts[i][k]) ** 2 for k in range(3))) for i, j in LOCAL_EDGES]
        for j in range(6):
            up, dn = list(base), list(base)
            up[j] += h
            dn[j] -= h
            a, b = angles_from_lengths(up), angles_from_lengths(dn)
            out[:, j] = [float(-(x - y) / (2 * h)) for x, y in zip(a, b)]
    return out
