"""Geometric torsion invariants of triangulated 3-manifolds.

Closed manifolds get a single number I(M); manifolds with boundary get a
vector of components I_{C,D}(M) indexed by pairs of equal-size sets of
boundary edges.  Both are computed from an acyclic complex built out of
the derivatives of dihedral angles with respect to edge lengths.
"""

from geotorsion.geometry import Realization
from geotorsion.torsion import InvariantVector, invariant_boundary, invariant_closed, invariant_vector
from geotorsion.triangulation import Triangulation, TriangulationError, from_gluings

__all__ = [
    "InvariantVector",
    "Realization",
    "Triangulation",
    "TriangulationError",
    "from_gluings",
    "invariant_boundary",
    "invariant_closed",
    "invariant_vector",
]
