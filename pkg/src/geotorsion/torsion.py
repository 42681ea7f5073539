"""tau-chains, torsions and the invariants I(M) and I_{C,D}(M).

Closed manifolds::

    tau = minor f1 * minor f3 * minor f5 / (minor f2 * minor f4)
    I(M) = tau * prod(-6V) / prod_{all edges} l^2

Manifolds with boundary::

    tau = minor f3 / (minor f2 * minor f4)
    I_{C,D}(M) = tau * prod(-6V) / prod_{inner edges} l^2

Minors of f4 and f5 are always the transposed selections of f2 and f1,
and a 0x0 minor equals 1.  Every minor is the determinant of the
submatrix with rows and columns in the complex's own index order.
"""

from __future__ import annotations

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from geotorsion.complexes import (
    AXES,
    GeometricComplex,
    boundary_index_lists,
    build_complex,
    build_f2,
    coordinate_labels,
    full_f3,
)
from geotorsion.geometry import Realization, all_tet_geometry, edge_length
from geotorsion.numeric import backend
from geotorsion.triangulation import FACE_CORNERS, Triangulation

VANISHING_THRESHOLD = 1e-9
PIVOT_TOL = 1e-10


class TorsionError(ArithmeticError):
    pass


class GreedyFailure(TorsionError):
    pass


class NoNondegenerateChain(TorsionError):
    pass


class ZeroDenominatorMinor(TorsionError):
    pass


@dataclass(frozen=True)
class F2Minor:
    """Rows (edge indices) and columns ((vertex, axis) pairs) of a minor of f2."""

    rows: tuple[int, ...]
    cols: tuple[tuple[str, str], ...]
    blocks: tuple[tuple[str, tuple[int, int, int]], ...] = ()


@dataclass(frozen=True)
class TauChain:
    f1_rows: tuple[tuple[str, str], ...]
    f2: F2Minor
    f3_rows: tuple[int, ...]
    f3_cols: tuple[int, ...]
    triangle: tuple[str, str, str] | None = None

    @property
    def f4_rows(self):
        return self.f2.cols

    @property
    def f4_cols(self):
        return self.f2.rows

    @property
    def f5_cols(self):
        return self.f1_rows


def _sub(m: np.ndarray, rows: Sequence[int], cols: Sequence[int]) -> np.ndarray:
    if not len(rows) or not len(cols):
        return backend().zeros((len(rows), len(cols)))
    return m[np.ix_(list(rows), list(cols))]


def minor(m: np.ndarray, rows: Sequence[int], cols: Sequence[int]):
    if len(rows) != len(cols):
        raise ValueError(f"minor needs as many rows as columns ({len(rows)} vs {len(cols)})")
    return backend().det(_sub(m, sorted(rows), sorted(cols)))


# -- f2 minor, boundary case ------------------------------------------------

def select_f2_minor(tri: Triangulation, real: Realization | None = None) -> F2Minor:
    """Greedy block-triangular maximal minor of f2 over the inner vertices.

    Inner vertices are scanned in vertex order; a vertex is admissible once
    it has edges to three distinct vertices that are on the boundary or
    already chosen.  Its first three such edges (edge order) become rows,
    its x, y, z the columns.  The result depends on combinatorics only and
    is shared by every (C, D).
    """
    done = set(tri.boundary_vertices)
    if not done and tri.inner_vertices:
        raise GreedyFailure("the greedy f2 minor needs a nonempty boundary")
    pending = list(tri.inner_vertices)
    rows: list[int] = []
    cols: list[tuple[str, str]] = []
    blocks = []
    while pending:
        for v in pending:
            triple = []
            seen = set()
            for idx, e in enumerate(tri.edges):
                if v not in e.ends:
                    continue
                other = e.ends[1] if e.ends[0] == v else e.ends[0]
                if other in done and other not in seen:
                    triple.append(idx)
                    seen.add(other)
                    if len(triple) == 3:
                        break
            if len(triple) == 3:
                break
        else:
            raise GreedyFailure(f"no admissible next vertex among {sorted(pending)}")
        pending.remove(v)
        done.add(v)
        rows.extend(triple)
        cols.extend((v, a) for a in AXES)
        blocks.append((v, tuple(triple)))
    if real is not None:
        val = f2_minor_value(tri, real, F2Minor(tuple(rows), tuple(cols)))
        if val == 0:
            raise NoNondegenerateChain("the greedy f2 minor vanishes for these coordinates")
    return F2Minor(tuple(rows), tuple(cols), tuple(blocks))


def f2_minor_value(tri: Triangulation, real: Realization, sel: F2Minor):
    """Value of the selected f2 minor, rows and columns in complex order."""
    verts = tri.inner_vertices
    rows = sorted(sel.rows)
    f2 = build_f2(tri, real, verts, rows)
    col_index = {c: k for k, c in enumerate(coordinate_labels(verts))}
    cols = sorted(col_index[c] for c in sel.cols)
    return backend().det(_sub(f2, range(len(rows)), cols))


# -- closed chains ----------------------------------------------------------

def _f1_rows_for(a: str, b: str, c: str):
    return ((a, "x"), (a, "y"), (a, "z"), (b, "y"), (b, "z"), (c, "z"))


def _triangles(tri: Triangulation):
    seen = set()
    for t, tet in enumerate(tri.tetrahedra):
        for f in range(4):
            tri_labels = tuple(tet[c] for c in FACE_CORNERS[f])
            if tri_labels not in seen:
                seen.add(tri_labels)
                yield tri_labels


def pivot_rows(m: np.ndarray, tol: float = PIVOT_TOL) -> list[int]:
    """Rows of an n x k matrix forming a nonsingular k x k minor.

    Gaussian elimination with partial pivoting; ties go to the lowest index.
    Raises NoNondegenerateChain when the matrix has rank < k.
    """
    a = np.array(m, dtype=object if backend().dtype is object else float, copy=True)
    n, k = a.shape
    scale = float(np.abs(np.asarray(a, dtype=float)).max()) if a.size else 1.0
    free = list(range(n))
    chosen = []
    for c in range(k):
        best = max(free, key=lambda r: (abs(a[r, c]), -r), default=None)
        if best is None or abs(float(a[best, c])) <= tol * scale:
            raise NoNondegenerateChain(f"f2 restricted to the chosen columns has rank {c} < {k}")
        chosen.append(best)
        free.remove(best)
        for r in free:
            if a[r, c] != 0:
                a[r, :] = a[r, :] - (a[r, c] / a[best, c]) * a[best, :]
    return chosen


def select_tau_chain_closed(cx: GeometricComplex, tri: Triangulation | None = None) -> TauChain:
    if cx.kind != "closed":
        raise ValueError("select_tau_chain_closed needs a closed complex")
    coord_index = {c: k for k, c in enumerate(cx.coords)}
    scale = max(float(np.abs(np.asarray(cx.f1[:, 3:], dtype=float)).max()), 1.0)
    triangle = None
    candidates = _triangles(tri) if tri is not None else itertools.combinations(cx.vertices, 3)
    for cand in candidates:
        rows = _f1_rows_for(*cand)
        val = minor(cx.f1, [coord_index[r] for r in rows], range(6))
        if abs(float(val)) > 1e-12 * scale**3:
            triangle = tuple(cand)
            f1_rows = rows
            break
    if triangle is None:
        raise NoNondegenerateChain("every candidate f1 minor vanishes")
    f1_set = {coord_index[r] for r in f1_rows}
    f2_cols = [k for k in range(len(cx.coords)) if k not in f1_set]
    sub = _sub(cx.f2, range(cx.f2.shape[0]), f2_cols)
    f2_rows = sorted(pivot_rows(sub))
    rest = [e for e in range(len(cx.l_edges)) if e not in set(f2_rows)]
    return TauChain(
        f1_rows=tuple(f1_rows),
        f2=F2Minor(tuple(cx.l_edges[r] for r in f2_rows), tuple(cx.coords[c] for c in f2_cols)),
        f3_rows=tuple(cx.w_edges[r] for r in rest),
        f3_cols=tuple(cx.l_edges[r] for r in rest),
        triangle=triangle,
    )


@dataclass(frozen=True)
class ClosedResult:
    value: float
    tau: float
    minors: dict
    chain: TauChain
    volume_factor: float
    length_factor: float


def torsion_closed(cx: GeometricComplex, chain: TauChain) -> tuple[object, dict]:
    coord_index = {c: k for k, c in enumerate(cx.coords)}
    edge_pos = {e: k for k, e in enumerate(cx.l_edges)}
    f1_rows = [coord_index[c] for c in chain.f1_rows]
    f2_rows = [edge_pos[e] for e in chain.f2.rows]
    f2_cols = [coord_index[c] for c in chain.f2.cols]
    m = {
        "f1": minor(cx.f1, f1_rows, range(6)),
        "f2": minor(cx.f2, f2_rows, f2_cols),
        "f3": minor(cx.f3, [edge_pos[e] for e in chain.f3_rows], [edge_pos[e] for e in chain.f3_cols]),
        "f4": minor(cx.f4, f2_cols, f2_rows),
        "f5": minor(cx.f5, range(6), f1_rows),
    }
    if m["f2"] == 0 or m["f4"] == 0 or m["f1"] == 0:
        raise ZeroDenominatorMinor("a denominator minor of the closed tau-chain vanishes")
    tau = m["f1"] * m["f3"] * m["f5"] / (m["f2"] * m["f4"])
    return tau, m


def _volume_factor(tri: Triangulation, real: Realization, geoms=None):
    geoms = all_tet_geometry(tri, real) if geoms is None else geoms
    prod = backend().scalar(1)
    for g in geoms:
        prod = prod * (-6 * g.volume)
    return prod


def _length_factor(tri: Triangulation, real: Realization, edges: Iterable[int]):
    prod = backend().scalar(1)
    for e in edges:
        p, q = tri.edges[e].ends
        prod = prod * edge_length(real.point(p), real.point(q)) ** 2
    return prod


def evaluate_closed(tri: Triangulation, real: Realization, chain: TauChain | None = None) -> ClosedResult:
    geoms = all_tet_geometry(tri, real)
    cx = build_complex(tri, real, "closed", full=full_f3(tri, real, geoms))
    chain = select_tau_chain_closed(cx, tri) if chain is None else chain
    tau, m = torsion_closed(cx, chain)
    vf = _volume_factor(tri, real, geoms)
    lf = _length_factor(tri, real, range(len(tri.edges)))
    return ClosedResult(tau * vf / lf, tau, m, chain, vf, lf)


def invariant_closed(tri: Triangulation, real: Realization) -> float:
    return evaluate_closed(tri, real).value


# -- boundary invariants ----------------------------------------------------

@dataclass
class BoundaryContext:
    """Everything about M that does not depend on (C, D)."""

    tri: Triangulation
    real: Realization
    full: np.ndarray
    f2: F2Minor
    f2_product: object  # minor f2 * minor f4
    prefactor: object  # prod(-6V) / prod_{inner} l^2
    free_inner: tuple[int, ...]

    @classmethod
    def build(cls, tri: Triangulation, real: Realization) -> "BoundaryContext":
        if tri.is_closed:
            raise ValueError("boundary invariants need a triangulation with boundary")
        geoms = all_tet_geometry(tri, real)
        full = full_f3(tri, real, geoms)
        sel = select_f2_minor(tri)
        m2 = f2_minor_value(tri, real, sel)
        if m2 == 0:
            raise ZeroDenominatorMinor("the f2 minor vanishes for these coordinates")
        # minor f4 = det(-(f2 sub)^T) = (-1)^size minor f2
        prod = (-1) ** len(sel.rows) * m2 * m2
        pre = _volume_factor(tri, real, geoms) / _length_factor(tri, real, tri.inner_edges)
        used = set(sel.rows)
        free = tuple(e for e in tri.inner_edges if e not in used)
        return cls(tri, real, full, sel, prod, pre, free)

    def f3_indices(self, C: Sequence[int], D: Sequence[int]) -> tuple[list[int], list[int]]:
        order = {e: k for k, e in enumerate(self.tri.boundary_order)}
        rows = list(self.free_inner) + sorted(D, key=order.__getitem__)
        cols = list(self.free_inner) + sorted(C, key=order.__getitem__)
        return rows, cols

    def f3_minor(self, C, D):
        if len(C) != len(D):
            from geotorsion.complexes import SubsetCardinalityMismatch

            raise SubsetCardinalityMismatch(f"|C| = {len(C)} but |D| = {len(D)}")
        boundary_index_lists(self.tri, C, D)  # validates C, D
        rows, cols = self.f3_indices(C, D)
        return backend().det(_sub(self.full, rows, cols))

    def value(self, C, D):
        return self.f3_minor(C, D) / self.f2_product * self.prefactor

    def values(
        self,
        pairs: Sequence[tuple[Sequence[int], Sequence[int]]],
        parallel: bool = False,
        chunk: int = 4096,
        with_ratio: bool = False,
    ):
        """Invariants for many (C, D) pairs of one common size, batched.

        With ``with_ratio`` also returns |minor f3| over the product of the
        norms of its rows taken across the whole f3: a Hadamard-type bound
        that, unlike the minor's own row norms, does not shrink when the
        selected entries are themselves cancellation residue.
        """
        if not pairs:
            return (np.zeros(0), np.zeros(0)) if with_ratio else np.zeros(0)
        k = len(pairs[0][0])
        size = len(self.free_inner) + k
        b = backend()

        def run(batch):
            stack = b.zeros((len(batch), size, size)) if b.dtype is object else np.empty((len(batch), size, size))
            for n, (C, D) in enumerate(batch):
                rows, cols = self.f3_indices(C, D)
                stack[n] = _sub(self.full, rows, cols)
            return b.batch_det(stack)

        batches = [pairs[i:i + chunk] for i in range(0, len(pairs), chunk)]
        if with_ratio:
            run_det = run
            row_norm = np.linalg.norm(np.asarray(self.full, dtype=float), axis=1)

            def run(batch):
                bound = np.array([np.prod(row_norm[self.f3_indices(C, D)[0]]) for C, D in batch])
                dets = run_det(batch)
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(bound > 0, np.abs(np.asarray(dets, dtype=float)) / bound, 0.0)
                return dets, ratio

        if parallel and len(batches) > 1:
            with ThreadPoolExecutor() as pool:
                parts = list(pool.map(run, batches))
        else:
            parts = [run(bt) for bt in batches]
        if with_ratio:
            dets = np.concatenate([d for d, _ in parts])
            ratios = np.concatenate([r for _, r in parts])
            return dets / self.f2_product * self.prefactor, ratios
        dets = np.concatenate(parts) if len(parts) > 1 else parts[0]
        return dets / self.f2_product * self.prefactor


def invariant_boundary(tri: Triangulation, real: Realization, C: Sequence, D: Sequence) -> float:
    ctx = BoundaryContext.build(tri, real)
    return ctx.value(_as_indices(tri, C), _as_indices(tri, D))


def _as_indices(tri: Triangulation, edges: Sequence) -> list[int]:
    return [tri.edge_index(e) if isinstance(e, str) else int(e) for e in edges]


@dataclass
class InvariantVector:
    """Components I_{C,D} keyed by (C names, D names), each in edge-order order."""

    edge_order: tuple[str, ...]
    components: dict[tuple[tuple[str, ...], tuple[str, ...]], object]
    levels: tuple[int, ...]
    boundary_coords: dict[str, tuple[float, float, float]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)
    ratios: dict = field(default_factory=dict)

    def __getitem__(self, key):
        C, D = key
        return self.components[(self._canon(C), self._canon(D))]

    def get(self, C, D, default=0.0):
        return self.components.get((self._canon(C), self._canon(D)), default)

    def _canon(self, names) -> tuple[str, ...]:
        pos = {n: k for k, n in enumerate(self.edge_order)}
        return tuple(sorted(names, key=pos.__getitem__))

    def level(self, k: int) -> dict:
        return {key: v for key, v in self.components.items() if len(key[0]) == k}

    def max_abs(self, k: int | None = None) -> float:
        vals = self.components.values() if k is None else self.level(k).values()
        return max((abs(float(v)) for v in vals), default=0.0)

    def nonvanishing(self, k: int, threshold: float = VANISHING_THRESHOLD, scale: float | None = None) -> list:
        """Keys of level ``k`` with |I| >= threshold * scale (default: the level's max)."""
        scale = self.max_abs(k) if scale is None else scale
        return [key for key, v in self.level(k).items() if abs(float(v)) >= threshold * scale and scale > 0]

    def nonvanishing_by_ratio(self, k: int, threshold: float = VANISHING_THRESHOLD) -> list:
        """Keys of level ``k`` whose f3 minor is not lost to cancellation."""
        if not self.ratios:
            raise ValueError("vector was computed without cancellation ratios")
        return [key for key in self.level(k) if self.ratios[key] >= threshold]

    def to_json(self) -> dict:
        levels = list(self.levels)
        comps = [
            {"C": list(C), "D": list(D), "value": float(v)}
            for (C, D), v in self.components.items()
        ]
        out = {"level": levels[0] if len(levels) == 1 else levels, "edge_order": list(self.edge_order), "components": comps}
        if self.meta:
            out["meta"] = self.meta
        return out


def subset_pairs(pool: Sequence[int], k: int) -> list[tuple[tuple[int, ...], tuple[int, ...]]]:
    subsets = list(itertools.combinations(pool, k))
    return [(C, D) for C in subsets for D in subsets]


def invariant_vector(
    tri: Triangulation,
    real: Realization,
    levels: int | Sequence[int],
    edges: Sequence | None = None,
    parallel: bool = False,
    ctx: BoundaryContext | None = None,
) -> InvariantVector:
    """All components I_{C,D} with C, D drawn from ``edges`` (default: every
    boundary edge) at the requested level(s)."""
    ctx = BoundaryContext.build(tri, real) if ctx is None else ctx
    levels = (levels,) if isinstance(levels, int) else tuple(levels)
    order = list(tri.boundary_order)
    pool = order if edges is None else sorted(_as_indices(tri, edges), key=order.index)
    comps = {}
    ratios = {}
    for k in levels:
        if k > len(pool):
            raise ValueError(f"level {k} exceeds the {len(pool)} available boundary edges")
        pairs = subset_pairs(pool, k)
        vals, rat = ctx.values(pairs, parallel=parallel, with_ratio=True)
        for (C, D), v, q in zip(pairs, vals, rat):
            key = (tuple(tri.edges[e].name for e in C), tuple(tri.edges[e].name for e in D))
            comps[key] = v
            ratios[key] = float(q)
    bcoords = {v: real[v] for v in tri.vertices if v in tri.boundary_vertices}
    meta = {
        "f2_minor_rows": [tri.edges[e].name for e in ctx.f2.rows],
        "f2_minor_vertices": [v for v, _ in ctx.f2.blocks],
    }
    return InvariantVector(tuple(tri.edges[e].name for e in pool), comps, levels, bcoords, meta, ratios)
