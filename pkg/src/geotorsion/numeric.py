"""Scalar backends and determinant helpers.

Everything downstream does its arithmetic through :func:`backend`, so the
whole pipeline can be switched between IEEE doubles and a software
extended-precision mode (mpmath, 34 significant digits) with
:func:`use_precision`.
"""

from __future__ import annotations

import contextlib
import contextvars
import itertools
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Sequence

import mpmath
import numpy as np

EXTENDED_DPS = 34


@dataclass(frozen=True)
class Backend:
    name: str
    scalar: Callable
    sqrt: Callable
    acos: Callable
    atan2: Callable
    pi: object
    dtype: object

    def zeros(self, shape) -> np.ndarray:
        if self.dtype is object:
            out = np.empty(shape, dtype=object)
            out.fill(self.scalar(0))
            return out
        return np.zeros(shape, dtype=float)

    def array(self, values) -> np.ndarray:
        if self.dtype is object:
            arr = np.asarray(values, dtype=object)
            return np.vectorize(self.scalar, otypes=[object])(arr) if arr.size else arr
        return np.asarray(values, dtype=float)

    def det(self, m: np.ndarray):
        m = np.asarray(m)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"determinant of non-square matrix {m.shape}")
        if m.shape[0] == 0:
            return self.scalar(1)
        if self.dtype is object:
            with mpmath.workdps(EXTENDED_DPS):
                return mpmath.det(mpmath.matrix(m.tolist()))
        return float(np.linalg.det(m))

    def batch_det(self, stack: np.ndarray) -> np.ndarray:
        """Determinants of a stack of square matrices, shape (n, k, k)."""
        stack = np.asarray(stack)
        if stack.shape[-1] == 0:
            return self.array(np.ones(stack.shape[0]))
        if self.dtype is object:
            return np.array([self.det(m) for m in stack], dtype=object)
        return np.linalg.det(stack)


def _mpf(x):
    with mpmath.workdps(EXTENDED_DPS):
        return mpmath.mpf(x)


DOUBLE = Backend("double", float, math.sqrt, math.acos, math.atan2, math.pi, float)
EXTENDED = Backend("extended", _mpf, mpmath.sqrt, mpmath.acos, mpmath.atan2, mpmath.pi, object)
BACKENDS = {"double": DOUBLE, "extended": EXTENDED}

_current: contextvars.ContextVar[Backend] = contextvars.ContextVar("geotorsion_backend", default=DOUBLE)


def backend() -> Backend:
    return _current.get()


@contextlib.contextmanager
def use_precision(name: str) -> Iterator[Backend]:
    """Temporarily switch the arithmetic backend ("double" or "extended")."""
    try:
        b = BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown precision mode {name!r}; expected one of {sorted(BACKENDS)}") from None
    token = _current.set(b)
    try:
        if b.dtype is object:
            with mpmath.workdps(EXTENDED_DPS):
                yield b
        else:
            yield b
    finally:
        _current.reset(token)


def to_float(x) -> float:
    return float(x)


def permutation_parity(seq: Sequence) -> int:
    """Return +1 for an even arrangement of distinct sortable items, -1 for odd."""
    order = sorted(range(len(seq)), key=lambda i: seq[i])
    seen = [False] * len(order)
    sign = 1
    for start in range(len(order)):
        if seen[start]:
            continue
        length = 0
        j = start
        while not seen[j]:
            seen[j] = True
            j = order[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def reorder_sign(src: Sequence, dst: Sequence) -> int:
    """Sign of the permutation carrying the ordered list ``src`` onto ``dst``."""
    if len(src) != len(dst) or set(src) != set(dst):
        raise ValueError("reorder_sign needs two orderings of the same items")
    pos = {x: i for i, x in enumerate(dst)}
    return permutation_parity([pos[x] for x in src])


def cofactor_det(m) -> float:
    """Naive Laplace expansion along the first row.

    Test oracle only: exponential cost, used for sizes up to ~8.
    """
    m = [list(row) for row in m]
    n = len(m)
    if n == 0:
        return 1.0
    if n == 1:
        return m[0][0]
    total = 0.0
    for j in range(n):
        if m[0][j] == 0:
            continue
        sub = [row[:j] + row[j + 1:] for row in m[1:]]
        total += (-1) ** j * m[0][j] * cofactor_det(sub)
    return total


def leibniz_det(m) -> float:
    """Determinant as a signed sum over all permutations (oracle, n <= 7)."""
    n = len(m)
    total = 0.0
    for perm in itertools.permutations(range(n)):
        prod = permutation_parity(perm)
        for i, j in enumerate(perm):
            prod *= m[i][j]
            if prod == 0:
                break
        total += prod
    return total
