"""Discrete double de Rham complex on a periodic Cartesian grid.

Primal 0/1/2/3-cochains live on nodes, edges, faces and cells.  The dual grid is
shifted by half a cell per axis, so a dual (3-k)-entity coincides with exactly
one primal k-entity; dual cochains are therefore indexed by the primal entity
they are dual to.  Entity ordering:

* nodes and cells: C-order flattening of the node index ``(i, j, k)``; cell
  ``(i, j, k)`` spans ``[i, i+1] x [j, j+1] x [k, k+1]``.
* edges: three blocks (x, y, z).  Edge ``a`` at node ``p`` joins ``p`` and
  ``p + e_a`` and is oriented along ``+a``.
* faces: three blocks by normal axis.  Face ``a`` at node ``p`` spans the two
  other axes ``(b, c)`` taken cyclically, oriented as ``dx^b ^ dx^c``.

Cochain values are integrals over the entity, never point samples.

Dual derivatives are signed transposes of the primal ones,
``dual_d[j] = (-1)**(3 - j) * d[2 - j].T``, which makes the discrete Stokes
relation ``<d_k a, b~> = (-1)**(k+1) <a, dual_d b~>`` hold exactly.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp

ComplexId = Literal["primal", "dual"]


@dataclass(frozen=True)
class GridSpec:
    n: tuple[int, int, int]
    h: tuple[float, float, float]

    def __post_init__(self):
        n = tuple(int(v) for v in self.n)
        h = tuple(float(v) for v in self.h)
        if len(n) != 3 or len(h) != 3:
            raise ValueError("grid needs three cell counts and three spacings")
        if min(n) < 2:
            raise ValueError(f"n_i >= 2 required, got n={n}")
        if not all(np.isfinite(h)) or min(h) <= 0.0:
            raise ValueError(f"h_i > 0 required, got h={h}")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "h", h)

    @classmethod
    def periodic_box(cls, n, lengths) -> GridSpec:
        return cls(tuple(n), tuple(L / k for L, k in zip(lengths, n)))

    @property
    def ncell(self) -> int:
        return self.n[0] * self.n[1] * self.n[2]

    @property
    def lengths(self) -> tuple[float, float, float]:
        return tuple(k * d for k, d in zip(self.n, self.h))

    @property
    def cell_volume(self) -> float:
        return self.h[0] * self.h[1] * self.h[2]

    def count(self, complex_id: ComplexId, degree: int) -> int:
        k = degree if complex_id == "primal" else 3 - degree
        return self.ncell * (3 if k in (1, 2) else 1)

    def primal_measures(self, k: int) -> np.ndarray:
        """Coordinate measure (length/area/volume) of every primal k-entity."""
        N = self.ncell
        h = self.h
        if k == 0:
            return np.ones(N)
        if k == 1:
            return np.repeat(np.array(h), N)
        if k == 2:
            return np.repeat(np.array([h[1] * h[2], h[2] * h[0], h[0] * h[1]]), N)
        return np.full(N, self.cell_volume)

    def dual_measures(self, k: int) -> np.ndarray:
        """Measure of the dual entity dual to each primal k-entity."""
        return self.primal_measures(3 - k)

    # -- geometry ----------------------------------------------------------

    def node_coords(self) -> np.ndarray:
        idx = np.indices(self.n).reshape(3, -1).T
        return idx * np.array(self.h)

    def entity_centers(self, k: int) -> tuple[np.ndarray, ...]:
        """Centres of primal k-entities; degree 1/2 returns one array per axis block."""
        x = self.node_coords()
        h = np.array(self.h)
        if k == 0:
            return (x,)
        if k == 3:
            return (x + 0.5 * h,)
        out = []
        for a in range(3):
            shift = np.zeros(3)
            if k == 1:
                shift[a] = 0.5 * h[a]
            else:
                shift[(a + 1) % 3] = 0.5 * h[(a + 1) % 3]
                shift[(a + 2) % 3] = 0.5 * h[(a + 2) % 3]
            out.append(x + shift)
        return tuple(out)


def _node_index(grid: GridSpec) -> np.ndarray:
    return np.arange(grid.ncell).reshape(grid.n)


def _shifted(grid: GridSpec, offset) -> np.ndarray:
    """Flat index of node ``p + offset`` for every node ``p`` (periodic)."""
    idx = _node_index(grid)
    shift = tuple(-int(o) for o in offset)
    return np.roll(idx, shift, axis=(0, 1, 2)).ravel()


def _unit(a: int) -> np.ndarray:
    e = np.zeros(3, dtype=int)
    e[a] = 1
    return e


def _incidence_matrices(grid: GridSpec) -> tuple[sp.csr_matrix, sp.csr_matrix, sp.csr_matrix]:
    N = grid.ncell
    base = _shifted(grid, (0, 0, 0))

    rows, cols, vals = [], [], []
    for a in range(3):
        r = a * N + base
        rows += [r, r]
        cols += [_shifted(grid, _unit(a)), base]
        vals += [np.ones(N), -np.ones(N)]
    d0 = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(3 * N, N), dtype=np.int32).tocsr()

    rows, cols, vals = [], [], []
    for a in range(3):
        b, c = (a + 1) % 3, (a + 2) % 3
        r = a * N + base
        rows += [r] * 4
        cols += [
            b * N + base,
            c * N + _shifted(grid, _unit(b)),
            b * N + _shifted(grid, _unit(c)),
            c * N + base,
        ]
        vals += [np.ones(N), np.ones(N), -np.ones(N), -np.ones(N)]
    d1 = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(3 * N, 3 * N), dtype=np.int32).tocsr()

    rows, cols, vals = [], [], []
    for a in range(3):
        rows += [base, base]
        cols += [a * N + _shifted(grid, _unit(a)), a * N + base]
        vals += [np.ones(N), -np.ones(N)]
    d2 = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                       shape=(N, 3 * N), dtype=np.int32).tocsr()
    return d0, d1, d2


@dataclass(frozen=True, eq=False)
class IncidenceOperator:
    """Signed integer incidence matrix realizing one exterior derivative."""

    source: tuple[ComplexId, int]
    target: tuple[ComplexId, int]
    matrix: sp.csr_matrix

    @cached_property
    def float_matrix(self) -> sp.csr_matrix:
        return self.matrix.astype(np.float64)

    def __matmul__(self, x: np.ndarray) -> np.ndarray:
        return self.float_matrix @ x


class DeRhamComplex:
    """Primal and dual incidence operators for one grid.

    ``d[k]`` maps primal k to primal k+1, ``dual_d[j]`` maps dual j to dual j+1.
    """

    def __init__(self, grid: GridSpec):
        self.grid = grid
        mats = _incidence_matrices(grid)
        self.d = tuple(
            IncidenceOperator(("primal", k), ("primal", k + 1), m) for k, m in enumerate(mats)
        )
        dual = []
        for j in range(3):
            m = (mats[2 - j].T * (-1) ** (3 - j)).tocsr().astype(np.int32)
            dual.append(IncidenceOperator(("dual", j), ("dual", j + 1), m))
        self.dual_d = tuple(dual)

    def operator(self, complex_id: ComplexId, degree: int) -> IncidenceOperator:
        ops = self.d if complex_id == "primal" else self.dual_d
        return ops[degree]


def build_complex(grid: GridSpec) -> DeRhamComplex:
    return DeRhamComplex(grid)


# ---------------------------------------------------------------------------
# cochains


@dataclass(frozen=True, eq=False)
class Cochain:
    grid: GridSpec
    complex_id: ComplexId
    degree: int
    values: np.ndarray

    def __post_init__(self):
        if self.complex_id not in ("primal", "dual"):
            raise ValueError(f"unknown complex {self.complex_id!r}")
        if self.degree not in (0, 1, 2, 3):
            raise ValueError("degree exceeds dimension")
        v = np.asarray(self.values, dtype=np.float64)
        expected = self.grid.count(self.complex_id, self.degree)
        if v.shape != (expected,):
            raise ValueError(
                f"{self.complex_id} {self.degree}-cochain needs {expected} values, got {v.shape}"
            )
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: GridSpec, complex_id: ComplexId, degree: int) -> Cochain:
        return cls(grid, complex_id, degree, np.zeros(grid.count(complex_id, degree)))

    def like(self, values: np.ndarray) -> Cochain:
        return Cochain(self.grid, self.complex_id, self.degree, values)

    def _check(self, other: Cochain) -> None:
        if (other.grid, other.complex_id, other.degree) != (self.grid, self.complex_id, self.degree):
            raise ValueError("cochains live in different spaces")

    def __add__(self, other: Cochain) -> Cochain:
        self._check(other)
        return self.like(self.values + other.values)

    def __sub__(self, other: Cochain) -> Cochain:
        self._check(other)
        return self.like(self.values - other.values)

    def __mul__(self, s: float) -> Cochain:
        return self.like(s * self.values)

    __rmul__ = __mul__

    def __neg__(self) -> Cochain:
        return self.like(-self.values)


def d(op: IncidenceOperator, c: Cochain) -> Cochain:
    if (c.complex_id, c.degree) != op.source:
        raise ValueError(
            f"operator acts on {op.source[0]} {op.source[1]}-cochains, got {c.complex_id} {c.degree}"
        )
    return Cochain(c.grid, op.target[0], op.target[1], op @ c.values)


def pairing(a: Cochain, b: Cochain) -> float:
    """Poincare pairing of a primal k-cochain with a dual (3-k)-cochain."""
    if a.complex_id != "primal" or b.complex_id != "dual" or a.degree + b.degree != 3:
        raise ValueError("pairing needs a primal k-cochain and a dual (3-k)-cochain")
    if a.grid != b.grid:
        raise ValueError("cochains live on different grids")
    return float(a.values @ b.values)


# ---------------------------------------------------------------------------
# sampling and reconstruction

FieldFn = Callable[[np.ndarray, np.ndarray, np.ndarray], object]


def de_rham_map(grid: GridSpec, field: FieldFn, target: tuple[ComplexId, int]) -> Cochain:
    """Midpoint-rule integrals of a smooth form over the entities of ``target``.

    ``field(x, y, z)`` returns a scalar array for degrees 0 and 3 and a triple of
    coefficient arrays for degrees 1 and 2 (2-form order ``(23, 31, 12)``).
    """
    complex_id, degree = target
    k = degree if complex_id == "primal" else 3 - degree
    centers = grid.entity_centers(k)
    # a dual j-entity has the measure of a primal j-entity of the same axis block
    measure = grid.primal_measures(degree)
    if degree in (0, 3):
        x = centers[0]
        vals = np.broadcast_to(np.asarray(field(x[:, 0], x[:, 1], x[:, 2]), dtype=float), (grid.ncell,))
    else:
        blocks = []
        for a, x in enumerate(centers):
            comp = field(x[:, 0], x[:, 1], x[:, 2])[a]
            blocks.append(np.broadcast_to(np.asarray(comp, dtype=float), (grid.ncell,)))
        vals = np.concatenate(blocks)
    return Cochain(grid, complex_id, degree, vals * measure)


def averaging_matrix(grid: GridSpec, kind: Literal["edge", "face"]) -> sp.csr_matrix:
    """Unscaled cell averages of edge- or face-indexed values.

    Row ``3*c + a`` holds the average of the a-directed edges (or a-normal faces)
    bounding cell ``c``.  Output is ordered cell-major so it reshapes to (N, 3).
    """
    N = grid.ncell
    base = _shifted(grid, (0, 0, 0))
    rows, cols, vals = [], [], []
    for a in range(3):
        r = 3 * base + a
        if kind == "edge":
            b, c = (a + 1) % 3, (a + 2) % 3
            offsets = [(0, 0, 0), _unit(b), _unit(c), _unit(b) + _unit(c)]
            w = 0.25
        else:
            offsets = [(0, 0, 0), _unit(a)]
            w = 0.5
        for off in offsets:
            rows.append(r)
            cols.append(a * N + _shifted(grid, off))
            vals.append(np.full(N, w))
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                         shape=(3 * N, 3 * N)).tocsr()


def reconstruction_matrix(grid: GridSpec, complex_id: ComplexId, degree: int) -> sp.csr_matrix:
    """Linear map from cochain values to cell-centre coefficient samples (flattened N x 3)."""
    if degree not in (1, 2):
        raise ValueError("reconstruction needs a 1- or 2-cochain")
    k = degree if complex_id == "primal" else 3 - degree
    kind = "edge" if k == 1 else "face"
    measure = grid.primal_measures(degree)[:: grid.ncell]
    scale = np.tile(1.0 / measure, grid.ncell)
    return (sp.diags(scale) @ averaging_matrix(grid, kind)).tocsr()


def reconstruct_at_centers(c: Cochain) -> np.ndarray:
    """Per-cell coefficient proxies ``(N, 3)`` of a 1- or 2-cochain on either complex."""
    R = reconstruction_matrix(c.grid, c.complex_id, c.degree)
    return (R @ c.values).reshape(-1, 3)
