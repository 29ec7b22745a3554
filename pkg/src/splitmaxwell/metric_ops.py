"""Metric-dependent discrete structure: diagonal Hodge stars, L2 products, codifferential.

Everything that depends on the metric lives here; the incidence operators and
the Poincare pairing in :mod:`grid_complex` never see it.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exterior3 import Metric3
from .grid_complex import Cochain, DeRhamComplex, GridSpec, pairing


@dataclass(frozen=True)
class MaterialMetric:
    """Constant diagonal metric ``diag(g1, g2, g3)``."""

    diag: tuple[float, float, float] = (1.0, 1.0, 1.0)

    def __post_init__(self):
        d = tuple(float(v) for v in self.diag)
        if len(d) != 3:
            raise ValueError("metric needs three diagonal entries")
        if not all(np.isfinite(d)) or min(d) <= 0.0:
            raise ValueError(f"metric entries must be > 0, got {d}")
        object.__setattr__(self, "diag", d)

    @classmethod
    def from_metric3(cls, g: Metric3) -> MaterialMetric:
        if not g.is_diagonal():
            raise ValueError("unsupported metric for discrete Hodge")
        return cls(tuple(np.diag(g.g)))

    @cached_property
    def metric3(self) -> Metric3:
        return Metric3.diagonal(self.diag)

    @property
    def sqrt_det(self) -> float:
        return float(np.sqrt(np.prod(self.diag)))

    def basis_hodge_factor(self, k: int) -> np.ndarray:
        """Hodge star of the coordinate basis k-forms, one factor per axis block."""
        g = np.array(self.diag)
        s = self.sqrt_det
        if k == 0:
            return np.array([s])
        if k == 1:
            return s / g
        if k == 2:
            return g / s
        return np.array([1.0 / s])


@dataclass(frozen=True, eq=False)
class HodgeOperator:
    """Diagonal Hodge star from primal k-cochains to dual (3-k)-cochains."""

    grid: GridSpec
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        if not np.all(self.coeffs > 0.0):
            raise ValueError("Hodge coefficients must be positive")

    def apply(self, c: Cochain) -> Cochain:
        if (c.complex_id, c.degree) != ("primal", self.degree):
            raise ValueError(f"star_{self.degree} acts on primal {self.degree}-cochains")
        return Cochain(c.grid, "dual", 3 - self.degree, self.coeffs * c.values)

    def apply_inverse(self, c: Cochain) -> Cochain:
        if (c.complex_id, c.degree) != ("dual", 3 - self.degree):
            raise ValueError(f"inverse star_{self.degree} acts on dual {3 - self.degree}-cochains")
        return Cochain(c.grid, "primal", self.degree, c.values / self.coeffs)


def build_hodge(grid: GridSpec, g: MaterialMetric | Metric3, k: int) -> HodgeOperator:
    """Yee-style Hodge: (dual measure / primal measure) times the basis-form Hodge factor."""
    if k not in (0, 1, 2, 3):
        raise ValueError("degree exceeds dimension")
    if isinstance(g, Metric3):
        g = MaterialMetric.from_metric3(g)
    factor = np.repeat(g.basis_hodge_factor(k), grid.ncell)
    coeffs = factor * grid.dual_measures(k) / grid.primal_measures(k)
    return HodgeOperator(grid, k, coeffs)


def l2_inner(a: Cochain, b: Cochain, star: HodgeOperator) -> float:
    """Discrete L2 product; defined as ``<a, star b>`` (dual inputs use ``star^-1``)."""
    if (a.complex_id, a.degree) != (b.complex_id, b.degree):
        raise ValueError("L2 product needs cochains of the same space")
    if a.complex_id == "primal":
        return pairing(a, star.apply(b))
    if a.degree != 3 - star.degree:
        raise ValueError("Hodge operator does not match the cochain degree")
    return float(a.values @ (b.values / star.coeffs))


class MetricOps:
    """Hodge stars of every degree for a grid and metric, plus derived operators."""

    def __init__(self, cx: DeRhamComplex, g: MaterialMetric):
        self.complex = cx
        self.grid = cx.grid
        self.metric = g
        self.star = tuple(build_hodge(cx.grid, g, k) for k in range(4))

    def codifferential_values(self, k: int, x: np.ndarray) -> np.ndarray:
        """``star_{k-1}^-1 d_{k-1}^T star_k`` on raw primal k-cochain values."""
        if k < 1 or k > 3:
            raise ValueError("codifferential needs degree 1..3")
        dT = self.complex.d[k - 1].float_matrix.T
        return (dT @ (self.star[k].coeffs * x)) / self.star[k - 1].coeffs

    def codifferential(self, a: Cochain) -> Cochain:
        if a.complex_id != "primal":
            raise ValueError("codifferential acts on primal cochains")
        if a.degree == 0:
            raise ValueError("codifferential of a 0-cochain is undefined")
        return Cochain(a.grid, "primal", a.degree - 1, self.codifferential_values(a.degree, a.values))

    def l2(self, a: Cochain, b: Cochain) -> float:
        k = a.degree if a.complex_id == "primal" else 3 - a.degree
        return l2_inner(a, b, self.star[k])


def codifferential(a: Cochain, ops: MetricOps) -> Cochain:
    """Discrete adjoint of d under the L2 products: ``l2(d a, b) = l2(a, codifferential b)``."""
    return ops.codifferential(a)
