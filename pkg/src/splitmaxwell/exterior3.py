"""Pointwise exterior algebra on R^3 with a constant SPD metric.

Forms are stored by their coefficients in the coordinate basis:

* degree 0: ``(f,)``
* degree 1: ``(a1, a2, a3)`` for ``a_i dx^i``
* degree 2: ``(a23, a31, a12)`` for ``dx^2^dx^3, dx^3^dx^1, dx^1^dx^2``
* degree 3: ``(f,)`` for ``f dx^1^dx^2^dx^3``

With this 2-form ordering the vector proxy of a 2-form maps index to index,
so ``interior_vol`` is a diagonal scaling by ``sqrt(det g)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import permutations

import numpy as np

_NCOMP = (1, 3, 3, 1)


@dataclass(frozen=True)
class Metric3:
    """Constant symmetric positive definite metric ``g_ij``."""

    g: np.ndarray
    det_g: float = field(init=False)
    g_inv: np.ndarray = field(init=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=float)
        if g.shape != (3, 3):
            raise ValueError("metric must be 3x3")
        if not np.all(np.isfinite(g)):
            raise ValueError("metric entries must be finite")
        if np.any(g != g.T):
            raise ValueError("metric must be symmetric")
        minors = [np.linalg.det(g[:k, :k]) for k in (1, 2, 3)]
        if min(minors) <= 0.0:
            raise ValueError("metric must be positive definite")
        g.setflags(write=False)
        g_inv = np.linalg.inv(g)
        g_inv = 0.5 * (g_inv + g_inv.T)
        g_inv.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "det_g", float(np.linalg.det(g)))
        object.__setattr__(self, "g_inv", g_inv)

    @classmethod
    def identity(cls) -> Metric3:
        return cls(np.eye(3))

    @classmethod
    def diagonal(cls, d) -> Metric3:
        return cls(np.diag(np.asarray(d, dtype=float)))

    @property
    def sqrt_det(self) -> float:
        return float(np.sqrt(self.det_g))

    def is_diagonal(self) -> bool:
        return bool(np.all(self.g == np.diag(np.diag(self.g))))


@dataclass(frozen=True)
class FormK:
    """A constant-coefficient k-form; ``twisted`` marks orientation-dependent sign."""

    degree: int
    components: np.ndarray
    twisted: bool = False

    def __post_init__(self):
        if self.degree not in (0, 1, 2, 3):
            raise ValueError("degree exceeds dimension")
        c = np.atleast_1d(np.asarray(self.components, dtype=float)).copy()
        if c.shape != (_NCOMP[self.degree],):
            raise ValueError(
                f"a {self.degree}-form needs {_NCOMP[self.degree]} components, got {c.shape}"
            )
        c.setflags(write=False)
        object.__setattr__(self, "components", c)

    def __add__(self, other: FormK) -> FormK:
        _check_same_kind(self, other)
        return FormK(self.degree, self.components + other.components, self.twisted)

    def __sub__(self, other: FormK) -> FormK:
        _check_same_kind(self, other)
        return FormK(self.degree, self.components - other.components, self.twisted)

    def __mul__(self, s: float) -> FormK:
        return FormK(self.degree, s * self.components, self.twisted)

    __rmul__ = __mul__


def _check_same_kind(a: FormK, b: FormK) -> None:
    if a.degree != b.degree or a.twisted != b.twisted:
        raise ValueError("forms differ in degree or twistedness")


def _vec(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (3,) or not np.all(np.isfinite(v)):
        raise ValueError("expected 3 finite contravariant components")
    return v


def flat(g: Metric3, V) -> FormK:
    """Index lowering: ``V -> g_ij V^j dx^i``."""
    return FormK(1, g.g @ _vec(V))


def sharp(g: Metric3, a: FormK) -> np.ndarray:
    """Index raising of a 1-form, returning contravariant components."""
    if a.degree != 1:
        raise ValueError("sharp expects a 1-form")
    return g.g_inv @ a.components


def interior_vol(g: Metric3, V) -> FormK:
    """``i_V vol``: the twisted 2-form with coefficients ``sqrt(det g) V^i``."""
    return FormK(2, g.sqrt_det * _vec(V), twisted=True)


def vol(g: Metric3) -> FormK:
    return FormK(3, [g.sqrt_det], twisted=True)


def hodge(g: Metric3, a: FormK) -> FormK:
    """Hodge star ``(a, b) vol = a ^ *b``; maps k-forms to (3-k)-forms and flips twist."""
    c = a.components
    s = g.sqrt_det
    if a.degree == 0:
        out = c * s
    elif a.degree == 1:
        out = s * (g.g_inv @ c)
    elif a.degree == 2:
        out = (g.g @ c) / s
    else:
        out = c / s
    return FormK(3 - a.degree, out, not a.twisted)


def pointwise_inner(g: Metric3, a: FormK, b: FormK) -> float:
    """Metric inner product of two k-forms of equal degree."""
    if a.degree != b.degree:
        raise ValueError("inner product needs equal degrees")
    x, y = a.components, b.components
    if a.degree == 0:
        return float(x[0] * y[0])
    if a.degree == 1:
        return float(x @ g.g_inv @ y)
    if a.degree == 2:
        return float(x @ g.g @ y) / g.det_g
    return float(x[0] * y[0]) / g.det_g


def wedge(a: FormK, b: FormK) -> FormK:
    j, k = a.degree, b.degree
    if j + k > 3:
        raise ValueError("degree exceeds dimension")
    twisted = a.twisted != b.twisted
    x, y = a.components, b.components
    if j == 0:
        return FormK(k, x[0] * y, twisted)
    if k == 0:
        return FormK(j, y[0] * x, twisted)
    if j == 1 and k == 1:
        return FormK(2, np.cross(x, y), twisted)
    # remaining cases are 1^2 and 2^1, both reduce to the coefficient dot product
    return FormK(3, [x @ y], twisted)


def volume(g: Metric3, U, V, W) -> float:
    """``vol(U, V, W) = sqrt(det g) det[U V W]``."""
    return g.sqrt_det * float(np.linalg.det(np.column_stack([_vec(U), _vec(V), _vec(W)])))


def cross(g: Metric3, U, V) -> np.ndarray:
    """Metric cross product: the vector X with ``g(X, W) = vol(U, V, W)`` for all W."""
    return g.g_inv @ (g.sqrt_det * np.cross(_vec(U), _vec(V)))


def dot(g: Metric3, U, V) -> float:
    return float(_vec(U) @ g.g @ _vec(V))


def transform(a: FormK, A) -> FormK:
    """Components of ``a`` in the coordinates ``x' = A x``.

    Twisted forms pick up the extra factor ``sign(det A)``.
    """
    A = np.asarray(A, dtype=float)
    det = float(np.linalg.det(A))
    c = a.components
    if a.degree == 0:
        out = c.copy()
    elif a.degree == 1:
        out = np.linalg.solve(A.T, c)
    elif a.degree == 2:
        out = (A @ c) / det
    else:
        out = c / det
    if a.twisted:
        out = np.sign(det) * out
    return FormK(a.degree, out, a.twisted)


def transform_metric(g: Metric3, A) -> Metric3:
    Ainv = np.linalg.inv(np.asarray(A, dtype=float))
    gp = Ainv.T @ g.g @ Ainv
    return Metric3(0.5 * (gp + gp.T))


# ---------------------------------------------------------------------------
# identity suite

def _levi_civita(i: int, j: int, k: int) -> int:
    return int(np.sign((j - i) * (k - i) * (k - j)))


def _brute_volume(g: Metric3, U, V, W) -> float:
    total = 0.0
    for i, j, k in permutations(range(3)):
        total += _levi_civita(i, j, k) * U[i] * V[j] * W[k]
    return float(np.sqrt(np.linalg.det(g.g))) * total


def verify_identities(g: Metric3, trials: int, rng: np.random.Generator | None = None) -> dict:
    """Max residuals of the vector-calculus / exterior-algebra correspondences.

    Each residual compares the exterior-algebra route against an explicit
    component formula (Levi-Civita sums, index contractions).
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    rng = np.random.default_rng() if rng is None else rng
    sd = float(np.sqrt(np.linalg.det(g.g)))
    res = {
        "triple_wedge_volume": 0.0,
        "dot_product_wedge": 0.0,
        "cross_product_wedge": 0.0,
        "flat_adjoint": 0.0,
        "hodge_of_flat": 0.0,
        "sharp_flat_roundtrip": 0.0,
    }
    for _ in range(trials):
        U, V, W = rng.standard_normal((3, 3))
        u, v, w = flat(g, U), flat(g, V), flat(g, W)

        lhs = hodge(g, wedge(wedge(u, v), w)).components[0]
        res["triple_wedge_volume"] = max(res["triple_wedge_volume"], abs(lhs - _brute_volume(g, U, V, W)))

        dotUV = sum(U[i] * g.g[i, j] * V[j] for i in range(3) for j in range(3))
        lhs = wedge(u, interior_vol(g, V)).components[0]
        res["dot_product_wedge"] = max(res["dot_product_wedge"], abs(lhs - dotUV * sd))

        # metric cross product from its defining property, solved independently
        X = np.linalg.solve(g.g, [_brute_volume(g, U, V, e) for e in np.eye(3)])
        diff = wedge(u, v).components - sd * X
        res["cross_product_wedge"] = max(res["cross_product_wedge"], float(np.max(np.abs(diff))))

        lhs = wedge(interior_vol(g, W), v).components[0]
        dotWV = sum(W[i] * g.g[i, j] * V[j] for i in range(3) for j in range(3))
        res["flat_adjoint"] = max(res["flat_adjoint"], abs(lhs - dotWV * sd))

        diff = hodge(g, u).components - interior_vol(g, U).components
        res["hodge_of_flat"] = max(res["hodge_of_flat"], float(np.max(np.abs(diff))))

        diff = sharp(g, u) - U
        res["sharp_flat_roundtrip"] = max(res["sharp_flat_roundtrip"], float(np.max(np.abs(diff))))
    res["max_residual"] = max(res.values())
    return res
