"""Matter models K[e, b] on cochains and the constitutive maps they generate.

Every model defines K directly on cochain coefficients and differentiates that
discrete functional exactly.  Because the Poincare pairing is the coefficient
dot product, the coefficient gradient of K *is* its twisted functional
derivative: ``dk_de`` is a dual 2-cochain and ``dk_db`` a dual 1-cochain.

Constitutive maps::

    d~ = star1 e - 4 pi dk_de        (polarization p~ = -dk_de)
    h~ = star2 b + 4 pi dk_db        (magnetization m~ = -dk_db)

Pointwise energy densities use cell-centred samples:

* Kerr: the cell-average vector proxy of e (:func:`reconstruct_at_centers`).
* Magnetoelectric: |B|^2 from the cell-average proxy of b, |E|^2 from the local
  Hodge energy ``sum_{edges of c} star1 e^2 / (4 V_c)``.  The latter keeps the
  map e -> d~ diagonal for fixed b, so its inverse is a pointwise division.
* Nonlocal dispersive: the quadratic form
  ``-(1/2) [alpha (e, e) + beta ((d* e, d* e) + (d e, d e))]`` with the Hodge
  L2 products, which makes ``(1 + 4 pi alpha) I + 4 pi beta Delta_h`` exact.
  Its inverse is applied spectrally (the operator is translation invariant).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .grid_complex import GridSpec, averaging_matrix, reconstruction_matrix
from .metric_ops import MaterialMetric, MetricOps
from .spectral import CirculantBlockOperator

Variant = Literal["vacuum", "kerr", "nonlocal_dispersive", "magnetoelectric"]
VARIANTS = ("vacuum", "kerr", "nonlocal_dispersive", "magnetoelectric")

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 50


class ConstitutiveError(ValueError):
    """The model or state lies outside the invertible (monotone) regime."""


class SolverDivergence(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (last residual {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True)
class ModelSpec:
    variant: Variant = "vacuum"
    chi1: float = 0.0
    chi3: float = 0.0
    alpha: float = 0.0
    beta: float = 0.0
    c: float = 1.0
    fourpi: float = 4.0 * math.pi

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown model variant {self.variant!r}")
        for name in ("chi1", "chi3", "alpha", "beta", "c", "fourpi"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"model.{name} must be finite")
        if self.c <= 0.0 or self.fourpi <= 0.0:
            raise ValueError("model.c and model.fourpi must be > 0")
        if self.variant == "kerr":
            if 1.0 + self.fourpi * self.chi1 <= 0.0:
                raise ConstitutiveError("Kerr model needs 1 + 4 pi chi1 > 0")
            if self.chi3 < 0.0:
                raise ConstitutiveError("Kerr model needs chi3 >= 0")
        if self.variant == "magnetoelectric" and self.alpha < 0.0:
            raise ConstitutiveError("magnetoelectric model needs alpha >= 0")

    @classmethod
    def vacuum(cls, **units) -> ModelSpec:
        return cls("vacuum", **units)

    @classmethod
    def kerr(cls, chi1: float, chi3: float, **units) -> ModelSpec:
        return cls("kerr", chi1=chi1, chi3=chi3, **units)

    @classmethod
    def nonlocal_dispersive(cls, alpha: float, beta: float, **units) -> ModelSpec:
        return cls("nonlocal_dispersive", alpha=alpha, beta=beta, **units)

    @classmethod
    def magnetoelectric(cls, alpha: float, **units) -> ModelSpec:
        return cls("magnetoelectric", alpha=alpha, **units)

    @classmethod
    def from_dispersion(cls, eps0: float, eps2: float, c: float = 1.0,
                        fourpi: float = 4.0 * math.pi) -> ModelSpec:
        """Medium whose 1-D plane waves obey ``w^2 = c^2 k^2 / (eps0 + eps2 k^2)``.

        ``eps0 = 1 + 4 pi alpha`` and ``eps2 = 4 pi beta``; ``(1, 0)`` is vacuum.
        """
        if eps0 == 1.0 and eps2 == 0.0:
            return cls.vacuum(c=c, fourpi=fourpi)
        return cls.nonlocal_dispersive((eps0 - 1.0) / fourpi, eps2 / fourpi, c=c, fourpi=fourpi)

    @property
    def is_linear(self) -> bool:
        return self.variant in ("vacuum", "nonlocal_dispersive")

    def with_units(self, **units) -> ModelSpec:
        return replace(self, **units)


class Medium:
    """A :class:`ModelSpec` bound to a grid and metric.

    All methods take and return raw coefficient arrays: ``e`` (primal 1),
    ``b`` (primal 2), ``dtilde`` (dual 2, indexed like edges), ``htilde``
    (dual 1, indexed like faces).
    """

    def __init__(self, spec: ModelSpec, ops: MetricOps):
        self.spec = spec
        self.ops = ops
        self.grid = ops.grid
        self.fourpi = spec.fourpi
        g = np.array(ops.metric.diag)
        self._g = g
        self._ginv = 1.0 / g
        self._detg = float(np.prod(g))
        self.cell_vol = self.grid.cell_volume * ops.metric.sqrt_det
        self.s1 = ops.star[1].coeffs
        self.s2 = ops.star[2].coeffs
        if spec.variant == "nonlocal_dispersive":
            self._check_dispersive()

    # -- precomputed operators ----------------------------------------------

    @cached_property
    def _re(self) -> sp.csr_matrix:
        return reconstruction_matrix(self.grid, "primal", 1)

    @cached_property
    def _rb(self) -> sp.csr_matrix:
        return reconstruction_matrix(self.grid, "primal", 2)

    @cached_property
    def _rd(self) -> sp.csr_matrix:
        return reconstruction_matrix(self.grid, "dual", 2)

    @cached_property
    def _edge_avg(self) -> sp.csr_matrix:
        return averaging_matrix(self.grid, "edge")

    @cached_property
    def _edge_energy(self) -> sp.csr_matrix:
        """Cell rows, edge columns: ``|E|^2_c = W @ e**2``."""
        N = self.grid.ncell
        rowsum = sp.kron(sp.eye(N), np.ones((1, 3)))
        return (rowsum @ self._edge_avg @ sp.diags(self.s1) / self.cell_vol).tocsr()

    @cached_property
    def dispersive_operator(self) -> sp.csr_matrix:
        """``L = star1 d0 star0^-1 d0^T star1 + d1^T star2 d1`` (symmetric PSD)."""
        cx = self.ops.complex
        d0 = cx.d[0].float_matrix
        d1 = cx.d[1].float_matrix
        S1 = sp.diags(self.s1)
        grad_div = S1 @ d0 @ sp.diags(1.0 / self.ops.star[0].coeffs) @ d0.T @ S1
        curl_curl = d1.T @ sp.diags(self.s2) @ d1
        return (grad_div + curl_curl).tocsr()

    @cached_property
    def _dispersive_matrix(self) -> sp.csr_matrix:
        m = self.spec
        return ((1.0 + self.fourpi * m.alpha) * sp.diags(self.s1)
                + self.fourpi * m.beta * self.dispersive_operator).tocsc()

    @cached_property
    def _dispersive_solve(self) -> CirculantBlockOperator:
        return CirculantBlockOperator(self.grid, self._dispersive_matrix)

    def laplacian_symbol_range(self) -> tuple[float, float]:
        """Extreme eigenvalues of ``star1^-1 L`` from the separable Fourier symbol."""
        return laplacian_symbol_range(self.grid, self.ops.metric)

    def _check_dispersive(self) -> None:
        check_dispersive(self.spec, self.grid, self.ops.metric)

    # -- pointwise helpers ---------------------------------------------------

    def _cells(self, R: sp.csr_matrix, x: np.ndarray) -> np.ndarray:
        return (R @ x).reshape(-1, 3)

    def _b_sq(self, B: np.ndarray) -> np.ndarray:
        return (B * B) @ self._g / self._detg

    # -- the functional and its derivatives ---------------------------------

    def k_eval(self, e: np.ndarray, b: np.ndarray) -> float:
        m = self.spec
        if m.variant == "vacuum":
            return 0.0
        if m.variant == "kerr":
            E = self._cells(self._re, e)
            rho2 = (E * E) @ self._ginv
            return -self.cell_vol * float(np.sum(0.5 * m.chi1 * rho2 + 0.25 * m.chi3 * rho2 ** 2))
        if m.variant == "nonlocal_dispersive":
            return -0.5 * float(m.alpha * (e @ (self.s1 * e)) + m.beta * (e @ (self.dispersive_operator @ e)))
        e2 = self._edge_energy @ (e * e)
        b2 = self._b_sq(self._cells(self._rb, b))
        return -0.5 * m.alpha * self.cell_vol * float(e2 @ b2)

    def dk_de(self, e: np.ndarray, b: np.ndarray) -> np.ndarray:
        m = self.spec
        if m.variant == "vacuum":
            return np.zeros_like(e)
        if m.variant == "kerr":
            E = self._cells(self._re, e)
            rho2 = (E * E) @ self._ginv
            cellgrad = -self.cell_vol * (m.chi1 + m.chi3 * rho2)[:, None] * (E * self._ginv)
            return self._re.T @ cellgrad.ravel()
        if m.variant == "nonlocal_dispersive":
            return -(m.alpha * self.s1 * e + m.beta * (self.dispersive_operator @ e))
        b2 = self._b_sq(self._cells(self._rb, b))
        return -m.alpha * self.cell_vol * e * (self._edge_energy.T @ b2)

    def dk_db(self, e: np.ndarray, b: np.ndarray) -> np.ndarray:
        m = self.spec
        if m.variant != "magnetoelectric":
            return np.zeros_like(b)
        e2 = self._edge_energy @ (e * e)
        B = self._cells(self._rb, b)
        cellgrad = -m.alpha * self.cell_vol * e2[:, None] * (B * self._g) / self._detg
        return self._rb.T @ cellgrad.ravel()

    def hessian_action(self, which: str, e: np.ndarray, b: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Directional derivative of a gradient.

        ``ee``: d(dk_de)/de . v   ``eb``: d(dk_de)/db . v
        ``be``: d(dk_db)/de . v   ``bb``: d(dk_db)/db . v
        """
        if which not in ("ee", "eb", "be", "bb"):
            raise ValueError(f"unknown Hessian block {which!r}")
        m = self.spec
        out_like = e if which[0] == "e" else b
        if m.variant == "vacuum" or (m.variant != "magnetoelectric" and which != "ee"):
            return np.zeros_like(out_like)
        if m.variant == "kerr":
            E = self._cells(self._re, e)
            dE = self._cells(self._re, v)
            rho2 = (E * E) @ self._ginv
            proj = (E * dE) @ self._ginv
            cell = (m.chi1 + m.chi3 * rho2)[:, None] * (dE * self._ginv) \
                + 2.0 * m.chi3 * proj[:, None] * (E * self._ginv)
            return -self.cell_vol * (self._re.T @ cell.ravel())
        if m.variant == "nonlocal_dispersive":
            return -(m.alpha * self.s1 * v + m.beta * (self.dispersive_operator @ v))
        # magnetoelectric
        W = self._edge_energy
        B = self._cells(self._rb, b)
        scale = -m.alpha * self.cell_vol
        if which == "ee":
            return scale * v * (W.T @ self._b_sq(B))
        if which == "eb":
            dB = self._cells(self._rb, v)
            db2 = 2.0 * ((B * dB) @ self._g) / self._detg
            return scale * e * (W.T @ db2)
        if which == "be":
            de2 = W @ (2.0 * e * v)
            return scale * (self._rb.T @ (de2[:, None] * B * self._g / self._detg).ravel())
        e2 = W @ (e * e)
        dB = self._cells(self._rb, v)
        return scale * (self._rb.T @ (e2[:, None] * dB * self._g / self._detg).ravel())

    # -- constitutive maps ----------------------------------------------------

    def d_from_e(self, e: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.s1 * e - self.fourpi * self.dk_de(e, b)

    def h_from_b(self, e: np.ndarray, b: np.ndarray) -> np.ndarray:
        return self.s2 * b + self.fourpi * self.dk_db(e, b)

    def polarization(self, e: np.ndarray, b: np.ndarray) -> np.ndarray:
        return -self.dk_de(e, b)

    def magnetization(self, e: np.ndarray, b: np.ndarray) -> np.ndarray:
        return -self.dk_db(e, b)

    def d_jacobian_action(self, e: np.ndarray, b: np.ndarray, v: np.ndarray) -> np.ndarray:
        """``(star1 - 4 pi H_ee) v``: derivative of d~ with respect to e."""
        return self.s1 * v - self.fourpi * self.hessian_action("ee", e, b, v)

    def max_wave_speed_factor(self) -> float:
        m = self.spec
        if m.variant == "kerr":
            return 1.0 / math.sqrt(min(1.0, 1.0 + self.fourpi * m.chi1))
        if m.variant == "nonlocal_dispersive":
            return 1.0 / math.sqrt(min(1.0, _dispersive_min_symbol(m, self.grid, self.ops.metric)))
        return 1.0

    # -- inverse map (d~, b) -> e --------------------------------------------

    def kerr_magnitude(self, dnorm: np.ndarray) -> np.ndarray:
        """Solve ``(1 + 4 pi chi1 + 4 pi chi3 rho^2) rho = |D|`` per cell by Newton."""
        m = self.spec
        a = 1.0 + self.fourpi * m.chi1
        c3 = self.fourpi * m.chi3
        return solve_kerr_cubic(np.asarray(dnorm, dtype=float), a, c3)

    def _kerr_guess(self, dtilde: np.ndarray) -> np.ndarray:
        m = self.spec
        D = self._cells(self._rd, dtilde)
        dnorm = np.sqrt((D * D) @ self._g / self._detg)
        rho = self.kerr_magnitude(dnorm)
        scale = 1.0 / (1.0 + self.fourpi * m.chi1 + self.fourpi * m.chi3 * rho ** 2)
        edge_scale = self._edge_avg.T @ np.repeat(scale, 3)
        return dtilde / self.s1 * edge_scale

    def e_from_db(self, dtilde: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL,
                  max_iter: int = DEFAULT_MAX_ITER, guess: np.ndarray | None = None) -> np.ndarray:
        return self.solve_e(dtilde, b, tol, max_iter, guess)[0]

    def solve_e(self, dtilde: np.ndarray, b: np.ndarray, tol: float = DEFAULT_TOL,
                max_iter: int = DEFAULT_MAX_ITER, guess: np.ndarray | None = None,
                method: Literal["auto", "newton"] = "auto") -> tuple[np.ndarray, int]:
        """Invert ``d~ = d_from_e(e, b)``; returns ``(e, iterations)``.

        ``method="newton"`` forces the generic Newton-CG path for every model.
        """
        m = self.spec
        if method == "auto":
            if m.variant == "vacuum":
                return dtilde / self.s1, 0
            if m.variant == "magnetoelectric":
                b2 = self._b_sq(self._cells(self._rb, b))
                avg = self._edge_avg.T @ np.repeat(b2, 3)
                return dtilde / (self.s1 * (1.0 + self.fourpi * m.alpha * avg)), 0
            if m.variant == "nonlocal_dispersive":
                e = self._dispersive_solve(dtilde)
                for it in range(1, max_iter + 1):
                    r = self.d_from_e(e, b) - dtilde
                    if np.max(np.abs(r)) <= tol:
                        return e, it
                    e = e - self._dispersive_solve(r)
                raise SolverDivergence("dispersive solve did not converge", float(np.max(np.abs(r))))
        if guess is None:
            guess = self._kerr_guess(dtilde) if m.variant == "kerr" else dtilde / self.s1
        return self._newton(dtilde, b, guess, tol, max_iter)

    def _newton(self, dtilde, b, e, tol, max_iter) -> tuple[np.ndarray, int]:
        n = e.size
        precond = spla.LinearOperator((n, n), matvec=lambda x: x / self.s1, dtype=float)
        r = self.d_from_e(e, b) - dtilde
        res = float(np.max(np.abs(r)))
        for it in range(max_iter + 1):
            if res <= tol:
                return e, it
            if it == max_iter:
                break
            J = spla.LinearOperator((n, n), matvec=lambda v: self.d_jacobian_action(e, b, v), dtype=float)
            delta, info = spla.cg(J, -r, rtol=1e-12, atol=0.1 * tol, maxiter=10 * n, M=precond)
            curvature = float(delta @ J.matvec(delta))
            if curvature <= 0.0 and np.any(delta):
                raise ConstitutiveError("constitutive map not invertible")
            e = e + delta
            r = self.d_from_e(e, b) - dtilde
            res = float(np.max(np.abs(r)))
        raise SolverDivergence("constitutive Newton iteration exceeded max_iter", res)


def laplacian_symbol_range(grid: GridSpec, metric: MaterialMetric) -> tuple[float, float]:
    """Extreme eigenvalues of the Hodge Laplacian on 1-cochains (separable symbol)."""
    top = 0.0
    for n, h, g in zip(grid.n, grid.h, metric.diag):
        m = np.arange(n)
        top += float(np.max((2.0 * np.sin(np.pi * m / n) / h) ** 2)) / g
    return 0.0, top


def _dispersive_min_symbol(spec: ModelSpec, grid: GridSpec, metric: MaterialMetric) -> float:
    lo, hi = laplacian_symbol_range(grid, metric)
    return min(1.0 + spec.fourpi * spec.alpha + spec.fourpi * spec.beta * lam for lam in (lo, hi))


def check_dispersive(spec: ModelSpec, grid: GridSpec, metric: MaterialMetric) -> None:
    """Reject dispersive media whose operator is not positive definite on ``grid``."""
    if spec.variant != "nonlocal_dispersive":
        return
    smallest = _dispersive_min_symbol(spec, grid, metric)
    if smallest <= 0.0:
        raise ConstitutiveError(
            "nonlocal dispersive operator (1+4 pi alpha) I + 4 pi beta Delta_h is not "
            f"positive definite on this grid (smallest symbol {smallest:.3e})"
        )


def solve_kerr_cubic(dnorm: np.ndarray, a: float, c3: float, max_iter: int = 60) -> np.ndarray:
    """Positive root of ``(a + c3 rho^2) rho = dnorm`` for ``a > 0``, ``c3 >= 0``.

    Newton started from the linear solution ``dnorm / a`` approaches the root
    monotonically from above because the cubic is convex on ``rho >= 0``.
    """
    if a <= 0.0:
        raise ConstitutiveError("constitutive map not invertible")
    rho = np.asarray(dnorm, dtype=float) / a
    for _ in range(max_iter):
        jac = a + 3.0 * c3 * rho ** 2
        if np.any(jac <= 0.0):
            raise ConstitutiveError("constitutive map not invertible")
        step = ((a + c3 * rho ** 2) * rho - dnorm) / jac
        rho = rho - step
        if np.all(np.abs(step) <= 4e-16 * np.maximum(rho, 1e-300)):
            return rho
    return rho
