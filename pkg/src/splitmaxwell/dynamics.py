"""Hamiltonian dynamics of (d~, b): energy, Poisson bracket, equations of motion, integrators.

State is the pair (d~^2, b^2); e and h~ are derived through the medium on demand::

    d/dt d~ = c dual_d1 h~ = c d1^T h~
    d/dt b  = -c d1 e

Every integrator adds increments that lie in the image of ``d1`` (for b) or
``d1^T`` (for d~), so the discrete divergences -- the Casimirs of the bracket --
are unchanged by any step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .constitutive import DEFAULT_MAX_ITER, Medium, ModelSpec, SolverDivergence
from .grid_complex import Cochain, DeRhamComplex, GridSpec, pairing
from .metric_ops import MaterialMetric, MetricOps
from .spectral import CirculantBlockOperator


@dataclass(frozen=True, eq=False)
class SimState:
    dtilde: Cochain
    b: Cochain
    t: float = 0.0

    def __post_init__(self):
        if (self.dtilde.complex_id, self.dtilde.degree) != ("dual", 2):
            raise ValueError("dtilde must be a dual 2-cochain")
        if (self.b.complex_id, self.b.degree) != ("primal", 2):
            raise ValueError("b must be a primal 2-cochain")
        if self.dtilde.grid != self.b.grid:
            raise ValueError("dtilde and b live on different grids")

    @property
    def grid(self) -> GridSpec:
        return self.dtilde.grid

    @classmethod
    def from_arrays(cls, grid: GridSpec, dtilde: np.ndarray, b: np.ndarray, t: float = 0.0) -> SimState:
        return cls(Cochain(grid, "dual", 2, dtilde), Cochain(grid, "primal", 2, b), t)


@dataclass(frozen=True, eq=False)
class FunctionalGradient:
    """Twisted derivatives of a functional F[d~, b]: wrt_d is primal 1, wrt_b is dual 1."""

    wrt_d: Cochain
    wrt_b: Cochain

    def __post_init__(self):
        if (self.wrt_d.complex_id, self.wrt_d.degree) != ("primal", 1):
            raise ValueError("wrt_d must be a primal 1-cochain")
        if (self.wrt_b.complex_id, self.wrt_b.degree) != ("dual", 1):
            raise ValueError("wrt_b must be a dual 1-cochain")
        if self.wrt_d.grid != self.wrt_b.grid:
            raise ValueError("gradient components live on different grids")

    @classmethod
    def from_arrays(cls, grid: GridSpec, wrt_d: np.ndarray, wrt_b: np.ndarray) -> FunctionalGradient:
        return cls(Cochain(grid, "primal", 1, wrt_d), Cochain(grid, "dual", 1, wrt_b))


def bracket(F: FunctionalGradient, G: FunctionalGradient, cx: DeRhamComplex,
            c: float = 1.0, fourpi: float = 4.0 * math.pi) -> float:
    """``4 pi c [<F_d, d~ G_b> - <G_d, d~ F_b>]``; topological, no metric involved."""
    if F.wrt_d.grid != G.wrt_d.grid or F.wrt_d.grid != cx.grid:
        raise ValueError("gradients and complex live on different grids")
    d1 = cx.dual_d[1]
    first = pairing(F.wrt_d, Cochain(cx.grid, "dual", 2, d1 @ G.wrt_b.values))
    second = pairing(G.wrt_d, Cochain(cx.grid, "dual", 2, d1 @ F.wrt_b.values))
    return fourpi * c * (first - second)


def poisson_apply(cx: DeRhamComplex, grad: np.ndarray, c: float = 1.0,
                  fourpi: float = 4.0 * math.pi) -> np.ndarray:
    """Constant Poisson tensor on a stacked gradient ``[F_d; F_b]``; ``{F,G} = grad_F . J grad_G``."""
    ne = cx.grid.count("primal", 1)
    gd, gb = grad[:ne], grad[ne:]
    return fourpi * c * np.concatenate([cx.dual_d[1] @ gb, -(cx.d[1] @ gd)])


@dataclass
class SolveStats:
    iterations: int = 0
    residual: float = 0.0
    total_iterations: int = 0
    steps: int = 0

    def record(self, iterations: int, residual: float) -> None:
        self.iterations = iterations
        self.residual = residual
        self.total_iterations += iterations
        self.steps += 1


class MaxwellSystem:
    """Macroscopic Maxwell equations for one medium on one grid."""

    def __init__(self, grid: GridSpec, model: ModelSpec, metric: MaterialMetric | None = None,
                 tol: float = 1e-10, max_iter: int = DEFAULT_MAX_ITER):
        self.grid = grid
        self.model = model
        self.metric = metric or MaterialMetric()
        self.complex = DeRhamComplex(grid)
        self.ops = MetricOps(self.complex, self.metric)
        self.medium = Medium(model, self.ops)
        self.c = model.c
        self.fourpi = model.fourpi
        self.tol = tol
        self.max_iter = max_iter
        self.stats = SolveStats()
        self._d1 = self.complex.d[1].float_matrix
        self._d1T = self._d1.T.tocsr()
        self._lin_cache: dict = {}
        self._e_guess: np.ndarray | None = None

    # -- derived fields -------------------------------------------------------

    def electric(self, s: SimState, tol: float | None = None) -> np.ndarray:
        tol = self.tol if tol is None else tol
        return self.medium.e_from_db(s.dtilde.values, s.b.values, tol, self.max_iter)

    def fields(self, s: SimState, tol: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        e = self.electric(s, tol)
        return e, self.medium.h_from_b(e, s.b.values)

    def cfl_dt(self, cfl: float = 0.5) -> float:
        """``cfl * min_i(h_i / sqrt(g^ii)) / (c sqrt(3) * speed factor)``."""
        g = np.array(self.metric.diag)
        hmin = min(h * math.sqrt(gi) for h, gi in zip(self.grid.h, g))
        return cfl * hmin / (self.c * math.sqrt(3.0) * self.medium.max_wave_speed_factor())

    # -- Hamiltonian structure ------------------------------------------------

    def hamiltonian(self, s: SimState, tol: float | None = None) -> float:
        e = self.electric(s, tol)
        return self.hamiltonian_eb(e, s.b.values)

    def hamiltonian_eb(self, e: np.ndarray, b: np.ndarray) -> float:
        med = self.medium
        K = med.k_eval(e, b)
        return float(K - e @ med.dk_de(e, b)
                     + (e @ (med.s1 * e) + b @ (med.s2 * b)) / (2.0 * self.fourpi))

    def ham_gradient(self, s: SimState, tol: float | None = None) -> FunctionalGradient:
        e, h = self.fields(s, tol)
        return FunctionalGradient.from_arrays(self.grid, e / self.fourpi, h / self.fourpi)

    def rhs(self, s: SimState, tol: float | None = None) -> tuple[Cochain, Cochain]:
        e, h = self.fields(s, tol)
        return (Cochain(self.grid, "dual", 2, self.c * (self._d1T @ h)),
                Cochain(self.grid, "primal", 2, -self.c * (self._d1 @ e)))

    def casimirs(self, s: SimState) -> tuple[float, float]:
        """(max |dual_d2 d~|, max |d2 b|)."""
        cd = self.complex.dual_d[2] @ s.dtilde.values
        cb = self.complex.d[2] @ s.b.values
        return float(np.max(np.abs(cd))), float(np.max(np.abs(cb)))

    def single_complex_casimir(self, s: SimState) -> float:
        """max |d* d^1| with ``d^1 = star1^-1 d~``."""
        d1form = s.dtilde.values / self.medium.s1
        return float(np.max(np.abs(self.ops.codifferential_values(1, d1form))))

    # -- implicit midpoint ----------------------------------------------------

    def _midpoint_parts(self, e, b0, tau):
        med = self.medium
        b = b0 - tau * (self._d1 @ e)
        D = med.d_from_e(e, b)
        H = med.h_from_b(e, b)
        return b, D, H

    def _midpoint_jacobian(self, e, b, tau):
        med = self.medium
        fp = self.fourpi
        d1, d1T = self._d1, self._d1T

        def matvec(v):
            w = -tau * (d1 @ v)
            dD = med.s1 * v - fp * med.hessian_action("ee", e, b, v) - fp * med.hessian_action("eb", e, b, w)
            dH = fp * med.hessian_action("be", e, b, v) + med.s2 * w + fp * med.hessian_action("bb", e, b, w)
            return dD - tau * (d1T @ dH)

        n = e.size
        return spla.LinearOperator((n, n), matvec=matvec, dtype=float)

    def _linear_midpoint_solver(self, tau: float):
        """Spectral inverse of ``A + tau^2 d1^T star2 d1`` (exact Jacobian for linear media)."""
        key = ("double", tau)
        if key not in self._lin_cache:
            med = self.medium
            m = self.model
            if m.variant == "nonlocal_dispersive":
                A = med._dispersive_matrix
            elif m.variant == "kerr":
                A = sp.diags((1.0 + self.fourpi * m.chi1) * med.s1)
            else:
                A = sp.diags(med.s1)
            J = A + tau * tau * (self._d1T @ sp.diags(med.s2) @ self._d1)
            self._lin_cache[key] = CirculantBlockOperator(self.grid, J)
        return self._lin_cache[key]

    def step_midpoint(self, s: SimState, dt: float, tol: float | None = None) -> SimState:
        """Implicit midpoint ``z+ = z + dt f((z + z+)/2)``, solved for the midpoint e by Newton."""
        if dt <= 0.0:
            raise ValueError("dt must be > 0")
        tol = self.tol if tol is None else tol
        tau = 0.5 * dt * self.c
        d0, b0 = s.dtilde.values, s.b.values
        solve_lin = self._linear_midpoint_solver(tau)
        linear = self.model.is_linear

        e = self._e_guess
        if e is None or e.shape != (self.grid.count("primal", 1),):
            e = self.medium.e_from_db(d0, b0, tol, self.max_iter)

        def residual(e):
            b, D, H = self._midpoint_parts(e, b0, tau)
            return D - d0 - tau * (self._d1T @ H), H

        r, H = residual(e)
        res = float(np.max(np.abs(r)))
        it = 0
        while res > tol:
            if it >= self.max_iter:
                raise SolverDivergence("midpoint Newton iteration exceeded max_iter", res)
            if linear:
                delta = solve_lin(r)
            else:
                b = b0 - tau * (self._d1 @ e)
                J = self._midpoint_jacobian(e, b, tau)
                M = spla.LinearOperator(J.shape, matvec=solve_lin, dtype=float)
                delta, _ = spla.gmres(J, r, rtol=1e-13, atol=0.01 * tol, M=M, restart=50, maxiter=20)
            e = e - delta
            r, H = residual(e)
            res = float(np.max(np.abs(r)))
            it += 1
        self._e_guess = e
        self.stats.record(it, res)
        dnew = d0 + (2.0 * tau) * (self._d1T @ H)
        bnew = b0 - (2.0 * tau) * (self._d1 @ e)
        return SimState.from_arrays(self.grid, dnew, bnew, s.t + dt)

    # -- explicit splitting for linear media ---------------------------------

    def _require_linear(self) -> None:
        if not self.model.is_linear:
            raise ValueError(f"model {self.model.variant!r} is not linear")

    def _e_linear(self, dtilde: np.ndarray) -> np.ndarray:
        return self.medium.e_from_db(dtilde, np.zeros(0), self.tol, self.max_iter)

    def step_splitting_linear(self, s: SimState, dt: float) -> SimState:
        """Strang splitting (b half, d~ full, b half); leapfrog/Yee for linear media."""
        self._require_linear()
        if dt <= 0.0:
            raise ValueError("dt must be > 0")
        k = dt * self.c
        d0, b0 = s.dtilde.values, s.b.values
        bh = b0 - 0.5 * k * (self._d1 @ self._e_linear(d0))
        dn = d0 + k * (self._d1T @ (self.medium.s2 * bh))
        bn = bh - 0.5 * k * (self._d1 @ self._e_linear(dn))
        self.stats.record(0, 0.0)
        return SimState.from_arrays(self.grid, dn, bn, s.t + dt)

    # -- single-complex (codifferential) backend ------------------------------

    def _single_e(self, d1form: np.ndarray) -> np.ndarray:
        """Invert ``d^1 = e - 4 pi star1^-1 dK/de`` for linear media."""
        if self.model.variant == "vacuum":
            return d1form.copy()
        key = ("single_A",)
        if key not in self._lin_cache:
            med = self.medium
            A1 = sp.diags(1.0 / med.s1) @ med._dispersive_matrix
            self._lin_cache[key] = CirculantBlockOperator(self.grid, A1)
        return self._lin_cache[key](d1form)

    def _single_midpoint_solver(self, tau: float):
        key = ("single", tau)
        if key not in self._lin_cache:
            med = self.medium
            if self.model.variant == "vacuum":
                A1 = sp.eye(med.s1.size)
            else:
                A1 = sp.diags(1.0 / med.s1) @ med._dispersive_matrix
            codiff2 = sp.diags(1.0 / med.s1) @ self._d1T @ sp.diags(med.s2)
            J = A1 + tau * tau * (codiff2 @ self._d1)
            self._lin_cache[key] = (CirculantBlockOperator(self.grid, J), A1.tocsr(), codiff2.tocsr())
        return self._lin_cache[key]

    def step_single_complex(self, s: SimState, dt: float, tol: float | None = None,
                            scheme: str = "midpoint") -> SimState:
        """Step the straight-form system ``d/dt d^1 = c d* h^2``, ``d/dt b = -c d e``.

        ``d^1 = star1^-1 d~`` and ``h^2 = b`` for linear media.  ``scheme`` is
        ``"midpoint"`` or ``"splitting"``.
        """
        self._require_linear()
        if dt <= 0.0:
            raise ValueError("dt must be > 0")
        tol = self.tol if tol is None else tol
        s1 = self.medium.s1
        d1form, b0 = s.dtilde.values / s1, s.b.values
        k = dt * self.c

        def codiff(x):
            return self.ops.codifferential_values(2, x)

        if scheme == "splitting":
            bh = b0 - 0.5 * k * (self._d1 @ self._single_e(d1form))
            dn = d1form + k * codiff(bh)
            bn = bh - 0.5 * k * (self._d1 @ self._single_e(dn))
            self.stats.record(0, 0.0)
        elif scheme == "midpoint":
            tau = 0.5 * k
            solve, A1, _ = self._single_midpoint_solver(tau)

            def residual(e):
                return A1 @ e - d1form - tau * codiff(b0 - tau * (self._d1 @ e))

            e = self._single_e(d1form)
            r = residual(e)
            res = float(np.max(np.abs(r)))
            it = 0
            # residual here is measured on d^1; scale to the d~ tolerance
            while res * float(np.max(s1)) > tol:
                if it >= self.max_iter:
                    raise SolverDivergence("single-complex midpoint exceeded max_iter", res)
                e = e - solve(r)
                r = residual(e)
                res = float(np.max(np.abs(r)))
                it += 1
            self.stats.record(it, res)
            bm = b0 - tau * (self._d1 @ e)
            dn = d1form + k * codiff(bm)
            bn = b0 - k * (self._d1 @ e)
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
        return SimState.from_arrays(self.grid, s1 * dn, bn, s.t + dt)


# ---------------------------------------------------------------------------
# Jacobi identity for constant-Hessian functionals


@dataclass(frozen=True, eq=False)
class QuadraticFunctional:
    """``F(z) = 1/2 z.A z + a.z`` on the stacked state ``z = [d~; b]``."""

    A: np.ndarray
    a: np.ndarray = field(default=None)

    def __post_init__(self):
        A = np.asarray(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("Hessian must be square")
        object.__setattr__(self, "A", 0.5 * (A + A.T))
        a = np.zeros(A.shape[0]) if self.a is None else np.asarray(self.a, dtype=float)
        object.__setattr__(self, "a", a)

    def __call__(self, z: np.ndarray) -> float:
        return float(0.5 * z @ (self.A @ z) + self.a @ z)

    def gradient(self, z: np.ndarray) -> np.ndarray:
        return self.A @ z + self.a


def jacobi_check(F: QuadraticFunctional, G: QuadraticFunctional, H: QuadraticFunctional,
                 s: SimState, cx: DeRhamComplex, c: float = 1.0,
                 fourpi: float = 4.0 * math.pi) -> float:
    """``|{{F,G},H} + {{G,H},F} + {{H,F},G}|`` at state ``s``."""
    z = np.concatenate([s.dtilde.values, s.b.values])

    def J(g):
        return poisson_apply(cx, g, c, fourpi)

    def br_grad(P, Q):
        # gradient of {P, Q} = gradP . J gradQ for constant Hessians
        return P.A @ J(Q.gradient(z)) - Q.A @ J(P.gradient(z))

    def nested(P, Q, R):
        return float(br_grad(P, Q) @ J(R.gradient(z)))

    return abs(nested(F, G, H) + nested(G, H, F) + nested(H, F, G))
