import math

import numpy as np
import pytest
import scipy.sparse as sp
from scipy.sparse.linalg import expm_multiply

from splitmaxwell.constitutive import ModelSpec, SolverDivergence
from splitmaxwell.dynamics import (FunctionalGradient, MaxwellSystem, QuadraticFunctional,
                                   SimState, bracket, jacobi_check, poisson_apply)
from splitmaxwell.grid_complex import Cochain, DeRhamComplex, GridSpec, de_rham_map
from splitmaxwell.initial import InitialCondition, plane_wave
from splitmaxwell.metric_ops import MaterialMetric

FP = 4.0 * math.pi
UNIT = GridSpec.periodic_box((4, 4, 4), (1, 1, 1))
SMALL = GridSpec((8, 8, 8), (0.125, 0.125, 0.125))
METRIC = MaterialMetric((1.3, 0.8, 1.1))
MODELS = {
    "vacuum": ModelSpec.vacuum(),
    "kerr": ModelSpec.kerr(0.05, 0.02),
    "nonlocal_dispersive": ModelSpec.nonlocal_dispersive(0.05, 0.002),
    "magnetoelectric": ModelSpec.magnetoelectric(0.03),
}


def rel(a, b):
    s = max(abs(a), abs(b))
    return 0.0 if s == 0.0 else abs(a - b) / s


def const(grid, target, V):
    return de_rham_map(grid, lambda x, y, z: tuple(v + 0 * x for v in V), target).values


def smooth_state(system, amp=0.3, b_scale=1.0):
    grid = system.grid
    s = plane_wave(grid, system.complex, InitialCondition("plane_wave", (1, 1, 0), amp, 2, b_scale))
    s2 = plane_wave(grid, system.complex, InitialCondition("plane_wave", (0, 1, 1), 0.5 * amp, 0, 0.3))
    return SimState.from_arrays(grid, s.dtilde.values + s2.dtilde.values, s.b.values + s2.b.values)


def random_state(rng, system, scale=0.3):
    med = system.medium
    e = scale * rng.standard_normal(system.grid.count("primal", 1))
    b = scale * rng.standard_normal(system.grid.count("primal", 2))
    return SimState.from_arrays(system.grid, med.d_from_e(e, b), b)


# -- state types --------------------------------------------------------------


def test_state_type_checks():
    g = UNIT
    with pytest.raises(ValueError):
        SimState(Cochain.zeros(g, "primal", 2), Cochain.zeros(g, "primal", 2))
    with pytest.raises(ValueError):
        SimState(Cochain.zeros(g, "dual", 2), Cochain.zeros(g, "dual", 1))
    with pytest.raises(ValueError):
        SimState(Cochain.zeros(g, "dual", 2), Cochain.zeros(SMALL, "primal", 2))
    with pytest.raises(ValueError):
        FunctionalGradient(Cochain.zeros(g, "dual", 1), Cochain.zeros(g, "dual", 1))


# -- Hamiltonian --------------------------------------------------------------


def test_vacuum_zero_state_energy():
    system = MaxwellSystem(UNIT, MODELS["vacuum"])
    s = SimState.from_arrays(UNIT, np.zeros(3 * UNIT.ncell), np.zeros(3 * UNIT.ncell))
    assert system.hamiltonian(s) == 0.0


def test_vacuum_constant_field_energy():
    E0 = 1.7
    system = MaxwellSystem(UNIT, MODELS["vacuum"])
    d = const(UNIT, ("dual", 2), (E0, 0.0, 0.0))
    s = SimState.from_arrays(UNIT, d, np.zeros(3 * UNIT.ncell))
    assert abs(system.hamiltonian(s) - E0 ** 2 / (8 * math.pi)) < 1e-14


def test_kerr_constant_field_energy_closed_form():
    chi1, chi3 = 0.1, 0.05
    E, B = np.array([0.5, -0.3, 0.2]), np.array([0.1, 0.4, -0.6])
    system = MaxwellSystem(UNIT, ModelSpec.kerr(chi1, chi3), tol=1e-14)
    e = const(UNIT, ("primal", 1), E)
    b = const(UNIT, ("primal", 2), B)
    E2, B2 = E @ E, B @ B
    ref = ((1 + FP * chi1) * E2 + B2 + 6 * math.pi * chi3 * E2 ** 2) / (8 * math.pi)
    assert abs(system.hamiltonian_eb(e, b) - ref) < 1e-14
    s = SimState.from_arrays(UNIT, system.medium.d_from_e(e, b), b)
    assert abs(system.hamiltonian(s) - ref) < 1e-13


def test_dispersive_energy_is_quadratic_form(rng):
    m = MODELS["nonlocal_dispersive"]
    system = MaxwellSystem(SMALL, m, METRIC)
    med = system.medium
    e = rng.standard_normal(SMALL.count("primal", 1))
    b = rng.standard_normal(SMALL.count("primal", 2))
    A = (1 + FP * m.alpha) * med.s1 * e + FP * m.beta * (med.dispersive_operator @ e)
    ref = (e @ A + b @ (med.s2 * b)) / (8 * math.pi)
    assert rel(system.hamiltonian_eb(e, b), ref) < 1e-13


# -- bracket --------------------------------------------------------------------


def test_bracket_basis_entries():
    grid = GridSpec((3, 2, 4), (1, 1, 1))
    cx = DeRhamComplex(grid)
    d1 = cx.d[1].matrix.toarray()
    n = 3 * grid.ncell
    c = 2.0
    for i, j in [(0, 0), (5, 17), (30, 2), (7, 7), (12, 40)]:
        F = FunctionalGradient.from_arrays(grid, np.eye(n)[i], np.zeros(n))
        G = FunctionalGradient.from_arrays(grid, np.zeros(n), np.eye(n)[j])
        # dual_d1 = d1^T, so the entry is the incidence of edge i in face j
        assert bracket(F, G, cx, c=c) == FP * c * d1[j, i]
        assert bracket(G, F, cx, c=c) == -FP * c * d1[j, i]


def test_bracket_antisymmetry_exact(rng):
    cx = DeRhamComplex(SMALL)
    n = SMALL.count("primal", 1)
    for _ in range(10):
        F = FunctionalGradient.from_arrays(SMALL, *rng.standard_normal((2, n)))
        G = FunctionalGradient.from_arrays(SMALL, *rng.standard_normal((2, n)))
        assert bracket(F, G, cx) == -bracket(G, F, cx)
        assert bracket(F, F, cx) == 0.0


def test_bracket_metric_independent(rng):
    n = SMALL.count("primal", 1)
    F = FunctionalGradient.from_arrays(SMALL, *rng.standard_normal((2, n)))
    G = FunctionalGradient.from_arrays(SMALL, *rng.standard_normal((2, n)))
    values = []
    for g in [(1, 1, 1), (4.0, 0.3, 2.2), (0.5, 0.5, 9.0)]:
        system = MaxwellSystem(SMALL, MODELS["kerr"], MaterialMetric(g))
        values.append(bracket(F, G, system.complex, system.c, system.fourpi))
    assert values[0] == values[1] == values[2]


def test_bracket_grid_mismatch():
    n = SMALL.count("primal", 1)
    F = FunctionalGradient.from_arrays(SMALL, np.zeros(n), np.zeros(n))
    with pytest.raises(ValueError):
        bracket(F, F, DeRhamComplex(UNIT))


def test_bracket_matches_poisson_operator(rng):
    cx = DeRhamComplex(SMALL)
    n = SMALL.count("primal", 1)
    f, g = rng.standard_normal((2, 2 * n))
    F = FunctionalGradient.from_arrays(SMALL, f[:n], f[n:])
    G = FunctionalGradient.from_arrays(SMALL, g[:n], g[n:])
    assert rel(bracket(F, G, cx), f @ poisson_apply(cx, g)) < 1e-13


def test_bracket_reproduces_equations_of_motion(rng):
    # dF/dt = {F, H} for linear F gives the rhs componentwise
    system = MaxwellSystem(SMALL, MODELS["kerr"], METRIC, tol=1e-13)
    s = random_state(rng, system, 0.1)
    grad = system.ham_gradient(s)
    z = np.concatenate([grad.wrt_d.values, grad.wrt_b.values])
    flow = poisson_apply(system.complex, z, system.c, system.fourpi)
    dd, db = system.rhs(s)
    n = SMALL.count("dual", 2)
    # {F, H} = f . J gradH, so the state velocity is J gradH
    assert np.max(np.abs(flow[:n] - dd.values)) < 1e-12
    assert np.max(np.abs(flow[n:] - db.values)) < 1e-12


# -- Hamiltonian gradient -------------------------------------------------------


def test_vacuum_ham_gradient_exact(rng):
    system = MaxwellSystem(SMALL, MODELS["vacuum"], METRIC)
    s = random_state(rng, system)
    grad = system.ham_gradient(s)
    assert np.array_equal(grad.wrt_d.values, (s.dtilde.values / system.medium.s1) / FP)
    assert np.array_equal(grad.wrt_b.values, (system.medium.s2 * s.b.values) / FP)


@pytest.mark.parametrize("variant", list(MODELS))
def test_ham_gradient_matches_finite_differences(rng, variant):
    system = MaxwellSystem(SMALL, MODELS[variant], METRIC, tol=1e-13)
    s = random_state(rng, system, 0.05)
    d, b = s.dtilde.values, s.b.values
    grad = system.ham_gradient(s)
    for slot, x, g in (("d", d, grad.wrt_d.values), ("b", b, grad.wrt_b.values)):
        v = rng.standard_normal(x.size)
        h = 1e-4 * float(np.max(np.abs(x)))
        if slot == "d":
            H = lambda t: system.hamiltonian(SimState.from_arrays(SMALL, d + t * v, b))
        else:
            H = lambda t: system.hamiltonian(SimState.from_arrays(SMALL, d, b + t * v))
        fd = (H(h) - H(-h)) / (2 * h)
        assert rel(fd, v @ g) < 1e-5


# -- rhs ----------------------------------------------------------------------


def test_rhs_of_constant_fields_vanishes():
    system = MaxwellSystem(UNIT, MODELS["vacuum"])
    s = SimState.from_arrays(UNIT, const(UNIT, ("dual", 2), (1.0, 2.0, 3.0)), const(UNIT, ("primal", 2), (0.5, -1.0, 2.0)))
    dd, db = system.rhs(s)
    assert np.max(np.abs(dd.values)) < 1e-14 and np.max(np.abs(db.values)) < 1e-14


def test_rhs_is_divergence_free(rng):
    system = MaxwellSystem(SMALL, MODELS["magnetoelectric"], METRIC)
    s = random_state(rng, system)
    dd, db = system.rhs(s)
    assert dd.complex_id == "dual" and db.complex_id == "primal"
    cx = system.complex
    assert np.max(np.abs(cx.dual_d[2] @ dd.values)) < 1e-13 * np.max(np.abs(dd.values))
    assert np.max(np.abs(cx.d[2] @ db.values)) < 1e-13 * np.max(np.abs(db.values))


def test_rhs_matches_analytic_curl_second_order():
    # vacuum E = (0, sin 2pi(x + z), 0), B = 0:  dB/dt = -c curl E = -(-2pi cos, 0, 2pi cos)
    tp = 2 * math.pi

    def err(n):
        grid = GridSpec.periodic_box((n, 4, n), (1, 1, 1))
        system = MaxwellSystem(grid, MODELS["vacuum"])
        d = de_rham_map(grid, lambda x, y, z: (0 * x, np.sin(tp * (x + z)), 0 * x), ("dual", 2)).values
        s = SimState.from_arrays(grid, d, np.zeros(grid.count("primal", 2)))
        _, db = system.rhs(s)
        ref = de_rham_map(grid, lambda x, y, z: (tp * np.cos(tp * (x + z)), 0 * x, -tp * np.cos(tp * (x + z))),
                          ("primal", 2)).values
        return np.max(np.abs(db.values - ref)) / np.max(np.abs(ref))

    e1, e2 = err(16), err(32)
    assert 3.5 < e1 / e2 < 4.5


# -- integrators ----------------------------------------------------------------


def vacuum_generator(system):
    med = system.medium
    d1 = system.complex.d[1].float_matrix
    c = system.c
    top = c * (d1.T @ sp.diags(med.s2))
    bottom = -c * (d1 @ sp.diags(1.0 / med.s1))
    n = d1.shape[0]
    return sp.bmat([[sp.csr_matrix((n, n)), top], [bottom, None]]).tocsr()


def test_midpoint_local_error_is_third_order():
    system = MaxwellSystem(SMALL, MODELS["vacuum"], METRIC, tol=1e-14)
    s = smooth_state(system)
    z0 = np.concatenate([s.dtilde.values, s.b.values])
    M = vacuum_generator(system)
    dt0 = system.cfl_dt()
    errs = []
    for dt in (dt0, dt0 / 2, dt0 / 4):
        s1 = system.step_midpoint(s, dt)
        ref = expm_multiply(M * dt, z0)
        errs.append(np.max(np.abs(np.concatenate([s1.dtilde.values, s1.b.values]) - ref)))
    for a, b in zip(errs, errs[1:]):
        assert 7.0 < a / b < 9.0


def test_splitting_agrees_with_midpoint_to_second_order():
    system = MaxwellSystem(SMALL, MODELS["vacuum"], METRIC, tol=1e-14)
    s = smooth_state(system)
    dt0 = system.cfl_dt()
    diffs = []
    for dt in (dt0, dt0 / 2):
        a = system.step_midpoint(s, dt)
        b = system.step_splitting_linear(s, dt)
        diffs.append(max(np.max(np.abs(a.dtilde.values - b.dtilde.values)),
                         np.max(np.abs(a.b.values - b.b.values))))
    assert diffs[0] / diffs[1] > 7.0


def test_splitting_energy_bounded():
    system = MaxwellSystem(SMALL, MODELS["vacuum"], METRIC)
    s = smooth_state(system)
    H0 = system.hamiltonian(s)
    dt = system.cfl_dt()
    worst = 0.0
    for _ in range(2000):
        s = system.step_splitting_linear(s, dt)
        worst = max(worst, abs(system.hamiltonian(s) - H0) / H0)
    # bounded O(dt^2) oscillation, no secular growth
    assert worst < 5e-3
    assert abs(s.t - 2000 * dt) < 1e-9


def test_midpoint_conserves_quadratic_energy():
    system = MaxwellSystem(SMALL, MODELS["nonlocal_dispersive"], METRIC, tol=1e-13)
    s = smooth_state(system)
    H0 = system.hamiltonian(s)
    for _ in range(50):
        s = system.step_midpoint(s, system.cfl_dt())
    assert abs(system.hamiltonian(s) - H0) / H0 < 1e-11


@pytest.mark.parametrize("variant", ["kerr", "magnetoelectric"])
def test_nonlinear_midpoint_keeps_casimirs(rng, variant):
    system = MaxwellSystem(SMALL, MODELS[variant], METRIC, tol=1e-12)
    s = smooth_state(system)
    # a non-solenoidal perturbation makes both Casimirs nonzero
    s = SimState.from_arrays(SMALL, s.dtilde.values + 1e-3 * rng.standard_normal(s.dtilde.values.size),
                             s.b.values + 1e-3 * rng.standard_normal(s.b.values.size))
    c0 = system.casimirs(s)
    assert min(c0) > 1e-4
    H0 = system.hamiltonian(s)
    for _ in range(20):
        s = system.step_midpoint(s, system.cfl_dt())
        assert system.stats.iterations >= 1
    c1 = system.casimirs(s)
    assert abs(c1[0] - c0[0]) < 1e-12 and abs(c1[1] - c0[1]) < 1e-12
    assert abs(system.hamiltonian(s) - H0) / H0 < 1e-4


def test_solenoidal_state_has_zero_casimirs():
    system = MaxwellSystem(SMALL, MODELS["vacuum"], METRIC)
    s = smooth_state(system)
    assert max(system.casimirs(s)) < 1e-13


def test_integrator_errors(rng):
    kerr = MaxwellSystem(SMALL, MODELS["kerr"], METRIC)
    s = smooth_state(kerr)
    with pytest.raises(ValueError, match="not linear"):
        kerr.step_splitting_linear(s, 0.01)
    with pytest.raises(ValueError, match="not linear"):
        kerr.step_single_complex(s, 0.01)
    with pytest.raises(ValueError):
        kerr.step_midpoint(s, 0.0)
    vac = MaxwellSystem(SMALL, MODELS["vacuum"], METRIC)
    with pytest.raises(ValueError):
        vac.step_single_complex(s, 0.01, scheme="rk4")
    with pytest.raises(ValueError):
        vac.step_splitting_linear(s, -1.0)


def test_midpoint_divergence_is_reported(rng):
    system = MaxwellSystem(SMALL, MODELS["kerr"], METRIC, tol=1e-14, max_iter=1)
    s = random_state(rng, system, 1.0)
    with pytest.raises(SolverDivergence) as info:
        system.step_midpoint(s, system.cfl_dt())
    assert info.value.residual > 1e-14


@pytest.mark.parametrize("variant", ["vacuum", "nonlocal_dispersive"])
@pytest.mark.parametrize("scheme", ["midpoint", "splitting"])
def test_single_complex_matches_double_complex(rng, variant, scheme):
    a = MaxwellSystem(SMALL, MODELS[variant], METRIC, tol=1e-13)
    b = MaxwellSystem(SMALL, MODELS[variant], METRIC, tol=1e-13)
    s = random_state(rng, a)
    sa = sb = s
    dt = a.cfl_dt()
    cas0 = b.single_complex_casimir(s)
    for _ in range(100):
        sa = a.step_midpoint(sa, dt) if scheme == "midpoint" else a.step_splitting_linear(sa, dt)
        sb = b.step_single_complex(sb, dt, scheme=scheme)
    dev = max(np.max(np.abs(sa.dtilde.values - sb.dtilde.values)), np.max(np.abs(sa.b.values - sb.b.values)))
    assert dev < 1e-12
    assert abs(b.single_complex_casimir(sb) - cas0) < 1e-12


# -- Jacobi identity ------------------------------------------------------------


def test_jacobi_random_quadratics(rng):
    grid = GridSpec((2, 2, 2), (0.5, 0.5, 0.5))
    cx = DeRhamComplex(grid)
    n = 6 * grid.ncell
    s = SimState.from_arrays(grid, *rng.standard_normal((2, n // 2)))
    for _ in range(5):
        F, G, H = (QuadraticFunctional(rng.standard_normal((n, n)) / n, rng.standard_normal(n) / n)
                   for _ in range(3))
        assert jacobi_check(F, G, H, s, cx) < 1e-12


def test_jacobi_linear_functionals_vanish(rng):
    grid = GridSpec((2, 2, 2), (0.5, 0.5, 0.5))
    cx = DeRhamComplex(grid)
    n = 6 * grid.ncell
    s = SimState.from_arrays(grid, *rng.standard_normal((2, n // 2)))
    F, G, H = (QuadraticFunctional(np.zeros((n, n)), rng.standard_normal(n)) for _ in range(3))
    assert jacobi_check(F, G, H, s, cx) == 0.0


def test_quadratic_functional_validation():
    with pytest.raises(ValueError):
        QuadraticFunctional(np.zeros((2, 3)))
    q = QuadraticFunctional(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert np.array_equal(q.A, [[1.0, 1.0], [1.0, 1.0]])
    assert q(np.array([1.0, 1.0])) == 2.0
