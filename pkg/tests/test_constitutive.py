import math

import numpy as np
import pytest
import scipy.sparse.linalg as spla
from hypothesis import given, settings
from hypothesis import strategies as st

from splitmaxwell.constitutive import (ConstitutiveError, Medium, ModelSpec, SolverDivergence,
                                       check_dispersive, solve_kerr_cubic)
from splitmaxwell.grid_complex import DeRhamComplex, GridSpec, de_rham_map
from splitmaxwell.metric_ops import MaterialMetric, MetricOps

FP = 4.0 * math.pi
FD_STEP = np.finfo(float).eps ** (1.0 / 3.0)
UNIT = GridSpec.periodic_box((4, 4, 4), (1, 1, 1))
SMALL = GridSpec((8, 8, 8), (0.125, 0.125, 0.125))
METRIC = MaterialMetric((1.3, 0.8, 1.1))
MODELS = {
    "vacuum": ModelSpec.vacuum(),
    "kerr": ModelSpec.kerr(0.05, 0.02),
    "nonlocal_dispersive": ModelSpec.nonlocal_dispersive(0.05, 0.002),
    "magnetoelectric": ModelSpec.magnetoelectric(0.03),
}


def medium(model, grid=SMALL, metric=METRIC):
    return Medium(model, MetricOps(DeRhamComplex(grid), metric))


def const_e(grid, E):
    return de_rham_map(grid, lambda x, y, z: tuple(v + 0 * x for v in E), ("primal", 1)).values


def const_b(grid, B):
    return de_rham_map(grid, lambda x, y, z: tuple(v + 0 * x for v in B), ("primal", 2)).values


def random_eb(rng, grid=SMALL, scale=1.0):
    return (scale * rng.standard_normal(grid.count("primal", 1)),
            scale * rng.standard_normal(grid.count("primal", 2)))


def rel(a, b):
    s = max(abs(a), abs(b))
    return 0.0 if s == 0.0 else abs(a - b) / s


# -- model validation ----------------------------------------------------------


def test_model_invariants():
    with pytest.raises(ConstitutiveError):
        ModelSpec.kerr(-1.0 / FP, 0.0)
    with pytest.raises(ConstitutiveError):
        ModelSpec.kerr(0.0, -0.1)
    with pytest.raises(ConstitutiveError):
        ModelSpec.magnetoelectric(-0.1)
    with pytest.raises(ValueError):
        ModelSpec("plasma")
    with pytest.raises(ValueError):
        ModelSpec.vacuum(c=0.0)
    assert ModelSpec.kerr(0.0, 0.0).variant == "kerr"


def test_dispersive_operator_must_be_positive_definite():
    bad = ModelSpec.nonlocal_dispersive(0.0, -0.001)
    with pytest.raises(ConstitutiveError, match="positive definite"):
        medium(bad)
    with pytest.raises(ConstitutiveError):
        check_dispersive(bad, SMALL, METRIC)
    # the same model is admissible on a coarse enough grid
    check_dispersive(bad, GridSpec((2, 2, 2), (1.0, 1.0, 1.0)), MaterialMetric())


def test_from_dispersion_mapping():
    m = ModelSpec.from_dispersion(1.0, 1.0)
    assert m.variant == "nonlocal_dispersive"
    assert m.alpha == 0.0 and abs(m.beta - 1.0 / FP) < 1e-16
    assert ModelSpec.from_dispersion(1.0, 0.0).variant == "vacuum"
    m2 = ModelSpec.from_dispersion(3.0, 0.5, c=2.0)
    assert abs(1 + m2.fourpi * m2.alpha - 3.0) < 1e-14 and abs(m2.fourpi * m2.beta - 0.5) < 1e-15
    assert m2.c == 2.0


# -- k_eval ----------------------------------------------------------------------


def test_vacuum_is_zero(rng):
    med = medium(MODELS["vacuum"])
    e, b = random_eb(rng)
    assert med.k_eval(e, b) == 0.0
    assert not np.any(med.dk_de(e, b)) and not np.any(med.dk_db(e, b))
    assert np.array_equal(med.d_from_e(e, b), med.s1 * e)
    assert np.array_equal(med.h_from_b(e, b), med.s2 * b)


def test_kerr_constant_field_energy():
    E0 = 0.7
    med = medium(ModelSpec.kerr(1.0, 0.0), UNIT, MaterialMetric())
    e = const_e(UNIT, (E0, 0.0, 0.0))
    assert abs(med.k_eval(e, np.zeros(3 * UNIT.ncell)) + 0.5 * E0 ** 2) < 1e-14


def test_magnetoelectric_constant_field_energy():
    med = medium(ModelSpec.magnetoelectric(1.0), UNIT, MaterialMetric())
    e = const_e(UNIT, (0.6, 0.0, 0.8))
    b = const_b(UNIT, (0.0, 1.0, 0.0))
    assert abs(med.k_eval(e, b) + 0.5) < 1e-14


# -- gradients and Hessians --------------------------------------------------------


@pytest.mark.parametrize("variant", list(MODELS))
def test_gradients_match_finite_differences(rng, variant):
    med = medium(MODELS[variant])
    e, b = random_eb(rng)
    ge, gb = med.dk_de(e, b), med.dk_db(e, b)
    assert ge.shape == e.shape and gb.shape == b.shape
    worst = 0.0
    for _ in range(20):
        for slot in ("e", "b"):
            x = e if slot == "e" else b
            v = rng.standard_normal(x.size)
            h = FD_STEP * max(1.0, float(np.max(np.abs(x))))
            if slot == "e":
                fd = (med.k_eval(e + h * v, b) - med.k_eval(e - h * v, b)) / (2 * h)
                an = v @ ge
            else:
                fd = (med.k_eval(e, b + h * v) - med.k_eval(e, b - h * v)) / (2 * h)
                an = v @ gb
            worst = max(worst, abs(fd - an) if an == 0.0 else rel(fd, an))
    assert worst < 1e-6


@pytest.mark.parametrize("variant", list(MODELS))
def test_hessian_symmetry_and_mixed_partials(rng, variant):
    med = medium(MODELS[variant])
    e, b = random_eb(rng)
    u, v = rng.standard_normal((2, e.size))
    w, z = rng.standard_normal((2, b.size))
    assert rel(u @ med.hessian_action("ee", e, b, v), v @ med.hessian_action("ee", e, b, u)) < 1e-12
    assert rel(w @ med.hessian_action("bb", e, b, z), z @ med.hessian_action("bb", e, b, w)) < 1e-12
    assert rel(w @ med.hessian_action("be", e, b, u), u @ med.hessian_action("eb", e, b, w)) < 1e-12


@pytest.mark.parametrize("variant", ["kerr", "nonlocal_dispersive", "magnetoelectric"])
def test_hessian_matches_finite_differences(rng, variant):
    med = medium(MODELS[variant])
    e, b = random_eb(rng)
    h = 1e-6
    for which in ("ee", "eb", "be", "bb"):
        v = rng.standard_normal(e.size if which[1] == "e" else b.size)
        grad = med.dk_de if which[0] == "e" else med.dk_db
        if which[1] == "e":
            fd = (grad(e + h * v, b) - grad(e - h * v, b)) / (2 * h)
        else:
            fd = (grad(e, b + h * v) - grad(e, b - h * v)) / (2 * h)
        an = med.hessian_action(which, e, b, v)
        scale = max(np.max(np.abs(an)), np.max(np.abs(fd)))
        if scale == 0.0:
            continue
        assert np.max(np.abs(fd - an)) / scale < 1e-5


def test_hessian_rejects_unknown_block(rng):
    med = medium(MODELS["kerr"])
    e, b = random_eb(rng)
    with pytest.raises(ValueError):
        med.hessian_action("xx", e, b, e)


# -- constitutive maps -----------------------------------------------------------


def test_kerr_constant_field_doubles_d():
    med = medium(ModelSpec.kerr(0.0, 1.0 / FP), UNIT, MaterialMetric())
    e = const_e(UNIT, (1.0, 0.0, 0.0))
    d = med.d_from_e(e, np.zeros(3 * UNIT.ncell))
    assert np.max(np.abs(d - 2.0 * med.s1 * e)) < 1e-14


def test_kerr_constant_field_polarization():
    chi1, chi3 = 0.3, 0.2
    E = np.array([0.4, -0.2, 0.5])
    med = medium(ModelSpec.kerr(chi1, chi3), UNIT, MaterialMetric())
    e = const_e(UNIT, E)
    p = med.polarization(e, np.zeros(3 * UNIT.ncell))
    ref = de_rham_map(UNIT, lambda x, y, z: tuple(c + 0 * x for c in (chi1 + chi3 * E @ E) * E), ("dual", 2)).values
    assert np.max(np.abs(p - ref)) < 1e-14


def test_magnetoelectric_constant_field_maps():
    alpha = 0.02
    E, B = np.array([0.3, 0.4, -0.5]), np.array([-0.2, 0.6, 0.1])
    med = medium(ModelSpec.magnetoelectric(alpha), UNIT, MaterialMetric())
    e, b = const_e(UNIT, E), const_b(UNIT, B)
    d = med.d_from_e(e, b)
    h = med.h_from_b(e, b)
    assert np.max(np.abs(d - (1 + FP * alpha * B @ B) * med.s1 * e)) < 1e-14
    assert np.max(np.abs(h - (1 - FP * alpha * E @ E) * med.s2 * b)) < 1e-14
    assert np.max(np.abs(med.magnetization(e, b) + med.dk_db(e, b))) == 0.0


# -- inverse map ------------------------------------------------------------------


def test_kerr_scalar_cubic_root():
    rho = solve_kerr_cubic(np.array([2.0]), 1.0, 1.0)
    assert abs(rho[0] - 1.0) < 1e-12
    med = medium(ModelSpec.kerr(0.0, 1.0 / FP))
    assert abs(med.kerr_magnitude(np.array([2.0]))[0] - 1.0) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(0.0, 1e3), st.floats(0.05, 10.0), st.floats(0.0, 10.0))
def test_kerr_cubic_property(dn, a, c3):
    rho = solve_kerr_cubic(np.array([dn]), a, c3)[0]
    assert rho >= 0.0
    assert abs((a + c3 * rho ** 2) * rho - dn) <= 1e-12 * max(1.0, dn)


def test_kerr_cubic_rejects_nonmonotone():
    with pytest.raises(ConstitutiveError, match="not invertible"):
        solve_kerr_cubic(np.array([1.0]), -0.5, 1.0)


def test_vacuum_roundtrip_exact(rng):
    med = medium(MODELS["vacuum"])
    e, b = random_eb(rng)
    assert np.max(np.abs(med.e_from_db(med.d_from_e(e, b), b) - e)) < 1e-13


@pytest.mark.parametrize("variant", list(MODELS))
def test_roundtrip_all_models(rng, variant):
    med = medium(MODELS[variant])
    e, b = random_eb(rng, scale=0.5)
    d = med.d_from_e(e, b)
    tol = 1e-11
    back, _ = med.solve_e(d, b, tol=tol)
    assert np.max(np.abs(med.d_from_e(back, b) - d)) <= tol
    assert np.max(np.abs(back - e)) < 1e-9


def test_magnetoelectric_closed_form_matches_newton(rng):
    med = medium(MODELS["magnetoelectric"])
    e, b = random_eb(rng, scale=0.5)
    d = med.d_from_e(e, b)
    closed, it0 = med.solve_e(d, b, tol=1e-13)
    newton, it1 = med.solve_e(d, b, tol=1e-13, method="newton")
    assert it0 == 0 and it1 >= 1
    assert np.max(np.abs(closed - newton)) < 1e-12


def test_implicit_function_derivative(rng):
    med = medium(MODELS["kerr"])
    e, b = random_eb(rng, scale=0.5)
    d = med.d_from_e(e, b)
    v = rng.standard_normal(d.size)
    h = 1e-4
    ep = med.e_from_db(d + h * v, b, tol=1e-13)
    em = med.e_from_db(d - h * v, b, tol=1e-13)
    fd = (ep - em) / (2 * h)
    n = e.size
    J = spla.LinearOperator((n, n), matvec=lambda x: med.d_jacobian_action(e, b, x), dtype=float)
    an, info = spla.cg(J, v, rtol=1e-13, maxiter=2000)
    assert info == 0
    assert np.max(np.abs(fd - an)) / np.max(np.abs(an)) < 1e-4


def test_divergence_error_carries_residual(rng):
    med = medium(MODELS["kerr"])
    e, b = random_eb(rng, scale=3.0)
    d = med.d_from_e(e, b)
    with pytest.raises(SolverDivergence) as info:
        med.solve_e(d, b, tol=1e-14, max_iter=1, guess=np.zeros_like(e))
    assert info.value.residual > 1e-14
    assert "last residual" in str(info.value)


def test_wave_speed_factor():
    assert medium(ModelSpec.kerr(-0.5 / FP, 0.0)).max_wave_speed_factor() == pytest.approx(math.sqrt(2.0))
    assert medium(MODELS["vacuum"]).max_wave_speed_factor() == 1.0
