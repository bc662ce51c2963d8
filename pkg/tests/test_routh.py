import numpy as np
import pytest

from rollball.errors import ConfigurationError, DomainError
from rollball.parabolic import ParabolicClosedForm
from rollball.reduced import integrate_reduced, reflect, to_p5
from rollball.routh import (
    build_routh_solution,
    conservation_report,
    energy_circ,
    energy_terms,
    grad_energy_circ,
    grad_J_circ,
    moving_energy,
    p0_on_m4,
    routh_coeffs,
    routh_for,
    routh_J,
    tilde_p34,
)
from rollball.leaf import fd_gradient
from rollball.surface import ParabolicProfile, Params, PlaneProfile, PolynomialProfile

from conftest import MU, random_polar

PLANE = PlaneProfile()
PARA = ParabolicProfile(1.0)
S0 = np.array([1.0, 0.3, 0.6, 0.2])


def test_plane_solution_is_explicit():
    sol = build_routh_solution(MU, PLANE, 4.0)
    x = np.linspace(0, 4, 9)
    U, u = sol.Uu(x)
    assert np.allclose(U, np.eye(2), atol=1e-14)
    assert np.allclose(u, np.column_stack([MU * x, 0 * x]), atol=1e-13)


def test_initial_values_exact(profile):
    sol = build_routh_solution(MU, profile, 2.0)
    U, u = sol.Uu(0.0)
    assert np.array_equal(U, np.eye(2)) and np.array_equal(u, [0.0, 0.0])


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_parabolic_matches_closed_form(r):
    sol = build_routh_solution(MU, PARA, 3.0)
    cf = ParabolicClosedForm(1.0, MU)
    U, u = sol.Uu(0.5 * r * r)
    assert np.allclose(U, cf.U(r), atol=1e-7) and np.allclose(u, cf.u(r), atol=1e-7)


def test_solution_invariants(profile):
    sol = build_routh_solution(MU, profile, 6.0)
    x = np.linspace(0, 6, 301)
    assert np.all(np.linalg.det(sol.U(x)) > 0)
    assert sol.residual(np.linspace(0.01, 5.99, 97)) < 1e-8


def test_liouville_determinant():
    # trace G = 0, so det U stays 1
    sol = build_routh_solution(MU, PolynomialProfile((0.0, 1.0, 0.1)), 5.0)
    assert np.allclose(np.linalg.det(sol.U(np.linspace(0, 5, 51))), 1.0, atol=1e-10)


def test_extension_doubles_and_agrees():
    sol = build_routh_solution(MU, PARA, 2.0)
    ext = sol.extended(3.0)
    assert ext.x_max == pytest.approx(4.0)
    x = np.linspace(0, 2, 21)
    assert np.allclose(ext.U(x), sol.U(x), atol=1e-15)
    assert sol.extended(1.0) is sol
    with pytest.raises(DomainError):
        sol.U(2.5)


def test_cache_reuses_and_extends():
    a = routh_for(PARA, MU, 3.0)
    assert routh_for(PARA, MU, 2.0) is a
    b = routh_for(PARA, MU, 2 * a.x_max + 1)
    assert b.x_max >= 2 * a.x_max + 1
    assert routh_for(PARA, MU, 1.0) is b


def test_coefficients_of_plane():
    G3, G4, g3, g4 = routh_coeffs(PLANE, MU, np.array([0.3, 1.0]))
    assert np.all(G3 == 0) and np.all(G4 == 0) and np.allclose(g3, MU) and np.all(g4 == 0)


def test_J_examples():
    P = Params(0.4, 1.4, 1.0)
    assert routh_J(P, PARA, [0.0, 0.0, 0.0, 0.7, -0.2]) == pytest.approx([0.7, -0.2], abs=1e-15)
    assert routh_J(P, PLANE, [0.5, 0.5, 0.0, 1.0, 5.0]) == pytest.approx([6 / 7, 5.0], rel=1e-13)


def test_J_inverse_relation(rng):
    P = Params(0.4, 1.4, 0.8)
    sol = routh_for(PARA, MU, 8.0)
    p = to_p5(random_polar(rng, 50), PARA, P)
    j = routh_J(P, PARA, p, sol)
    assert np.allclose(tilde_p34(sol, P.Omega, p[:, 1], j), p[:, 3:5], atol=1e-10)


def test_J_rejects_mismatched_solution():
    with pytest.raises(ConfigurationError):
        routh_J(Params(), PARA, [0.5, 0.5, 0, 1, 0], routh_for(PLANE, MU))


def test_tilde_p_examples():
    sol = build_routh_solution(MU, PLANE, 2.0)
    assert tilde_p34(sol, 1.0, 0.0, [0.3, 0.4]) == pytest.approx([0.3, 0.4])
    assert tilde_p34(sol, 1.0, 1.0, [0.0, 0.0]) == pytest.approx([2 / 7, 0.0], abs=1e-14)
    cf = ParabolicClosedForm(1.0, MU)
    j = np.array([0.7, -0.4])
    ref = cf.U(1.0) @ j + 1.3 * cf.u(1.0)
    assert tilde_p34(routh_for(PARA, MU), 1.3, 0.5, j) == pytest.approx(ref, abs=1e-10)


def test_energy_examples():
    assert moving_energy(Params(), PLANE, [0.5, 0.5, 1.0, 0.0, 0.0]) == pytest.approx(0.5)
    assert moving_energy(Params(0.4, 1.4, 1.0), PLANE, [0.5, 0.5, 1.0, 0.0, 2.0]) == pytest.approx(25 / 14, rel=1e-14)


def test_energy_terms_sum(rng):
    P = Params(0.4, 1.4, 0.9)
    p = to_p5(random_polar(rng, 10), PARA, P)
    assert np.allclose(np.sum(energy_terms(P, PARA, p), axis=0), moving_energy(P, PARA, p), rtol=1e-14)


def test_energy_constant_along_trajectory():
    P = Params(0.4, 1.4, 0.7)
    tr = integrate_reduced(P, PARA, S0, (0, 10))
    assert np.max(np.abs(tr.E - tr.E[0])) < 1e-7 * 10


@pytest.mark.parametrize("Om", [0.0, 1.0])
def test_hand_gradients_match_differences(profile, Om, rng):
    P = Params(0.4, 1.4, Om)
    sol = routh_for(profile, MU, 8.0)
    for q in to_p5(random_polar(rng, 10), profile, P)[:, 1:]:
        g = grad_energy_circ(P, profile, q)
        assert np.allclose(g, fd_gradient(lambda z: energy_circ(P, profile, z), q), rtol=1e-6, atol=1e-6)
        J = lambda z: routh_J(P, profile, np.concatenate([[p0_on_m4(z)], z]), sol)
        assert np.allclose(grad_J_circ(P, profile, q, sol), fd_gradient(J, q), rtol=1e-6, atol=1e-6)


def test_reflection_of_integrals(rng):
    P, Pm = Params(0.4, 1.4, 0.7), Params(0.4, 1.4, -0.7)
    p = to_p5(random_polar(rng, 30), PARA, P)
    assert np.allclose(moving_energy(P, PARA, reflect(p)), moving_energy(Pm, PARA, p), atol=1e-10)
    assert np.allclose(routh_J(P, PARA, reflect(p)), -routh_J(Pm, PARA, p), atol=1e-10)


def test_J_is_a_submersion(rng):
    sol = routh_for(PARA, MU, 8.0)
    for Om in (0.0, 1.0):
        P = Params(0.4, 1.4, Om)
        for q in to_p5(random_polar(rng, 20), PARA, P)[:, 1:]:
            sv = np.linalg.svd(grad_J_circ(P, PARA, q, sol), compute_uv=False)
            assert sv[-1] > 1e-6 * sv[0]


def test_plane_free_motion_drift():
    tr = integrate_reduced(Params(), PLANE, [1.0, 1.0, 0.2, 0.0], (0, 5))
    rep = conservation_report(Params(), PLANE, tr)
    assert max(rep["E"], rep["J1"], rep["J2"], rep["K"]) < 1e-9


def test_drift_grows_with_tolerance():
    P = Params(0.4, 1.4, 1.0)
    drifts = [conservation_report(P, PARA, integrate_reduced(P, PARA, S0, (0, 20), rtol=t, atol=t * 1e-2))["E"] for t in (1e-9, 1e-6, 1e-3)]
    assert drifts[0] < drifts[1] < drifts[2]


def test_coercive_case_stays_bounded():
    tr = integrate_reduced(Params(), PARA, S0, (0, 50))
    assert tr.status == "ok"
    assert np.max(np.linalg.norm(tr.polar, axis=1)) < 10 * np.linalg.norm(S0)


def test_empty_trajectory_rejected():
    class Empty:
        p = np.zeros((0, 5))

    with pytest.raises(DomainError):
        conservation_report(Params(), PARA, Empty())
