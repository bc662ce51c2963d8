import numpy as np
import pytest

from rollball.equilibria import delta_coefficients, equilibria_on_leaf, omega_tilde
from rollball.errors import ConfigurationError, DomainError, PreconditionError
from rollball.leaf import LeafSystem
from rollball.parabolic import (
    ParabolicClosedForm,
    closed_form_Uu,
    delta11_parabolic,
    omega_tilde_parabolic,
    oracle_compare,
    parabolic_asymptotics_check,
)
from rollball.routh import build_routh_solution, routh_coeffs, routh_for
from rollball.surface import ParabolicProfile, Params

MU = 2 / 7
CF = ParabolicClosedForm(1.0, MU)


def test_hyperbolic_identity_and_det():
    r = np.linspace(0, 10, 101)
    assert np.max(np.abs(CF.c(r) ** 2 - CF.s(r) ** 2 - 1)) < 1e-12
    assert np.max(np.abs(np.linalg.det(CF.U(r)) - 1)) < 1e-12


def test_value_at_vertex():
    U, u = closed_form_Uu(CF, 0.0)
    assert np.array_equal(U, np.eye(2)) and np.array_equal(u, [0.0, 0.0])


def test_hyperbolic_functions_where_F_is_e():
    r = np.sqrt(np.e**2 - 1)
    assert CF.c(r) == pytest.approx(np.cosh(np.sqrt(MU)), rel=1e-14)
    assert CF.s(r) == pytest.approx(np.sinh(np.sqrt(MU)), rel=1e-14)


@pytest.mark.parametrize("r", [0.5, 1.0, 2.0])
def test_closed_form_solves_auxiliary_system(r):
    prof = ParabolicProfile(1.0)
    x, h = 0.5 * r * r, 1e-5
    rx = lambda z: np.sqrt(2 * z)  # noqa: E731
    dU = (CF.U(rx(x + h)) - CF.U(rx(x - h))) / (2 * h)
    du = (CF.u(rx(x + h)) - CF.u(rx(x - h))) / (2 * h)
    G3, G4, g3, g4 = routh_coeffs(prof, MU, x)
    G = np.array([[0.0, G3], [G4, 0.0]])
    assert np.max(np.abs(dU - G @ CF.U(r))) < 1e-6
    assert np.max(np.abs(du - (G @ CF.u(r) + [g3, g4]))) < 1e-6


def test_u_continuous_near_vertex():
    r = np.array([1e-5, 1.4e-4, 1.5e-4, 1e-3])
    u = CF.u(r)
    lead = np.stack([MU * 2 * 0.5 * r * r, 2 * 0.5 * r * r], -1)
    assert np.max(np.abs(u - lead) / (0.5 * r[:, None] ** 2)) < 1e-3


@pytest.mark.parametrize("b,mu", [(1.0, MU), (1.0, 0.4), (2.0, MU), (2.0, 0.35), (0.5, 0.35)])
def test_oracle_agreement(b, mu):
    k = mu / (1 - mu)
    prof = ParabolicProfile(b)
    dev = oracle_compare(Params(k, 1.0), routh_for(prof, Params(k, 1.0).mu, 5.0), ParabolicClosedForm(b, Params(k, 1.0).mu), np.linspace(0, 3, 50))
    assert dev < 1e-7


def test_nearly_flat_paraboloid():
    b = 1e-6
    P = Params(0.4, 1.4)
    routh = build_routh_solution(P, ParabolicProfile(b), 1.0)
    r = np.linspace(0, 1, 11)
    U, _ = routh.Uu(0.5 * r * r)
    assert np.max(np.abs(U - np.eye(2))) < 1e-5
    assert oracle_compare(P, routh, ParabolicClosedForm(b, P.mu), r) < 1e-7


def test_mismatched_parameters():
    P = Params(0.4, 1.4)
    routh = routh_for(ParabolicProfile(1.0), P.mu)
    with pytest.raises(ConfigurationError):
        oracle_compare(P, routh, ParabolicClosedForm(2.0, P.mu), [1.0])
    with pytest.raises(ConfigurationError):
        oracle_compare(P, routh, ParabolicClosedForm(1.0, 0.35), [1.0])
    with pytest.raises(ConfigurationError):
        ParabolicClosedForm(0.0, MU)
    with pytest.raises(ConfigurationError):
        ParabolicClosedForm(1.0, 0.6)
    with pytest.raises(DomainError):
        closed_form_Uu(CF, -1.0)


@pytest.mark.parametrize("b", [0.5, 1.0, 2.0])
def test_delta_block_matches_explicit_formulas(b, rng):
    P = Params(0.4, 1.4)
    r = rng.uniform(0.1, 3, 50)
    v = rng.uniform(0.1, 2, 50) * rng.choice([-1, 1], 50)
    assert np.allclose(omega_tilde(P, ParabolicProfile(b), r, v), omega_tilde_parabolic(P, b, r, v), rtol=1e-10, atol=0)
    assert np.allclose(delta_coefficients(P, ParabolicProfile(b), r)[3], delta11_parabolic(P, b, r), rtol=1e-13)


def test_asymptotics_rotating():
    P = Params(0.4, 1.4, 1.0)
    prof = ParabolicProfile(1.0)
    rep = parabolic_asymptotics_check(LeafSystem(P, prof, (1.0, 0.0), routh_for(prof, P.mu, 2e4)))
    assert rep["ok"] and rep["vertex_ok"] and rep["infinity_ok"]
    assert all(q > 0 for q in rep["infinity_ratios"])


def test_asymptotics_coercive():
    P = Params(0.4, 1.4, 0.0)
    prof = ParabolicProfile(1.0)
    rep = parabolic_asymptotics_check(LeafSystem(P, prof, (1.0, 0.0), routh_for(prof, P.mu, 2e4)))
    assert rep["ok"]


def test_asymptotics_refuses_vertex_leaf():
    P = Params(0.4, 1.4, 1.0)
    prof = ParabolicProfile(1.0)
    with pytest.raises(PreconditionError):
        parabolic_asymptotics_check(LeafSystem(P, prof, (0.0, 1.0), routh_for(prof, P.mu)))


def test_equilibrium_surface_laws():
    P = Params(0.4, 1.4, 0.0)
    prof = ParabolicProfile(1.0)
    routh = routh_for(prof, P.mu, 200.0)
    for j2 in (-1.0, 0.0, 1.5):
        radii = []
        for j1 in (1.5, 0.5, 0.1, 0.01):
            a = equilibria_on_leaf(LeafSystem(P, prof, (j1, j2), routh), (1e-5, 20.0))
            b = equilibria_on_leaf(LeafSystem(P, prof, (-j1, -j2), routh), (1e-5, 20.0))
            assert len(a) == len(b) == 1
            assert a[0].r == pytest.approx(b[0].r, rel=1e-9)
            radii.append(a[0].r)
        assert radii[-1] < 0.1 and radii[-1] < radii[0]
