import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rollball.errors import ConfigurationError, DomainError, InvalidProfileError
from rollball.surface import (
    ParabolicProfile,
    Params,
    PlaneProfile,
    PolynomialProfile,
    TabulatedProfile,
    check_admissibility,
    critical_radii,
    eval_profile,
    eval_psi,
    profile_from_spec,
)

from conftest import PROFILES


def test_parabolic_values_at_two():
    v = eval_profile(ParabolicProfile(1.0), 2.0)
    assert (v.f, v.f_p, v.f_pp) == pytest.approx((2.0, 2.0, 1.0), abs=1e-15)
    assert v.F == pytest.approx(math.sqrt(5.0), rel=1e-15)


def test_plane_is_flat():
    v = eval_profile(PlaneProfile(), np.linspace(0, 5, 11))
    assert np.all(v.f == 0) and np.all(v.f_p == 0) and np.all(v.f_pp == 0) and np.all(v.F == 1)
    w = eval_psi(PlaneProfile(), 3.0)
    assert (w.psi, w.psi_p, w.psi_pp, w.curlyF) == (0.0, 0.0, 0.0, 1.0)


def test_parabolic_unit_radius():
    v = eval_profile(ParabolicProfile(1.0), 1.0)
    w = eval_psi(ParabolicProfile(1.0), 0.5)
    assert v.F**2 == pytest.approx(2.0, rel=1e-15)
    assert w.curlyF**2 == pytest.approx(0.5, rel=1e-15)


def test_psi_of_parabolic_is_identity():
    w = eval_psi(ParabolicProfile(1.0), 3.0)
    assert (w.psi, w.psi_p, w.psi_pp) == pytest.approx((3.0, 1.0, 0.0))


def test_polynomial_psi():
    w = eval_psi(PolynomialProfile((0.0, 1.0, 1.0)), 1.0)
    assert (w.psi, w.psi_p, w.psi_pp) == pytest.approx((2.0, 3.0, 2.0))
    assert w.curlyF**2 == pytest.approx(1.0 / 19.0, rel=1e-14)


def test_negative_p1_rejected():
    with pytest.raises(DomainError):
        eval_psi(ParabolicProfile(1.0), -0.1)


def test_non_finite_coefficients_rejected():
    with pytest.raises(InvalidProfileError):
        PolynomialProfile((0.0, float("nan")))
    with pytest.raises(InvalidProfileError):
        ParabolicProfile(float("inf"))


@pytest.mark.parametrize("name", sorted(PROFILES))
def test_two_derivative_chains_agree(name, rng):
    prof = PROFILES[name]
    r = rng.uniform(0.0, 3.0, 100)
    v = eval_profile(prof, r)
    w = eval_psi(prof, 0.5 * r * r)
    assert np.all(np.abs(v.f - w.psi) <= 1e-12 * (1 + np.abs(v.f)))
    assert np.allclose(v.f_p, r * w.psi_p, rtol=1e-8, atol=0)
    assert np.allclose(v.f_pp, w.psi_p + r * r * w.psi_pp, rtol=1e-8, atol=0)
    assert np.allclose(v.F * w.curlyF, 1.0, rtol=1e-12, atol=0)
    assert np.all((w.curlyF > 0) & (w.curlyF <= 1))


def test_psi_derivatives_match_finite_differences():
    prof = PolynomialProfile((0.3, -0.2, 0.1, 0.05))
    x, h = 0.7, 1e-5
    d = prof.psi_derivs(np.array([x - h, x, x + h]))
    assert (d[0][2] - d[0][0]) / (2 * h) == pytest.approx(d[1][1], rel=1e-8)
    assert (d[1][2] - d[1][0]) / (2 * h) == pytest.approx(d[2][1], rel=1e-8)


@pytest.mark.parametrize("b", [0.1, 1.0, 10.0])
def test_parabolic_admissible(b):
    assert check_admissibility(ParabolicProfile(b), r_max=100.0).ok


def test_inverted_paraboloid_is_borderline_at_vertex():
    # f'' = -1 equals the bound -(1 + f'**2)**1.5 only at r = 0
    rep = check_admissibility(PolynomialProfile((0.0, -1.0)), r_max=50.0, n_grid=501)
    assert rep.violating_radii.tolist() == [0.0]
    assert check_admissibility(PolynomialProfile((0.0, -0.999)), r_max=50.0).ok


def test_too_sharp_cap_is_flagged():
    rep = check_admissibility(PolynomialProfile((0.0, -2.0)), r_max=1.0)
    assert not rep.ok
    assert rep.violating_radii[0] == 0.0


def test_admissibility_arguments():
    with pytest.raises(DomainError):
        check_admissibility(PlaneProfile(), r_max=0.0)


def test_critical_radii():
    rc = critical_radii(PolynomialProfile((0.0, -0.5, 0.5)), np.linspace(0.1, 3, 50))
    assert rc == pytest.approx([1.0], abs=1e-12)


def test_tabulated_profile_tracks_its_data():
    x = np.linspace(0.0, 4.0, 401)
    tab = TabulatedProfile(x, x + 0.1 * x**2)
    poly = PolynomialProfile((0.0, 1.0, 0.1))
    xs = np.linspace(0.05, 3.9, 37)
    a, b = eval_psi(tab, xs), eval_psi(poly, xs)
    assert np.allclose(a.psi, b.psi, atol=1e-10)
    assert np.allclose(a.psi_p, b.psi_p, atol=1e-6)
    with pytest.raises(DomainError):
        eval_psi(tab, 5.0)


def test_profile_specs_round_trip():
    for prof in [ParabolicProfile(2.0), PlaneProfile(), PolynomialProfile((0.0, 1.0, 0.1))]:
        again = profile_from_spec(json.loads(json.dumps(prof.to_spec())))
        r = np.linspace(0, 2, 5)
        assert np.array_equal(eval_profile(prof, r).f, eval_profile(again, r).f)
        assert again.fingerprint == prof.fingerprint


@pytest.mark.parametrize(
    "spec",
    [{"kind": "cone"}, {"kind": "parabolic", "b": -1}, {"kind": "poly_p1", "coeffs": []}, "parabolic"],
)
def test_bad_profile_specs(spec):
    with pytest.raises((ConfigurationError, InvalidProfileError)):
        profile_from_spec(spec)


def test_params_derived_quantities():
    P = Params(0.4, 1.4, 0.0)
    assert P.mu == pytest.approx(2.0 / 7.0, rel=1e-15)
    assert P.gamma == pytest.approx(1.0, rel=1e-15)
    Q = Params.from_mu_gamma(0.35, 2.0, 1.5)
    assert (Q.mu, Q.gamma, Q.Omega) == pytest.approx((0.35, 2.0, 1.5))
    with pytest.raises((DomainError, ConfigurationError)):
        Params(1.2, 1.0)
    with pytest.raises((DomainError, ConfigurationError)):
        Params.from_mu_gamma(0.6, 1.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=1, max_size=5), st.floats(0, 3))
def test_chain_rule_property(coeffs, r):
    prof = PolynomialProfile(tuple(coeffs))
    v = eval_profile(prof, r)
    w = eval_psi(prof, 0.5 * r * r)
    assert v.f_p == pytest.approx(r * w.psi_p, rel=1e-12, abs=1e-12)
    assert v.F >= 1.0
