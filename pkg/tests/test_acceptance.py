"""End-to-end acceptance checks.

Each test prints one line ``criterion N: PASS|FAIL ...`` with the measured
quantity and its threshold, then asserts.  Run directly with
``python3 tests/test_acceptance.py`` or through pytest.
"""

import subprocess
import sys

import numpy as np
import pytest

from rollball.config import load_config, make_rng
from rollball.engine import (
    ball_system,
    ball_velocity,
    constrained_field,
    estimate_period_and_rotation,
    reaction_closed_form,
    reaction_force,
)
from rollball.equilibria import (
    branch_signature,
    equilibrium_state,
    omega_tilde_m,
    re1_re2_records,
    re3_record,
    scan_leaf_counts,
)
from rollball.leaf import LeafSystem, casimir_defect, hamiltonian_defect
from rollball.model import all_single_flips
from rollball.parabolic import ParabolicClosedForm, oracle_compare
from rollball.reduced import integrate_reduced, jacobian_to_p5, to_p5, vector_field_polar
from rollball.routh import build_routh_solution, conservation_report, grad_energy_circ, grad_J_circ, routh_for
from rollball.surface import ParabolicProfile, Params, PlaneProfile, PolynomialProfile, check_admissibility, eval_profile
from rollball.verify import plane_circle_error, run_suite

PARA = ParabolicProfile(1.0)
THREE = [PlaneProfile(), PARA, PolynomialProfile((0.0, 1.0, 0.1))]
BASE = Params(0.4, 1.4)  # mu = 2/7, gamma = 1
S0 = np.array([1.0, 0.3, 0.6, 0.2])


@pytest.fixture
def verdict(capsys):
    def emit(n, what, measured, threshold, ok):
        with capsys.disabled():
            print(f"\ncriterion {n:>2}: {'PASS' if ok else 'FAIL'}  {what}: measured {measured} vs {threshold}")
        assert ok, f"criterion {n} failed: {what} measured {measured} vs {threshold}"

    return emit


def random_states(rng, n):
    return np.column_stack([rng.uniform(0.3, 2.5, n), rng.normal(size=(n, 3))])


def test_1_conservation(verdict):
    worst = 0.0
    for Om in (0.0, 1.0):
        P = BASE.with_omega(Om)
        probe = integrate_reduced(P, PARA, S0, (0.0, 40.0))
        T = estimate_period_and_rotation(probe).T_radial
        tr = integrate_reduced(P, PARA, S0, (0.0, 10.5 * T), rtol=1e-10, atol=1e-12)
        rel = conservation_report(P, PARA, tr)["relative"]
        worst = max(worst, rel["E"], rel["J1"], rel["J2"])
    verdict(1, "max relative drift of E, J1, J2 over 10 radial periods", f"{worst:.3g}", "< 1e-6", worst < 1e-6)


def _sample_q(rng, P, prof, n=100):
    return to_p5(random_states(rng, n), prof, P)[:, 1:]


def test_2_hamiltonian_identity(verdict):
    rng = make_rng(2)
    worst = 0.0
    for prof in THREE:
        for Om in (0.0, 1.0):
            P = BASE.with_omega(Om)
            worst = max(worst, max(hamiltonian_defect(P, prof, q) for q in _sample_q(rng, P, prof)))
    verdict(2, "|Lambda(dE) - X| / (1 + |X|)", f"{worst:.3g}", "< 1e-8", worst < 1e-8)


def test_3_casimirs(verdict):
    rng = make_rng(2)
    worst = 0.0
    for prof in THREE:
        for Om in (0.0, 1.0):
            P = BASE.with_omega(Om)
            q = _sample_q(rng, P, prof)
            routh = routh_for(prof, P.mu, 2.0 * q[:, 0].max() + 1.0)
            worst = max(worst, max(casimir_defect(P, prof, z, routh) for z in q))
    verdict(3, "max |Lambda(dJ_i)|", f"{worst:.3g}", "< 1e-7", worst < 1e-7)


def test_4_engine_equivalence(verdict):
    rng = make_rng(4)
    dev = reac = 0.0
    for prof in THREE:
        for Om in (0.0, 1.0):
            P = BASE.with_omega(Om)
            sys_ = ball_system(P, prof)
            for s in random_states(rng, 1000):
                th = rng.uniform(0, 2 * np.pi)
                q = np.array([s[0], th, 0.0, 0.0, 0.0])
                v = ball_velocity(P, prof, s[0], th, *s[1:])
                _, vd = constrained_field(sys_, q, v)
                ref = vector_field_polar(P, prof, s)[1:]
                dev = max(dev, np.linalg.norm(vd[[0, 1, 4]] - ref) / np.linalg.norm(ref))
                R = reaction_force(sys_, q, v)
                reac = max(reac, np.max(np.abs(R[[0, 1, 4]] - reaction_closed_form(P, prof, *s))))
    ok = dev < 1e-8 and reac < 1e-9
    verdict(4, "engine vs explicit field (relative) / reaction components", f"{dev:.3g} / {reac:.3g}", "< 1e-8 / < 1e-9", ok)


def test_5_closed_form_oracle(verdict):
    r = np.linspace(0.0, 3.0, 301)
    worst = 0.0
    for b in (1.0, 2.0):
        for mu in (2 / 7, 0.35):
            P = Params.from_mu_gamma(mu, 1.0)
            routh = build_routh_solution(P, ParabolicProfile(b), 4.6)
            worst = max(worst, oracle_compare(P, routh, ParabolicClosedForm(b, P.mu), r))
    verdict(5, "max |(U, u) - closed form| on r in [0, 3]", f"{worst:.3g}", "< 1e-6", worst < 1e-6)


def test_6_plane_circle(verdict):
    assert 2 * np.pi / (BASE.mu * 1.0) == pytest.approx(7 * np.pi)
    err = plane_circle_error(BASE, Omega=1.0)
    verdict(6, "relative centre-path error over one period 7 pi", f"{err:.3g}", "< 1e-6", err < 1e-6)


def test_7_stability_coherence(verdict):
    rng = make_rng(7)
    # x - 0.15 x**2 has f'' < 0 beyond r ~ 1.49 and stays admissible on [0, 2.2]
    nonconvex = PolynomialProfile((0.0, 1.0, -0.15))
    assert check_admissibility(nonconvex, r_max=2.2).ok
    bad = counted = 0
    for prof in (PARA, nonconvex):
        routh = routh_for(prof, BASE.mu, 8.0)
        for _ in range(25):
            P = BASE.with_omega(float(rng.choice([0.0, 1.0, 3.0])))
            r, v = rng.uniform(0.3, 2.2), rng.normal() * 1.5
            rec = re3_record(P, prof, r, v, routh)
            if abs(rec.S_value) > 1e-6:
                counted += 1
                bad += int(np.sign(LeafSystem(P, prof, rec.j, routh).d2V_fd(r)) != np.sign(rec.S_value))
    # critical radius r = 1 with f''(1) = 1 and f'(1) = 0
    crit = PolynomialProfile((0.0, -0.5, 0.5))
    routh = routh_for(crit, BASE.mu, 2.0)
    crit_bad = crit_counted = 0
    for _ in range(10):
        P = BASE.with_omega(float(rng.uniform(-3, 3)))
        for rec in re1_re2_records(P, crit, 1.0, [float(rng.normal() * 3)], routh):
            if abs(rec.S_value) > 1e-6:
                crit_counted += 1
                crit_bad += int(np.sign(LeafSystem(P, crit, rec.j, routh).d2V_fd(1.0)) != np.sign(rec.S_value))
    ok = bad == 0 and crit_bad == 0 and counted >= 40 and crit_counted >= 10
    verdict(7, "sign mismatches S3 / S1,S2 vs V''", f"{bad}/{counted}, {crit_bad}/{crit_counted}", "0", ok)


def test_8_bifurcation(verdict):
    m = omega_tilde_m(BASE, PARA, 1.0)
    grid = np.linspace(0.0, 2.0 * m, 100)
    wrong = 0
    most = 0
    for Om in grid:
        sig = branch_signature(BASE, PARA, 1.0, float(Om))
        most = max(most, len(sig.zeros_neg), len(sig.zeros_pos))
        expect = ("S", "S") if Om < m else ("S", "SUS")
        wrong += int(tuple(sig[:2]) != expect)
    ok = wrong == 0 and most <= 2
    verdict(8, f"wrong signatures around Omega_m(1) = {m:.6g} / max zeros per branch", f"{wrong} / {most}", "0 / <= 2", ok)


def test_9_leaf_counts(verdict):
    g = np.linspace(-5.0, 5.0, 20)
    assert not np.any(g == 0)
    still = scan_leaf_counts(BASE, PARA, g, g)
    bad0 = sum(not (len(v) == 1 and v[0].classification == "leafwise-stable") for v in still.values())
    rot = scan_leaf_counts(BASE.with_omega(1.0), PARA, g, g)
    bad1 = 0
    for recs in rot.values():
        if len(recs) not in (1, 2, 3):
            bad1 += 1
        elif len(recs) == 3 and sum(r.classification == "leafwise-unstable" for r in recs) != 1:
            bad1 += 1
    counts = sorted({len(v) for v in rot.values()})
    verdict(9, f"leaves violating the count law (Omega=0 / Omega=1, counts seen {counts})", f"{bad0} / {bad1}", "0 / 0", bad0 == 0 and bad1 == 0)


def _sv_ratio(P, prof, s, routh):
    q = to_p5(s, prof, P)[1:]
    D = np.vstack([grad_energy_circ(P, prof, q), grad_J_circ(P, prof, q, routh)]) @ jacobian_to_p5(P, prof, s)[1:]
    sv = np.linalg.svd(D, compute_uv=False)
    return sv[-1] / sv[0]


def test_10_independence(verdict):
    rng = make_rng(10)
    P = BASE.with_omega(1.0)
    routh = routh_for(PARA, P.mu, 8.0)
    generic = min(_sv_ratio(P, PARA, s, routh) for s in random_states(rng, 100))
    eq = max(
        _sv_ratio(P, PARA, equilibrium_state(P, PARA, re3_record(P, PARA, rng.uniform(0.3, 2.5), rng.normal() * 1.5, routh)), routh)
        for _ in range(20)
    )
    ok = generic > 1e-6 and eq < 1e-8 and generic / eq >= 1e2
    verdict(10, "min sigma3/sigma1 generic, max at RE3", f"{generic:.3g}, {eq:.3g}", "> 1e-6, < 1e-8, gap >= 1e2", ok)


def test_11_periodicity(verdict):
    P = BASE.with_omega(1.0)
    routh = routh_for(PARA, P.mu, 50.0)
    tr = integrate_reduced(P, PARA, S0, (0.0, 40.0), rtol=1e-12, atol=1e-14)
    assert abs(tr.J[0, 0]) > 1e-3
    T = estimate_period_and_rotation(tr).T_radial
    ret = float(np.linalg.norm(tr.polar_at(T) - S0) / max(1.0, np.linalg.norm(S0)))
    # small oscillation about a stable RE3
    for v in (1.0, 0.5, 2.0, -1.0):
        rec = re3_record(P, PARA, 1.0, v, routh)
        if rec.classification == "leafwise-stable":
            break
    leaf = LeafSystem(P, PARA, rec.j, routh)
    T_lin = 2 * np.pi * float(eval_profile(PARA, 1.0).F) / np.sqrt(float(leaf.d2V(1.0)))
    small = integrate_reduced(P, PARA, leaf.polar_state(1.0 + 1e-3), (0.0, 4 * T_lin), rtol=1e-12, atol=1e-14)
    T_num = estimate_period_and_rotation(small).T_radial
    rel = abs(T_num / T_lin - 1.0)
    ok = ret < 1e-6 and rel < 0.02
    verdict(11, "return distance after one period / small-amplitude period error", f"{ret:.3g} / {rel:.3g}", "< 1e-6 / < 2%", ok)


def test_12_negative_control(verdict):
    cfg = load_config()
    undetected = []
    for m in all_single_flips():
        failed = [c.name for c in run_suite("poisson", cfg, m) if not c.passed]
        if not failed:
            failed = [c.name for c in run_suite("conservation", cfg, m) if not c.passed]
        if not failed:
            undetected.append(sorted(m.flips))
    cli_ok = True
    for fault in ("X3:1", "E:4"):
        res = subprocess.run([sys.executable, "-m", "rollball", "verify", "--suite", "all", "--fault", fault], capture_output=True, text=True)
        cli_ok &= res.returncode == 1 and "FAILED " in res.stderr
    ok = not undetected and cli_ok
    verdict(12, "undetected single sign flips (of 32) / CLI exit 1 with named check", f"{len(undetected)} / {cli_ok}", "0 / True", ok)


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
