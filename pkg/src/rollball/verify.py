"""Cross-module invariant suites behind the ``verify`` subcommand.

Each suite returns a list of :class:`Check` records (name, measured value,
threshold, pass flag).  Every check passes when ``measured <= threshold``
unless stated otherwise.  Suites accept a :class:`~rollball.model.TermModel`
so that fault-injected fields and energies can be fed through the same
checks.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .config import RunConfig, make_rng
from .engine import (
    ball_system,
    ball_velocity,
    constrained_field,
    constraint_rate,
    full_vector_field,
    reaction_closed_form,
    reaction_force,
    reconstruct,
)
from .equilibria import (
    branch_signature,
    delta_coefficients,
    equilibria_on_leaf,
    equilibrium_state,
    omega_tilde,
    omega_tilde_m,
    re1_re2_records,
    re3_omega_n,
    re3_record,
)
from .errors import DomainError, IntegrationError
from .leaf import LeafSystem, fd_gradient, poisson_apply, poisson_pair
from .model import EXACT, TermModel
from .parabolic import (
    ParabolicClosedForm,
    delta11_parabolic,
    omega_n_parabolic,
    omega_tilde_parabolic,
    oracle_compare,
    parabolic_asymptotics_check,
)
from .reduced import (
    integrate_reduced,
    pushforward_polar,
    reflect,
    to_p5,
    vector_field_circ,
    vector_field_p5,
    vector_field_polar,
)
from .routh import (
    build_routh_solution,
    conservation_report,
    energy_circ,
    grad_energy_circ,
    moving_energy,
    p0_on_m4,
    routh_for,
    routh_J,
)
from .surface import Params, ParabolicProfile, PlaneProfile, PolynomialProfile, eval_profile

__all__ = ["Check", "SUITES", "run_suite", "report_dict", "sample_polar", "standard_profiles"]


class Check(NamedTuple):
    name: str
    measured: float
    threshold: float
    passed: bool


def _check(name, measured, threshold):
    m = float(measured)
    return Check(name, m, float(threshold), bool(np.isfinite(m) and m <= threshold))


def standard_profiles():
    """Plane, unit paraboloid and a profile with non-zero second derivative of psi."""
    return [PlaneProfile(), ParabolicProfile(1.0), PolynomialProfile((0.0, 1.0, 0.1))]


def sample_polar(rng, n, r_lo=0.3, r_hi=2.5):
    """Random polar states of the regular stratum."""
    return np.column_stack([rng.uniform(r_lo, r_hi, n), rng.normal(size=(n, 3))])


def _omegas(cfg):
    return sorted({0.0, 1.0, float(cfg.params.Omega)})


def suite_poisson(cfg: RunConfig, model: TermModel = EXACT, n: int = 100):
    rng = make_rng(cfg.seed)
    ham = cas = grad = tang = chart = refl = anti = 0.0
    for prof in standard_profiles():
        for Om in _omegas(cfg):
            P = cfg.params.with_omega(Om)
            s = sample_polar(rng, n)
            p = to_p5(s, prof, P)
            q = p[:, 1:]
            routh = routh_for(prof, P.mu, float(q[:, 0].max()) * 1.1)
            X = vector_field_p5(P, prof, p, model)
            # M4 tangency of the p5 field
            dK = np.stack([-2 * p[:, 1], -2 * p[:, 0], p[:, 2], p[:, 3], np.zeros(n)], -1)
            tang = max(tang, np.max(np.abs(np.sum(dK * X, -1)) / (1 + np.linalg.norm(dK, axis=-1) * np.linalg.norm(X, axis=-1))))
            # polar chart against p-coordinates
            Y = pushforward_polar(P, prof, s, vector_field_polar(P, prof, s))
            chart = max(chart, np.max(np.linalg.norm(X - Y, axis=-1) / (1 + np.linalg.norm(Y, axis=-1))))
            # reflection conjugacy
            Pm = cfg.params.with_omega(-Om)
            Xm = vector_field_p5(Pm, prof, reflect(p), model)
            refl = max(refl, np.max(np.abs(reflect(X) - Xm)))
            for qq in q:
                Ef = lambda z: energy_circ(P, prof, z, model)
                dE = fd_gradient(Ef, qq)
                Xc = vector_field_circ(P, prof, qq, model)
                ham = max(ham, np.linalg.norm(poisson_apply(P, prof, qq, dE) - Xc) / (1 + np.linalg.norm(Xc)))
                g = grad_energy_circ(P, prof, qq)
                grad = max(grad, np.max(np.abs(dE - g)) / (1 + np.max(np.abs(g))))
                Jf = lambda z: routh_J(P, prof, np.concatenate([[p0_on_m4(z)], z]), routh)
                dJ = fd_gradient(Jf, qq)
                cas = max(cas, max(np.linalg.norm(poisson_apply(P, prof, qq, dJ[i])) for i in range(2)))
                a, b = rng.normal(size=(2, 4))
                anti = max(anti, abs(poisson_pair(P, prof, qq, a, b) + poisson_pair(P, prof, qq, b, a)))
    return [
        _check("hamiltonian-identity", ham, 1e-8),
        _check("casimir-identity", cas, 1e-7),
        _check("energy-gradient-consistency", grad, 1e-6),
        _check("m4-tangency", tang, 1e-9),
        _check("chart-consistency", chart, 1e-9),
        _check("reflection-conjugacy", refl, 1e-10),
        _check("poisson-antisymmetry", anti, 1e-12),
    ]


def suite_conservation(cfg: RunConfig, model: TermModel = EXACT):
    checks = []
    s0 = np.array([1.0, 0.3, 0.6, 0.2])
    cases = [("parabolic", ParabolicProfile(1.0), 0.0), ("parabolic", ParabolicProfile(1.0), 1.0), ("poly", PolynomialProfile((0.0, 1.0, 0.1)), 1.0)]
    for label, prof, Om in cases:
        P = cfg.params.with_omega(Om)
        tr = integrate_reduced(P, prof, s0, (0.0, 20.0), rtol=cfg.rtol, atol=cfg.atol, model=EXACT, with_integrals=False)
        rep = conservation_report(P, prof, tr, model=model)["relative"]
        worst = max(rep["E"], rep["J1"], rep["J2"])
        checks.append(_check(f"conservation-{label}-Omega={Om:g}", worst, 1e-6))
        checks.append(_check(f"m4-drift-{label}-Omega={Om:g}", rep["K"], 1e-9))
        # the field in p-coordinates must also preserve E along its own flow
        p0 = to_p5(s0, prof, P)
        try:
            tr5 = integrate_reduced(P, prof, p0, (0.0, 5.0), rtol=cfg.rtol, atol=cfg.atol, model=model, with_integrals=False, chart="p5")
            E = moving_energy(P, prof, tr5.p, model)
            drift = np.max(np.abs(E - E[0])) / max(1.0, abs(E[0]))
        except (DomainError, IntegrationError):
            # a corrupted field can leave the admissible region altogether
            drift = np.inf
        checks.append(_check(f"p5-flow-energy-{label}-Omega={Om:g}", drift, 1e-6))
    # coarse tolerance must do worse than fine tolerance
    P = cfg.params.with_omega(1.0)
    prof = ParabolicProfile(1.0)
    fine = conservation_report(P, prof, integrate_reduced(P, prof, s0, (0, 20.0), rtol=1e-10, atol=1e-12))["E"]
    coarse = conservation_report(P, prof, integrate_reduced(P, prof, s0, (0, 20.0), rtol=1e-3, atol=1e-5))["E"]
    checks.append(Check("tolerance-direction", coarse, fine, bool(coarse > fine)))
    return checks


def suite_engine(cfg: RunConfig, model: TermModel = EXACT, n: int = 100):
    rng = make_rng(cfg.seed + 1)
    dev = r46 = tang = proj = 0.0
    for prof in standard_profiles():
        for Om in _omegas(cfg):
            P = cfg.params.with_omega(Om)
            sys = ball_system(P, prof)
            for _ in range(n):
                r = rng.uniform(0.2, 2.5)
                th = rng.uniform(0, 2 * np.pi)
                vr, vt, wz = rng.normal(size=3)
                q = np.array([r, th, 0.0, 0.0, 0.0])
                v = ball_velocity(P, prof, r, th, vr, vt, wz)
                _, vd = constrained_field(sys, q, v)
                ref = vector_field_polar(P, prof, np.array([r, vr, vt, wz]))[1:]
                dev = max(dev, np.max(np.abs(vd[[0, 1, 4]] - ref) / np.maximum(np.abs(ref), 1.0)))
                R = reaction_force(sys, q, v)
                r46 = max(r46, np.max(np.abs(R[[0, 1, 4]] - reaction_closed_form(P, prof, r, vr, vt, wz))))
                tang = max(tang, np.max(np.abs(constraint_rate(sys, q, v))))
                fs = np.array([r, th, 1.0, 0.0, 0.0, 0.0, vr, vt, wz])
                d = full_vector_field(P, prof, fs)
                s = np.array([r, vr, vt, wz])
                sdot = np.array([d[0], d[6], d[7], d[8]])
                X = vector_field_p5(P, prof, to_p5(s, prof, P), model)
                Y = pushforward_polar(P, prof, s, sdot)
                proj = max(proj, np.linalg.norm(X - Y) / (1 + np.linalg.norm(Y)))
    P = cfg.params
    prof = ParabolicProfile(1.0)
    sys = ball_system(P, prof)
    q0 = np.array([1.0, 0.0, 0.0, 0.0, 0.0])
    S = sys.S(q0)
    M = np.linalg.inv(S @ np.linalg.solve(sys.A(q0), S.T))
    cF2 = 1.0 / float(eval_profile(prof, 1.0).F) ** 2
    gram = np.max(np.abs(M - np.diag([P.mu, P.mu * cF2])))
    return [
        _check("engine-vs-explicit", dev, 1e-8),
        _check("reaction-explicit", r46, 1e-9),
        _check("constraint-tangency", tang, 1e-9),
        _check("projection-consistency", proj, 1e-9),
        _check("constraint-gram-theta0", gram, 1e-12),
        _check("plane-circle", plane_circle_error(cfg.params), 1e-6),
    ]


def plane_circle_error(params: Params, x0=(1.0, 0.0), xd0=(0.05, 0.1), Omega: float = 1.0, omega_z: float = 0.3) -> float:
    """Relative error of the reconstructed centre path on the rotating plane over one circle period."""
    from scipy.linalg import expm

    P = params.with_omega(Omega)
    prof = PlaneProfile()
    x0 = np.asarray(x0, dtype=float)
    xd0 = np.asarray(xd0, dtype=float)
    r0 = float(np.hypot(*x0))
    th0 = float(np.arctan2(x0[1], x0[0]))
    s0 = [r0, x0 @ xd0 / r0, (x0[0] * xd0[1] - x0[1] * xd0[0]) / r0**2, omega_z]
    w = P.mu * P.Omega
    T = 2 * np.pi / abs(w)
    tr = integrate_reduced(P, prof, s0, (0.0, T))
    ft = reconstruct(P, prof, tr, th0)
    Jm = np.array([[0.0, -1.0], [1.0, 0.0]])
    exact = np.array([x0 - Jm @ (expm(w * Jm * t) - np.eye(2)) @ xd0 / w for t in ft.t])
    return float(np.max(np.linalg.norm(ft.xy - exact, axis=1)) / np.max(np.linalg.norm(exact, axis=1)))


def suite_parabolic(cfg: RunConfig, model: TermModel = EXACT):
    checks = []
    r = np.linspace(0.0, 3.0, 50)
    worst = res = hyper = 0.0
    for b in (1.0, 2.0):
        for mu in (2.0 / 7.0, 0.35):
            P = Params.from_mu_gamma(mu, 1.0)
            cf = ParabolicClosedForm(b, mu)
            routh = build_routh_solution(mu, ParabolicProfile(b), 4.6)
            worst = max(worst, oracle_compare(P, routh, cf, r))
            res = max(res, routh.residual(np.linspace(0, 4.5, 41)))
            hyper = max(hyper, np.max(np.abs(cf.c(r) ** 2 - cf.s(r) ** 2 - 1.0)), np.max(np.abs(np.linalg.det(cf.U(r)) - 1.0)))
    checks += [_check("closed-form-oracle", worst, 1e-6), _check("routh-residual", res, 1e-8), _check("hyperbolic-identity", hyper, 1e-12)]
    rng = make_rng(cfg.seed + 2)
    P = cfg.params.with_omega(1.0)
    ot = on = d11 = 0.0
    for b in (0.5, 1.0, 2.0):
        rr = rng.uniform(0.2, 3.0, 50)
        vv = rng.normal(size=50)
        ref = omega_tilde_parabolic(P, b, rr, vv)
        ot = max(ot, np.max(np.abs(omega_tilde(P, ParabolicProfile(b), rr, vv) - ref) / np.abs(ref)))
        on = max(on, np.max(np.abs(re3_omega_n(P, ParabolicProfile(b), rr, vv) - omega_n_parabolic(P, b, rr, vv, P.Omega))))
        d11 = max(d11, np.max(np.abs(delta_coefficients(P, ParabolicProfile(b), rr)[3] / delta11_parabolic(P, b, rr) - 1.0)))
    checks += [_check("omega-tilde-explicit", ot, 1e-10), _check("omega-n-explicit", on, 1e-10), _check("delta11-explicit", d11, 1e-12)]
    for Om in (1.0, 0.0):
        Pa = Params.from_mu_gamma(2.0 / 7.0, 1.0, Om)
        leaf = LeafSystem(Pa, ParabolicProfile(1.0), (1.0, 0.0), routh_for(ParabolicProfile(1.0), Pa.mu, 8.0))
        rep = parabolic_asymptotics_check(leaf)
        checks.append(Check(f"potential-asymptotics-Omega={Om:g}", 0.0 if rep["ok"] else 1.0, 0.0, rep["ok"]))
    return checks


def suite_equilibria(cfg: RunConfig, model: TermModel = EXACT, n: int = 25):
    rng = make_rng(cfg.seed + 3)
    checks = []
    zero = 0.0
    mismatch = 0
    counted = 0
    profs = [ParabolicProfile(1.0), PolynomialProfile((0.0, 1.0, -0.05))]
    for prof in profs:
        routh = routh_for(prof, cfg.params.mu, 8.0)
        for i in range(n):
            Om = float(rng.choice([0.0, 1.0, 3.0]))
            P = cfg.params.with_omega(Om)
            r = rng.uniform(0.3, 2.8)
            v = rng.normal() * 1.5
            rec = re3_record(P, prof, r, v, routh)
            s = equilibrium_state(P, prof, rec)
            zero = max(zero, np.linalg.norm(vector_field_circ(P, prof, to_p5(s, prof, P)[1:], model)))
            if abs(rec.S_value) > 1e-6:
                counted += 1
                leaf = LeafSystem(P, prof, rec.j, routh)
                mismatch += int(np.sign(leaf.d2V_fd(r)) != np.sign(rec.S_value))
    checks.append(_check("re3-field-zero", zero, 1e-9))
    checks.append(_check("s3-vs-potential-sign", mismatch, 0))
    checks.append(_check("critical-radius-signs", critical_radius_mismatches(cfg.params, n=10), 0))
    P = cfg.params
    prof = ParabolicProfile(1.0)
    m = omega_tilde_m(P, prof, 1.0)
    lo = tuple(branch_signature(P, prof, 1.0, 0.5 * m)[:2])
    hi = tuple(branch_signature(P, prof, 1.0, 1.5 * m)[:2])
    zero_sig = tuple(branch_signature(P, prof, 1.0, 0.0)[:2])
    checks.append(Check("branch-signature-Omega=0", 0.0, 0.0, zero_sig == ("S", "S")))
    checks.append(Check("branch-signature-below", 0.0, 0.0, lo == ("S", "S")))
    checks.append(Check("branch-signature-above", 0.0, 0.0, hi in (("S", "SUS"), ("SUS", "S"))))
    leaf = LeafSystem(P.with_omega(0.0), prof, (1.0, 0.0), routh_for(prof, P.mu, 200.0))
    recs = equilibria_on_leaf(leaf)
    ok = len(recs) == 1 and recs[0].classification == "leafwise-stable"
    checks.append(Check("single-leaf-equilibrium-Omega=0", float(len(recs)), 1.0, ok))
    return checks


def critical_radius_mismatches(params: Params, n: int = 10, seed: int = 7) -> int:
    """Count sign disagreements between S1/S2 and the leaf potential at critical-radius equilibria.

    Uses ``psi(x) = 0.1 x - 0.01 x**2`` (critical radius ``sqrt(10)``,
    ``f'' = -0.2``) and ``psi(x) = (x**2 - x) / 2`` (critical radius 1,
    ``f'' = 1``), with rotation rates on both sides of the RE1 threshold.
    """
    rng = make_rng(seed)
    bad = 0
    cases = [(PolynomialProfile((0.0, 0.1, -0.01)), np.sqrt(10.0)), (PolynomialProfile((0.0, -0.5, 0.5)), 1.0)]
    done = 0
    while done < n:
        prof, rc = cases[done % 2]
        Om = float(rng.uniform(0.2, 3.0)) * (1 if rng.random() < 0.5 else -1)
        P = params.with_omega(Om)
        routh = routh_for(prof, P.mu, rc * rc)
        wn = float(rng.normal() * 3.0)
        for rec in re1_re2_records(P, prof, rc, [wn], routh):
            if abs(rec.S_value) < 1e-6:
                continue
            leaf = LeafSystem(P, prof, rec.j, routh)
            if abs(leaf.dV(rc)) > 1e-7 or np.sign(leaf.d2V_fd(rc)) != np.sign(rec.S_value):
                bad += 1
        done += 1
    return bad


SUITES = {
    "poisson": suite_poisson,
    "engine": suite_engine,
    "parabolic": suite_parabolic,
    "equilibria": suite_equilibria,
    "conservation": suite_conservation,
}


def run_suite(name: str, cfg: RunConfig, model: TermModel = EXACT):
    """Run one suite, or all of them for ``name == "all"``."""
    if name == "all":
        out = []
        for key, fn in SUITES.items():
            out += [c._replace(name=f"{key}/{c.name}") for c in fn(cfg, model)]
        return out
    return SUITES[name](cfg, model)


def report_dict(suite: str, checks) -> dict:
    return {
        "suite": suite,
        "passed": all(c.passed for c in checks),
        "failed": [c.name for c in checks if not c.passed],
        "checks": [c._asdict() for c in checks],
    }
