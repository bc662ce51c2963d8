"""Reduced equilibria, their leafwise stability and branch structure.

Three families of reduced equilibria exist on the regular stratum (``p2 = 0``):

* RE1: critical parallel (``f'(r) = 0``) with ``v_theta = mu Omega``, free normal spin;
* RE2: critical parallel with ``v_theta = 0`` (needs ``Omega != 0``), free normal spin;
* RE3: non-critical parallel, free ``v_theta != 0`` and a determined normal spin.

Leafwise stability is decided by the sign of ``S1``, ``S2`` or ``S3``.  For RE3,
``S3`` is a quartic in ``v_theta`` whose coefficients depend on ``r`` only,
plus a term linear in ``Omega``.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from typing import NamedTuple

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .errors import DegenerateBranchError, FamilyDomainError, NumericalInconsistencyError
from .leaf import LeafSystem
from .reduced import omega_z_from_n, to_p5
from .routh import routh_for, routh_J
from .surface import Params, Profile, eval_profile

__all__ = [
    "S_EPS",
    "EquilibriumRecord",
    "classify",
    "re3_omega_n",
    "delta_coefficients",
    "S1",
    "S2",
    "S3",
    "stability_S",
    "omega_tilde",
    "omega_tilde_m",
    "BranchSignature",
    "branch_signature",
    "re2_threshold",
    "re1_re2_records",
    "re3_record",
    "equilibrium_state",
    "equilibria_on_leaf",
    "scan_leaf_counts",
    "max_workers",
]

S_EPS = 1e-9
CRIT_TOL = 1e-10


def max_workers() -> int:
    """Thread cap for scans, from ``ROLLBALL_THREADS`` (default: CPU count)."""
    env = os.environ.get("ROLLBALL_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    return os.cpu_count() or 1


def classify(S: float, eps: float = S_EPS) -> str:
    if S > eps:
        return "leafwise-stable"
    if S < -eps:
        return "leafwise-unstable"
    return "marginal"


@dataclass(frozen=True)
class EquilibriumRecord:
    family: str
    r: float
    v_theta: float
    omega_n: float
    Omega: float
    S_value: float
    classification: str
    j: tuple

    def to_dict(self) -> dict:
        d = asdict(self)
        d["j"] = list(self.j)
        return d


def _om(params, Omega):
    return params.Omega if Omega is None else float(Omega)


def re3_omega_n(params: Params, profile: Profile, r, v_theta, Omega=None):
    """Normal spin of the RE3 equilibrium at ``(r, v_theta)``.

    Raises
    ------
    FamilyDomainError
        If ``f'(r) = 0`` or ``v_theta = 0``.
    """
    pv = eval_profile(profile, r)
    if np.any(np.abs(pv.f_p) <= CRIT_TOL) or np.any(np.asarray(v_theta) == 0):
        raise FamilyDomainError("RE3 needs f'(r) != 0 and v_theta != 0")
    mu, ga, Om = params.mu, params.gamma, _om(params, Omega)
    return r * v_theta / (mu * pv.f_p) - ga / (mu * v_theta) - Om * (r / pv.f_p + 1.0 / pv.F)


def delta_coefficients(params: Params, profile: Profile, r):
    """``(D00, D02, D04, D11)`` such that ``S3 = D00 + D02 v**2 + D04 v**4 + Omega D11 v``."""
    pv = eval_profile(profile, r)
    f1, f2, F2 = pv.f_p, pv.f_pp, pv.F**2
    mu, ga = params.mu, params.gamma
    d00 = ga * ga * f1 * f2
    d02 = 2.0 * ga * F2 * f1
    d04 = (1.0 + mu * f1 * f1) * r * F2 + (1.0 - mu) * r * r * f1 * f2
    d11 = ga * mu * (r * f2 - F2 * f1)
    return d00, d02, d04, d11


def S1(params: Params, profile: Profile, r, Omega=None):
    Om = _om(params, Omega)
    return params.mu**2 * Om * Om + params.gamma * eval_profile(profile, r).f_pp


def S2(params: Params, profile: Profile, r, omega_n, Omega=None):
    Om = _om(params, Omega)
    mu = params.mu
    return mu**2 * Om * Om + (params.gamma + mu**2 * omega_n * Om + mu**2 * Om * Om) * eval_profile(profile, r).f_pp


def S3(params: Params, profile: Profile, r, v_theta, Omega=None):
    d00, d02, d04, d11 = delta_coefficients(params, profile, r)
    v = np.asarray(v_theta, dtype=float)
    return d00 + d02 * v * v + d04 * v**4 + _om(params, Omega) * d11 * v


def stability_S(params: Params, profile: Profile, family: str, r, v_theta=None, omega_n=None, Omega=None):
    """Stability function of the given family at the given location."""
    Om = _om(params, Omega)
    crit = abs(float(eval_profile(profile, r).f_p)) < CRIT_TOL
    if family == "RE1":
        if not crit:
            raise FamilyDomainError("RE1 requires f'(r) = 0")
        return S1(params, profile, r, Om)
    if family == "RE2":
        if not crit or Om == 0:
            raise FamilyDomainError("RE2 requires f'(r) = 0 and Omega != 0")
        return S2(params, profile, r, omega_n, Om)
    if family == "RE3":
        if crit or not v_theta:
            raise FamilyDomainError("RE3 requires f'(r) != 0 and v_theta != 0")
        return S3(params, profile, r, v_theta, Om)
    raise FamilyDomainError(f"unknown family {family!r}")


def omega_tilde(params: Params, profile: Profile, r, v_theta):
    """Rotation rate at which ``S3(r, v_theta, .)`` vanishes."""
    d00, d02, d04, d11 = delta_coefficients(params, profile, r)
    if np.any(d11 == 0):
        raise DegenerateBranchError("Delta_11 vanishes at this radius")
    v = np.asarray(v_theta, dtype=float)
    return -(d00 / d11) / v - (d02 / d11) * v - (d04 / d11) * v**3


def omega_tilde_m(params: Params, profile: Profile, r: float, return_argmin: bool = False):
    """``inf |Omega~(r, v)|`` over ``v != 0``, by golden-section search on each sign branch."""
    best = (np.inf, np.nan)
    for sgn in (-1.0, 1.0):
        t = np.linspace(np.log(1e-6), np.log(1e4), 400)
        vals = np.abs(omega_tilde(params, profile, r, sgn * np.exp(t)))
        i = int(np.clip(np.argmin(vals), 1, len(t) - 2))
        res = minimize_scalar(
            lambda s: float(np.abs(omega_tilde(params, profile, r, sgn * np.exp(s)))),
            bracket=(t[i - 1], t[i], t[i + 1]),
            method="golden",
            tol=1e-12,
        )
        if res.fun < best[0]:
            best = (float(res.fun), sgn * float(np.exp(res.x)))
    return best if return_argmin else best[0]


class BranchSignature(NamedTuple):
    neg: str
    pos: str
    zeros_neg: tuple
    zeros_pos: tuple


def _scan_limits(coeffs, Om):
    d00, d02, d04, d11 = (abs(c) for c in coeffs)
    d11 *= abs(Om)
    v_cap = 10.0
    while d04 * v_cap**4 < 100.0 * (d00 + d02 * v_cap**2 + d11 * v_cap) and v_cap < 1e12:
        v_cap *= 2.0
    v_min = 1e-4
    if d00 > 0:
        while d00 < 100.0 * (d02 * v_min**2 + d11 * v_min + d04 * v_min**4) and v_min > 1e-14:
            v_min *= 0.5
    return v_min, v_cap


def branch_signature(params: Params, profile: Profile, r: float, Omega=None, n_grid: int = 4000) -> BranchSignature:
    """Stable/unstable pattern of RE3 equilibria along each ``v_theta``-sign branch.

    Letters are listed left to right along the ``v_theta`` axis.

    Raises
    ------
    FamilyDomainError
        If ``r`` is a critical radius.
    NumericalInconsistencyError
        If more than two zeros of ``S3`` are found on one branch.
    """
    if abs(float(eval_profile(profile, r).f_p)) < CRIT_TOL:
        raise FamilyDomainError("branch signature needs f'(r) != 0")
    Om = _om(params, Omega)
    coeffs = delta_coefficients(params, profile, r)
    v_min, v_cap = _scan_limits([float(c) for c in coeffs], Om)
    mag = np.geomspace(v_min, v_cap, n_grid)
    out = []
    for sgn in (-1.0, 1.0):
        v = sgn * mag if sgn > 0 else -mag[::-1]
        s = S3(params, profile, r, v, Om)
        zeros = []
        letters = ["S" if s[0] > 0 else "U"]
        for i in range(len(v) - 1):
            if s[i] == 0.0 or s[i] * s[i + 1] < 0:
                zeros.append(brentq(lambda x: float(S3(params, profile, r, x, Om)), v[i], v[i + 1], xtol=1e-14))
                letters.append("S" if s[i + 1] > 0 else "U")
        if len(zeros) > 2:
            raise NumericalInconsistencyError(f"{len(zeros)} zeros of S3 on one branch at r={r}, Omega={Om}")
        out.append(("".join(letters), tuple(zeros)))
    return BranchSignature(out[0][0], out[1][0], out[0][1], out[1][1])


def re2_threshold(params: Params, profile: Profile, r: float, Omega=None):
    """Normal spin at which the RE2 stability function changes sign (``None`` if ``f'' = 0``)."""
    Om = _om(params, Omega)
    f2 = float(eval_profile(profile, r).f_pp)
    if f2 == 0.0:
        return None
    return -((1.0 + f2) / f2) * Om - params.gamma / (params.mu**2 * Om)


def _record(params, profile, family, r, vt, wn, S, routh=None):
    s = np.array([r, 0.0, vt, omega_z_from_n(params, profile, r, vt, wn)])
    j = routh_J(params, profile, to_p5(s, profile, params), routh)
    return EquilibriumRecord(family, float(r), float(vt), float(wn), params.Omega, float(S), classify(float(S)), tuple(map(float, j)))


def re1_re2_records(params: Params, profile: Profile, r_critical: float, omega_n_list, routh=None):
    """RE1 (and, when ``Omega != 0``, RE2) records at a critical radius."""
    if abs(float(eval_profile(profile, r_critical).f_p)) >= CRIT_TOL:
        raise FamilyDomainError(f"r = {r_critical} is not a critical radius")
    out = []
    Om = params.Omega
    for wn in omega_n_list:
        out.append(_record(params, profile, "RE1", r_critical, params.mu * Om, wn, S1(params, profile, r_critical), routh))
        if Om != 0:
            out.append(_record(params, profile, "RE2", r_critical, 0.0, wn, S2(params, profile, r_critical, wn), routh))
    return out


def re3_record(params: Params, profile: Profile, r: float, v_theta: float, routh=None) -> EquilibriumRecord:
    wn = re3_omega_n(params, profile, r, v_theta)
    return _record(params, profile, "RE3", r, v_theta, float(wn), S3(params, profile, r, v_theta), routh)


def equilibrium_state(params: Params, profile: Profile, rec: EquilibriumRecord):
    """Polar state ``(r, 0, v_theta, omega_z)`` of a record."""
    return np.array([rec.r, 0.0, rec.v_theta, omega_z_from_n(params, profile, rec.r, rec.v_theta, rec.omega_n)])


def equilibria_on_leaf(leaf: LeafSystem, r_range=(1e-3, 20.0), n_grid: int = 600, marginal: float = 1e-9):
    """Critical points of ``V_j`` in ``r_range``, classified by the sign of ``V_j''``.

    The ``S_value`` of each record is the family's stability function; the
    classification comes from ``V_j''`` (they agree in sign by theory).
    """
    lo, hi = map(float, r_range)
    if not 0 < lo < hi:
        raise FamilyDomainError("r_range must satisfy 0 < r_min < r_max")
    params, profile = leaf.params, leaf.profile
    r = np.geomspace(lo, hi, n_grid)
    dv = leaf.dV(r)
    out = []
    for i in range(n_grid - 1):
        if dv[i] == 0.0 or dv[i] * dv[i + 1] < 0:
            r0 = brentq(lambda x: float(leaf.dV(x)), r[i], r[i + 1], xtol=1e-12, rtol=1e-15) if dv[i] != 0.0 else r[i]
            state = leaf.polar_state(np.array(r0))
            vt = float(state[2])
            wn = float(to_p5(state, profile, params)[4])
            d2 = float(leaf.d2V(r0))
            if abs(float(eval_profile(profile, r0).f_p)) < CRIT_TOL:
                fam = "RE2" if abs(vt) < 1e-12 and params.Omega != 0 else "RE1"
                S = S1(params, profile, r0) if fam == "RE1" else S2(params, profile, r0, wn)
            else:
                fam, S = "RE3", float(S3(params, profile, r0, vt))
            cls = "marginal" if abs(d2) < marginal else ("leafwise-stable" if d2 > 0 else "leafwise-unstable")
            out.append(EquilibriumRecord(fam, float(r0), vt, wn, params.Omega, float(S), cls, leaf.j))
    return out


def scan_leaf_counts(params: Params, profile: Profile, j1s, j2s, r_range=(1e-3, 20.0), n_grid: int = 600):
    """Equilibria on every leaf of a ``j1 x j2`` grid, scanned in parallel.

    Returns a dict mapping ``(j1, j2)`` to the list of records.
    """
    j1s = list(map(float, j1s))
    j2s = list(map(float, j2s))
    rmax = float(r_range[1])
    routh = routh_for(profile, params.mu, 0.5 * rmax * rmax * 1.01)
    pairs = [(a, b) for a in j1s for b in j2s]

    def work(jj):
        return jj, equilibria_on_leaf(LeafSystem(params, profile, jj, routh), r_range, n_grid)

    with ThreadPoolExecutor(max_workers=max_workers()) as ex:
        return dict(ex.map(work, pairs))
