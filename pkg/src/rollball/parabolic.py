"""Closed forms for the paraboloid ``f(r) = b r**2 / 2``.

With ``t = log F(r)`` the homogeneous auxiliary system reduces to
``y'' = mu y``, which gives

    U(r) = [[c, (sqrt(mu)/b) s], [(b/sqrt(mu)) s, c]],
    c = cosh(sqrt(mu) log F),  s = sinh(sqrt(mu) log F),

and a particular solution ``u(r)`` in elementary functions.  These serve as an
oracle for the numerical Routh solution.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DomainError, PreconditionError
from .equilibria import delta_coefficients
from .leaf import LeafSystem
from .routh import RouthSolution
from .surface import ParabolicProfile, Params

__all__ = [
    "ParabolicClosedForm",
    "closed_form_Uu",
    "oracle_compare",
    "omega_tilde_parabolic",
    "omega_n_parabolic",
    "delta11_parabolic",
    "parabolic_asymptotics_check",
]


@dataclass(frozen=True)
class ParabolicClosedForm:
    b: float
    mu: float

    def __post_init__(self):
        if not self.b > 0:
            raise ConfigurationError(f"b must be positive, got {self.b!r}")
        if not 0 < self.mu < 0.5:
            raise ConfigurationError(f"mu must lie in (0, 1/2), got {self.mu!r}")

    def _logF(self, r):
        r = np.asarray(r, dtype=float)
        return 0.5 * np.log1p((self.b * r) ** 2)

    def c(self, r):
        return np.cosh(np.sqrt(self.mu) * self._logF(r))

    def s(self, r):
        return np.sinh(np.sqrt(self.mu) * self._logF(r))

    def U(self, r):
        c, s, sm, b = self.c(r), self.s(r), np.sqrt(self.mu), self.b
        return np.stack([np.stack([c, sm / b * s], -1), np.stack([b / sm * s, c], -1)], -2)

    def u(self, r):
        r = np.asarray(r, dtype=float)
        b, mu = self.b, self.mu
        sm = np.sqrt(mu)
        c, s = self.c(r), self.s(r)
        F = np.sqrt(1.0 + (b * r) ** 2)
        u1 = ((4 - 3 * mu) * (c - 1) + (4 * b - (b + 1) * mu) * sm * s + 2 * mu * b * b * r * r) / ((4 - mu) * b * b)
        u2 = ((4 * b - (b + 1) * mu) * c + (4 - 3 * mu) / sm * s - b * (4 - mu) / F + mu * F * F) / ((4 - mu) * b)
        # near the vertex the formula cancels to O(p1); use the leading term there
        p1 = 0.5 * r * r
        near = F - 1.0 < 1e-8
        u1 = np.where(near, mu * (1 + b) * p1, u1)
        u2 = np.where(near, (1 + b) * b * p1, u2)
        return np.stack([u1, u2], -1)


def closed_form_Uu(cf: ParabolicClosedForm, r):
    """``(U(r), u(r))`` from the closed form."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0):
        raise DomainError("r must be non-negative")
    return cf.U(r), cf.u(r)


def oracle_compare(params: Params, routh: RouthSolution, cf: ParabolicClosedForm, r_grid) -> float:
    """Maximum deviation between the numerical ``(U, u)`` and the closed form on ``r_grid``.

    Raises
    ------
    ConfigurationError
        If ``routh`` was built for another ``b`` or ``mu``.
    """
    prof = routh.profile
    if not isinstance(prof, ParabolicProfile) or prof.b != cf.b:
        raise ConfigurationError("Routh solution is not for this paraboloid")
    if abs(routh.mu - cf.mu) > 1e-15 or abs(params.mu - cf.mu) > 1e-15:
        raise ConfigurationError("mu of Routh solution, params and closed form differ")
    r = np.asarray(r_grid, dtype=float)
    x = 0.5 * r * r
    if x.max() > routh.x_max:
        routh = routh.extended(float(x.max()))
    Un, un = routh.Uu(x)
    Uc, uc = closed_form_Uu(cf, r)
    return float(max(np.abs(Un - Uc).max(), np.abs(un - uc).max()))


def delta11_parabolic(params: Params, b: float, r):
    return -params.gamma * params.mu * b**3 * np.asarray(r, dtype=float) ** 3


def omega_tilde_parabolic(params: Params, b: float, r, v):
    """Explicit ``Omega~`` for the paraboloid."""
    ga, mu = params.gamma, params.mu
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    br2 = (b * r) ** 2
    return ga / (b * mu * r * r * v) + (2.0 / mu) * (1.0 / br2 + 1.0) * v + (1.0 / (b * ga * mu)) * (1.0 / br2 + 2.0 + mu * br2) * v**3


def omega_n_parabolic(params: Params, b: float, r, v, Omega):
    """Explicit RE3 normal spin for the paraboloid."""
    F = np.sqrt(1.0 + (b * np.asarray(r, dtype=float)) ** 2)
    return -(params.gamma / params.mu) / v + v / (params.mu * b) - Omega * (1.0 / b + 1.0 / F)


def parabolic_asymptotics_check(leaf: LeafSystem) -> dict:
    """Numerical check of the limits of ``V_j`` at the vertex and at infinity.

    Near the vertex ``V_j(r) * 2 r**2 / j1**2`` must approach 1 monotonically
    (within 5 % at the sampled radii).  For ``Omega > 0`` the ratio
    ``V_j(r) / r**4`` at ``r = 100`` and ``r = 200`` must be positive and agree
    within 10 %; for ``Omega = 0`` only growth at large ``r`` is required.

    Raises
    ------
    PreconditionError
        If ``j1 = 0`` (the leaf reaches the vertex).
    """
    if not isinstance(leaf.profile, ParabolicProfile):
        raise PreconditionError("asymptotics check is for the paraboloid only")
    j1 = leaf.j[0]
    if j1 == 0:
        raise PreconditionError("j1 = 0: the leaf reaches the vertex")
    rs = np.array([1e-2, 1e-3, 1e-4])
    ratios = leaf.V(rs) * 2 * rs**2 / j1**2
    dev = np.abs(ratios - 1.0)
    vertex_ok = bool(np.all(dev < 0.05) and np.all(np.diff(dev) <= 1e-15))
    V1 = float(leaf.V(1.0))
    out = {"vertex_ratios": ratios.tolist(), "vertex_ok": vertex_ok}
    if leaf.params.Omega > 0:
        q = leaf.V(np.array([100.0, 200.0])) / np.array([100.0, 200.0]) ** 4
        out["infinity_ratios"] = q.tolist()
        out["infinity_ok"] = bool(np.all(q > 0) and abs(q[1] / q[0] - 1.0) < 0.1)
    else:
        big = leaf.V(np.array([1e2, 1e3]))
        out["infinity_values"] = big.tolist()
        out["infinity_ok"] = bool(np.all(big > V1) and big[1] > big[0])
    out["ok"] = out["vertex_ok"] and out["infinity_ok"]
    return out


def _delta_check(params: Params, b: float, r) -> float:
    """Largest relative gap between the general and the explicit ``Delta_11``."""
    d11 = delta_coefficients(params, ParabolicProfile(b), r)[3]
    ref = delta11_parabolic(params, b, r)
    return float(np.max(np.abs(d11 - ref) / np.abs(ref)))
