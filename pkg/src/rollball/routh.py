"""Moving energy, Routh integrals and the auxiliary linear system behind them.

The Routh integrals are built from the fundamental solution ``U`` and the
particular solution ``u`` of

    U' = G(x) U,  U(0) = I,        u' = G(x) u + g(x),  u(0) = 0,

with ``x = p1`` and ``G = [[0, G3], [G4, 0]]``, ``g = (g3, g4)``.  The map

    J(p) = U(p1)^{-1} [(p3, p4) - Omega u(p1)]

is a pair of first integrals.  ``G`` and ``g`` do not depend on ``Omega``, so one
solution serves every rotation rate.  Leaf labels ``j`` are canonical only
relative to the base point ``x = 0``.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from .errors import ConsistencyError, DomainError, IntegrationError
from .model import EXACT, TermModel
from .surface import Params, Profile, eval_psi

__all__ = [
    "routh_coeffs",
    "RouthSolution",
    "build_routh_solution",
    "routh_for",
    "clear_routh_cache",
    "routh_J",
    "tilde_p34",
    "energy_terms",
    "moving_energy",
    "energy_circ",
    "grad_energy_circ",
    "grad_J_circ",
    "p0_on_m4",
    "conservation_report",
]


def routh_coeffs(profile: Profile, mu: float, x, deriv: bool = False):
    """Coefficients ``G3, G4, g3, g4`` at ``x = p1``.

    With ``deriv=True`` also return their first derivatives in ``x`` as a
    second 4-tuple.
    """
    x = np.asarray(x, dtype=float)
    _, d1, d2, d3, _ = profile.psi_derivs(x)
    F2 = 1.0 / (1.0 + 2.0 * x * d1 * d1)
    F1 = np.sqrt(F2)
    a = d1 + 2.0 * x * d2
    G3 = mu * a * F2
    g3 = mu * (1.0 + a * F1 * F2)
    G4 = (d1**3 - d2) * F2
    g4 = (1.0 + F1 * d1) * a * F2
    if not deriv:
        return G3, G4, g3, g4
    da = 3.0 * d2 + 2.0 * x * d3
    dF1 = -F1 * F2 * (d1 * d1 + 2.0 * x * d1 * d2)
    dF2 = 2.0 * F1 * dF1
    dG3 = mu * (da * F2 + a * dF2)
    dg3 = mu * (da * F1 * F2 + 3.0 * a * F2 * dF1)
    dG4 = (3.0 * d1 * d1 * d2 - d3) * F2 + (d1**3 - d2) * dF2
    dg4 = (dF1 * d1 + F1 * d2) * a * F2 + (1.0 + F1 * d1) * (da * F2 + a * dF2)
    return (G3, G4, g3, g4), (dG3, dG4, dg3, dg4)


def _rhs(profile, mu):
    def f(x, y):
        G3, G4, g3, g4 = routh_coeffs(profile, mu, x)
        U11, U12, U21, U22, u1, u2 = y
        return np.array([G3 * U21, G3 * U22, G4 * U11, G4 * U12, G3 * u2 + g3, G4 * u1 + g4])

    return f


def _second_derivative(profile, mu, x, y):
    """Analytic ``y''`` of the stacked system, used for quintic Hermite nodes."""
    (G3, G4, g3, g4), (dG3, dG4, dg3, dg4) = routh_coeffs(profile, mu, x, deriv=True)
    U11, U12, U21, U22, u1, u2 = y
    yp = np.array([G3 * U21, G3 * U22, G4 * U11, G4 * U12, G3 * u2 + g3, G4 * u1 + g4])
    dU21, dU22, dU11, dU12 = yp[2], yp[3], yp[0], yp[1]
    return yp, np.array([
        dG3 * U21 + G3 * dU21,
        dG3 * U22 + G3 * dU22,
        dG4 * U11 + G4 * dU11,
        dG4 * U12 + G4 * dU12,
        dG3 * u2 + G3 * yp[5] + dg3,
        dG4 * u1 + G4 * yp[4] + dg4,
    ])


@dataclass(frozen=True, eq=False)
class RouthSolution:
    """Dense solution ``(U, u)`` on ``[0, x_max]``.

    Node values come from an adaptive Dormand-Prince 5(4) integration; between
    nodes the solution is a quintic Hermite interpolant matching value, first
    and second derivative taken from the differential equation itself.
    """

    profile: Profile
    mu: float
    x_nodes: np.ndarray
    y_nodes: np.ndarray
    tol: float
    _interp: BPoly

    @property
    def x_max(self) -> float:
        return float(self.x_nodes[-1])

    @property
    def fingerprint(self):
        return (self.profile.fingerprint, self.mu)

    def _eval(self, x, nu=0):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0.0):
            raise DomainError("p1 must be non-negative")
        if np.any(x > self.x_max * (1.0 + 1e-14)):
            raise DomainError(f"p1 beyond cached range [0, {self.x_max}]")
        return self._interp(x, nu)

    def U(self, x):
        y = self._eval(x)
        return y[..., :4].reshape(y.shape[:-1] + (2, 2))

    def u(self, x):
        return self._eval(x)[..., 4:]

    def Uu(self, x):
        y = self._eval(x)
        return y[..., :4].reshape(y.shape[:-1] + (2, 2)), y[..., 4:]

    def derivative(self, x):
        """Derivative of the interpolant (for residual checks)."""
        y = self._eval(x, 1)
        return y[..., :4].reshape(y.shape[:-1] + (2, 2)), y[..., 4:]

    def residual(self, x) -> float:
        """Max of ``|U' - G U|`` and ``|u' - G u - g|`` at the points ``x``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        U, u = self.Uu(x)
        dU, du = self.derivative(x)
        G3, G4, g3, g4 = routh_coeffs(self.profile, self.mu, x)
        G = np.zeros(x.shape + (2, 2))
        G[..., 0, 1] = G3
        G[..., 1, 0] = G4
        rU = dU - G @ U
        ru = du - (G @ u[..., None])[..., 0] - np.stack([g3, g4], axis=-1)
        return float(max(np.abs(rU).max(), np.abs(ru).max()))

    def extended(self, x_max: float) -> "RouthSolution":
        """A new solution covering ``[0, max(x_max, 2 * self.x_max)]``."""
        if x_max <= self.x_max:
            return self
        target = max(float(x_max), 2.0 * self.x_max)
        return _integrate(self.profile, self.mu, self.x_nodes, self.y_nodes, target, self.tol)


def _integrate(profile, mu, x_prev, y_prev, x_max, tol):
    sol = solve_ivp(
        _rhs(profile, mu),
        (float(x_prev[-1]), float(x_max)),
        y_prev[-1],
        method="RK45",
        rtol=tol,
        atol=tol * 1e-2,
    )
    if sol.status != 0 or not np.all(np.isfinite(sol.y)):
        x_reached = float(sol.t[-1]) if sol.t.size else float(x_prev[-1])
        raise IntegrationError(f"auxiliary Routh system failed at x = {x_reached}: {sol.message}", x_reached, sol.y[:, -1])
    xs = np.concatenate([x_prev, sol.t[1:]])
    ys = np.concatenate([y_prev, sol.y.T[1:]])
    d1 = np.empty_like(ys)
    d2 = np.empty_like(ys)
    for i, (x, y) in enumerate(zip(xs, ys)):
        d1[i], d2[i] = _second_derivative(profile, mu, x, y)
    interp = BPoly.from_derivatives(xs, np.stack([ys, d1, d2], axis=1), extrapolate=False)
    return RouthSolution(profile, float(mu), xs, ys, tol, interp)


def build_routh_solution(params_or_mu, profile: Profile, x_max: float, tol: float = 1e-12) -> RouthSolution:
    """Integrate the auxiliary system on ``[0, x_max]``.

    ``params_or_mu`` is either a :class:`Params` or the value of ``mu``.
    """
    mu = params_or_mu.mu if isinstance(params_or_mu, Params) else float(params_or_mu)
    if not x_max > 0:
        raise DomainError("x_max must be positive")
    y0 = np.array([[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]])
    return _integrate(profile, mu, np.array([0.0]), y0, x_max, tol)


_cache: dict = {}
_cache_lock = threading.Lock()


def routh_for(profile: Profile, mu: float, x_needed: float = 8.0, tol: float = 1e-12) -> RouthSolution:
    """Cached solution keyed by ``(profile fingerprint, mu)``, covering ``x_needed``."""
    key = (profile.fingerprint, float(mu), tol)
    x_needed = float(max(x_needed, 1e-3))
    with _cache_lock:
        sol = _cache.get(key)
        if sol is None:
            sol = build_routh_solution(mu, profile, max(x_needed, 8.0), tol)
        elif sol.x_max < x_needed:
            sol = sol.extended(x_needed)
        _cache[key] = sol
    return sol


def clear_routh_cache():
    with _cache_lock:
        _cache.clear()


def _routh(profile, params, routh, x):
    xmax = float(np.max(x)) if np.size(x) else 0.0
    if routh is None:
        return routh_for(profile, params.mu, xmax)
    if abs(routh.mu - params.mu) > 1e-14 or routh.profile.fingerprint != profile.fingerprint:
        from .errors import ConfigurationError

        raise ConfigurationError("Routh solution was built for a different profile or mu")
    return routh.extended(xmax) if routh.x_max < xmax else routh


def routh_J(params: Params, profile: Profile, p, routh: RouthSolution | None = None):
    """Routh integrals ``(J1, J2)`` of states ``p`` (shape ``(..., 5)``)."""
    p = np.asarray(p, dtype=float)
    x = p[..., 1]
    sol = _routh(profile, params, routh, x)
    U, u = sol.Uu(x)
    rhs = p[..., 3:5] - params.Omega * u
    det = U[..., 0, 0] * U[..., 1, 1] - U[..., 0, 1] * U[..., 1, 0]
    if np.any(~(det > 0)):
        raise ConsistencyError("fundamental matrix lost positive determinant")
    j1 = (U[..., 1, 1] * rhs[..., 0] - U[..., 0, 1] * rhs[..., 1]) / det
    j2 = (-U[..., 1, 0] * rhs[..., 0] + U[..., 0, 0] * rhs[..., 1]) / det
    return np.stack([j1, j2], axis=-1)


def tilde_p34(routh: RouthSolution, Omega: float, p1, j):
    """Leaf functions ``(p~3, p~4) = U(p1) j + Omega u(p1)``."""
    p1 = np.asarray(p1, dtype=float)
    if routh.x_max < np.max(p1):
        routh = routh.extended(float(np.max(p1)))
    U, u = routh.Uu(p1)
    j = np.asarray(j, dtype=float)
    return (U @ j[..., None])[..., 0] + Omega * u


def energy_terms(params: Params, profile: Profile, p):
    p = np.asarray(p, dtype=float)
    p0, p1, p2, p3, p4 = np.moveaxis(p, -1, 0)
    psi, d1, _, cF = eval_psi(profile, p1)
    mu, ga, Om = params.mu, params.gamma, params.Omega
    return [
        ga * psi,
        p0,
        0.5 * p2 * p2 * d1 * d1,
        0.5 * mu * p4 * p4,
        Om * mu * p4 * cF,
        -Om * p3,
        Om * Om * mu * p1,
        -Om * Om * mu * p1 * cF * cF * d1 * d1,
    ]


def moving_energy(params: Params, profile: Profile, p, model: TermModel = EXACT):
    """Moving energy of states ``p`` (shape ``(..., 5)``)."""
    return model.combine("E", energy_terms(params, profile, p))


def p0_on_m4(q):
    """``p0 = (p2**2 + p3**2) / (4 p1)``, the M4 value for ``q = (p1, p2, p3, p4)``."""
    q = np.asarray(q, dtype=float)
    return (q[..., 1] ** 2 + q[..., 2] ** 2) / (4.0 * q[..., 0])


def _lift(q):
    q = np.asarray(q, dtype=float)
    if np.any(q[..., 0] <= 0):
        raise DomainError("p1 must be positive")
    return np.concatenate([p0_on_m4(q)[..., None], q], axis=-1)


def energy_circ(params: Params, profile: Profile, q, model: TermModel = EXACT):
    """Energy on the regular stratum, as a function of ``(p1, p2, p3, p4)``."""
    return moving_energy(params, profile, _lift(q), model)


def grad_energy_circ(params: Params, profile: Profile, q):
    """Hand-coded gradient of :func:`energy_circ` in ``(p1, p2, p3, p4)``."""
    q = np.asarray(q, dtype=float)
    p1, p2, p3, p4 = np.moveaxis(q, -1, 0)
    _, d1, d2, cF = eval_psi(profile, p1)
    mu, ga, Om = params.mu, params.gamma, params.Omega
    dF = -cF**3 * (d1 * d1 + 2.0 * p1 * d1 * d2)
    e1 = (
        -(p2 * p2 + p3 * p3) / (4.0 * p1 * p1)
        + p2 * p2 * d1 * d2
        + ga * d1
        + Om * mu * p4 * dF
        + Om * Om * mu * (1.0 + cF * dF)
    )
    e2 = p2 / (2.0 * p1 * cF * cF)
    e3 = p3 / (2.0 * p1) - Om
    e4 = mu * p4 + Om * mu * cF
    return np.stack([e1, e2, e3, e4], axis=-1)


def grad_J_circ(params: Params, profile: Profile, q, routh: RouthSolution | None = None):
    """Hand-coded Jacobian of ``J`` in ``(p1, p2, p3, p4)``; shape ``(..., 2, 4)``."""
    q = np.asarray(q, dtype=float)
    x = q[..., 0]
    sol = _routh(profile, params, routh, x)
    U, u = sol.Uu(x)
    Ui = np.linalg.inv(U)
    G3, G4, g3, g4 = routh_coeffs(profile, params.mu, x)
    y = q[..., 2:4]
    dy = np.stack([G3 * y[..., 1] + params.Omega * g3, G4 * y[..., 0] + params.Omega * g4], axis=-1)
    out = np.zeros(q.shape[:-1] + (2, 4))
    out[..., :, 0] = -(Ui @ dy[..., None])[..., 0]
    out[..., :, 2:4] = Ui
    return out


def conservation_report(params: Params, profile: Profile, traj, routh: RouthSolution | None = None, model: TermModel = EXACT) -> dict:
    """Maximum absolute drift of ``E``, ``J1``, ``J2`` and ``K`` along a trajectory.

    Also returns the same drifts relative to ``max(|initial value|, 1)`` under
    the key ``"relative"``.
    """
    p = np.asarray(traj.p)
    if p.shape[0] == 0:
        raise DomainError("empty trajectory")
    E = moving_energy(params, profile, p, model)
    J = routh_J(params, profile, p, routh)
    K = 0.5 * (p[:, 2] ** 2 + p[:, 3] ** 2) - 2.0 * p[:, 0] * p[:, 1]
    out = {}
    rel = {}
    for name, arr in (("E", E), ("J1", J[:, 0]), ("J2", J[:, 1]), ("K", K)):
        d = float(np.max(np.abs(arr - arr[0])))
        out[name] = d
        rel[name] = d / max(abs(float(arr[0])), 1.0)
    out["relative"] = rel
    return out
