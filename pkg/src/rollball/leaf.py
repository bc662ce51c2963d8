"""Rank-two Poisson structure, symplectic leaves and effective potentials.

On the regular stratum, with coordinates ``q = (p1, p2, p3, p4)``, the bivector

    Lambda = 2 p1 curlyF**2  d/dp2 ^ Y,
    Y = d/dp1 + (G3 p4 + Omega g3) d/dp3 + (G4 p3 + Omega g4) d/dp4,

has the energy as Hamiltonian and the Routh integrals as Casimirs.  On a leaf
``J = j`` the motion is a one-degree-of-freedom system in ``r`` with kinetic
energy ``F(r)**2 rdot**2 / 2`` and potential ``V_j(r) = W_j(r**2 / 2)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError
from .model import EXACT, TermModel
from .reduced import vector_field_circ
from .routh import RouthSolution, energy_circ, routh_coeffs, routh_for, routh_J
from .surface import Params, Profile, eval_profile, eval_psi

__all__ = [
    "Jet",
    "poisson_apply",
    "poisson_pair",
    "fd_gradient",
    "leaf_symplectic_form",
    "LeafSystem",
    "leaf_for_state",
    "effective_potential",
    "leaf_vector_field",
    "integrate_leaf",
    "LeafTrajectory",
    "hamiltonian_defect",
    "casimir_defect",
]


class Jet:
    """Truncated Taylor jet ``(value, first, second derivative)`` in one variable."""

    __slots__ = ("v", "d1", "d2")

    def __init__(self, v, d1=0.0, d2=0.0):
        self.v, self.d1, self.d2 = v, d1, d2

    @staticmethod
    def _lift(o):
        return o if isinstance(o, Jet) else Jet(o, 0.0, 0.0)

    def __add__(self, o):
        o = self._lift(o)
        return Jet(self.v + o.v, self.d1 + o.d1, self.d2 + o.d2)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.v, -self.d1, -self.d2)

    def __sub__(self, o):
        return self + (-self._lift(o))

    def __rsub__(self, o):
        return self._lift(o) - self

    def __mul__(self, o):
        o = self._lift(o)
        return Jet(self.v * o.v, self.d1 * o.v + self.v * o.d1, self.d2 * o.v + 2.0 * self.d1 * o.d1 + self.v * o.d2)

    __rmul__ = __mul__

    def __pow__(self, a):
        va = self.v**a
        return Jet(va, a * self.v ** (a - 1) * self.d1, a * (a - 1) * self.v ** (a - 2) * self.d1**2 + a * self.v ** (a - 1) * self.d2)

    def __truediv__(self, o):
        return self * self._lift(o) ** -1

    def __rtruediv__(self, o):
        return self._lift(o) * self**-1


def poisson_apply(params: Params, profile: Profile, q, alpha):
    """Contract the bivector with the covector ``alpha``: ``Lambda(alpha, .)``.

    Parameters
    ----------
    q : array_like, shape (..., 4)
        Points ``(p1, p2, p3, p4)`` with ``p1 > 0``.
    alpha : array_like, shape (..., 4)
        Covector components in the same coordinates.
    """
    q = np.asarray(q, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    p1, _, p3, p4 = np.moveaxis(q, -1, 0)
    if np.any(~(p1 > 0)):
        raise DomainError("Poisson tensor is evaluated on p1 > 0 only")
    G3, G4, g3, g4 = routh_coeffs(profile, params.mu, p1)
    cF2 = eval_psi(profile, p1).curlyF ** 2
    c = 2.0 * p1 * cF2
    Om = params.Omega
    Y = np.stack([np.ones_like(p1), np.zeros_like(p1), G3 * p4 + Om * g3, G4 * p3 + Om * g4], axis=-1)
    a2 = alpha[..., 1]
    aY = np.sum(alpha * Y, axis=-1)
    out = (c * a2)[..., None] * Y
    out[..., 1] -= c * aY
    return out


def poisson_pair(params: Params, profile: Profile, q, alpha, beta):
    """``Lambda(alpha, beta)``."""
    return np.sum(poisson_apply(params, profile, q, alpha) * np.asarray(beta), axis=-1)


def fd_gradient(fun, q, rel_step: float = 1e-6):
    """Central-difference gradient of a scalar- or vector-valued ``fun`` at the single point ``q``.

    Returns an array of shape ``out_shape + (len(q),)``.
    """
    q = np.asarray(q, dtype=float)
    cols = []
    for i in range(q.size):
        h = rel_step * (1.0 + abs(q[i]))
        e = np.zeros_like(q)
        e[i] = h
        cols.append((np.asarray(fun(q + e)) - np.asarray(fun(q - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


def leaf_symplectic_form(p1, profile: Profile):
    """Coefficient of ``dp2 ^ dp1`` of the leaf symplectic form, ``1 / (2 p1 curlyF**2)``."""
    p1 = np.asarray(p1, dtype=float)
    if np.any(~(p1 > 0)):
        raise DomainError("p1 must be positive")
    return 1.0 / (2.0 * p1 * eval_psi(profile, p1).curlyF ** 2)


@dataclass(frozen=True, eq=False)
class LeafSystem:
    """One-degree-of-freedom system on the leaf ``J = j``."""

    params: Params
    profile: Profile
    j: tuple
    routh: RouthSolution

    def __post_init__(self):
        j = tuple(float(v) for v in self.j)
        if len(j) != 2 or not all(np.isfinite(j)):
            raise DomainError("leaf label must be two finite numbers")
        object.__setattr__(self, "j", j)

    def _routh_at(self, x):
        xm = float(np.max(x))
        if xm > self.routh.x_max:
            object.__setattr__(self, "routh", routh_for(self.profile, self.params.mu, xm))
        return self.routh

    def tilde_p(self, x):
        """``(p~3, p~4)`` and their first and second ``x``-derivatives, as Jets."""
        x = np.asarray(x, dtype=float)
        sol = self._routh_at(x)
        U, u = sol.Uu(x)
        Om = self.params.Omega
        j = np.array(self.j)
        y = (U @ j) + Om * u
        (G3, G4, g3, g4), (dG3, dG4, dg3, dg4) = routh_coeffs(self.profile, self.params.mu, x, deriv=True)
        y3, y4 = y[..., 0], y[..., 1]
        d3 = G3 * y4 + Om * g3
        d4 = G4 * y3 + Om * g4
        dd3 = dG3 * y4 + G3 * d4 + Om * dg3
        dd4 = dG4 * y3 + G4 * d3 + Om * dg4
        return Jet(y3, d3, dd3), Jet(y4, d4, dd4)

    def W_jet(self, x) -> Jet:
        """``W_j`` and its first two derivatives in ``x = p1``."""
        x = np.asarray(x, dtype=float)
        if np.any(~(x > 0)):
            raise DomainError("effective potential is defined for p1 > 0")
        mu, ga, Om = self.params.mu, self.params.gamma, self.params.Omega
        psi, d1, d2, d3, _ = self.profile.psi_derivs(x)
        X = Jet(x, np.ones_like(x), np.zeros_like(x))
        Psi = Jet(psi, d1, d2)
        dPsi = Jet(d1, d2, d3)
        cF2 = (1.0 + 2.0 * X * dPsi * dPsi) ** -1
        cF = (1.0 + 2.0 * X * dPsi * dPsi) ** -0.5
        t3, t4 = self.tilde_p(x)
        return (
            ga * Psi
            + t3 * t3 / (4.0 * X)
            + 0.5 * mu * t4 * t4
            + Om * (mu * t4 * cF - t3)
            + Om * Om * mu * X * (1.0 - cF2 * dPsi * dPsi)
        )

    def W(self, x):
        return self.W_jet(x).v

    def V(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)):
            raise DomainError("effective potential is defined for r > 0")
        return self.W(0.5 * r * r)

    def V_derivs(self, r):
        """``(V, V', V'')`` at radius ``r``, from the analytic jet."""
        r = np.asarray(r, dtype=float)
        if np.any(~(r > 0)):
            raise DomainError("effective potential is defined for r > 0")
        w = self.W_jet(0.5 * r * r)
        return w.v, r * w.d1, w.d1 + r * r * w.d2

    def dV(self, r):
        return self.V_derivs(r)[1]

    def d2V(self, r):
        return self.V_derivs(r)[2]

    def d2V_fd(self, r, h=None):
        """Centered second difference of ``V`` (independent of the jet algebra)."""
        r = np.asarray(r, dtype=float)
        h = 1e-4 * (1.0 + r) if h is None else h
        return (self.V(r + h) - 2.0 * self.V(r) + self.V(r - h)) / (h * h)

    def polar_state(self, r, r_dot=0.0):
        """Reduced polar state on this leaf at ``(r, rdot)``."""
        from .reduced import omega_z_from_n

        r = np.asarray(r, dtype=float)
        t3, t4 = self.tilde_p(0.5 * r * r)
        vt = t3.v / (r * r)
        wz = omega_z_from_n(self.params, self.profile, r, vt, t4.v)
        return np.stack([r, np.broadcast_to(r_dot, r.shape), vt, wz], axis=-1)

    def energy(self, r, r_dot):
        F = eval_profile(self.profile, r).F
        return 0.5 * F * F * r_dot * r_dot + self.V(r)


def leaf_for_state(params: Params, profile: Profile, s, routh: RouthSolution | None = None) -> LeafSystem:
    """Leaf through the polar state ``s``."""
    from .reduced import to_p5

    p = to_p5(s, profile, params)
    sol = routh if routh is not None else routh_for(profile, params.mu, max(8.0, 4.0 * p[1]))
    j = routh_J(params, profile, p, sol)
    return LeafSystem(params, profile, tuple(j), sol)


def effective_potential(leaf: LeafSystem, r):
    """``V_j(r)``."""
    return leaf.V(r)


def leaf_vector_field(leaf: LeafSystem, r, r_dot):
    """``(rdot, rddot)`` of the leaf Lagrangian ``F**2 rdot**2 / 2 - V_j``."""
    r = np.asarray(r, dtype=float)
    if np.any(~(r > 0)):
        raise DomainError("leaf dynamics requires r > 0")
    pv = eval_profile(leaf.profile, r)
    dV = leaf.dV(r)
    return r_dot, -(pv.f_p * pv.f_pp * r_dot * r_dot + dV) / (pv.F**2)


class LeafTrajectory(NamedTuple):
    t: np.ndarray
    r: np.ndarray
    r_dot: np.ndarray
    energy: np.ndarray
    sol: object


def integrate_leaf(leaf: LeafSystem, r0: float, r_dot0: float, t_span, rtol: float = 1e-10, atol: float = 1e-12) -> LeafTrajectory:
    """Integrate the leaf equation with the same Dormand-Prince 5(4) pair."""

    def rhs(t, y):
        a, b = leaf_vector_field(leaf, y[0], y[1])
        return [a, float(b)]

    sol = solve_ivp(rhs, t_span, [r0, r_dot0], method="RK45", rtol=rtol, atol=atol, dense_output=True)
    if sol.status != 0:
        from .errors import IntegrationError

        raise IntegrationError(sol.message, t_last=sol.t[-1], state_last=sol.y[:, -1])
    r, rd = sol.y
    return LeafTrajectory(sol.t, r, rd, leaf.energy(r, rd), sol.sol)


def hamiltonian_defect(params: Params, profile: Profile, q, model: TermModel = EXACT, routh=None):
    """``|Lambda(dE) - X| / (1 + |X|)`` at the single point ``q``, with ``dE`` by central differences."""
    dE = fd_gradient(lambda z: energy_circ(params, profile, z, model), q)
    lhs = poisson_apply(params, profile, q, dE)
    X = vector_field_circ(params, profile, q, model)
    return float(np.linalg.norm(lhs - X) / (1.0 + np.linalg.norm(X)))


def casimir_defect(params: Params, profile: Profile, q, routh=None):
    """``max_i |Lambda(dJ_i)|`` at the single point ``q``, with ``dJ`` by central differences."""
    sol = routh if routh is not None else routh_for(profile, params.mu, 2.0 * q[0] + 1.0)

    def J(z):
        p0 = (z[1] ** 2 + z[2] ** 2) / (4.0 * z[0])
        return routh_J(params, profile, np.concatenate([[p0], z]), sol)

    dJ = fd_gradient(J, q)
    return float(max(np.linalg.norm(poisson_apply(params, profile, q, dJ[i])) for i in range(2)))
