"""Nonholonomic equations of motion in quasi-velocities with explicit reaction forces.

A system is described at configuration ``q`` by the kinetic matrix ``A(q)``,
the quasi-velocity map ``B(q)`` (``v = B(q) qdot``), affine constraints
``S(q) v + s(q) = 0`` and the force/curvature vector ``ell(q, v)`` collecting
every term of the Lagrange equations not proportional to ``vdot``:

    A vdot + ell = R,   R = S^T (S A^-1 S^T)^-1 (S A^-1 ell - sigma),

with ``sigma_a = (dS_ai/dq_j v_i + ds_a/dq_j) (B^-1)_jh v_h``.  The module
also contains the rolling-ball instance of this engine, the full field on
the unreduced chart ``(r, theta, attitude, v_r, v_theta, omega_z)`` and
reconstruction of full motions from reduced ones.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .errors import ChartDomainError, NearSingularConstraintError
from .reduced import Trajectory, vector_field_polar
from .surface import Params, Profile, eval_profile

__all__ = [
    "QuasiVelocitySystem",
    "reaction_force",
    "constrained_field",
    "constraint_rate",
    "ball_system",
    "ball_velocity",
    "reaction_closed_form",
    "spatial_omega",
    "quat_multiply",
    "quat_to_matrix",
    "full_vector_field",
    "FullTrajectory",
    "reconstruct",
    "PeriodEstimate",
    "estimate_period_and_rotation",
]


def _fd_config(fun, q, step=1e-6):
    """Central differences of ``fun(q)`` in each configuration coordinate; last axis indexes ``q``."""
    q = np.asarray(q, dtype=float)
    cols = []
    for m in range(q.size):
        h = step * (1.0 + abs(q[m]))
        e = np.zeros_like(q)
        e[m] = h
        cols.append((np.asarray(fun(q + e)) - np.asarray(fun(q - e))) / (2.0 * h))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class QuasiVelocitySystem:
    """Data of a nonholonomic system in quasi-velocities.

    ``dB``, ``dS`` and ``ds`` return derivatives with the configuration index
    last; when omitted they are approximated by central differences with step
    ``1e-6 (1 + |q|)``.  ``B = None`` means the identity map.
    """

    n: int
    A: Callable
    S: Callable
    s: Callable
    ell: Callable
    B: Callable | None = None
    dB: Callable | None = None
    dS: Callable | None = None
    ds: Callable | None = None

    def B_of(self, q):
        return np.eye(self.n) if self.B is None else np.asarray(self.B(q), dtype=float)

    def dS_of(self, q):
        return np.asarray(self.dS(q)) if self.dS is not None else _fd_config(self.S, q)

    def ds_of(self, q):
        return np.asarray(self.ds(q)) if self.ds is not None else _fd_config(self.s, q)

    def dB_of(self, q):
        if self.B is None:
            return np.zeros((self.n, self.n, self.n))
        return np.asarray(self.dB(q)) if self.dB is not None else _fd_config(self.B, q)

    @classmethod
    def from_lagrangian(cls, n, L, S, s, B=None, dB=None, dS=None, ds=None, step=1e-4):
        """Build ``A`` and ``ell`` from a Lagrangian ``L(q, v)`` written in quasi-velocities.

        Uses central differences for every derivative of ``L`` and evaluates

            ell_i = d2L/dv_i dq_m (B^-1 v)_m + gamma_ijh p_j v_h - (B^-T dL/dq)_i,
            gamma_ijh = (B^-1)_ki (dB_jk/dq_m - dB_jm/dq_k) (B^-1)_mh,

        with ``p = dL/dv``.
        """
        eye = np.eye(n)

        def grad_v(q, v):
            return np.array([(L(q, v + step * e) - L(q, v - step * e)) / (2 * step) for e in eye])

        def A(q):
            v0 = np.zeros(n)
            return np.array([[(L(q, v0 + step * (a + b)) - L(q, v0 + step * (a - b)) - L(q, v0 - step * (a - b)) + L(q, v0 - step * (a + b))) / (4 * step * step) for b in eye] for a in eye])

        sys_tmp = cls(n, A, S, s, lambda q, v: np.zeros(n), B, dB, dS, ds)

        def ell(q, v):
            Bi = np.linalg.inv(sys_tmp.B_of(q))
            qdot = Bi @ v
            hq = [step * (1.0 + abs(x)) for x in q]
            dpdq = np.stack([(grad_v(q + hq[m] * eye[m], v) - grad_v(q - hq[m] * eye[m], v)) / (2 * hq[m]) for m in range(n)], axis=-1)
            dLdq = np.array([(L(q + hq[m] * eye[m], v) - L(q - hq[m] * eye[m], v)) / (2 * hq[m]) for m in range(n)])
            dB = sys_tmp.dB_of(q)
            curl = dB - np.swapaxes(dB, 1, 2)  # [j, k, m] -> dB_jk/dq_m - dB_jm/dq_k
            gam = np.einsum("ki,jkm,mh->ijh", Bi, curl, Bi)
            p = grad_v(q, v)
            return dpdq @ qdot + np.einsum("ijh,j,h->i", gam, p, v) - Bi.T @ dLdq

        return cls(n, A, S, s, ell, B, dB, dS, ds)


def _sigma(sys: QuasiVelocitySystem, q, v):
    Bi = np.linalg.inv(sys.B_of(q))
    qdot = Bi @ v
    return np.einsum("aij,i,j->a", sys.dS_of(q), v, qdot) + sys.ds_of(q) @ qdot


def reaction_force(sys: QuasiVelocitySystem, q, v, cond_max: float = 1e12):
    """Reaction force ``R`` at ``(q, v)``.

    Warns when the constraint residual exceeds ``1e-8``.

    Raises
    ------
    NearSingularConstraintError
        If the condition number of ``S A^-1 S^T`` exceeds ``cond_max``.
    """
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    S = np.atleast_2d(sys.S(q))
    if S.shape[0] == 0:
        return np.zeros(sys.n)
    res = S @ v + sys.s(q)
    if np.max(np.abs(res)) > 1e-8:
        warnings.warn(f"constraint residual {np.max(np.abs(res)):.3g} exceeds 1e-8", RuntimeWarning, stacklevel=2)
    A = np.asarray(sys.A(q), dtype=float)
    AiST = np.linalg.solve(A, S.T)
    M = S @ AiST
    if np.linalg.cond(M) > cond_max:
        raise NearSingularConstraintError("S A^-1 S^T is near singular")
    ell = np.asarray(sys.ell(q, v), dtype=float)
    return S.T @ np.linalg.solve(M, AiST.T @ ell - _sigma(sys, q, v))


def constrained_field(sys: QuasiVelocitySystem, q, v):
    """``(qdot, vdot)`` of the constrained system."""
    q = np.asarray(q, dtype=float)
    v = np.asarray(v, dtype=float)
    R = reaction_force(sys, q, v)
    qdot = np.linalg.solve(sys.B_of(q), v)
    vdot = np.linalg.solve(np.asarray(sys.A(q), dtype=float), R - np.asarray(sys.ell(q, v)))
    return qdot, vdot


def constraint_rate(sys: QuasiVelocitySystem, q, v):
    """``d/dt (S v + s)`` along the constrained field."""
    qdot, vdot = constrained_field(sys, q, v)
    return np.einsum("aij,i,j->a", sys.dS_of(q), v, qdot) + sys.ds_of(q) @ qdot + np.atleast_2d(sys.S(q)) @ vdot


def ball_system(params: Params, profile: Profile) -> QuasiVelocitySystem:
    """The rolling ball with ``q = (r, theta, a1, a2, a3)`` and ``v = (v_r, v_theta, omega)``.

    The attitude block of ``B`` is taken as the identity at the evaluation
    point; this is legitimate because ``A``, ``S``, ``s`` and ``ell`` do not
    depend on the attitude coordinates and the inertia is isotropic.
    """
    k, gh, Om = params.k, params.g_hat, params.Omega

    def pv(q):
        return eval_profile(profile, q[0])

    def A(q):
        v = pv(q)
        return np.diag([float(v.F) ** 2, q[0] ** 2, k, k, k])

    def S(q):
        r, th = q[0], q[1]
        v = pv(q)
        F, f1 = float(v.F), float(v.f_p)
        c, s = np.cos(th), np.sin(th)
        return np.array([[F * c, -r * F * s, 0.0, -1.0, -f1 * s], [F * s, r * F * c, 1.0, 0.0, f1 * c]])

    def s(q):
        r, th = q[0], q[1]
        v = pv(q)
        a = r * float(v.F) + float(v.f_p)
        return Om * np.array([a * np.sin(th), -a * np.cos(th)])

    def dS(q):
        r, th = q[0], q[1]
        v = pv(q)
        F, f1, f2 = float(v.F), float(v.f_p), float(v.f_pp)
        dF = f1 * f2 / F
        c, sn = np.cos(th), np.sin(th)
        out = np.zeros((2, 5, 5))
        out[:, :, 0] = [[dF * c, -(F + r * dF) * sn, 0, 0, -f2 * sn], [dF * sn, (F + r * dF) * c, 0, 0, f2 * c]]
        out[:, :, 1] = [[-F * sn, -r * F * c, 0, 0, -f1 * c], [F * c, -r * F * sn, 0, 0, -f1 * sn]]
        return out

    def ds(q):
        r, th = q[0], q[1]
        v = pv(q)
        F, f1, f2 = float(v.F), float(v.f_p), float(v.f_pp)
        a = r * F + f1
        da = F + r * f1 * f2 / F + f2
        out = np.zeros((2, 5))
        out[:, 0] = Om * da * np.array([np.sin(th), -np.cos(th)])
        out[:, 1] = Om * a * np.array([np.cos(th), np.sin(th)])
        return out

    def ell(q, v):
        r = q[0]
        p = pv(q)
        f1, f2 = float(p.f_p), float(p.f_pp)
        vr, vt = v[0], v[1]
        return np.array([f1 * f2 * vr * vr - r * vt * vt + gh * f1, 2.0 * r * vr * vt, 0.0, 0.0, 0.0])

    return QuasiVelocitySystem(5, A, S, s, ell, None, None, dS, ds)


def spatial_omega(params: Params, profile: Profile, r, theta, v_r, v_theta, omega_z):
    """Spatial angular velocity with the horizontal components fixed by rolling."""
    pv = eval_profile(profile, r)
    F, f1 = pv.F, pv.f_p
    Om = params.Omega
    c, s = np.cos(theta), np.sin(theta)
    wx = (Om - omega_z) * f1 * c + (Om * r * c - v_r * s - r * v_theta * c) * F
    wy = (Om - omega_z) * f1 * s + (Om * r * s + v_r * c - r * v_theta * s) * F
    return np.stack([wx, wy, np.broadcast_to(omega_z, np.shape(wx))], axis=-1)


def ball_velocity(params: Params, profile: Profile, r, theta, v_r, v_theta, omega_z):
    """Quasi-velocity vector ``(v_r, v_theta, omega_x, omega_y, omega_z)`` satisfying the constraint."""
    w = spatial_omega(params, profile, r, theta, v_r, v_theta, omega_z)
    return np.array([v_r, v_theta, w[0], w[1], w[2]])


def reaction_closed_form(params: Params, profile: Profile, r, v_r, v_theta, omega_z):
    """Components 1, 2 and 5 of the reaction force in explicit form."""
    pv = eval_profile(profile, r)
    f1, f2, F = float(pv.f_p), float(pv.f_pp), float(pv.F)
    mu, gh, Om = params.mu, params.g_hat, params.Omega
    curv = 1.0 + f2 / F + r * f1 * f2 / F**2
    R1 = mu * (gh * f1 + (r * f1 * v_theta**2 + F * omega_z * v_theta) * f1) - Om * mu * (r * F + f1) * F * v_theta
    R2 = -mu * (r * f1 * v_r * v_theta + F * omega_z * v_r) * r * f2 / F**2 + Om * mu * curv * r * v_r
    R5 = -mu * (r * f1 * v_r * v_theta / F + v_r * omega_z) * f1 * f2 / F**2 + Om * mu * curv * f1 * v_r / F
    return np.array([R1, R2, R5])


def quat_multiply(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_to_matrix(q):
    w, x, y, z = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
        [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
        [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
    ])


def full_vector_field(params: Params, profile: Profile, fs, use_engine: bool = False):
    """Derivative of the full state ``(r, theta, qw, qx, qy, qz, v_r, v_theta, omega_z)``.

    The attitude obeys ``Rdot = skew(omega) R`` with the spatial angular
    velocity, i.e. ``qdot = (0, omega) * q / 2``.  With ``use_engine`` the
    velocity rates come from the generic engine instead of the explicit
    polar equations.
    """
    fs = np.asarray(fs, dtype=float)
    r, th = fs[0], fs[1]
    quat = fs[2:6]
    vr, vt, wz = fs[6:9]
    if not r > 0:
        raise ChartDomainError("full chart requires r > 0")
    w = spatial_omega(params, profile, r, th, vr, vt, wz)
    qdot = 0.5 * quat_multiply(np.concatenate([[0.0], w]), quat)
    if use_engine:
        sys = ball_system(params, profile)
        _, vdot = constrained_field(sys, np.array([r, th, 0.0, 0.0, 0.0]), np.array([vr, vt, *w]))
        rates = vdot[[0, 1, 4]]
    else:
        rates = vector_field_polar(params, profile, np.array([r, vr, vt, wz]))[1:]
    return np.concatenate([[vr, vt], qdot, rates])


class FullTrajectory(NamedTuple):
    t: np.ndarray
    r: np.ndarray
    theta: np.ndarray
    quat: np.ndarray
    v_r: np.ndarray
    v_theta: np.ndarray
    omega_z: np.ndarray
    complete: bool

    @property
    def xy(self):
        return np.column_stack([self.r * np.cos(self.theta), self.r * np.sin(self.theta)])


def reconstruct(params: Params, profile: Profile, traj: Trajectory, theta0: float = 0.0, quat0=(1.0, 0.0, 0.0, 0.0),
                rtol: float = 1e-11, atol: float = 1e-13, chunk: int = 20) -> FullTrajectory:
    """Lift a reduced trajectory to the full chart.

    ``theta`` and the attitude quaternion are integrated along the dense
    reduced solution in chunks of ``chunk`` accepted steps, renormalizing the
    quaternion between chunks.  A trajectory that stopped at the vertex is
    reconstructed up to its last time (``complete`` is then False).
    """
    t_nodes = np.asarray(traj.t)
    ok = np.isfinite(traj.polar[:, 0]) & (traj.polar[:, 0] > 0)
    last = len(t_nodes) if ok.all() else int(np.argmin(ok))
    t_nodes = t_nodes[: max(last, 1)]

    def rhs(t, y):
        r, vr, vt, wz = traj.polar_at(t)
        w = spatial_omega(params, profile, r, y[0], vr, vt, wz)
        return np.concatenate([[vt], 0.5 * quat_multiply(np.concatenate([[0.0], w]), y[1:])])

    y = np.concatenate([[theta0], np.asarray(quat0, dtype=float) / np.linalg.norm(quat0)])
    ts, ys = [t_nodes[0]], [y]
    for i0 in range(0, len(t_nodes) - 1, chunk):
        seg = t_nodes[i0 : min(i0 + chunk, len(t_nodes) - 1) + 1]
        sol = solve_ivp(rhs, (seg[0], seg[-1]), y, method="RK45", rtol=rtol, atol=atol, t_eval=seg)
        Y = sol.y.T.copy()
        Y[:, 1:] /= np.linalg.norm(Y[:, 1:], axis=1, keepdims=True)
        y = Y[-1]
        ts.extend(seg[1:])
        ys.extend(Y[1:])
    ys = np.array(ys)
    pol = traj.polar[: len(ts)]
    return FullTrajectory(np.array(ts), pol[:, 0], ys[:, 0], ys[:, 1:], pol[:, 1], pol[:, 2], pol[:, 3], last == len(traj.t))


class PeriodEstimate(NamedTuple):
    status: str
    T_radial: float
    delta_theta: tuple
    minima: tuple
    return_distance: float


def estimate_period_and_rotation(traj: Trajectory, return_tol: float = 1e-6, n_rotations: int = 5) -> PeriodEstimate:
    """Radial period and rotation angle per period from the dense reduced solution.

    Minima of ``r`` are located as upward zero crossings of ``v_r`` refined by
    Brent's method.  The return distance compares the state one period after
    the first minimum with the state at that minimum (relative to the state
    norm).
    """
    t = traj.t
    pol = traj.polar
    vr = pol[:, 1]
    amp = np.nanmax(pol[:, 0]) - np.nanmin(pol[:, 0])
    if amp <= 1e-12 * max(1.0, float(np.nanmax(pol[:, 0]))) and np.nanmax(np.abs(vr)) < 1e-10:
        return PeriodEstimate("equilibrium", 0.0, (), (), 0.0)
    mins = []
    for i in range(len(t) - 1):
        if vr[i] < 0 <= vr[i + 1]:
            mins.append(brentq(lambda s: float(traj.polar_at(s)[1]), t[i], t[i + 1], xtol=1e-14, rtol=1e-15))
    if len(mins) < 2:
        return PeriodEstimate("non-returning", np.nan, (), tuple(mins), np.nan)
    T = mins[1] - mins[0]
    a = traj.polar_at(mins[0])
    b = traj.polar_at(mins[1])
    dist = float(np.linalg.norm(b - a) / max(1.0, np.linalg.norm(a)))
    dth = []
    for i in range(min(n_rotations, len(mins) - 1)):
        sol = solve_ivp(lambda s, y: [traj.polar_at(s)[2]], (mins[i], mins[i + 1]), [0.0], rtol=1e-12, atol=1e-14)
        dth.append(float(sol.y[0, -1]))
    status = "periodic-reduced" if dist < return_tol else "non-returning"
    return PeriodEstimate(status, float(T), tuple(dth), tuple(mins), dist)
