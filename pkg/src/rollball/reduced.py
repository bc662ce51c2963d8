"""Reduced dynamics on the four-dimensional reduced space.

Two parametrizations are used.

* p-coordinates ``p = (p0, p1, p2, p3, p4)`` with ``p0 = |xdot|**2 / 2``,
  ``p1 = |x|**2 / 2``, ``p2 = x . xdot``, ``p3 = x1 xdot2 - x2 xdot1`` and
  ``p4 = omega . n``.  Reduced states satisfy ``4 p0 p1 = p2**2 + p3**2``.
* polar quasi-velocities ``s = (r, v_r, v_theta, omega_z)``, a chart of the
  regular part (``r > 0``).  The normal spin ``omega_n = p4`` is a derived
  quantity.

All field functions broadcast over leading axes.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.integrate import RK45, OdeSolution
from scipy.optimize import brentq

from .errors import ChartDomainError, DomainError, EvaluationError, IntegrationError
from .model import EXACT, TermModel
from .surface import Params, Profile, eval_profile, eval_psi

__all__ = [
    "PolarState",
    "P5State",
    "field_terms",
    "vector_field_p5",
    "vector_field_circ",
    "vector_field_polar",
    "to_p5",
    "to_polar",
    "omega_n",
    "omega_z_from_n",
    "jacobian_to_p5",
    "pushforward_polar",
    "reflect",
    "reflect_polar",
    "in_m4",
    "k_function",
    "Trajectory",
    "integrate_reduced",
]


class PolarState(NamedTuple):
    r: float
    v_r: float
    v_theta: float
    omega_z: float


class P5State(NamedTuple):
    p0: float
    p1: float
    p2: float
    p3: float
    p4: float


def _split(a, n, what):
    a = np.asarray(a, dtype=float)
    if a.shape[-1:] != (n,):
        raise DomainError(f"{what} must have trailing dimension {n}, got shape {a.shape}")
    return np.moveaxis(a, -1, 0)


def field_terms(params: Params, profile: Profile, p):
    """Additive terms of each component of the reduced field, keyed ``X0``..``X4``."""
    p0, p1, p2, p3, p4 = _split(p, 5, "p")
    if np.any(p1 < 0):
        raise DomainError("p1 must be non-negative")
    _, d1, d2, cF = eval_psi(profile, p1)
    mu, ga, Om = params.mu, params.gamma, params.Omega
    F2 = cF * cF
    return {
        "X0": [
            mu * p2 * p3 * p4 * d2 * F2,
            -p2**3 * d1 * d2 * F2,
            -ga * p2 * d1 * F2,
            -2.0 * p0 * p2 * d1 * d1 * F2,
            Om * mu * p2 * p3 * d1 * d1 * F2,
            Om * mu * p2 * p3 * cF * d2 * F2,
        ],
        "X1": [p2],
        "X2": [
            2.0 * p0 * F2,
            -mu * p3 * p4 * d1 * F2,
            -2.0 * ga * p1 * d1 * F2,
            -2.0 * p1 * p2 * p2 * d1 * d2 * F2,
            -Om * mu * p3 * F2,
            -Om * mu * p3 * d1 * cF * F2,
        ],
        "X3": [
            mu * p2 * p4 * d1 * F2,
            2.0 * mu * p1 * p2 * p4 * d2 * F2,
            Om * mu * p2,
            Om * mu * p2 * d1 * cF * F2,
            2.0 * Om * mu * p1 * p2 * d2 * cF * F2,
        ],
        "X4": [
            p2 * p3 * d1**3 * F2,
            -p2 * p3 * d2 * F2,
            Om * p2 * d1 * F2,
            2.0 * Om * p1 * p2 * d2 * F2,
            Om * p2 * d1 * d1 * cF * F2,
            2.0 * Om * p1 * p2 * d1 * d2 * cF * F2,
        ],
    }


def vector_field_p5(params: Params, profile: Profile, p, model: TermModel = EXACT):
    """Reduced vector field ``(X0, ..., X4)`` at ``p``.

    Raises
    ------
    EvaluationError
        If a component is not finite; ``component`` names it.
    """
    terms = field_terms(params, profile, p)
    out = []
    for key in ("X0", "X1", "X2", "X3", "X4"):
        val = model.combine(key, terms[key])
        val = np.asarray(val, dtype=float) + 0.0 * terms["X1"][0]
        if not np.all(np.isfinite(val)):
            raise EvaluationError(f"non-finite value in component {key}", component=key)
        out.append(val)
    return np.stack(out, axis=-1)


def vector_field_circ(params: Params, profile: Profile, q, model: TermModel = EXACT):
    """Field on the regular stratum in ``q = (p1, p2, p3, p4)``, with ``p0`` taken on M4."""
    q = np.asarray(q, dtype=float)
    p0 = (q[..., 1] ** 2 + q[..., 2] ** 2) / (4.0 * q[..., 0])
    return vector_field_p5(params, profile, np.concatenate([p0[..., None], q], axis=-1), model)[..., 1:]


def vector_field_polar(params: Params, profile: Profile, s):
    """Time derivative of ``(r, v_r, v_theta, omega_z)``.

    Raises
    ------
    ChartDomainError
        If ``r <= 0``.
    """
    r, vr, vt, wz = _split(s, 4, "polar state")
    if np.any(~(r > 0)):
        raise ChartDomainError("polar chart requires r > 0")
    pv = eval_profile(profile, r)
    f1, f2, F = pv.f_p, pv.f_pp, pv.F
    mu, ga, Om, k = params.mu, params.gamma, params.Omega, params.k
    F2 = F * F
    curv = 1.0 + f2 / F + r * f1 * f2 / F2
    vr_dot = (
        -ga * f1 / F2
        - f1 * f2 * vr * vr / F2
        + r * (1.0 + mu * f1 * f1) * vt * vt / F2
        + mu * f1 * vt * wz / F
        - Om * mu * (r + f1 / F) * vt
    )
    vt_dot = -(vr / r) * ((2.0 + mu * r * f1 * f2 / F2) * vt + mu * f2 * wz / F - Om * mu * curv)
    wz_dot = -vr / (1.0 + k) * (f1 / F) * (r * f1 * f2 * vt / F2 + f2 * wz / F - Om * curv)
    out = np.stack([vr + 0.0 * r, vr_dot, vt_dot, wz_dot], axis=-1)
    if not np.all(np.isfinite(out)):
        raise EvaluationError("non-finite value in polar field", component="polar")
    return out


def omega_n(params: Params, profile: Profile, s):
    """Normal spin ``omega . n`` (equal to ``p4``) of polar states."""
    r, _, vt, wz = _split(s, 4, "polar state")
    pv = eval_profile(profile, r)
    f1, F = pv.f_p, pv.F
    return -(F * wz + r * f1 * vt) + params.Omega * (r + f1 / F) * f1


def omega_z_from_n(params: Params, profile: Profile, r, v_theta, w_n):
    """Invert :func:`omega_n` for ``omega_z``."""
    pv = eval_profile(profile, r)
    f1, F = pv.f_p, pv.F
    return (-w_n - r * f1 * v_theta + params.Omega * (r + f1 / F) * f1) / F


def to_p5(s, profile: Profile, params: Params):
    """Polar state(s) to p-coordinates; ``p0`` is set so that ``p`` lies on M4."""
    r, vr, vt, _ = _split(s, 4, "polar state")
    if np.any(~(r > 0)):
        raise ChartDomainError("polar chart requires r > 0")
    p0 = 0.5 * (vr * vr + r * r * vt * vt)
    return np.stack([p0, 0.5 * r * r, r * vr, r * r * vt, omega_n(params, profile, s)], axis=-1)


def to_polar(p, profile: Profile, params: Params):
    """p-coordinates to polar state(s); requires ``p1 > 0``."""
    _, p1, p2, p3, p4 = _split(p, 5, "p")
    if np.any(~(p1 > 0)):
        raise ChartDomainError("polar chart requires p1 > 0")
    r = np.sqrt(2.0 * p1)
    _, d1, _, cF = eval_psi(profile, p1)
    wz = cF * (-p4 - d1 * p3 + params.Omega * (1.0 + d1 * cF) * 2.0 * p1 * d1)
    return np.stack([r, p2 / r, p3 / (r * r), wz], axis=-1)


def jacobian_to_p5(params: Params, profile: Profile, s):
    """Jacobian of :func:`to_p5` with respect to ``(r, v_r, v_theta, omega_z)``; shape ``(..., 5, 4)``."""
    r, vr, vt, wz = _split(s, 4, "polar state")
    pv = eval_profile(profile, r)
    f1, f2, F = pv.f_p, pv.f_pp, pv.F
    dF = f1 * f2 / F
    Om = params.Omega
    z = np.zeros_like(r)
    rows = [
        [r * vt * vt, vr, r * r * vt, z],
        [r, z, z, z],
        [vr, r, z, z],
        [2.0 * r * vt, z, r * r, z],
        [
            -dF * wz - (f1 + r * f2) * vt + Om * (f1 + r * f2 + 2.0 * f1 * f2 / F - f1 * f1 * dF / (F * F)),
            z,
            -r * f1,
            -F,
        ],
    ]
    return np.stack([np.stack([np.broadcast_to(e, r.shape) for e in row], axis=-1) for row in rows], axis=-2)


def pushforward_polar(params: Params, profile: Profile, s, sdot):
    """Map a polar tangent vector to p-coordinates."""
    Jm = jacobian_to_p5(params, profile, s)
    return (Jm @ np.asarray(sdot, dtype=float)[..., None])[..., 0]


def reflect(p):
    """Reflection ``(p0, p1, p2, p3, p4) -> (p0, p1, p2, -p3, -p4)``; conjugates ``Omega`` to ``-Omega``."""
    p = np.array(p, dtype=float)
    p[..., 3:5] *= -1.0
    return p


def reflect_polar(s):
    """Reflection in polar form: ``v_theta`` and ``omega_z`` change sign."""
    s = np.array(s, dtype=float)
    s[..., 2:4] *= -1.0
    return s


def k_function(p):
    """``K = (p2**2 + p3**2)/2 - 2 p0 p1``; zero exactly on M4."""
    p = np.asarray(p, dtype=float)
    return 0.5 * (p[..., 2] ** 2 + p[..., 3] ** 2) - 2.0 * p[..., 0] * p[..., 1]


def in_m4(p, tol: float = 1e-9) -> bool:
    """Membership in M4 up to a relative tolerance."""
    p = np.asarray(p, dtype=float)
    lhs = 4.0 * p[..., 0] * p[..., 1]
    rhs = p[..., 2] ** 2 + p[..., 3] ** 2
    ok = (np.abs(lhs - rhs) <= tol * np.maximum(1.0, np.abs(lhs) + np.abs(rhs))) & (p[..., 0] >= 0) & (p[..., 1] >= 0)
    return bool(np.all(ok))


@dataclass
class _Segment:
    chart: str
    t0: float
    t1: float
    sol: OdeSolution


@dataclass
class Trajectory:
    """Integrated reduced trajectory.

    Attributes
    ----------
    t : (n,) accepted step times
    polar : (n, 4) polar states (NaN where ``r = 0``)
    p : (n, 5) p-coordinates
    E, J, K_drift : first integrals and the M4 residual at each step
    status : ``"ok"``, ``"approached-vertex"``, ``"overflow"`` or ``"non-finite"``
    log : chart switches and halting events
    """

    params: Params
    profile: Profile
    t: np.ndarray
    polar: np.ndarray
    p: np.ndarray
    E: np.ndarray
    J: np.ndarray
    K_drift: np.ndarray
    status: str
    segments: list = field(default_factory=list, repr=False)
    log: list = field(default_factory=list)

    @property
    def t_end(self) -> float:
        return float(self.t[-1])

    def _state(self, t):
        t = float(t)
        for seg in self.segments:
            if seg.t0 - 1e-12 <= t <= seg.t1 + 1e-12:
                return seg.chart, seg.sol(min(max(t, seg.t0), seg.t1))
        raise DomainError(f"t = {t} outside trajectory range [{self.t[0]}, {self.t[-1]}]")

    def polar_at(self, t):
        """Dense polar state at time(s) ``t``."""
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = []
        for ti in ts:
            chart, y = self._state(ti)
            out.append(y if chart == "polar" else to_polar(y, self.profile, self.params))
        out = np.array(out)
        return out[0] if np.ndim(t) == 0 else out

    def p_at(self, t):
        ts = np.atleast_1d(np.asarray(t, dtype=float))
        out = []
        for ti in ts:
            chart, y = self._state(ti)
            out.append(to_p5(y, self.profile, self.params) if chart == "polar" else y)
        out = np.array(out)
        return out[0] if np.ndim(t) == 0 else out

    def write_csv(self, path):
        """Write one row per accepted step with 17 significant digits."""
        header = ["t", "r", "v_r", "v_theta", "omega_z", "p0", "p1", "p2", "p3", "p4", "E", "J1", "J2", "K_drift"]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for i in range(len(self.t)):
                row = [self.t[i], *self.polar[i], *self.p[i], self.E[i], *self.J[i], self.K_drift[i]]
                w.writerow(["%.17g" % v for v in row])


def _field(params, profile, chart, model):
    if chart == "polar":
        return lambda t, y: vector_field_polar(params, profile, y)
    return lambda t, y: vector_field_p5(params, profile, y, model)


def _radius(chart, y):
    return y[0] if chart == "polar" else math.sqrt(max(2.0 * y[1], 0.0))


def integrate_reduced(
    params: Params,
    profile: Profile,
    s0,
    t_span,
    rtol: float = 1e-10,
    atol: float = 1e-12,
    r_floor: float = 1e-6,
    overflow_cap: float = 1e8,
    max_step: float = np.inf,
    model: TermModel = EXACT,
    with_integrals: bool = True,
    chart: str = "auto",
) -> Trajectory:
    """Integrate the reduced equations with an adaptive Dormand-Prince 5(4) pair.

    ``s0`` is either a polar state (length 4) or p-coordinates (length 5).
    Polar integration is used while ``r > r_floor``; states starting below
    ``r_floor`` are integrated in p-coordinates until ``r`` exceeds
    ``2 r_floor``.  Integration stops with status ``"approached-vertex"`` when
    ``r`` reaches ``r_floor`` from above, and with ``"overflow"`` when a
    component exceeds ``overflow_cap`` in magnitude.  ``chart="p5"`` forces
    p-coordinates throughout (no vertex event, no switching).

    Raises
    ------
    IntegrationError
        If the step size underflows; carries the last accepted state.
    """
    if not (rtol > 0 and atol > 0):
        raise DomainError("tolerances must be positive")
    t0, t1 = map(float, t_span)
    if chart not in ("auto", "p5"):
        raise DomainError(f"unknown chart {chart!r}")
    forced = chart == "p5"
    s0 = np.asarray(s0, dtype=float)
    if s0.shape == (4,):
        if not s0[0] > (0.0 if forced else r_floor):
            raise ChartDomainError("polar initial state must have r > r_floor")
        chart, y = ("p5", to_p5(s0, profile, params)) if forced else ("polar", s0.copy())
    elif s0.shape == (5,):
        if not in_m4(s0, 1e-9):
            raise DomainError("initial p-state is not on M4")
        if s0[1] > 0.5 * r_floor**2 and not forced:
            chart, y = "polar", to_polar(s0, profile, params)
        else:
            chart, y = "p5", s0.copy()
    else:
        raise DomainError("initial state must have length 4 (polar) or 5 (p-coordinates)")

    log = [f"t={t0!r}: start in {chart} chart"]
    ts, ys, charts, segments = [t0], [y.copy()], [chart], []
    status = "ok"
    t = t0
    while t < t1 and status == "ok":
        fun = _field(params, profile, chart, model)
        solver = RK45(fun, t, y, t1, rtol=rtol, atol=atol, max_step=max_step)
        seg_t, seg_interp = [t], []
        switched = False
        retries = 0
        while solver.status == "running":
            try:
                msg = solver.step()
            except ChartDomainError:
                # a trial stage left the chart; retry from the last accepted state with a shorter step
                retries += 1
                h = 0.25 * (solver.h_abs if np.isfinite(solver.h_abs) else 1e-3)
                if retries > 60 or h < 1e-14 * max(1.0, abs(solver.t)):
                    raise IntegrationError(f"step size underflow near the chart boundary at t = {solver.t}", t_last=ts[-1], state_last=ys[-1]) from None
                solver = RK45(fun, solver.t, solver.y, t1, rtol=rtol, atol=atol, max_step=max_step, first_step=h)
                continue
            except EvaluationError as exc:
                status = "non-finite"
                log.append(f"t={solver.t!r}: {exc}")
                break
            retries = 0
            if solver.status == "failed":
                raise IntegrationError(f"step size underflow at t = {solver.t}: {msg}", t_last=ts[-1], state_last=ys[-1])
            dense = solver.dense_output()
            tn, yn = solver.t, solver.y.copy()
            if not np.all(np.isfinite(yn)):
                status = "non-finite"
                log.append(f"t={tn!r}: non-finite state")
                break
            stop_t = None
            if chart == "polar" and yn[0] <= r_floor:
                stop_t = brentq(lambda s: dense(s)[0] - r_floor, solver.t_old, tn, xtol=1e-14)
                status = "approached-vertex"
            elif np.max(np.abs(yn)) >= overflow_cap:
                g = lambda s: np.max(np.abs(dense(s))) - overflow_cap
                stop_t = brentq(g, solver.t_old, tn, xtol=1e-14) if g(solver.t_old) < 0 else solver.t_old
                status = "overflow"
            elif chart == "p5" and not forced and _radius(chart, yn) >= 2.0 * r_floor:
                stop_t = brentq(lambda s: 2.0 * dense(s)[1] - 4.0 * r_floor**2, solver.t_old, tn, xtol=1e-14)
                switched = True
            if stop_t is not None:
                tn, yn = stop_t, dense(stop_t)
            seg_t.append(tn)
            seg_interp.append(dense)
            ts.append(tn)
            ys.append(yn.copy())
            charts.append(chart)
            if stop_t is not None:
                log.append(f"t={tn!r}: {status if not switched else 'switch p5 -> polar'}")
                break
        if seg_interp:
            segments.append(_Segment(chart, seg_t[0], seg_t[-1], OdeSolution(seg_t, seg_interp)))
        t, y = ts[-1], ys[-1]
        if switched:
            y = to_polar(y, profile, params)
            chart = "polar"
            ys[-1] = y.copy()
            charts[-1] = chart
            continue
        if solver.status == "finished" or status != "ok":
            break

    t_arr = np.array(ts)
    p = np.empty((len(ts), 5))
    pol = np.full((len(ts), 4), np.nan)
    for i, (c, yi) in enumerate(zip(charts, ys)):
        if c == "polar":
            pol[i] = yi
            p[i] = to_p5(yi, profile, params)
        else:
            p[i] = yi
            if yi[1] > 0:
                pol[i] = to_polar(yi, profile, params)
    if with_integrals:
        from .routh import moving_energy, routh_J

        E = moving_energy(params, profile, p, model)
        J = routh_J(params, profile, p)
    else:
        E = np.full(len(ts), np.nan)
        J = np.full((len(ts), 2), np.nan)
    return Trajectory(params, profile, t_arr, pol, p, E, J, k_function(p), status, segments, log)
