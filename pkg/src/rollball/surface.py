"""Surface-of-revolution profiles and system constants.

A profile is described by the function ``psi`` of the half-squared radius
``p1 = r**2 / 2``; the radial profile is ``f(r) = psi(r**2 / 2)``.  Working
with ``psi`` keeps every profile smooth and even at the vertex without any
extension machinery.  Lengths are in units of the ball radius.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigurationError, DomainError, InvalidProfileError

__all__ = [
    "Params",
    "Profile",
    "PlaneProfile",
    "ParabolicProfile",
    "PolynomialProfile",
    "TabulatedProfile",
    "ProfileValues",
    "PsiValues",
    "AdmissibilityReport",
    "eval_profile",
    "eval_psi",
    "check_admissibility",
    "profile_from_spec",
    "critical_radii",
]


@dataclass(frozen=True)
class Params:
    """Physical constants of the ball/surface system.

    Attributes:
        k: moment of inertia ratio, I / (m a**2), with 0 < k < 1.
        g_hat: gravity rescaled by the ball radius, g / a [1/time**2].
        Omega: angular velocity of the surface about its axis [1/time].
    """

    k: float = 0.4
    g_hat: float = 1.4
    Omega: float = 0.0

    def __post_init__(self):
        for name in ("k", "g_hat", "Omega"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigurationError(f"{name} must be finite, got {getattr(self, name)!r}")
        if not 0.0 < self.k < 1.0:
            raise ConfigurationError(f"k must lie in (0, 1), got {self.k!r}")
        if self.g_hat < 0.0:
            raise ConfigurationError(f"g_hat must be >= 0, got {self.g_hat!r}")

    @property
    def mu(self) -> float:
        return self.k / (1.0 + self.k)

    @property
    def gamma(self) -> float:
        return self.g_hat / (1.0 + self.k)

    @classmethod
    def from_mu_gamma(cls, mu: float, gamma: float, Omega: float = 0.0) -> "Params":
        """Build from the reduced constants mu = k/(1+k) and gamma = g_hat/(1+k)."""
        if not 0.0 < mu < 0.5:
            raise ConfigurationError(f"mu must lie in (0, 1/2), got {mu!r}")
        k = mu / (1.0 - mu)
        return cls(k=k, g_hat=gamma * (1.0 + k), Omega=Omega)

    def with_omega(self, Omega: float) -> "Params":
        return Params(self.k, self.g_hat, Omega)


class ProfileValues(NamedTuple):
    f: np.ndarray
    f_p: np.ndarray
    f_pp: np.ndarray
    F: np.ndarray


class PsiValues(NamedTuple):
    psi: np.ndarray
    psi_p: np.ndarray
    psi_pp: np.ndarray
    curlyF: np.ndarray


class Profile:
    """Base class: subclasses implement :meth:`psi_derivs`."""

    kind = "abstract"

    def psi_derivs(self, x):
        """Return ``(psi, psi', psi'', psi''', psi'''')`` evaluated at ``x >= 0``."""
        raise NotImplementedError

    def to_spec(self) -> dict:
        raise NotImplementedError

    @property
    def fingerprint(self) -> str:
        return json.dumps(self.to_spec(), sort_keys=True)

    # convenience wrappers
    def f(self, r):
        return eval_profile(self, r).f

    def f_p(self, r):
        return eval_profile(self, r).f_p

    def f_pp(self, r):
        return eval_profile(self, r).f_pp

    def F(self, r):
        return eval_profile(self, r).F


def _check_coeffs(coeffs):
    out = tuple(float(c) for c in coeffs)
    if not out:
        raise InvalidProfileError("polynomial profile needs at least one coefficient")
    if not all(math.isfinite(c) for c in out):
        raise InvalidProfileError(f"non-finite polynomial coefficient in {coeffs!r}")
    return out


def _set_derivative_table(prof):
    # highest-degree-first coefficient arrays of psi and its first four derivatives
    p = np.polynomial.Polynomial(prof.coeffs)
    table = []
    for _ in range(5):
        table.append(p.coef[::-1].copy() if p.coef.size else np.zeros(1))
        p = p.deriv()
    object.__setattr__(prof, "_table", tuple(table))


@dataclass(frozen=True)
class PolynomialProfile(Profile):
    """``psi(x) = sum_i coeffs[i] * x**i``."""

    coeffs: tuple = (0.0,)
    kind = "poly_p1"

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _check_coeffs(self.coeffs))
        _set_derivative_table(self)

    def psi_derivs(self, x):
        x = np.asarray(x, dtype=float)
        return tuple(np.polyval(c, x) + 0.0 * x for c in self._table)

    def to_spec(self):
        return {"kind": "poly_p1", "coeffs": list(self.coeffs)}


@dataclass(frozen=True)
class PlaneProfile(PolynomialProfile):
    """The horizontal plane, ``psi == 0``."""

    coeffs: tuple = field(default=(0.0,), init=False)
    kind = "plane"

    def to_spec(self):
        return {"kind": "plane"}


@dataclass(frozen=True)
class ParabolicProfile(PolynomialProfile):
    """Upward paraboloid ``f(r) = b r**2 / 2``, i.e. ``psi(x) = b x``."""

    b: float = 1.0
    coeffs: tuple = field(default=(0.0,), init=False)
    kind = "parabolic"

    def __post_init__(self):
        if not (math.isfinite(self.b) and self.b > 0):
            raise InvalidProfileError(f"parabolic coefficient b must be finite and positive, got {self.b!r}")
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "coeffs", (0.0, float(self.b)))
        _set_derivative_table(self)

    def to_spec(self):
        return {"kind": "parabolic", "b": self.b}


@dataclass(frozen=True)
class TabulatedProfile(Profile):
    """``psi`` given on a grid of ``p1`` values and interpolated by a cubic spline.

    The spline is clamped to zero slope nowhere; it uses not-a-knot end
    conditions.  Derivatives are those of the interpolant.  Evaluation beyond
    the last tabulated ``p1`` raises :class:`DomainError`.
    """

    p1: tuple = ()
    psi: tuple = ()
    _spline: object = field(default=None, init=False, repr=False, compare=False, hash=False)
    kind = "table"

    def __post_init__(self):
        p1 = tuple(float(v) for v in self.p1)
        psi = tuple(float(v) for v in self.psi)
        if len(p1) != len(psi) or len(p1) < 4:
            raise InvalidProfileError("table needs matching p1/psi arrays with at least 4 points")
        if not all(math.isfinite(v) for v in p1 + psi):
            raise InvalidProfileError("non-finite entry in profile table")
        if p1[0] != 0.0 or any(b <= a for a, b in zip(p1, p1[1:])):
            raise InvalidProfileError("table p1 grid must start at 0 and increase strictly")
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "psi", psi)
        object.__setattr__(self, "_spline", CubicSpline(np.array(p1), np.array(psi)))

    def psi_derivs(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x > self.p1[-1] * (1 + 1e-12)):
            raise DomainError(f"p1 beyond tabulated range [0, {self.p1[-1]}]")
        sp = self._spline
        return tuple(sp(x, nu) + 0.0 * x for nu in range(4)) + (np.zeros_like(x),)

    def to_spec(self):
        return {"kind": "table", "table": {"p1": list(self.p1), "psi": list(self.psi)}}


def eval_psi(profile: Profile, p1) -> PsiValues:
    """Evaluate ``psi, psi', psi''`` and ``curlyF = (1 + 2 p1 psi'**2)**-1/2`` at ``p1``."""
    p1 = np.asarray(p1, dtype=float)
    if np.any(p1 < 0.0):
        raise DomainError("p1 must be non-negative")
    psi, d1, d2 = profile.psi_derivs(p1)[:3]
    curlyF = 1.0 / np.sqrt(1.0 + 2.0 * p1 * d1 * d1)
    return PsiValues(psi, d1, d2, curlyF)


def eval_profile(profile: Profile, r) -> ProfileValues:
    """Radial profile ``f`` and its first two derivatives, plus ``F = sqrt(1 + f'**2)``."""
    r = np.asarray(r, dtype=float)
    if np.any(r < 0.0):
        raise DomainError("radius must be non-negative")
    x = 0.5 * r * r
    psi, d1, d2 = profile.psi_derivs(x)[:3]
    f_p = r * d1
    f_pp = d1 + r * r * d2
    return ProfileValues(psi, f_p, f_pp, np.sqrt(1.0 + f_p * f_p))


class AdmissibilityReport(NamedTuple):
    ok: bool
    violating_radii: np.ndarray


def check_admissibility(profile: Profile, r_max: float = 10.0, n_grid: int = 1001) -> AdmissibilityReport:
    """Check ``f'' > -(1 + f'**2)**(3/2)`` on a grid of radii.

    For tabulated profiles the grid is the tabulation grid itself.
    """
    if isinstance(profile, TabulatedProfile):
        r = np.sqrt(2.0 * np.asarray(profile.p1))
    else:
        if not r_max > 0 or n_grid < 2:
            raise DomainError("need r_max > 0 and n_grid >= 2")
        r = np.linspace(0.0, r_max, int(n_grid))
    v = eval_profile(profile, r)
    bad = v.f_pp <= -(1.0 + v.f_p**2) ** 1.5
    return AdmissibilityReport(not bool(bad.any()), r[bad])


def critical_radii(profile: Profile, r_grid) -> list[float]:
    """Positive radii where ``f'`` changes sign on ``r_grid`` (refined by Brent's method)."""
    from scipy.optimize import brentq

    r_grid = np.asarray(r_grid, dtype=float)
    r_grid = r_grid[r_grid > 0]
    fp = eval_profile(profile, r_grid).f_p
    out = []
    for i in range(len(r_grid) - 1):
        a, b = fp[i], fp[i + 1]
        if a == 0.0:
            out.append(float(r_grid[i]))
        elif a * b < 0.0:
            out.append(brentq(lambda r: float(profile.f_p(r)), r_grid[i], r_grid[i + 1], xtol=1e-15, rtol=1e-15))
    return out


def profile_from_spec(spec) -> Profile:
    """Build a profile from its JSON description.

    Accepted forms::

        {"kind": "plane"}
        {"kind": "parabolic", "b": 1.0}
        {"kind": "poly_p1", "coeffs": [c0, c1, ...]}
        {"kind": "table", "table": {"p1": [...], "psi": [...]}}
    """
    if isinstance(spec, str):
        try:
            spec = json.loads(spec)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"profile: malformed JSON: {exc.msg}") from None
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ConfigurationError("profile.kind: missing")
    kind = spec["kind"]
    try:
        if kind == "plane":
            return PlaneProfile()
        if kind == "parabolic":
            return ParabolicProfile(b=float(spec.get("b", 1.0)))
        if kind == "poly_p1":
            return PolynomialProfile(coeffs=tuple(spec["coeffs"]))
        if kind == "table":
            tab = spec["table"]
            return TabulatedProfile(p1=tuple(tab["p1"]), psi=tuple(tab["psi"]))
    except KeyError as exc:
        raise ConfigurationError(f"profile.{exc.args[0]}: missing for kind {kind!r}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidProfileError):
            raise
        raise ConfigurationError(f"profile: {exc}") from None
    raise ConfigurationError(f"profile.kind: unknown kind {kind!r}")
