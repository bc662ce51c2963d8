"""Run configuration: parameters, profile, tolerances and seed, loaded from JSON."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .surface import Params, Profile, ParabolicProfile, check_admissibility, profile_from_spec

__all__ = ["RunConfig", "load_config", "make_rng"]

_KNOWN = {"params", "profile", "integrator", "seed", "r_max", "output"}


@dataclass(frozen=True)
class RunConfig:
    params: Params = field(default_factory=Params)
    profile: Profile = field(default_factory=lambda: ParabolicProfile(1.0))
    rtol: float = 1e-10
    atol: float = 1e-12
    seed: int = 0
    r_max: float = 10.0
    output: dict = field(default_factory=dict)

    def with_omega(self, Omega: float) -> "RunConfig":
        return RunConfig(self.params.with_omega(Omega), self.profile, self.rtol, self.atol, self.seed, self.r_max, self.output)


def _number(d, key, where, default):
    if key not in d:
        return default
    v = d[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigurationError(f"{where}.{key}: expected a finite number, got {v!r}")
    return float(v)


def load_config(source=None) -> RunConfig:
    """Build a :class:`RunConfig` from a path, a JSON string, a dict or ``None`` (defaults).

    Every field is validated before use; errors name the offending field.
    """
    if source is None:
        data = {}
    elif isinstance(source, dict):
        data = source
    else:
        text = str(source)
        if not text.lstrip().startswith("{"):
            try:
                with open(text) as fh:
                    text = fh.read()
            except OSError as exc:
                raise ConfigurationError(f"config: cannot read {source!r}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config: malformed JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    if not isinstance(data, dict):
        raise ConfigurationError("config: top level must be a JSON object")
    unknown = set(data) - _KNOWN
    if unknown:
        raise ConfigurationError(f"config.{sorted(unknown)[0]}: unknown field")

    p = data.get("params", {})
    if not isinstance(p, dict):
        raise ConfigurationError("params: expected an object")
    bad = set(p) - {"k", "g_hat", "Omega"}
    if bad:
        raise ConfigurationError(f"params.{sorted(bad)[0]}: unknown field")
    k = _number(p, "k", "params", 0.4)
    g_hat = _number(p, "g_hat", "params", 1.4)
    Omega = _number(p, "Omega", "params", 0.0)
    if not 0 < k < 1:
        raise ConfigurationError(f"params.k: must lie in (0, 1), got {k!r}")
    if g_hat < 0:
        raise ConfigurationError(f"params.g_hat: must be >= 0, got {g_hat!r}")
    params = Params(k, g_hat, Omega)

    integ = data.get("integrator", {})
    if not isinstance(integ, dict):
        raise ConfigurationError("integrator: expected an object")
    rtol = _number(integ, "rtol", "integrator", 1e-10)
    atol = _number(integ, "atol", "integrator", 1e-12)
    for name, v in (("rtol", rtol), ("atol", atol)):
        if not v > 0:
            raise ConfigurationError(f"integrator.{name}: must be > 0, got {v!r}")

    seed = data.get("seed", 0)
    if isinstance(seed, bool) or not isinstance(seed, int) or seed < 0:
        raise ConfigurationError(f"seed: expected a non-negative integer, got {seed!r}")
    r_max = _number(data, "r_max", "config", 10.0)
    if not r_max > 0:
        raise ConfigurationError(f"r_max: must be > 0, got {r_max!r}")

    prof_spec = data.get("profile", {"kind": "parabolic", "b": 1.0})
    try:
        profile = profile_from_spec(prof_spec)
    except ConfigurationError:
        raise
    except ValueError as exc:
        raise ConfigurationError(f"profile: {exc}") from None
    rep = check_admissibility(profile, r_max=r_max)
    if not rep.ok:
        raise ConfigurationError(f"profile: not admissible at r = {float(rep.violating_radii[0])!r}")
    output = data.get("output", {})
    if not isinstance(output, dict):
        raise ConfigurationError("output: expected an object")
    return RunConfig(params, profile, rtol, atol, seed, r_max, dict(output))


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based (Philox) generator for reproducible sampled checks."""
    return np.random.Generator(np.random.Philox(int(seed)))
