"""Command-line interface: ``rollball <subcommand> [options]``.

Exit codes are 0 on success, 1 when a check or the dynamics fail, and 2 for
usage or configuration errors.  CSV numbers are written with 17 significant
digits; JSON numbers use Python's round-trip ``repr``.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .config import RunConfig, load_config
from .engine import reconstruct
from .equilibria import (
    CRIT_TOL,
    branch_signature,
    equilibria_on_leaf,
    re1_re2_records,
    re3_record,
    scan_leaf_counts,
)
from .errors import ConfigurationError, ConsistencyError, RollballError
from .leaf import LeafSystem
from .model import TermModel
from .reduced import Trajectory, integrate_reduced
from .routh import conservation_report, routh_for
from .surface import eval_profile
from .verify import SUITES, report_dict, run_suite

__all__ = ["main", "build_parser"]

TRAJ_HEADER = ["t", "r", "v_r", "v_theta", "omega_z", "p0", "p1", "p2", "p3", "p4", "E", "J1", "J2", "K_drift"]
FAILED_STATUSES = ("approached-vertex", "non-finite", "overflow")


class UsageError(Exception):
    pass


def _floats(text, n=None, what="value"):
    try:
        vals = [float(x) for x in str(text).split(",")]
    except ValueError:
        raise UsageError(f"{what}: expected comma-separated numbers, got {text!r}") from None
    if n is not None and len(vals) != n:
        raise UsageError(f"{what}: expected {n} numbers, got {len(vals)}")
    if not all(np.isfinite(vals)):
        raise UsageError(f"{what}: values must be finite")
    return vals


def _fmt(x) -> str:
    return "%.17g" % x


def _emit(text: str, path: str | None):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([v if isinstance(v, str) else _fmt(v) for v in row])
    return buf.getvalue()


def _json_text(obj) -> str:
    return json.dumps(obj, indent=2, allow_nan=False) + "\n"


def _config(args) -> RunConfig:
    cfg = load_config(args.config)
    if args.omega is not None:
        cfg = cfg.with_omega(args.omega)
    return cfg


def _integrate(cfg: RunConfig, state, t_end) -> Trajectory:
    s0 = _floats(state, 4, "--state")
    if not s0[0] > 0:
        raise UsageError("--state: r must be positive")
    if not t_end > 0:
        raise UsageError("--t-end: must be positive")
    return integrate_reduced(cfg.params, cfg.profile, s0, (0.0, t_end), rtol=cfg.rtol, atol=cfg.atol)


def _integrals(cfg: RunConfig, traj: Trajectory) -> dict:
    rep = conservation_report(cfg.params, cfg.profile, traj)["relative"]
    return {
        "E0": float(traj.E[0]),
        "J": [float(traj.J[0, 0]), float(traj.J[0, 1])],
        "drift": {k: float(rep[k]) for k in ("E", "J1", "J2", "K")},
    }


def cmd_simulate(args) -> int:
    cfg = _config(args)
    traj = _integrate(cfg, args.state, args.t_end)
    out = args.out or cfg.output.get("trajectory", "trajectory.csv")
    integ = args.integrals or cfg.output.get("integrals")
    traj.write_csv(out)
    summary = _integrals(cfg, traj)
    summary["status"] = traj.status
    _emit(_json_text(summary), integ)
    if traj.status in FAILED_STATUSES:
        print(f"error: integration stopped with status {traj.status!r} at t = {float(traj.t[-1])!r}", file=sys.stderr)
        return 1
    return 0


def cmd_integrals(args) -> int:
    cfg = _config(args)
    traj = _integrate(cfg, args.state, args.t_end)
    _emit(_json_text(_integrals(cfg, traj)), args.out)
    if traj.status in FAILED_STATUSES:
        print(f"error: integration stopped with status {traj.status!r}", file=sys.stderr)
        return 1
    return 0


def _leaf(cfg: RunConfig, j, r_max) -> LeafSystem:
    routh = routh_for(cfg.profile, cfg.params.mu, 0.5 * r_max * r_max * 1.01)
    return LeafSystem(cfg.params, cfg.profile, tuple(j), routh)


def cmd_potential(args) -> int:
    cfg = _config(args)
    j = _floats(args.j, 2, "--j")
    if not 0 < args.r_min < args.r_max:
        raise UsageError("--r-min/--r-max: need 0 < r_min < r_max")
    if args.n < 2:
        raise UsageError("--n: need at least 2 points")
    leaf = _leaf(cfg, j, args.r_max)
    r = np.linspace(args.r_min, args.r_max, args.n)
    V, Vp, Vpp = leaf.V_derivs(r)
    _emit(_csv_text(["r", "V", "Vp", "Vpp"], zip(r, V, Vp, Vpp)), args.out)
    return 0


def _grid(spec: str):
    parts = spec.split(":")
    if len(parts) != 3:
        raise UsageError(f"--scan-j: expected LO:HI:N, got {spec!r}")
    lo, hi = _floats(parts[0], 1, "--scan-j")[0], _floats(parts[1], 1, "--scan-j")[0]
    try:
        n = int(parts[2])
    except ValueError:
        raise UsageError(f"--scan-j: N must be an integer, got {parts[2]!r}") from None
    if n < 1 or not lo <= hi:
        raise UsageError("--scan-j: need N >= 1 and LO <= HI")
    return np.linspace(lo, hi, n)


def cmd_equilibria(args) -> int:
    cfg = _config(args)
    P, prof = cfg.params, cfg.profile
    r_range = (args.r_min, args.r_max)
    if not 0 < r_range[0] < r_range[1]:
        raise UsageError("--r-min/--r-max: need 0 < r_min < r_max")
    if args.leaf is not None:
        recs = equilibria_on_leaf(_leaf(cfg, _floats(args.leaf, 2, "--leaf"), r_range[1]), r_range)
    elif args.r is not None:
        if not args.r > 0:
            raise UsageError("--r: must be positive")
        routh = routh_for(prof, P.mu, 0.5 * args.r**2 * 1.01)
        if abs(float(eval_profile(prof, args.r).f_p)) < CRIT_TOL:
            recs = re1_re2_records(P, prof, args.r, _floats(args.omega_n, what="--omega-n"), routh)
        else:
            vs = _floats(args.v_theta, what="--v-theta")
            if any(v == 0 for v in vs):
                raise UsageError("--v-theta: values must be non-zero")
            recs = [re3_record(P, prof, args.r, v, routh) for v in vs]
    else:
        g = _grid(args.scan_j)
        j1s = [x for x in g if x != 0.0]
        if len(j1s) < len(g):
            print("warning: j1 = 0 leaves reach the vertex and are skipped", file=sys.stderr)
        found = scan_leaf_counts(P, prof, j1s, g, r_range)
        recs = [rec for jj in sorted(found) for rec in found[jj]]
    _emit(_json_text([rec.to_dict() for rec in recs]), args.out)
    return 0


def cmd_bifurcation(args) -> int:
    cfg = _config(args)
    if not args.r > 0:
        raise UsageError("--r: must be positive")
    if args.n < 1 or not args.omega_min <= args.omega_max:
        raise UsageError("--n/--omega-min/--omega-max: need n >= 1 and omega_min <= omega_max")
    rows = []
    for Om in np.linspace(args.omega_min, args.omega_max, args.n):
        sig = branch_signature(cfg.params, cfg.profile, args.r, float(Om))
        rows.append([float(Om), sig.neg, sig.pos, str(len(sig.zeros_neg)), str(len(sig.zeros_pos))])
    _emit(_csv_text(["Omega", "branch_neg", "branch_pos", "zeros_neg", "zeros_pos"], rows), args.out)
    return 0


def _read_traj(path):
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise UsageError(f"--traj: cannot read {path!r}: {exc.strerror}") from None
    if not rows or rows[0] != TRAJ_HEADER:
        raise UsageError(f"--traj: expected header {','.join(TRAJ_HEADER)}")
    try:
        data = np.array([[float(v) for v in row] for row in rows[1:]])
    except ValueError:
        raise UsageError("--traj: non-numeric entry") from None
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] != len(TRAJ_HEADER):
        raise UsageError("--traj: need at least two complete rows")
    return data


def cmd_reconstruct(args) -> int:
    cfg = _config(args)
    data = _read_traj(args.traj)
    quat0 = _floats(args.quat0, 4, "--quat0")
    if np.linalg.norm(quat0) == 0:
        raise UsageError("--quat0: must be non-zero")
    t, pol = data[:, 0], data[:, 1:5]
    # the file only samples the reduced solution; re-integrate it and insist on agreement
    traj = integrate_reduced(cfg.params, cfg.profile, pol[0], (t[0], t[-1]), rtol=cfg.rtol, atol=cfg.atol)
    ok = np.isfinite(pol[:, 0])
    dev = np.abs(traj.polar_at(t[ok]) - pol[ok]) / np.maximum(1.0, np.abs(pol[ok]))
    if dev.max() > args.consistency_tol:
        raise ConsistencyError(f"trajectory file disagrees with the configured dynamics (max deviation {dev.max():.3g})")
    ft = reconstruct(cfg.params, cfg.profile, traj, args.theta0, quat0, rtol=min(cfg.rtol, 1e-11), atol=min(cfg.atol, 1e-13))
    rows = [
        [ft.t[i], ft.r[i], ft.theta[i], *ft.quat[i], ft.v_r[i], ft.v_theta[i], ft.omega_z[i]]
        for i in range(len(ft.t))
    ]
    _emit(_csv_text(["t", "r", "theta", "qw", "qx", "qy", "qz", "v_r", "v_theta", "omega_z"], rows), args.out)
    return 0 if ft.complete else 1


def cmd_verify(args) -> int:
    cfg = _config(args)
    model = TermModel.parse(args.fault)
    checks = run_suite(args.suite, cfg, model)
    rep = report_dict(args.suite, checks)
    _emit(_json_text(rep), args.out)
    if not rep["passed"]:
        for c in checks:
            if not c.passed:
                print(f"FAILED {c.name}: measured {c.measured!r} > threshold {c.threshold!r}", file=sys.stderr)
        return 1
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file or inline JSON object")
    common.add_argument("--omega", type=float, help="override the rotation rate Omega")
    common.add_argument("--out", help="output file (default: stdout)")

    ap = argparse.ArgumentParser(prog="rollball", description="Heavy ball rolling on a rotating surface of revolution.")
    sub = ap.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        p = sub.add_parser(name, parents=[common], help=help_, description=help_)
        p.set_defaults(func=fn)
        return p

    state_help = "initial polar state r,v_r,v_theta,omega_z"
    p = add("simulate", cmd_simulate, "integrate the reduced equations; write trajectory CSV and integrals JSON")
    p.add_argument("--state", default="1,0.3,0.6,0.2", help=state_help)
    p.add_argument("--t-end", type=float, default=20.0)
    p.add_argument("--integrals", help="integrals JSON path (default: stdout)")

    p = add("integrals", cmd_integrals, "initial integrals and their drift along a trajectory, as JSON")
    p.add_argument("--state", default="1,0.3,0.6,0.2", help=state_help)
    p.add_argument("--t-end", type=float, default=20.0)

    p = add("potential", cmd_potential, "effective potential V_j and its derivatives, as CSV")
    p.add_argument("--j", required=True, help="leaf label j1,j2")
    p.add_argument("--r-min", type=float, default=0.05)
    p.add_argument("--r-max", type=float, default=5.0)
    p.add_argument("--n", type=int, default=200)

    p = add("equilibria", cmd_equilibria, "reduced equilibria as a JSON array of records")
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--leaf", help="equilibria on the leaf j1,j2")
    g.add_argument("--r", type=float, help="equilibria at radius r")
    g.add_argument("--scan-j", help="scan a square leaf grid LO:HI:N")
    p.add_argument("--v-theta", default="-2,-1,-0.5,0.5,1,2", help="v_theta values for --r at a non-critical radius")
    p.add_argument("--omega-n", default="0", help="omega_n values for --r at a critical radius")
    p.add_argument("--r-min", type=float, default=1e-3)
    p.add_argument("--r-max", type=float, default=20.0)

    p = add("bifurcation", cmd_bifurcation, "branch signatures of RE3 equilibria over an Omega grid, as CSV")
    p.add_argument("--r", type=float, required=True)
    p.add_argument("--omega-min", type=float, default=0.0)
    p.add_argument("--omega-max", type=float, default=3.0)
    p.add_argument("--n", type=int, default=31)

    p = add("reconstruct", cmd_reconstruct, "lift a trajectory CSV to position and attitude, as CSV")
    p.add_argument("--traj", required=True, help="trajectory CSV written by simulate")
    p.add_argument("--theta0", type=float, default=0.0)
    p.add_argument("--quat0", default="1,0,0,0", help="initial attitude quaternion w,x,y,z")
    p.add_argument("--consistency-tol", type=float, default=1e-6, help=argparse.SUPPRESS)

    p = add("verify", cmd_verify, "run invariant suites and report pass/fail as JSON")
    p.add_argument("--suite", choices=["all", *SUITES], default="all")
    p.add_argument("--fault", help=argparse.SUPPRESS)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigurationError) as exc:
        print(f"rollball {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except RollballError as exc:
        print(f"rollball {args.command}: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
