"""Command-line front end.

Every subcommand writes machine-readable output (JSON, or CSV for
trajectories) to standard output or ``--out``. Exit codes: 0 success, 1 a
negative analysis result, 2 a usage or configuration error, 3 a runtime
failure such as a guard violation or an exhausted step budget.
"""

from __future__ import annotations

import argparse
import json
import math
import sys as _sys
from typing import Optional, Sequence

import numpy as np

from .control import ControlSignal
from .errors import (
    BoundsError,
    DimensionError,
    GuardViolation,
    SamplerExhausted,
    SignalSpanError,
    StepLimitExceeded,
    StepUnderflow,
    SteeringFailure,
)
from .integrate import IntegratorOptions, integrate
from .larc import larc_rank, larc_scan
from .poisson import antisymmetry_defect, casimir_residual, jacobi_residual
from .stability import nonwandering_probe, properness_scan, recurrence_probe, sphere_sampler
from .steer import SteerOptions, steer, verify_plan
from .systems import (
    SYSTEM_NAMES,
    VortexParams,
    default_sampler,
    load_params,
    system_from_params,
    vortex_unreduced,
)

EXIT_OK, EXIT_NEGATIVE, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


def format_number(v: float) -> str:
    if math.isnan(v) or math.isinf(v):
        return "null"
    return format(v, ".17g")


def dumps(obj) -> str:
    """JSON text with every float written at 17 significant digits."""
    if isinstance(obj, dict):
        return "{" + ", ".join(f"{json.dumps(str(k))}: {dumps(v)}" for k, v in obj.items()) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ", ".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, (bool, np.bool_)) or obj is None:
        return json.dumps(None if obj is None else bool(obj))
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_number(float(obj))
    return json.dumps(obj)


def parse_vector(text: str, name: str) -> np.ndarray:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{name} expects comma-separated numbers, got {text!r}") from None
    if not vals:
        raise UsageError(f"{name} is empty")
    return np.array(vals)


def parse_pair(text: str, name: str) -> tuple[float, float]:
    v = parse_vector(text, name)
    if v.shape[0] != 2:
        raise UsageError(f"{name} expects two numbers")
    return float(v[0]), float(v[1])


def build_params(args) -> dict:
    params = load_params(args.params) if args.params else {}
    if args.system:
        if params.get("system", args.system) != args.system:
            raise UsageError(f"--system {args.system} conflicts with parameter file system {params['system']!r}")
        params["system"] = args.system
    if "system" not in params:
        raise UsageError("choose a system with --system or --params")
    return params


def build_system(args):
    try:
        return system_from_params(build_params(args))
    except (ValueError, KeyError, TypeError) as exc:
        raise UsageError(str(exc)) from None


def integrator_options(args, rel_default=1e-8, abs_default=1e-10) -> IntegratorOptions:
    rel = args.rel_tol if args.rel_tol is not None else rel_default
    ab = args.abs_tol if args.abs_tol is not None else abs_default
    try:
        return IntegratorOptions(rel_tol=rel, abs_tol=ab)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def state_arg(args, sys, attr="x0", flag="--x0") -> np.ndarray:
    text = getattr(args, attr)
    if text is None:
        raise UsageError(f"{flag} is required")
    x = parse_vector(text, flag)
    if x.shape[0] != sys.dim:
        raise UsageError(f"{flag} needs {sys.dim} components for {sys.name}")
    return x


# ---------------------------------------------------------------------------
# subcommands


def cmd_simulate(args):
    sys = build_system(args)
    x0 = state_arg(args, sys)
    span = parse_pair(args.span, "--span")
    sig = None
    if args.signal:
        with open(args.signal, encoding="utf-8") as fh:
            sig = ControlSignal.from_json(fh.read(), sys.m)
    traj = integrate(sys, x0, sig, span, integrator_options(args))
    if args.format == "json":
        return EXIT_OK, dumps(
            {
                "labels": list(sys.labels),
                "times": traj.times,
                "states": traj.states,
                "steps_accepted": traj.steps_accepted,
                "steps_rejected": traj.steps_rejected,
            }
        )
    labels = tuple(f"u{i + 1}" for i in range(sys.m)) if sig is not None else ()
    return EXIT_OK, traj.to_csv(labels).rstrip("\n")


def _sample_points(sys, args):
    if args.point:
        return [state_arg(args, sys, "point", "--point")]
    sampler = default_sampler(sys)
    return [sampler(np.random.default_rng([args.seed, i])) for i in range(args.samples)]


def cmd_check(args):
    sys = build_system(args)
    if sys.structure is None:
        raise UsageError(f"{sys.name} has no Poisson structure")
    points = _sample_points(sys, args)
    anti = max(antisymmetry_defect(sys.structure, x) for x in points)
    jac = max(jacobi_residual(sys.structure, x) for x in points)
    cas = {}
    ok = anti == 0.0 and jac < args.jacobi_tol
    for C in sys.casimirs:
        worst = 0.0
        for x in points:
            r = casimir_residual(sys.structure, C, x)
            scale = 1.0 + np.linalg.norm(sys.structure.matrix(x))
            worst = max(worst, r / scale)
            ok = ok and r < args.casimir_tol * scale
        cas[C.label] = worst
    report = {
        "system": sys.name,
        "points": len(points),
        "max_antisymmetry_defect": anti,
        "max_jacobi_residual": jac,
        "max_scaled_casimir_residual": cas,
        "ok": ok,
    }
    return (EXIT_OK if ok else EXIT_NEGATIVE), dumps(report)


def cmd_larc(args):
    sys = build_system(args)
    if args.point:
        rep = larc_rank(sys, state_arg(args, sys, "point", "--point"), args.depth, args.tol)
        return (EXIT_OK if rep.full else EXIT_NEGATIVE), dumps(rep.to_dict())
    res = larc_scan(sys, default_sampler(sys), args.samples, args.depth, args.tol, args.seed, args.workers)
    return (EXIT_OK if res.min_rank == sys.dim else EXIT_NEGATIVE), dumps(res.to_dict())


def cmd_recur(args):
    sys = build_system(args)
    x0 = state_arg(args, sys)
    t = recurrence_probe(sys, x0, args.radius, args.t_min, args.t_max, _probe_opts(args))
    out = {"x0": x0, "radius": args.radius, "t_min": args.t_min, "t_max": args.t_max, "return_time": t}
    return (EXIT_OK if t is not None else EXIT_NEGATIVE), dumps(out)


def _probe_opts(args) -> Optional[IntegratorOptions]:
    if args.rel_tol is None and args.abs_tol is None:
        return None
    return integrator_options(args)


def cmd_nonwander(args):
    sys = build_system(args)
    x0 = state_arg(args, sys)
    ev = nonwandering_probe(sys, x0, args.radius, args.t_min, args.t_max, args.samples, args.seed, _probe_opts(args))
    out = {"x0": x0, "radius": args.radius, "evidence": None if ev is None else ev.to_dict()}
    return (EXIT_OK if ev is not None else EXIT_NEGATIVE), dumps(out)


def cmd_proper(args):
    params = build_params(args)
    name = params["system"]
    radii = [float(r) for r in parse_vector(args.radii, "--radii")]
    try:
        if name == "vortex":
            unred = vortex_unreduced(VortexParams(tuple(params.get("gamma", (1.0, 1.0, 1.0)))))
            F = unred.momentum
            sampler = sphere_sampler(6, unred.system.is_valid)
        elif name == "threewave":
            sys = system_from_params(params)
            V = sys.casimirs[0]
            F = lambda x: V(x)  # noqa: E731
            sampler = sphere_sampler(4, sys.is_valid)
        elif name == "bodies":
            sys = system_from_params(params)
            H = sys.hamiltonian
            F = lambda x: H(x)  # noqa: E731
            sampler = _bodies_sampler()
        else:
            raise UsageError(f"unknown system {name!r}")
        prof = properness_scan(F, sampler, radii, args.samples, args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    return EXIT_OK, dumps(prof.to_dict())


def _bodies_sampler():
    """Points with a uniform angle and momenta ``(mu1, mu2)`` on the circle of radius R."""

    def sample(R, rng):
        phi = rng.uniform(0.0, 2 * math.pi)
        return np.array([rng.uniform(0.0, 2 * math.pi), R * math.cos(phi), R * math.sin(phi)])

    return sample


def cmd_steer(args):
    sys = build_system(args)
    x_I = state_arg(args, sys)
    x_F = state_arg(args, sys, "xF", "--xF")
    try:
        opts = SteerOptions(goal_tol=args.goal_tol, max_nodes=args.max_nodes, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    try:
        res = steer(sys, x_I, x_F, opts)
    except SteeringFailure as exc:
        out = {"success": False, "best_error": exc.best_error, "nodes_expanded": exc.nodes}
        return EXIT_NEGATIVE, dumps(out)
    check = verify_plan(sys, x_I, res.signal, x_F, 2 * args.goal_tol)
    out = res.to_dict()
    out["success"] = True
    out["verification"] = check
    return (EXIT_OK if check["ok"] else EXIT_NEGATIVE), dumps(out)


def cmd_verdict(args):
    sys = build_system(args)
    scan = larc_scan(sys, default_sampler(sys), args.samples, args.depth, args.tol, args.seed, args.workers)
    sampler = default_sampler(sys)
    probes = []
    for k in range(args.probes):
        x0 = sampler(np.random.default_rng([args.seed, 1_000_000 + k]))
        try:
            t = recurrence_probe(sys, x0, args.radius, args.t_min, args.t_max, _probe_opts(args))
            note = None
        except (GuardViolation, StepUnderflow, StepLimitExceeded) as exc:
            t, note = None, type(exc).__name__
        probes.append({"x0": x0, "return_time": t, "error": note})
    recurrent = sum(p["return_time"] is not None for p in probes)
    full = scan.min_rank == sys.dim
    summary = (
        f"LARC: sampled rank {'full' if full else 'deficient'} (min rank {scan.min_rank}/{sys.dim} over "
        f"{args.samples} samples); WPPS evidence: {recurrent}/{len(probes)} probes recurrent. "
        "This is numerical evidence, not a proof of controllability."
    )
    ok = full and recurrent == len(probes)
    if args.format == "json":
        out = {
            "system": sys.name,
            "larc_min_rank": scan.min_rank,
            "dim": sys.dim,
            "probes": probes,
            "recurrent": recurrent,
            "summary": summary,
        }
        return (EXIT_OK if ok else EXIT_NEGATIVE), dumps(out)
    return (EXIT_OK if ok else EXIT_NEGATIVE), summary


# ---------------------------------------------------------------------------
# parser


def _common(p, point=False):
    p.add_argument("--system", choices=SYSTEM_NAMES, help="built-in system")
    p.add_argument("--params", help="JSON parameter file")
    p.add_argument("--out", help="write output to this file instead of stdout")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="output format")
    p.add_argument("--rel-tol", type=float, default=None, help="integrator relative tolerance")
    p.add_argument("--abs-tol", type=float, default=None, help="integrator absolute tolerance")
    p.add_argument("--seed", type=int, default=0)
    if point:
        p.add_argument("--point", help="evaluate at this state instead of scanning")
        p.add_argument("--samples", type=int, default=100, help="number of sampled states")


def _probe_args(p, samples_default=None):
    p.add_argument("--radius", type=float, default=0.2)
    p.add_argument("--t-min", type=float, default=1.0)
    p.add_argument("--t-max", type=float, default=1000.0)
    if samples_default is not None:
        p.add_argument("--samples", type=int, default=samples_default)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="poissonctl", description="Controllability analysis of Poisson control systems.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="integrate a system and print the trajectory")
    _common(p)
    p.add_argument("--x0", help="initial state, comma separated")
    p.add_argument("--span", default="0,1", help="time span t0,t1")
    p.add_argument("--signal", help="control signal JSON file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("check", help="structural checks")
    p.add_argument("what", choices=("structure",))
    _common(p, point=True)
    p.add_argument("--jacobi-tol", type=float, default=1e-6)
    p.add_argument("--casimir-tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("larc", help="Lie algebra rank condition at a point or over samples")
    _common(p, point=True)
    p.add_argument("--depth", type=int, default=3)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_larc)

    p = sub.add_parser("recur", help="recurrence probe")
    _common(p)
    p.add_argument("--x0")
    _probe_args(p)
    p.set_defaults(func=cmd_recur)

    p = sub.add_parser("nonwander", help="nonwandering probe")
    _common(p)
    p.add_argument("--x0")
    _probe_args(p, samples_default=16)
    p.set_defaults(func=cmd_nonwander)

    p = sub.add_parser("proper", help="properness profile of the system's proper function")
    _common(p)
    p.add_argument("--radii", default="1,2,4,8")
    p.add_argument("--samples", type=int, default=256, help="samples per sphere")
    p.set_defaults(func=cmd_proper)

    p = sub.add_parser("steer", help="plan a bounded control between two states and replay it")
    _common(p)
    p.add_argument("--x0", help="initial state")
    p.add_argument("--xF", help="final state")
    p.add_argument("--goal-tol", type=float, default=1e-2)
    p.add_argument("--max-nodes", type=int, default=20000)
    p.set_defaults(func=cmd_steer)

    p = sub.add_parser("verdict", help="LARC scan plus recurrence probes, reported as evidence")
    _common(p)
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--depth", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--probes", type=int, default=3)
    _probe_args(p)
    p.set_defaults(func=cmd_verdict)
    return parser


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    try:
        code, text = args.func(args)
    except (UsageError, DimensionError, BoundsError, SignalSpanError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except ValueError as exc:
        print(f"error: {exc}", file=_sys.stderr)
        return EXIT_USAGE
    except (GuardViolation, StepLimitExceeded, StepUnderflow, SamplerExhausted) as exc:
        print(f"runtime error: {exc}", file=_sys.stderr)
        return EXIT_RUNTIME
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        print(text)
    return code


def main() -> None:
    _sys.exit(run())
