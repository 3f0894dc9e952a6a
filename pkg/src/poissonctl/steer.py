"""Constructive steering with bounded piecewise-constant controls.

The planner grows a kinodynamic tree from the initial state. Every edge applies
one constant control from the admissible box for a fixed duration, so any
root-to-node path is itself an admissible control signal.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.optimize import least_squares

from .control import ControlAffineSystem, ControlSignal
from .errors import GuardViolation, StepLimitExceeded, StepUnderflow, SteeringFailure
from .integrate import IntegratorOptions, final_state


@dataclass(frozen=True)
class SteerOptions:
    goal_tol: float = 1e-2
    dt_expand: float = 0.1
    n_control_samples: int = 8
    goal_bias: float = 0.1
    max_nodes: int = 20000
    seed: int = 0
    weights: Optional[tuple] = None
    # Half-width floor of the target-sampling box, per coordinate. Without it
    # the box collapses in every coordinate where x_I and x_F agree.
    min_half_width: float = 0.5
    # Goal connection: from a node that is the closest to the goal so far and
    # lies within connect_radius of it, fit connect_pieces further constant
    # controls, each held for connect_duration (dt_expand when None), by
    # bounded least squares.
    connect_radius: float = 0.5
    connect_pieces: int = 4
    connect_duration: Optional[float] = 0.5
    connect_max_nfev: int = 30
    integrator: IntegratorOptions = IntegratorOptions()

    def __post_init__(self):
        if not self.goal_tol > 0:
            raise ValueError("goal_tol must be positive")
        if not self.dt_expand > 0:
            raise ValueError("dt_expand must be positive")
        if self.n_control_samples < 1 or self.max_nodes < 1:
            raise ValueError("n_control_samples and max_nodes must be positive")
        if not 0.0 <= self.goal_bias <= 1.0:
            raise ValueError("goal_bias must lie in [0, 1]")
        if self.min_half_width < 0:
            raise ValueError("min_half_width must be non-negative")
        if self.connect_pieces < 0 or self.connect_max_nfev < 1 or self.connect_radius < 0:
            raise ValueError("invalid goal-connection settings")
        if self.connect_duration is not None and not self.connect_duration > 0:
            raise ValueError("connect_duration must be positive")
        if self.weights is not None:
            w = tuple(float(v) for v in self.weights)
            if any(v <= 0 for v in w):
                raise ValueError("metric weights must be positive")
            object.__setattr__(self, "weights", w)

    @property
    def piece_duration(self) -> float:
        return self.dt_expand if self.connect_duration is None else self.connect_duration


@dataclass
class SteerResult:
    signal: ControlSignal
    terminal_state: np.ndarray
    terminal_error: float
    nodes_expanded: int

    def to_dict(self) -> dict:
        d = self.signal.to_dict()
        d["terminal_state"] = [float(v) for v in self.terminal_state]
        d["terminal_error"] = float(self.terminal_error)
        d["nodes_expanded"] = int(self.nodes_expanded)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict, m: Optional[int] = None) -> "SteerResult":
        sig = ControlSignal.from_dict(d, m)
        return cls(sig, np.array(d["terminal_state"], dtype=float), float(d["terminal_error"]), int(d["nodes_expanded"]))


def _weights(sys: ControlAffineSystem, opts: SteerOptions) -> np.ndarray:
    if opts.weights is None:
        return np.ones(sys.dim)
    w = np.array(opts.weights, dtype=float)
    if w.shape != (sys.dim,):
        raise ValueError(f"metric weights need {sys.dim} entries")
    return w


def _distances(sys: ControlAffineSystem, nodes: np.ndarray, target: np.ndarray, w: np.ndarray) -> np.ndarray:
    d = nodes - target
    mask = sys.angular_mask
    if mask.any():
        d[:, mask] = np.mod(d[:, mask] + np.pi, 2 * np.pi) - np.pi
    return np.sqrt(np.sum(w * d * d, axis=1))


def _propagate(sys: ControlAffineSystem, x, u, dt: float, iopts: IntegratorOptions) -> Optional[np.ndarray]:
    try:
        return final_state(sys, x, ControlSignal.constant(u, 0.0, dt), (0.0, dt), iopts)
    except (GuardViolation, StepUnderflow, StepLimitExceeded):
        return None


def _rollout(sys, x, controls, dt, iopts) -> Optional[np.ndarray]:
    for u in controls:
        x = _propagate(sys, x, u, dt, iopts)
        if x is None:
            return None
    return x


def _connect(sys, x, x_F, w, opts: SteerOptions):
    """Fit ``connect_pieces`` box-bounded constant controls from ``x`` towards ``x_F``.

    Returns ``(controls, end_state, error)`` of the fitted rollout, or None.
    """
    k, m = opts.connect_pieces, sys.m
    lo, hi = sys.bounds.lower, sys.bounds.upper
    if k == 0 or m == 0 or np.any(hi <= lo):
        return None
    sw = np.sqrt(w)
    # Residual used when a trial rollout leaves the domain; large but finite
    # so that the trust region shrinks instead of failing.
    penalty = np.full(sys.dim, 1e3)

    def residual(theta):
        end = _rollout(sys, x, theta.reshape(k, m), opts.piece_duration, opts.integrator)
        return penalty if end is None else sw * sys.difference(end, x_F)

    theta0 = np.tile(0.5 * (lo + hi), k)
    try:
        fit = least_squares(
            residual,
            theta0,
            bounds=(np.tile(lo, k), np.tile(hi, k)),
            method="trf",
            max_nfev=opts.connect_max_nfev,
            xtol=1e-10,
            ftol=1e-10,
            gtol=1e-10,
        )
    except ValueError:
        return None
    controls = np.clip(fit.x, np.tile(lo, k), np.tile(hi, k)).reshape(k, m)
    end = _rollout(sys, x, controls, opts.piece_duration, opts.integrator)
    if end is None:
        return None
    return controls, end, sys.distance(end, x_F, w)


def steer(sys: ControlAffineSystem, x_I, x_F, opts: Optional[SteerOptions] = None) -> SteerResult:
    """Search for a control taking ``x_I`` to within ``goal_tol`` of ``x_F``.

    Raises :class:`SteeringFailure` (carrying the best error reached) when the
    node budget runs out.
    """
    opts = opts or SteerOptions()
    x_I = sys.wrap(sys.check_state(x_I))
    x_F = sys.wrap(sys.check_state(x_F))
    w = _weights(sys, opts)
    rng = np.random.default_rng(opts.seed)

    if sys.distance(x_I, x_F, w) <= opts.goal_tol:
        err = sys.distance(x_I, x_F, w)
        return SteerResult(ControlSignal.empty(0.0, sys.m), x_I.copy(), err, 0)

    center = 0.5 * (x_I + x_F)
    half = np.maximum(np.abs(sys.difference(x_F, x_I)), opts.min_half_width)
    lo, hi = center - half, center + half

    cap = opts.max_nodes + 1
    nodes = np.empty((cap, sys.dim))
    parent = np.full(cap, -1, dtype=np.int64)
    edge_u = np.zeros((cap, sys.m))
    goal_dist = np.empty(cap)
    nodes[0] = x_I
    goal_dist[0] = sys.distance(x_I, x_F, w)
    count = 1
    zero = np.zeros(sys.m)
    best_goal = goal_dist[0]

    def finish(leaf, extra, end, err, expanded):
        tree_part = _path_controls(parent, edge_u, leaf)
        durations = [opts.dt_expand] * len(tree_part) + [opts.piece_duration] * len(extra)
        pieces = tree_part + [np.asarray(u, dtype=float) for u in extra]
        if not pieces:
            sig = ControlSignal.empty(0.0, sys.m)
        else:
            sig = ControlSignal(np.concatenate([[0.0], np.cumsum(durations)]), np.array(pieces).reshape(-1, sys.m))
        return SteerResult(sig, end.copy(), float(err), expanded)

    if goal_dist[0] <= opts.connect_radius:
        hit = _connect(sys, x_I, x_F, w, opts)
        if hit is not None and hit[2] <= opts.goal_tol:
            return finish(0, hit[0], hit[1], hit[2], 0)

    for expanded in range(1, opts.max_nodes + 1):
        if rng.uniform() < opts.goal_bias:
            target = x_F
        else:
            target = sys.wrap(rng.uniform(lo, hi))
        near = int(np.argmin(_distances(sys, nodes[:count], target, w)))
        candidates = [sys.bounds.sample(rng) for _ in range(opts.n_control_samples)] + [zero]
        best = None
        for u in candidates:
            y = _propagate(sys, nodes[near], u, opts.dt_expand, opts.integrator)
            if y is None:
                continue
            dg = sys.distance(y, x_F, w)
            score = 0.0 if dg <= opts.goal_tol else sys.distance(y, target, w)
            # a candidate that lands in the goal ball wins outright
            if best is None or score < best[0] or (score == 0.0 and dg < best[3]):
                best = (score, y, u, dg)
        if best is None:
            continue
        _, y, u, dg = best
        nodes[count] = y
        parent[count] = near
        edge_u[count] = u
        goal_dist[count] = dg
        count += 1
        if dg <= opts.goal_tol:
            return finish(count - 1, [], y, dg, expanded)
        if dg < best_goal:
            best_goal = dg
            if dg <= opts.connect_radius:
                hit = _connect(sys, y, x_F, w, opts)
                if hit is not None and hit[2] <= opts.goal_tol:
                    return finish(count - 1, hit[0], hit[1], hit[2], expanded)

    k = int(np.argmin(goal_dist[:count]))
    raise SteeringFailure(
        f"no node within {opts.goal_tol} of the goal after {opts.max_nodes} expansions",
        float(goal_dist[k]),
        opts.max_nodes,
        nodes[k].copy(),
    )


def _path_controls(parent, edge_u, leaf: int) -> list:
    pieces = []
    k = leaf
    while parent[k] >= 0:
        pieces.append(edge_u[k].copy())
        k = parent[k]
    pieces.reverse()
    return pieces


def verify_plan(
    sys: ControlAffineSystem,
    x_I,
    sig: ControlSignal,
    x_F,
    tol: float,
    opts: Optional[IntegratorOptions] = None,
    weights=None,
) -> dict:
    """Replay ``sig`` from ``x_I`` at tight tolerance and compare with ``x_F``."""
    opts = opts or IntegratorOptions(rel_tol=1e-10, abs_tol=1e-12)
    sig.check_bounds(sys.bounds)
    x_F = sys.wrap(sys.check_state(x_F))
    if sig.pieces == 0:
        end = sys.wrap(sys.check_state(x_I))
    else:
        end = final_state(sys, x_I, sig, sig.span, opts)
    err = sys.distance(end, x_F, weights)
    return {"ok": bool(err <= tol), "terminal_error": float(err)}
