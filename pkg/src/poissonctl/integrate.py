"""Adaptive explicit integration of controlled vector fields.

The stepper is the Dormand-Prince 5(4) embedded pair (the fifth-order solution
is propagated, the fourth-order one only feeds the error estimate) with a
proportional-integral step-size controller. Control breakpoints are forced
step boundaries, angular coordinates are wrapped after every accepted step and
every accepted state is checked against the system guard.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Iterator, Optional, Sequence

import numpy as np

from .control import ControlAffineSystem, ControlSignal, _rhs_unchecked
from .errors import GuardViolation, SignalSpanError, StepLimitExceeded, StepUnderflow
from .poisson import ScalarObservable

# Dormand & Prince (1980), 7 stages with first-same-as-last.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_A_MAT = np.zeros((7, 7))
for _i, _row in enumerate(_A):
    _A_MAT[_i, : len(_row)] = _row
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

_SAFETY = 0.9
_FAC_MIN = 0.2
_FAC_MAX = 10.0
_BETA = 0.04
_ALPHA = 0.2 - 0.75 * _BETA


@dataclass(frozen=True)
class IntegratorOptions:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-10
    max_step: float = math.inf
    initial_step: Optional[float] = None
    max_steps: int = 1_000_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.max_step > 0:
            raise ValueError("max_step must be positive")
        if self.initial_step is not None and not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    controls: Optional[np.ndarray] = None
    steps_accepted: int = 0
    steps_rejected: int = 0
    labels: tuple = ()

    def __len__(self):
        return self.times.shape[0]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1].copy()

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    def to_csv(self, control_labels: Sequence[str] = ()) -> str:
        n = self.states.shape[1]
        labels = list(self.labels) or [f"x{i + 1}" for i in range(n)]
        header = ["t"] + labels
        if self.controls is not None:
            m = self.controls.shape[1]
            header += list(control_labels) or [f"u{i + 1}" for i in range(m)]
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(header)
        for k in range(len(self)):
            row = [self.times[k], *self.states[k]]
            if self.controls is not None:
                row += list(self.controls[k])
            writer.writerow([format(float(v), ".17g") for v in row])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, m: int = 0) -> "Trajectory":
        rows = list(csv.reader(io.StringIO(text)))
        header, body = rows[0], np.array([[float(v) for v in r] for r in rows[1:]], dtype=float)
        n = len(header) - 1 - m
        controls = body[:, 1 + n:] if m else None
        return cls(body[:, 0], body[:, 1:1 + n], controls, labels=tuple(header[1:1 + n]))


def _error_norm(err: np.ndarray, y: np.ndarray, y_new: np.ndarray, opts: IntegratorOptions) -> float:
    scale = opts.abs_tol + opts.rel_tol * np.maximum(np.abs(y), np.abs(y_new))
    return float(np.sqrt(np.mean((err / scale) ** 2))) if err.size else 0.0


def _initial_step(f, t, y, f0, direction_span, opts) -> float:
    if opts.initial_step is not None:
        return opts.initial_step
    scale = opts.abs_tol + opts.rel_tol * np.abs(y)
    d0 = np.sqrt(np.mean((y / scale) ** 2)) if y.size else 0.0
    d1 = np.sqrt(np.mean((f0 / scale) ** 2)) if y.size else 0.0
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, direction_span)
    y1 = y + h0 * f0
    f1 = f(y1)
    if not np.all(np.isfinite(f1)):
        return h0
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0 if y.size else 0.0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, opts.max_step, direction_span)


def _segments(sig: Optional[ControlSignal], t_a: float, t_b: float, m: int):
    """Yield ``(start, end, u)`` covering ``[t_a, t_b]`` with constant control."""
    if sig is None:
        yield t_a, t_b, np.zeros(m)
        return
    s0, s1 = sig.span
    if t_a < s0 or t_b > s1:
        raise SignalSpanError(f"signal span [{s0}, {s1}] does not cover [{t_a}, {t_b}]")
    inner = [float(t) for t in sig.breakpoints if t_a < t < t_b]
    cuts = [t_a] + inner + [t_b]
    for a, b in zip(cuts[:-1], cuts[1:]):
        k = int(np.searchsorted(sig.breakpoints, a, side="right")) - 1
        yield a, b, sig.values[k].copy()


def _segment_field(sys: ControlAffineSystem, u: np.ndarray):
    """Right-hand side for a fixed control value; constant control fields are summed once."""
    if all(g.constant for g in sys.controls):
        offset = sys.control_matrix(np.zeros(sys.dim)) @ u if sys.m else np.zeros(sys.dim)
        if not np.any(offset):
            return sys.drift.func
        drift = sys.drift.func
        return lambda y: drift(y) + offset
    return lambda y: _rhs_unchecked(sys, y, u)


def iter_steps(
    sys: ControlAffineSystem,
    x0,
    sig: Optional[ControlSignal],
    span: Sequence[float],
    opts: Optional[IntegratorOptions] = None,
    counters: Optional[dict] = None,
) -> Iterator[tuple[float, np.ndarray, np.ndarray]]:
    """Generate ``(t, x, u)`` at the initial time and after every accepted step.

    ``u`` is the control applied on the step that starts at ``t``. ``counters``,
    when given, is updated in place with ``accepted``/``rejected`` totals.
    """
    opts = opts or IntegratorOptions()
    t_a, t_b = float(span[0]), float(span[1])
    if not t_b >= t_a:
        raise ValueError("integration span must satisfy t_a <= t_b")
    if counters is None:
        counters = {}
    counters.setdefault("accepted", 0)
    counters.setdefault("rejected", 0)

    x = sys.check_state(x0)
    if sig is not None:
        if sig.m != sys.m:
            raise ValueError(f"signal has {sig.m} inputs, system has {sys.m}")
        sig.check_bounds(sys.bounds)
    segments = list(_segments(sig, t_a, t_b, sys.m))
    x = sys.wrap(x)
    t = t_a
    if t_b == t_a:
        yield t, x.copy(), segments[0][2]
        return

    h = None
    err_old = 1e-4
    attempts = 0
    with np.errstate(all="ignore"):
        for seg_index, (s0, s1, u) in enumerate(segments):
            if seg_index == 0:
                yield t, x.copy(), u

            f = _segment_field(sys, u)

            k1 = f(x)
            if h is None:
                h = _initial_step(f, t, x, k1, s1 - s0, opts)
            rejected_last = False
            guard_trouble = False
            while t < s1:
                attempts += 1
                if attempts > opts.max_steps:
                    raise StepLimitExceeded(f"more than {opts.max_steps} step attempts", t, x.copy())
                h = min(h, opts.max_step)
                last = t + h >= s1 or (s1 - (t + h)) < 1e-12 * max(1.0, abs(s1))
                if last:
                    h = s1 - t
                min_h = 16 * np.finfo(float).eps * max(1.0, abs(t))
                if h < min_h:
                    if guard_trouble:
                        raise GuardViolation(f"trajectory reached the guard boundary at t={t}", t, x.copy())
                    raise StepUnderflow(f"step size underflow at t={t}", t, x.copy())

                K = np.empty((7, sys.dim))
                K[0] = k1
                for i in range(1, 7):
                    yi = x + h * (_A_MAT[i, :i] @ K[:i])
                    K[i] = f(yi)
                y_new = yi  # stage 7 is evaluated at the propagated solution
                err_vec = h * (_E @ K)
                valid = bool(np.all(np.isfinite(K))) and bool(np.all(np.isfinite(y_new))) and sys.guard(sys.wrap(y_new))
                if not valid:
                    counters["rejected"] += 1
                    guard_trouble = True
                    rejected_last = True
                    h *= 0.25
                    continue
                err = _error_norm(err_vec, x, y_new, opts)
                if err <= 1.0:
                    t = s1 if last else t + h
                    x = sys.wrap(y_new)
                    k1 = K[6] if not any(sys.angular) else f(x)
                    counters["accepted"] += 1
                    guard_trouble = False
                    if err == 0.0:
                        fac = _FAC_MAX
                    else:
                        fac = _SAFETY * err ** (-_ALPHA) * err_old ** _BETA
                        fac = min(_FAC_MAX, max(_FAC_MIN, fac))
                    if rejected_last:
                        fac = min(1.0, fac)
                    err_old = max(err, 1e-4)
                    rejected_last = False
                    h_next = h * fac
                    if last and seg_index + 1 < len(segments):
                        # keep the pre-clipping step estimate for the next segment
                        h_next = max(h_next, h)
                    next_u = u if t < s1 or seg_index + 1 == len(segments) else segments[seg_index + 1][2]
                    yield t, x.copy(), next_u
                    h = h_next
                else:
                    counters["rejected"] += 1
                    rejected_last = True
                    h *= max(_FAC_MIN, _SAFETY * err ** (-1 / 5))


def integrate(
    sys: ControlAffineSystem,
    x0,
    sig: Optional[ControlSignal] = None,
    span: Sequence[float] = (0.0, 1.0),
    opts: Optional[IntegratorOptions] = None,
) -> Trajectory:
    counters: dict = {}
    times, states, controls = [], [], []
    for t, x, u in iter_steps(sys, x0, sig, span, opts, counters):
        times.append(t)
        states.append(x)
        controls.append(u)
    return Trajectory(
        np.array(times),
        np.array(states).reshape(len(states), sys.dim),
        None if sig is None else np.array(controls).reshape(len(controls), sys.m),
        counters["accepted"],
        counters["rejected"],
        sys.labels,
    )


def final_state(sys, x0, sig=None, span=(0.0, 1.0), opts=None) -> np.ndarray:
    """Terminal state of :func:`integrate` without storing the trajectory."""
    x = None
    for _, x, _ in iter_steps(sys, x0, sig, span, opts):
        pass
    return x


def conservation_report(traj: Trajectory, integrals: Sequence[ScalarObservable]) -> dict:
    """Drift of each integral along ``traj`` relative to its initial value."""
    if len(traj) == 0:
        raise ValueError("empty trajectory")
    report = {}
    for k, F in enumerate(integrals):
        values = np.array([F(x) for x in traj.states])
        initial = float(values[0])
        drift = float(np.max(np.abs(values - initial)))
        rel = drift / abs(initial) if initial != 0.0 else drift
        report[F.label or f"I{k + 1}"] = {"initial": initial, "max_abs_drift": drift, "max_rel_drift": rel}
    return report
