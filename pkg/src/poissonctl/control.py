"""Control-affine systems ``x' = f(x) + sum_i g_i(x) u_i`` with box-bounded,
piecewise-constant controls."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import BoundsError, DimensionError, GuardViolation, SignalSpanError
from .poisson import PoissonStructure, ScalarObservable, VectorField, as_state

TWO_PI = 2.0 * np.pi


@dataclass(frozen=True)
class Box:
    lower: np.ndarray
    upper: np.ndarray

    def __post_init__(self):
        lo = np.array(self.lower, dtype=float).reshape(-1)
        hi = np.array(self.upper, dtype=float).reshape(-1)
        if lo.shape != hi.shape:
            raise DimensionError("box bounds have different lengths")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite")
        if np.any(lo > hi):
            raise ValueError("box lower bound exceeds upper bound")
        lo.setflags(write=False)
        hi.setflags(write=False)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def symmetric(cls, m: int, bound: float = 1.0) -> "Box":
        return cls(-bound * np.ones(m), bound * np.ones(m))

    @property
    def dim(self) -> int:
        return self.lower.shape[0]

    def contains(self, u) -> bool:
        u = np.asarray(u, dtype=float)
        return u.shape == self.lower.shape and bool(np.all(u >= self.lower) and np.all(u <= self.upper))

    def check(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float).reshape(-1)
        if u.shape != self.lower.shape:
            raise DimensionError(f"control has dimension {u.shape[0]}, box has {self.dim}")
        if not self.contains(u):
            raise BoundsError(f"control {u.tolist()} outside box [{self.lower.tolist()}, {self.upper.tolist()}]")
        return u

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lower, self.upper)


def _always_valid(x) -> bool:
    return True


@dataclass(frozen=True)
class ControlAffineSystem:
    """Drift plus control fields on an open subset of R^n.

    ``integrals`` are the known first integrals of the uncontrolled drift;
    ``casimirs`` is the subset of them that are Casimirs of ``structure``
    (conserved by every Hamiltonian drift, not only this one).
    ``bracket_hints`` lists bracket words (see :mod:`poissonctl.larc`) that are
    known to complete the rank; the rank check tries them before enumerating.
    """

    dim: int
    drift: VectorField
    controls: tuple = ()
    bounds: Optional[Box] = None
    guard: Callable[[np.ndarray], bool] = _always_valid
    structure: Optional[PoissonStructure] = None
    hamiltonian: Optional[ScalarObservable] = None
    integrals: tuple = ()
    casimirs: tuple = ()
    angular: tuple = ()
    labels: tuple = ()
    name: str = ""
    bracket_hints: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "controls", tuple(self.controls))
        object.__setattr__(self, "integrals", tuple(self.integrals))
        object.__setattr__(self, "casimirs", tuple(self.casimirs))
        object.__setattr__(self, "bracket_hints", tuple(self.bracket_hints))
        if self.bounds is None:
            object.__setattr__(self, "bounds", Box.symmetric(len(self.controls)))
        if self.bounds.dim != len(self.controls):
            raise DimensionError(f"{len(self.controls)} control fields but a {self.bounds.dim}-dimensional box")
        angular = tuple(bool(a) for a in self.angular) or (False,) * self.dim
        if len(angular) != self.dim:
            raise DimensionError("angular mask length differs from state dimension")
        object.__setattr__(self, "angular", angular)
        labels = tuple(self.labels) or tuple(f"x{i + 1}" for i in range(self.dim))
        if len(labels) != self.dim:
            raise DimensionError("coordinate labels length differs from state dimension")
        object.__setattr__(self, "labels", labels)
        if self.structure is not None and self.structure.dim != self.dim:
            raise DimensionError("structure dimension differs from system dimension")

    @property
    def m(self) -> int:
        return len(self.controls)

    @property
    def angular_mask(self) -> np.ndarray:
        return np.array(self.angular, dtype=bool)

    def is_valid(self, x) -> bool:
        x = np.asarray(x, dtype=float)
        return bool(x.shape == (self.dim,) and np.all(np.isfinite(x)) and self.guard(x))

    def check_state(self, x) -> np.ndarray:
        x = as_state(x, self.dim)
        if not self.guard(x):
            raise GuardViolation(f"state {x.tolist()} violates the domain guard of {self.name or 'system'}")
        return x

    def control_matrix(self, x) -> np.ndarray:
        """Matrix whose columns are ``g_i(x)``."""
        if not self.controls:
            return np.zeros((self.dim, 0))
        return np.stack([g(x) for g in self.controls], axis=-1)

    def with_bounds(self, bounds: Box) -> "ControlAffineSystem":
        return replace(self, bounds=bounds)

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce angular coordinates into [0, 2pi)."""
        if not any(self.angular):
            return x
        x = x.copy()
        mask = self.angular_mask
        x[mask] = np.mod(x[mask], TWO_PI)
        # mod can round up to exactly 2pi for tiny negative inputs
        x[mask] = np.where(x[mask] >= TWO_PI, 0.0, x[mask])
        return x

    def difference(self, x, y) -> np.ndarray:
        """``x - y`` with angular components taken as the shortest signed arc."""
        d = np.asarray(x, dtype=float) - np.asarray(y, dtype=float)
        if any(self.angular):
            mask = self.angular_mask
            d[mask] = np.mod(d[mask] + np.pi, TWO_PI) - np.pi
        return d

    def distance(self, x, y, weights=None) -> float:
        d = self.difference(x, y)
        if weights is not None:
            d = d * np.sqrt(np.asarray(weights, dtype=float))
        return float(np.linalg.norm(d))


def rhs(sys: ControlAffineSystem, x, u=None) -> np.ndarray:
    """``drift(x) + sum_i u_i g_i(x)`` after checking guard and bounds."""
    x = sys.check_state(x)
    if u is None:
        u = np.zeros(sys.m)
    u = sys.bounds.check(u)
    return _rhs_unchecked(sys, x, u)


def _rhs_unchecked(sys: ControlAffineSystem, x, u) -> np.ndarray:
    v = sys.drift(x)
    for ui, g in zip(u, sys.controls):
        if ui != 0.0:
            v = v + ui * g(x)
    return v


@dataclass(frozen=True)
class ControlSignal:
    """Piecewise-constant control: ``values[k]`` on ``[breakpoints[k], breakpoints[k+1])``."""

    breakpoints: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.array(self.breakpoints, dtype=float).reshape(-1)
        if t.shape[0] < 1:
            raise ValueError("a signal needs at least one breakpoint")
        if np.any(np.diff(t) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        vals = np.array(self.values, dtype=float)
        if vals.size == 0:
            m = vals.shape[1] if vals.ndim == 2 else 0
            vals = vals.reshape(0, m)
        if vals.ndim != 2 or vals.shape[0] != t.shape[0] - 1:
            raise ValueError(f"{t.shape[0]} breakpoints need {t.shape[0] - 1} control values")
        if not np.all(np.isfinite(vals)):
            raise ValueError("control values must be finite")
        t.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "breakpoints", t)
        object.__setattr__(self, "values", vals)

    @classmethod
    def constant(cls, u, t0: float, t1: float) -> "ControlSignal":
        return cls([t0, t1], [np.asarray(u, dtype=float)])

    @classmethod
    def empty(cls, t0: float = 0.0, m: int = 0) -> "ControlSignal":
        return cls([t0], np.zeros((0, m)))

    @property
    def m(self) -> int:
        return self.values.shape[1]

    @property
    def pieces(self) -> int:
        return self.values.shape[0]

    @property
    def span(self) -> tuple[float, float]:
        return float(self.breakpoints[0]), float(self.breakpoints[-1])

    def check_bounds(self, box: Box) -> None:
        for u in self.values:
            box.check(u)

    def to_dict(self) -> dict:
        return {"breakpoints": [float(t) for t in self.breakpoints], "values": [[float(v) for v in u] for u in self.values]}

    @classmethod
    def from_dict(cls, data: dict, m: Optional[int] = None) -> "ControlSignal":
        """Parse the JSON form; ``m`` fixes the input dimension of a signal with no pieces."""
        values = data["values"]
        if m is not None and len(values) == 0:
            values = np.zeros((0, m))
        return cls(data["breakpoints"], values)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str, m: Optional[int] = None) -> "ControlSignal":
        return cls.from_dict(json.loads(text), m)


def signal_value(sig: ControlSignal, t: float) -> np.ndarray:
    t0, t1 = sig.span
    if not (t0 <= t < t1):
        raise SignalSpanError(f"time {t} outside signal span [{t0}, {t1})")
    k = int(np.searchsorted(sig.breakpoints, t, side="right")) - 1
    return sig.values[k].copy()


def concatenate_signals(pieces: Sequence[np.ndarray], dt: float, m: int, t0: float = 0.0) -> ControlSignal:
    """Signal made of consecutive constant pieces of equal duration ``dt``."""
    if not pieces:
        return ControlSignal.empty(t0, m)
    t = t0 + dt * np.arange(len(pieces) + 1)
    return ControlSignal(t, np.asarray(pieces, dtype=float).reshape(len(pieces), m))
