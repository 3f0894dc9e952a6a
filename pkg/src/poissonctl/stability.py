"""Empirical recurrence, nonwandering and properness probes.

These produce evidence at finitely many points and radii; none of them proves
Poisson stability of a field or properness of a map.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .control import ControlAffineSystem
from .errors import GuardViolation, SamplerExhausted
from .integrate import IntegratorOptions, iter_steps

# Return detection only sees accepted steps, so the step length is capped to a
# fraction of the probe radius divided by the drift speed (see _probe_options).
_RETURN_STEP_FRACTION = 0.25


def _probe_options(sys: ControlAffineSystem, x0, radius: float, opts: Optional[IntegratorOptions]) -> IntegratorOptions:
    if opts is not None:
        return opts
    speed = float(np.linalg.norm(sys.drift(np.asarray(x0, dtype=float))))
    max_step = _RETURN_STEP_FRACTION * radius / speed if speed > 0 else np.inf
    return IntegratorOptions(max_step=max_step)


def first_return(
    sys: ControlAffineSystem,
    start,
    center,
    radius: float,
    T_min: float,
    T_max: float,
    opts: IntegratorOptions,
) -> Optional[tuple[float, float]]:
    """First accepted-step time ``t > T_min`` with ``dist(x(t), center) < radius``.

    Integrates the uncontrolled drift from ``start``; returns ``(t, dist)`` or None.
    """
    for t, x, _ in iter_steps(sys, start, None, (0.0, T_max), opts):
        if t > T_min:
            d = sys.distance(x, center)
            if d < radius:
                return float(t), float(d)
    return None


def recurrence_probe(
    sys: ControlAffineSystem,
    x0,
    radius: float,
    T_min: float,
    T_max: float,
    opts: Optional[IntegratorOptions] = None,
) -> Optional[float]:
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not T_min < T_max:
        raise ValueError("T_min must be smaller than T_max")
    x0 = sys.check_state(x0)
    hit = first_return(sys, x0, x0, radius, T_min, T_max, _probe_options(sys, x0, radius, opts))
    return None if hit is None else hit[0]


@dataclass
class NonwanderingEvidence:
    sample: np.ndarray
    index: int
    time: float
    dist: float

    def to_dict(self) -> dict:
        return {"sample": [float(v) for v in self.sample], "index": self.index, "time": self.time, "dist": self.dist}


def ball_samples(sys: ControlAffineSystem, center, radius: float, n: int, rng: np.random.Generator, max_tries: int = 1000):
    """``n`` guard-valid points uniform in the ball; the first one is ``center``."""
    center = np.asarray(center, dtype=float)
    out = [center.copy()]
    tries = 0
    while len(out) < n:
        tries += 1
        if tries > max_tries * n:
            raise SamplerExhausted(f"could not draw {n} guard-valid points in the radius-{radius} ball")
        direction = rng.standard_normal(sys.dim)
        direction /= np.linalg.norm(direction)
        y = center + radius * rng.uniform() ** (1.0 / sys.dim) * direction
        y = sys.wrap(y)
        if sys.is_valid(y) and sys.distance(y, center) < radius:
            out.append(y)
    return out


def nonwandering_probe(
    sys: ControlAffineSystem,
    x0,
    radius: float,
    T_min: float,
    T_max: float,
    n_samples: int = 16,
    seed: int = 0,
    opts: Optional[IntegratorOptions] = None,
) -> Optional[NonwanderingEvidence]:
    """Look for a point of the ball whose orbit re-enters the ball after ``T_min``.

    Sample 0 is ``x0``. A sample whose orbit leaves the domain contributes the
    part of its orbit before the exit.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    if not radius > 0:
        raise ValueError("radius must be positive")
    if not T_min < T_max:
        raise ValueError("T_min must be smaller than T_max")
    x0 = sys.check_state(x0)
    rng = np.random.default_rng(seed)
    samples = ball_samples(sys, x0, radius, n_samples, rng)
    for k, y in enumerate(samples):
        o = _probe_options(sys, y, radius, opts)
        try:
            hit = first_return(sys, y, x0, radius, T_min, T_max, o)
        except GuardViolation:
            continue
        if hit is not None:
            return NonwanderingEvidence(y, k, float(hit[0]), float(hit[1]))
    return None


@dataclass
class PropernessProfile:
    radii: np.ndarray
    min_norms: np.ndarray

    @property
    def increasing(self) -> bool:
        return bool(np.all(np.diff(self.min_norms) > 0))

    def to_dict(self) -> dict:
        return {"radii": [float(r) for r in self.radii], "min_norms": [float(v) for v in self.min_norms]}

    @classmethod
    def from_dict(cls, d: dict) -> "PropernessProfile":
        return cls(np.array(d["radii"], dtype=float), np.array(d["min_norms"], dtype=float))

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def sphere_sampler(dim: int, guard: Optional[Callable[[np.ndarray], bool]] = None, max_tries: int = 10_000):
    """Uniform sampler on the sphere ``||x|| = R`` in R^dim, optionally rejecting by ``guard``."""

    def sample(R: float, rng: np.random.Generator) -> np.ndarray:
        for _ in range(max_tries):
            v = rng.standard_normal(dim)
            x = R * v / np.linalg.norm(v)
            if guard is None or guard(x):
                return x
        raise SamplerExhausted(f"no guard-valid point found on the sphere of radius {R}")

    return sample


def properness_scan(
    F: Callable[[np.ndarray], object],
    sampler: Callable[[float, np.random.Generator], np.ndarray],
    radii: Sequence[float],
    n_per_sphere: int = 256,
    seed: int = 0,
) -> PropernessProfile:
    """Minimum of ``||F||`` over sampled points of each sphere.

    Sphere ``k`` draws from the stream ``(seed, k)``.
    """
    radii = np.asarray(radii, dtype=float)
    if radii.size == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be positive and strictly increasing")
    if n_per_sphere < 1:
        raise ValueError("n_per_sphere must be positive")
    mins = []
    for k, R in enumerate(radii):
        rng = np.random.default_rng([seed, k])
        best = np.inf
        for _ in range(n_per_sphere):
            val = np.linalg.norm(np.atleast_1d(np.asarray(F(sampler(R, rng)), dtype=float)))
            best = min(best, float(val))
        mins.append(best)
    return PropernessProfile(radii, np.array(mins))
