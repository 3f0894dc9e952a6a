"""Built-in example systems.

Reduced controlled systems:

* ``vortex_reduced``: three point vortices in the plane after reduction by the
  Euclidean group, coordinates ``(a1, a2, a3)``, controls along each axis.
* ``three_wave_reduced``: resonant three-wave interaction reduced by a
  two-torus, coordinates ``(q, p, a, b)`` with ``a, b > 0``, controls on
  ``q``, ``p`` and ``b`` only.
* ``coupled_bodies``: two planar rigid bodies joined at a hinge, reduced by the
  overall rotation, coordinates ``(theta, mu1, mu2)`` with ``theta`` an angle.

Unreduced systems (``vortex_unreduced``, ``three_wave_unreduced``) come with
their momentum maps and are used for conservation and properness checks.

Two printed formulas for these models carry sign slips that break the
Hamiltonian structure; the helpers ``vortex_printed_drift`` and
``three_wave_printed_structure`` reproduce them verbatim so that the test
suite can show why the shipped fields differ.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .control import Box, ControlAffineSystem
from .errors import SamplerExhausted
from .poisson import PoissonStructure, ScalarObservable, VectorField, coordinate_field

DEFAULT_MARGIN = 1e-6


# ---------------------------------------------------------------------------
# point vortices


@dataclass(frozen=True)
class VortexParams:
    gamma: tuple = (1.0, 1.0, 1.0)

    def __post_init__(self):
        g = tuple(float(v) for v in self.gamma)
        if len(g) != 3:
            raise ValueError("three circulations are required")
        if any(v == 0.0 or not math.isfinite(v) for v in g):
            raise ValueError("circulations must be finite and non-zero")
        object.__setattr__(self, "gamma", g)

    @property
    def pair_products(self) -> tuple[float, float, float]:
        g1, g2, g3 = self.gamma
        return g1 * g2, g1 * g3, g2 * g3


def _vortex_parts(a):
    r = math.sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2])
    return r, a[2] + r, -a[2] + r, -a[0] + r


def vortex_structure_matrix(a) -> np.ndarray:
    a1, a2, a3 = a
    r = math.sqrt(a1 * a1 + a2 * a2 + a3 * a3)
    return 4.0 * np.array(
        [
            [0.0, 2 * a3, -2 * a2],
            [-2 * a3, 0.0, 2 * a1 - r],
            [2 * a2, -2 * a1 + r, 0.0],
        ]
    )


def vortex_hamiltonian(p: VortexParams) -> ScalarObservable:
    g12, g13, g23 = p.pair_products

    def H(a):
        _, P, M, N = _vortex_parts(a)
        return -(g12 * math.log(P / 2) + g13 * math.log(M / 2) + g23 * math.log(N)) / (4 * math.pi)

    def grad(a):
        r, P, M, N = _vortex_parts(a)
        u = np.asarray(a, dtype=float) / r
        dP = u + np.array([0.0, 0.0, 1.0])
        dM = u - np.array([0.0, 0.0, 1.0])
        dN = u - np.array([1.0, 0.0, 0.0])
        return -(g12 * dP / P + g13 * dM / M + g23 * dN / N) / (4 * math.pi)

    return ScalarObservable(H, grad, "H")


def vortex_drift(p: VortexParams) -> Callable[[np.ndarray], np.ndarray]:
    """Reduced vortex equations in the form ``J(a) grad H(a)``."""
    g12, g13, g23 = p.pair_products

    def f(a):
        a1, a2, a3 = a
        r, P, M, N = _vortex_parts(a)
        return np.array(
            [
                2 / math.pi * (g12 * a2 / P - g13 * a2 / M),
                (g12 * (-2 * a1 + a3 + r) / P + g13 * (2 * a1 + a3 - r) / M - g23 * a3 / N) / math.pi,
                (g23 * a2 / N - g12 * a2 / P - g13 * a2 / M) / math.pi,
            ]
        )

    return f


def vortex_printed_drift(p: VortexParams, a) -> np.ndarray:
    """The reduced equations with ``+`` on the ``G2 G3 a3`` term of the second row.

    This version is not ``J grad H`` and does not conserve ``H``.
    """
    g12, g13, g23 = p.pair_products
    a1, a2, a3 = a
    r, P, M, N = _vortex_parts(a)
    out = vortex_drift(p)(a)
    out[1] = (g12 * (-2 * a1 + a3 + r) / P + g13 * (2 * a1 + a3 - r) / M + g23 * a3 / N) / math.pi
    return out


def vortex_guard(margin: float = DEFAULT_MARGIN) -> Callable[[np.ndarray], bool]:
    def guard(a):
        r, P, M, N = _vortex_parts(a)
        return r > margin and P > margin and M > margin and N > margin

    return guard


def vortex_reduced(p: Optional[VortexParams] = None, margin: float = DEFAULT_MARGIN, bound: float = 1.0) -> ControlAffineSystem:
    p = p or VortexParams()
    structure = PoissonStructure(3, vortex_structure_matrix, "vortex")
    H = vortex_hamiltonian(p)
    return ControlAffineSystem(
        dim=3,
        drift=VectorField(vortex_drift(p), None, "f"),
        controls=tuple(coordinate_field(3, i, f"g{i + 1}") for i in range(3)),
        bounds=Box.symmetric(3, bound),
        guard=vortex_guard(margin),
        structure=structure,
        hamiltonian=H,
        integrals=(H,),
        casimirs=(),
        labels=("a1", "a2", "a3"),
        name="vortex",
    )


@dataclass(frozen=True)
class UnreducedSystem:
    """An uncontrolled Hamiltonian system together with its symmetry data.

    ``momentum_map`` is the momentum map as usually written for the model;
    ``conserved_momenta`` are the generators of the symmetry action that the
    flow actually conserves (they coincide for the vortex model).
    """

    system: ControlAffineSystem
    momentum_map: tuple
    conserved_momenta: tuple

    def momentum(self, x) -> np.ndarray:
        return np.array([J(x) for J in self.momentum_map])


def _canonical_structure(weights) -> Callable[[np.ndarray], np.ndarray]:
    w = np.asarray(weights, dtype=float)
    k = w.shape[0]
    J = np.zeros((2 * k, 2 * k))
    J[:k, k:] = np.diag(w)
    J[k:, :k] = -np.diag(w)
    J.setflags(write=False)
    return lambda x: J.copy()


def vortex_positions(x) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    return x[:3], x[3:]


def pack_vortices(points) -> np.ndarray:
    """``[(x1, y1), (x2, y2), (x3, y3)]`` -> ``(x1, x2, x3, y1, y2, y3)``."""
    pts = np.asarray(points, dtype=float).reshape(3, 2)
    return np.concatenate([pts[:, 0], pts[:, 1]])


def vortex_unreduced(p: Optional[VortexParams] = None, margin: float = DEFAULT_MARGIN) -> UnreducedSystem:
    """Three point vortices on R^6 in the Kirchhoff canonical form.

    State layout is ``(x1, x2, x3, y1, y2, y3)``; the equations are
    ``G_j x_j' = dH/dy_j`` and ``G_j y_j' = -dH/dx_j``.
    """
    p = p or VortexParams()
    G = np.array(p.gamma)
    pairs = [(0, 1), (0, 2), (1, 2)]

    def H(x):
        xs, ys = vortex_positions(x)
        total = 0.0
        for i, j in pairs:
            total += G[i] * G[j] * math.log(math.hypot(xs[i] - xs[j], ys[i] - ys[j]))
        return -total / (2 * math.pi)

    def gradH(x):
        xs, ys = vortex_positions(x)
        gx = np.zeros(3)
        gy = np.zeros(3)
        for i, j in pairs:
            dx, dy = xs[i] - xs[j], ys[i] - ys[j]
            r2 = dx * dx + dy * dy
            c = -G[i] * G[j] / (2 * math.pi * r2)
            gx[i] += c * dx
            gx[j] -= c * dx
            gy[i] += c * dy
            gy[j] -= c * dy
        return np.concatenate([gx, gy])

    def drift(x):
        g = gradH(x)
        return np.concatenate([g[3:] / G, -g[:3] / G])

    def guard(x):
        xs, ys = vortex_positions(x)
        return all(math.hypot(xs[i] - xs[j], ys[i] - ys[j]) > margin for i, j in pairs)

    J1 = ScalarObservable(
        lambda x: -0.5 * float(np.sum(G * (x[:3] ** 2 + x[3:] ** 2))),
        lambda x: np.concatenate([-G * x[:3], -G * x[3:]]),
        "J1",
    )
    J2 = ScalarObservable(lambda x: float(np.sum(G * x[3:])), lambda x: np.concatenate([np.zeros(3), G]), "J2")
    J3 = ScalarObservable(lambda x: -float(np.sum(G * x[:3])), lambda x: np.concatenate([-G, np.zeros(3)]), "J3")
    Hobs = ScalarObservable(H, gradH, "H")
    sys = ControlAffineSystem(
        dim=6,
        drift=VectorField(drift, None, "f"),
        controls=(),
        guard=guard,
        structure=PoissonStructure(6, _canonical_structure(1.0 / G), "vortex-canonical"),
        hamiltonian=Hobs,
        integrals=(Hobs, J1, J2, J3),
        labels=("x1", "x2", "x3", "y1", "y2", "y3"),
        name="vortex-unreduced",
    )
    return UnreducedSystem(sys, (J1, J2, J3), (J1, J2, J3))


# ---------------------------------------------------------------------------
# three-wave interaction


def three_wave_structure_matrix(x) -> np.ndarray:
    q, p, a, b = x
    return np.array(
        [
            [0.0, -1.0, -p / a, 2 * p / b],
            [1.0, 0.0, q / a, -2 * q / b],
            [p / a, -q / a, 0.0, 0.0],
            [-2 * p / b, 2 * q / b, 0.0, 0.0],
        ]
    )


def three_wave_printed_structure(x) -> np.ndarray:
    """The bracket matrix with ``+1`` at (q, p) and ``-1`` at (p, q).

    Its Hamiltonian field does not reproduce the reduced equations and does
    not conserve ``q^2 + p^2 + a^2 + b^2``.
    """
    J = three_wave_structure_matrix(x)
    J[0, 1], J[1, 0] = 1.0, -1.0
    return J


def three_wave_drift(x) -> np.ndarray:
    q, p, a, b = x
    return np.array(
        [
            q * p * b / a - 2 * q * p * a / b,
            -a * b - q * q * b / a + 2 * q * q * a / b,
            -p * b,
            2 * p * a,
        ]
    )


def three_wave_drift_jacobian(x) -> np.ndarray:
    q, p, a, b = x
    return np.array(
        [
            [p * b / a - 2 * p * a / b, q * b / a - 2 * q * a / b, -q * p * b / a**2 - 2 * q * p / b, q * p / a + 2 * q * p * a / b**2],
            [-2 * q * b / a + 4 * q * a / b, 0.0, -b + q * q * b / a**2 + 2 * q * q / b, -a - q * q / a - 2 * q * q * a / b**2],
            [0.0, -b, 0.0, -p],
            [0.0, 2 * a, 2 * p, 0.0],
        ]
    )


def three_wave_observables() -> dict[str, ScalarObservable]:
    H = ScalarObservable(lambda x: -x[2] * x[3] * x[0], lambda x: np.array([-x[2] * x[3], 0.0, -x[3] * x[0], -x[2] * x[0]]), "H")
    V = ScalarObservable(lambda x: float(np.dot(x, x)), lambda x: 2.0 * np.asarray(x, dtype=float), "V")
    W = ScalarObservable(lambda x: 2 * x[2] ** 2 + x[3] ** 2, lambda x: np.array([0.0, 0.0, 4 * x[2], 2 * x[3]]), "W")
    return {"H": H, "V": V, "W": W}


def three_wave_reduced(margin: float = DEFAULT_MARGIN, bound: float = 1.0) -> ControlAffineSystem:
    obs = three_wave_observables()
    n = 4
    return ControlAffineSystem(
        dim=n,
        drift=VectorField(three_wave_drift, three_wave_drift_jacobian, "f"),
        controls=(coordinate_field(n, 0, "g1"), coordinate_field(n, 1, "g2"), coordinate_field(n, 3, "g3")),
        bounds=Box.symmetric(3, bound),
        guard=lambda x: x[2] > margin and x[3] > margin,
        structure=PoissonStructure(n, three_wave_structure_matrix, "three-wave"),
        hamiltonian=obs["H"],
        integrals=(obs["H"], obs["V"], obs["W"]),
        casimirs=(obs["V"], obs["W"]),
        labels=("q", "p", "a", "b"),
        name="threewave",
        bracket_hints=("[g3,[g2,f]]",),
    )


THREE_WAVE_S = (1.0, 1.0, 1.0)
THREE_WAVE_GAMMA = (1.0, 1.0, -2.0)


def three_wave_unreduced(margin: float = DEFAULT_MARGIN) -> UnreducedSystem:
    """Three-wave interaction on C^3 = R^6, state ``(q1, q2, q3, p1, p2, p3)``.

    ``H = -Re(conj(z1) z2 conj(z3))`` with ``z_j = q_j + i p_j`` and canonical
    equations ``q_j' = s_j g_j dH/dp_j``, ``p_j' = -s_j g_j dH/dq_j`` for
    ``s = (1, 1, 1)``, ``g = (1, 1, -2)``.
    """
    w = np.array(THREE_WAVE_S) * np.array(THREE_WAVE_GAMMA)

    def z(x):
        return x[:3] + 1j * x[3:]

    def H(x):
        z1, z2, z3 = z(x)
        return -float((np.conj(z1) * z2 * np.conj(z3)).real)

    def gradH(x):
        z1, z2, z3 = z(x)
        c1 = z2 * np.conj(z3)
        c2 = np.conj(z1) * np.conj(z3)
        c3 = np.conj(z1) * z2
        dq = np.array([-c1.real, -c2.real, -c3.real])
        dp = np.array([-c1.imag, c2.imag, -c3.imag])
        return np.concatenate([dq, dp])

    def drift(x):
        g = gradH(x)
        return np.concatenate([w * g[3:], -w * g[:3]])

    def sq(x, j):
        return x[j] ** 2 + x[3 + j] ** 2

    def dsq(x, j):
        g = np.zeros(6)
        g[j] = 2 * x[j]
        g[3 + j] = 2 * x[3 + j]
        return g

    J1 = ScalarObservable(lambda x: 0.5 * (sq(x, 0) + sq(x, 1)), lambda x: 0.5 * (dsq(x, 0) + dsq(x, 1)), "J1")
    J2 = ScalarObservable(lambda x: 0.5 * (sq(x, 0) - sq(x, 1)), lambda x: 0.5 * (dsq(x, 0) - dsq(x, 1)), "J2")
    K2 = ScalarObservable(lambda x: 0.5 * sq(x, 1) - 0.25 * sq(x, 2), lambda x: 0.5 * dsq(x, 1) - 0.25 * dsq(x, 2), "K2")
    Hobs = ScalarObservable(H, gradH, "H")
    sys = ControlAffineSystem(
        dim=6,
        drift=VectorField(drift, None, "f"),
        controls=(),
        guard=lambda x: sq(x, 0) > margin**2 and sq(x, 2) > margin**2,
        structure=PoissonStructure(6, _canonical_structure(w), "three-wave-canonical"),
        hamiltonian=Hobs,
        integrals=(Hobs, J1, K2),
        labels=("q1", "q2", "q3", "p1", "p2", "p3"),
        name="threewave-unreduced",
    )
    return UnreducedSystem(sys, (J1, J2), (J1, K2))


def pack_waves(zs) -> np.ndarray:
    zs = np.asarray(zs, dtype=complex).reshape(3)
    return np.concatenate([zs.real, zs.imag])


# ---------------------------------------------------------------------------
# coupled planar rigid bodies


@dataclass(frozen=True)
class RigidBodyParams:
    m: tuple = (1.0, 1.0)
    d: tuple = (1.0, 1.0)
    I: tuple = (1.0, 1.0)

    def __post_init__(self):
        for name in ("m", "d", "I"):
            vals = tuple(float(v) for v in getattr(self, name))
            if len(vals) != 2 or not all(math.isfinite(v) for v in vals):
                raise ValueError(f"{name} needs two finite entries")
            object.__setattr__(self, name, vals)
        if min(self.m) <= 0 or min(self.I) <= 0:
            raise ValueError("masses and moments of inertia must be positive")
        if min(self.d) < 0:
            raise ValueError("hinge distances must be non-negative")

    @property
    def eps(self) -> float:
        m1, m2 = self.m
        return m1 * m2 / (m1 + m2)

    @property
    def I_aug(self) -> tuple[float, float]:
        e = self.eps
        return self.I[0] + e * self.d[0] ** 2, self.I[1] + e * self.d[1] ** 2

    def lam(self, theta: float) -> float:
        return self.d[0] * self.d[1] * math.cos(theta)

    def dlam(self, theta: float) -> float:
        return -self.d[0] * self.d[1] * math.sin(theta)

    def delta(self, theta: float) -> float:
        I1, I2 = self.I_aug
        return I1 * I2 - (self.eps * self.lam(theta)) ** 2

    @property
    def delta_lower_bound(self) -> float:
        e = self.eps
        (I1, I2), (d1, d2) = self.I, self.d
        return I1 * I2 + I1 * e * d2**2 + I2 * e * d1**2

    @property
    def delta_max(self) -> float:
        I1, I2 = self.I_aug
        return I1 * I2


def bodies_hamiltonian(p: RigidBodyParams) -> ScalarObservable:
    I1, I2 = p.I_aug
    e = p.eps

    def H(x):
        th, m1, m2 = x
        lam = p.lam(th)
        return (I2 * m1 * m1 - 2 * e * lam * m1 * m2 + I1 * m2 * m2) / (2 * p.delta(th))

    def grad(x):
        th, m1, m2 = x
        lam, dlam, D = p.lam(th), p.dlam(th), p.delta(th)
        N = I2 * m1 * m1 - 2 * e * lam * m1 * m2 + I1 * m2 * m2
        dN = -2 * e * dlam * m1 * m2
        dD = -2 * e * e * lam * dlam
        return np.array([dN / (2 * D) - N * dD / (2 * D * D), (I2 * m1 - e * lam * m2) / D, (I1 * m2 - e * lam * m1) / D])

    return ScalarObservable(H, grad, "H")


BODIES_STRUCTURE = np.array([[0.0, -1.0, 1.0], [1.0, 0.0, 0.0], [-1.0, 0.0, 0.0]])


def coupled_bodies(p: Optional[RigidBodyParams] = None, bound: float = 1.0) -> ControlAffineSystem:
    p = p or RigidBodyParams()
    H = bodies_hamiltonian(p)

    def drift(x):
        Ht, H1, H2 = H.grad(x)
        return np.array([-H1 + H2, Ht, -Ht])

    total = ScalarObservable(lambda x: x[1] + x[2], lambda x: np.array([0.0, 1.0, 1.0]), "mu1+mu2")
    return ControlAffineSystem(
        dim=3,
        drift=VectorField(drift, None, "f"),
        controls=tuple(coordinate_field(3, i, f"g{i + 1}") for i in range(3)),
        bounds=Box.symmetric(3, bound),
        structure=PoissonStructure(3, lambda x: BODIES_STRUCTURE.copy(), "bodies"),
        hamiltonian=H,
        integrals=(H, total),
        casimirs=(total,),
        angular=(True, False, False),
        labels=("theta", "mu1", "mu2"),
        name="bodies",
    )


def bodies_proper_coordinates(p: RigidBodyParams, state) -> np.ndarray:
    """``(theta, mu1, mu2) -> (theta, X, Y)`` with ``H = (X^2 + Y^2) / (2 Delta)``."""
    th, m1, m2 = np.asarray(state, dtype=float)
    I1, I2 = p.I_aug
    el = p.eps * p.lam(th)
    X = math.sqrt(I2) * m1 - el / math.sqrt(I2) * m2
    Y = math.sqrt(I1 - el * el / I2) * m2
    return np.array([th, X, Y])


def bodies_from_proper_coordinates(p: RigidBodyParams, coords) -> np.ndarray:
    th, X, Y = np.asarray(coords, dtype=float)
    I1, I2 = p.I_aug
    el = p.eps * p.lam(th)
    m2 = Y / math.sqrt(I1 - el * el / I2)
    m1 = (X + el / math.sqrt(I2) * m2) / math.sqrt(I2)
    return np.array([th, m1, m2])


# ---------------------------------------------------------------------------
# parameter files and sampling regions

SYSTEM_NAMES = ("vortex", "threewave", "bodies")


def system_from_params(params: dict) -> ControlAffineSystem:
    """Build a reduced system from a parameter-file dictionary."""
    name = params.get("system")
    margin = float(params.get("margin", DEFAULT_MARGIN))
    bound = float(params.get("bound", 1.0))
    if margin <= 0:
        raise ValueError("margin must be positive")
    if name == "vortex":
        return vortex_reduced(VortexParams(tuple(params.get("gamma", (1.0, 1.0, 1.0)))), margin, bound)
    if name == "threewave":
        return three_wave_reduced(margin, bound)
    if name == "bodies":
        rp = RigidBodyParams(
            tuple(params.get("m", (1.0, 1.0))), tuple(params.get("d", (1.0, 1.0))), tuple(params.get("I", (1.0, 1.0)))
        )
        return coupled_bodies(rp, bound)
    raise ValueError(f"unknown system {name!r}; expected one of {SYSTEM_NAMES}")


def load_params(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict):
        raise ValueError("parameter file must hold a JSON object")
    return data


def box_sampler(sys: ControlAffineSystem, lower, upper, max_tries: int = 10_000):
    """Rejection sampler of guard-valid states, uniform in a box."""
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)

    def sample(rng: np.random.Generator) -> np.ndarray:
        for _ in range(max_tries):
            x = rng.uniform(lower, upper)
            if sys.is_valid(x):
                return x
        raise SamplerExhausted(f"no guard-valid state found in {max_tries} draws")

    return sample


# Regions used by scans and the command line.
SAMPLING_REGIONS = {
    "vortex": ((-2.0, -2.0, -2.0), (2.0, 2.0, 2.0)),
    "threewave": ((-2.0, -2.0, 0.1, 0.1), (2.0, 2.0, 2.0, 2.0)),
    "bodies": ((0.0, -2.0, -2.0), (2 * math.pi, 2.0, 2.0)),
}


def default_sampler(sys: ControlAffineSystem):
    lo, hi = SAMPLING_REGIONS[sys.name]
    return box_sampler(sys, lo, hi)
