"""Poisson structures, Hamiltonian vector fields and structural diagnostics.

A Poisson structure on an open subset of R^n is stored as a state-dependent
antisymmetric matrix field ``J(x)``; the bracket of two functions is
``{F, G}(x) = grad F(x) . J(x) grad G(x)`` and the Hamiltonian vector field of
``H`` is ``J(x) grad H(x)``.

Derivatives that are not supplied analytically are taken by central finite
differences with the per-coordinate step ``cbrt(noise) * max(1, |x_i|)``, where
``noise`` is the relative accuracy of the function being differentiated
(machine epsilon for closed-form expressions).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DimensionError

EPS = float(np.finfo(float).eps)

Array = np.ndarray


def as_state(x, dim: Optional[int] = None) -> Array:
    """Coerce ``x`` to a finite float vector, optionally checking its length."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise DimensionError(f"state must be a 1-D vector, got shape {arr.shape}")
    if dim is not None and arr.shape[0] != dim:
        raise DimensionError(f"expected state of dimension {dim}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("state has non-finite entries")
    return arr


def fd_steps(x: Array, noise: float = EPS) -> Array:
    """Central-difference steps, rounded so that ``x +/- h`` is exactly representable."""
    h = np.cbrt(noise) * np.maximum(1.0, np.abs(x))
    return (x + h) - x


def fd_gradient(func: Callable[[Array], float], x: Array, noise: float = EPS) -> Array:
    x = np.asarray(x, dtype=float)
    h = fd_steps(x, noise)
    g = np.empty_like(x)
    for i in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        g[i] = (func(xp) - func(xm)) / (2.0 * h[i])
    return g


def fd_jacobian(func: Callable[[Array], Array], x: Array, noise: float = EPS) -> Array:
    """Jacobian ``D func(x)`` with column ``j`` the derivative along ``x_j``."""
    x = np.asarray(x, dtype=float)
    h = fd_steps(x, noise)
    cols = []
    for j in range(x.shape[0]):
        xp = x.copy()
        xm = x.copy()
        xp[j] += h[j]
        xm[j] -= h[j]
        cols.append((np.asarray(func(xp), dtype=float) - np.asarray(func(xm), dtype=float)) / (2.0 * h[j]))
    return np.stack(cols, axis=-1)


@dataclass(frozen=True)
class ScalarObservable:
    """A real function on state space with an optional analytic gradient."""

    func: Callable[[Array], float]
    gradient: Optional[Callable[[Array], Array]] = None
    label: str = ""

    def __call__(self, x) -> float:
        return float(self.func(np.asarray(x, dtype=float)))

    def grad(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if self.gradient is not None:
            return np.asarray(self.gradient(x), dtype=float)
        return fd_gradient(self.func, x)

    def scaled(self, c: float) -> "ScalarObservable":
        grad = None if self.gradient is None else (lambda x, g=self.gradient: c * np.asarray(g(x)))
        return ScalarObservable(lambda x, f=self.func: c * f(x), grad, f"{c}*{self.label}")


@dataclass(frozen=True)
class VectorField:
    """A vector field with an optional analytic Jacobian.

    ``noise`` is the relative accuracy of ``func``; fields that are themselves
    built from finite differences (nested Lie brackets) carry a larger value so
    that differentiating them again uses a wider, noise-matched stencil.
    """

    func: Callable[[Array], Array]
    jacobian: Optional[Callable[[Array], Array]] = None
    label: str = ""
    noise: float = EPS
    constant: bool = False

    def __call__(self, x) -> Array:
        return np.asarray(self.func(np.asarray(x, dtype=float)), dtype=float)

    def jac(self, x) -> Array:
        x = np.asarray(x, dtype=float)
        if self.jacobian is not None:
            return np.asarray(self.jacobian(x), dtype=float)
        return fd_jacobian(self.func, x, self.noise)

    @property
    def derivative_noise(self) -> float:
        """Accuracy of ``jac`` (analytic, or the optimum of a central stencil)."""
        if self.jacobian is not None:
            return self.noise
        return self.noise ** (2.0 / 3.0)

    def scaled(self, c: float) -> "VectorField":
        jac = None if self.jacobian is None else (lambda x, j=self.jacobian: c * np.asarray(j(x)))
        return VectorField(lambda x, f=self.func: c * np.asarray(f(x)), jac, f"{c}*{self.label}", self.noise, self.constant)


def constant_field(v, label: str = "") -> VectorField:
    v = np.array(v, dtype=float)
    v.setflags(write=False)
    n = v.shape[0]
    return VectorField(lambda x: v.copy(), lambda x: np.zeros((n, n)), label, EPS, True)


def coordinate_field(n: int, i: int, label: str = "") -> VectorField:
    """The coordinate vector field d/dx_i on R^n."""
    e = np.zeros(n)
    e[i] = 1.0
    return constant_field(e, label or f"e{i + 1}")


@dataclass(frozen=True)
class PoissonStructure:
    dim: int
    matrix_field: Callable[[Array], Array]
    label: str = ""

    def matrix(self, x) -> Array:
        return eval_structure_matrix(self, x)

    def bracket(self, F: ScalarObservable, G: ScalarObservable, x) -> float:
        x = as_state(x, self.dim)
        return float(F.grad(x) @ self.matrix(x) @ G.grad(x))


def eval_structure_matrix(ps: PoissonStructure, x) -> Array:
    x = as_state(x, ps.dim)
    J = np.asarray(ps.matrix_field(x), dtype=float)
    if J.shape != (ps.dim, ps.dim):
        raise DimensionError(f"structure matrix has shape {J.shape}, expected {(ps.dim, ps.dim)}")
    return J


def hamiltonian_field(ps: PoissonStructure, H: ScalarObservable) -> VectorField:
    """The field ``x -> J(x) grad H(x)``."""

    def func(x):
        return ps.matrix(x) @ H.grad(x)

    return VectorField(func, None, f"X_{H.label or 'H'}")


def structure_derivatives(ps: PoissonStructure, x) -> Array:
    """``dJ[l, j, k] = d J_jk / d x_l`` by central differences."""
    x = as_state(x, ps.dim)
    h = fd_steps(x)
    n = ps.dim
    dJ = np.empty((n, n, n))
    for l in range(n):
        xp = x.copy()
        xm = x.copy()
        xp[l] += h[l]
        xm[l] -= h[l]
        dJ[l] = (ps.matrix(xp) - ps.matrix(xm)) / (2.0 * h[l])
    return dJ


def jacobi_residual(ps: PoissonStructure, x) -> float:
    """Largest cyclic sum ``sum_l J_il d_l J_jk + J_jl d_l J_ki + J_kl d_l J_ij``."""
    x = as_state(x, ps.dim)
    J = ps.matrix(x)
    T = np.einsum("il,ljk->ijk", J, structure_derivatives(ps, x))
    S = T + np.einsum("jki->ijk", T) + np.einsum("kij->ijk", T)
    return float(np.max(np.abs(S))) if S.size else 0.0


def antisymmetry_defect(ps: PoissonStructure, x) -> float:
    J = ps.matrix(x)
    return float(np.max(np.abs(J + J.T))) if J.size else 0.0


def casimir_residual(ps: PoissonStructure, C: ScalarObservable, x) -> float:
    """``||J(x) grad C(x)||``; zero when ``C`` is a Casimir at ``x``."""
    x = as_state(x, ps.dim)
    return float(np.linalg.norm(ps.matrix(x) @ C.grad(x)))


def kernel_basis(ps: PoissonStructure, x, tol: float = 1e-8) -> list[Array]:
    """Orthonormal basis of the numerical nullspace of ``J(x)``.

    Singular values below ``tol * sigma_max`` count as zero. A vanishing matrix
    has the whole space as its kernel.
    """
    J = ps.matrix(x)
    _, s, vt = np.linalg.svd(J)
    smax = s[0] if s.size else 0.0
    if smax == 0.0:
        return [row for row in np.eye(ps.dim)]
    rank = int(np.sum(s > tol * smax))
    return [vt[i].copy() for i in range(rank, ps.dim)]
