"""Lie brackets of vector fields and the Lie algebra rank condition.

Bracket words are binary trees over the generators of a control-affine system:
leaf ``0`` is the drift ``f`` and leaf ``i`` (``1 <= i <= m``) is the control
field ``g_i``. The string form is ``f``, ``g2`` or ``[g3,[g2,f]]``.

The bracket convention is ``[X, Y](x) = DY(x) X(x) - DX(x) Y(x)``.
"""

from __future__ import annotations

import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .control import ControlAffineSystem
from .poisson import VectorField


@dataclass(frozen=True)
class BracketWord:
    leaf: Optional[int] = None
    left: Optional["BracketWord"] = None
    right: Optional["BracketWord"] = None

    def __post_init__(self):
        is_leaf = self.leaf is not None
        is_node = self.left is not None and self.right is not None
        if is_leaf == is_node:
            raise ValueError("a bracket word is either a leaf or a pair of sub-words")
        if is_leaf and self.leaf < 0:
            raise ValueError("generator indices are non-negative")

    @classmethod
    def gen(cls, i: int) -> "BracketWord":
        return cls(leaf=i)

    @classmethod
    def bracket(cls, left: "BracketWord", right: "BracketWord") -> "BracketWord":
        return cls(left=left, right=right)

    @property
    def depth(self) -> int:
        if self.leaf is not None:
            return 0
        return 1 + self.left.depth + self.right.depth

    @property
    def leaves(self) -> tuple[int, ...]:
        if self.leaf is not None:
            return (self.leaf,)
        return self.left.leaves + self.right.leaves

    def __str__(self) -> str:
        if self.leaf is not None:
            return "f" if self.leaf == 0 else f"g{self.leaf}"
        return f"[{self.left},{self.right}]"

    @classmethod
    def parse(cls, text: str) -> "BracketWord":
        tokens = re.findall(r"\[|\]|,|f|g\d+", text.replace(" ", ""))
        if "".join(tokens) != text.replace(" ", ""):
            raise ValueError(f"cannot parse bracket word {text!r}")
        pos = 0

        def word():
            nonlocal pos
            if pos >= len(tokens):
                raise ValueError(f"truncated bracket word {text!r}")
            tok = tokens[pos]
            pos += 1
            if tok == "f":
                return cls.gen(0)
            if tok.startswith("g"):
                idx = int(tok[1:])
                if idx < 1:
                    raise ValueError("control indices start at 1")
                return cls.gen(idx)
            if tok != "[":
                raise ValueError(f"unexpected token {tok!r} in {text!r}")
            left = word()
            if pos >= len(tokens) or tokens[pos] != ",":
                raise ValueError(f"expected ',' in {text!r}")
            pos += 1
            right = word()
            if pos >= len(tokens) or tokens[pos] != "]":
                raise ValueError(f"expected ']' in {text!r}")
            pos += 1
            return cls.bracket(left, right)

        result = word()
        if pos != len(tokens):
            raise ValueError(f"trailing characters in {text!r}")
        return result


def lie_bracket(X: VectorField, Y: VectorField, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return Y.jac(x) @ X(x) - X.jac(x) @ Y(x)


def bracket_field(X: VectorField, Y: VectorField) -> VectorField:
    label = f"[{X.label},{Y.label}]"
    if X.constant and Y.constant:
        return VectorField(
            lambda x: np.zeros(len(x)), lambda x: np.zeros((len(x), len(x))), label, X.noise, True
        )
    noise = max(X.derivative_noise, Y.derivative_noise)
    return VectorField(lambda x: lie_bracket(X, Y, x), None, label, noise)


def generator_field(sys: ControlAffineSystem, i: int) -> VectorField:
    if i == 0:
        return sys.drift
    if i > sys.m:
        raise ValueError(f"system has {sys.m} controls, word uses g{i}")
    return sys.controls[i - 1]


def word_field(sys: ControlAffineSystem, word: BracketWord, cache: Optional[dict] = None) -> VectorField:
    if cache is not None and word in cache:
        return cache[word]
    if word.leaf is not None:
        fld = generator_field(sys, word.leaf)
    else:
        fld = bracket_field(word_field(sys, word.left, cache), word_field(sys, word.right, cache))
    if cache is not None:
        cache[word] = fld
    return fld


def numerical_rank(M: np.ndarray, tol: float) -> int:
    if M.size == 0:
        return 0
    s = np.linalg.svd(M, compute_uv=False)
    if s[0] == 0.0:
        return 0
    return int(np.sum(s > tol * s[0]))


@dataclass
class RankReport:
    point: np.ndarray
    rank: int
    singular_values: np.ndarray
    witnesses: list
    tol: float
    dim: int = 0

    @property
    def full(self) -> bool:
        return self.rank == self.dim

    def to_dict(self) -> dict:
        return {
            "point": [float(v) for v in self.point],
            "rank": int(self.rank),
            "singular_values": [float(v) for v in self.singular_values],
            "witnesses": [str(w) for w in self.witnesses],
            "tol": float(self.tol),
            "dim": int(self.dim),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RankReport":
        return cls(
            np.array(d["point"], dtype=float),
            int(d["rank"]),
            np.array(d["singular_values"], dtype=float),
            [BracketWord.parse(w) for w in d["witnesses"]],
            float(d.get("tol", 1e-6)),
            int(d.get("dim", len(d["point"]))),
        )


def enumerate_words(sys: ControlAffineSystem, max_depth: int):
    """Candidate words in the order the rank check tries them.

    Controls first, then the system's hint words, then the drift, then all
    brackets breadth-first by depth. Brackets are canonicalised by
    antisymmetry: ``[A, B]`` with ``depth(A) <= depth(B)`` and, at equal depth,
    ``A`` enumerated before ``B``.
    """
    seen = set()

    def emit(w):
        if w not in seen:
            seen.add(w)
            return True
        return False

    levels: list[list[BracketWord]] = [[BracketWord.gen(i) for i in range(1, sys.m + 1)] + [BracketWord.gen(0)]]
    for i in range(1, sys.m + 1):
        w = BracketWord.gen(i)
        if emit(w):
            yield w
    for text in sys.bracket_hints:
        w = BracketWord.parse(text)
        if w.depth <= max_depth and max(w.leaves) <= sys.m and emit(w):
            yield w
    if emit(BracketWord.gen(0)):
        yield BracketWord.gen(0)
    for d in range(1, max_depth + 1):
        level = []
        for da in range(0, d):
            db = d - 1 - da
            if da > db:
                break
            A, B = levels[da], levels[db]
            for ia, wa in enumerate(A):
                for ib, wb in enumerate(B):
                    if da == db and ib <= ia:
                        continue
                    w = BracketWord.bracket(wa, wb)
                    level.append(w)
                    if emit(w):
                        yield w
        levels.append(level)


def larc_rank(sys: ControlAffineSystem, x, max_depth: int = 3, tol: float = 1e-6) -> RankReport:
    """Greedy rank of the bracket words up to ``max_depth`` at ``x``.

    A candidate is kept only when its value raises the numerical rank
    (singular values above ``tol * sigma_max``); the search stops at full rank.
    """
    if max_depth < 0:
        raise ValueError("max_depth must be non-negative")
    x = sys.check_state(x)
    n = sys.dim
    cache: dict = {}
    rows: list[np.ndarray] = []
    witnesses: list[BracketWord] = []
    rank = 0
    for w in enumerate_words(sys, max_depth):
        if rank == n:
            break
        v = word_field(sys, w, cache)(x)
        if not np.all(np.isfinite(v)) or not np.any(v):
            continue
        trial = np.vstack(rows + [v])
        r = numerical_rank(trial, tol)
        if r > rank:
            rows.append(v)
            witnesses.append(w)
            rank = r
    sv = np.linalg.svd(np.vstack(rows), compute_uv=False) if rows else np.zeros(0)
    return RankReport(x.copy(), rank, sv, witnesses, tol, n)


@dataclass
class ScanResult:
    min_rank: int
    failing_points: list
    reports: list
    dim: int

    def to_dict(self) -> dict:
        return {
            "min_rank": int(self.min_rank),
            "dim": int(self.dim),
            "failing_points": [[float(v) for v in p] for p in self.failing_points],
            "reports": [r.to_dict() for r in self.reports],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScanResult":
        return cls(
            int(d["min_rank"]),
            [np.array(p, dtype=float) for p in d["failing_points"]],
            [RankReport.from_dict(r) for r in d["reports"]],
            int(d["dim"]),
        )


def larc_scan(
    sys: ControlAffineSystem,
    sampler: Callable[[np.random.Generator], np.ndarray],
    n_samples: int = 100,
    max_depth: int = 3,
    tol: float = 1e-6,
    seed: int = 0,
    workers: int = 1,
) -> ScanResult:
    """Rank check at sampled states; point ``i`` draws from the stream ``(seed, i)``."""
    if n_samples < 1:
        raise ValueError("n_samples must be positive")

    def one(i):
        rng = np.random.default_rng([seed, i])
        return larc_rank(sys, sampler(rng), max_depth, tol)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            reports = list(pool.map(one, range(n_samples)))
    else:
        reports = [one(i) for i in range(n_samples)]
    failing = [r.point for r in reports if r.rank < sys.dim]
    return ScanResult(min(r.rank for r in reports), failing, reports, sys.dim)
