"""Smooth and proximal oracles, and a small corpus of composite problems.

A :class:`CompositeProblem` pairs an L-smooth convex ``f`` (value and
gradient) with a closed convex ``h`` (value and prox). Indicator values
use ``math.inf``; Python float arithmetic with it saturates and compares
totally, which is all the methods need.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .simplexqp import SimplexQp, maximize

__all__ = [
    "INF",
    "SmoothOracle",
    "QuadraticOracle",
    "FunctionOracle",
    "ProxOracle",
    "ZeroProx",
    "L1Prox",
    "BoxIndicator",
    "FunctionProx",
    "CompositeProblem",
    "InstanceSpec",
    "recover_subgradient",
    "soft_threshold_prox",
    "prox_max_affine",
    "translate_problem",
    "quadratic_problem",
    "random_quadratic",
    "random_lasso",
    "random_box_quadratic",
    "build_instance",
    "INSTANCE_NAMES",
]

INF = math.inf
# relative slack used when testing indicator membership
FEAS_TOL = 1e-12


def _vec(x) -> np.ndarray:
    return np.asarray(x, dtype=float).ravel()


# ---------------------------------------------------------------- smooth part


class SmoothOracle:
    """Interface for an L-smooth convex function on R^d."""

    dim: int
    L: float

    def value(self, x) -> float:
        raise NotImplementedError

    def gradient(self, x) -> np.ndarray:
        raise NotImplementedError


class QuadraticOracle(SmoothOracle):
    """``0.5 x^T A x - b^T x + const`` with ``L = lambda_max(A)``."""

    def __init__(self, A, b, const: float = 0.0):
        A = np.array(A, dtype=float, ndmin=2)
        A = 0.5 * (A + A.T)
        b = _vec(b)
        if A.shape != (b.size, b.size):
            raise ValueError("A and b have inconsistent shapes")
        eig = np.linalg.eigvalsh(A)
        if eig[0] < -1e-12 * max(1.0, abs(eig[-1])):
            raise ValueError("A must be positive semidefinite")
        self.A, self.b, self.const = A, b, float(const)
        self.dim = b.size
        self.L = float(max(eig[-1], 0.0))
        if self.L == 0.0:
            raise ValueError("quadratic must have a positive top eigenvalue")

    def value(self, x) -> float:
        x = _vec(x)
        return float(0.5 * x @ self.A @ x - self.b @ x + self.const)

    def gradient(self, x) -> np.ndarray:
        return self.A @ _vec(x) - self.b


class FunctionOracle(SmoothOracle):
    """Wrap plain callables."""

    def __init__(self, dim: int, L: float, value: Callable, gradient: Callable):
        if not L > 0:
            raise ValueError("L must be positive")
        self.dim, self.L = int(dim), float(L)
        self._value, self._gradient = value, gradient

    def value(self, x) -> float:
        return float(self._value(_vec(x)))

    def gradient(self, x) -> np.ndarray:
        return _vec(self._gradient(_vec(x)))


# ------------------------------------------------------------------ prox part


class ProxOracle:
    """Interface for a closed convex ``h`` with an exact proximal map.

    ``prox(x, step)`` returns ``argmin_z h(z) + ||z - x||^2 / (2 step)``.
    """

    dim: int

    def value(self, x) -> float:
        raise NotImplementedError

    def prox(self, x, step: float) -> np.ndarray:
        raise NotImplementedError

    @property
    def is_zero(self) -> bool:
        return False


class ZeroProx(ProxOracle):
    def __init__(self, dim: int):
        self.dim = int(dim)

    def value(self, x) -> float:
        return 0.0

    def prox(self, x, step: float) -> np.ndarray:
        _check_step(step)
        return _vec(x).copy()

    @property
    def is_zero(self) -> bool:
        return True


class L1Prox(ProxOracle):
    """``lam * ||x||_1``."""

    def __init__(self, dim: int, lam: float):
        if lam < 0:
            raise ValueError("lambda must be nonnegative")
        self.dim, self.lam = int(dim), float(lam)

    def value(self, x) -> float:
        return self.lam * float(np.sum(np.abs(_vec(x))))

    def prox(self, x, step: float) -> np.ndarray:
        _check_step(step)
        return soft_threshold_prox(x, step, self.lam)


class BoxIndicator(ProxOracle):
    """Indicator of ``{x : lo <= x <= hi}``; prox is the clip."""

    def __init__(self, lo, hi):
        lo, hi = _vec(lo), _vec(hi)
        if lo.shape != hi.shape or np.any(lo > hi):
            raise ValueError("invalid box")
        self.lo, self.hi, self.dim = lo, hi, lo.size

    def value(self, x) -> float:
        x = _vec(x)
        tol = FEAS_TOL * max(1.0, float(np.max(np.abs(x))))
        if np.all(x >= self.lo - tol) and np.all(x <= self.hi + tol):
            return 0.0
        return INF

    def prox(self, x, step: float) -> np.ndarray:
        _check_step(step)
        return np.clip(_vec(x), self.lo, self.hi)


class FunctionProx(ProxOracle):
    def __init__(self, dim: int, value: Callable, prox: Callable):
        self.dim = int(dim)
        self._value, self._prox = value, prox

    def value(self, x) -> float:
        return float(self._value(_vec(x)))

    def prox(self, x, step: float) -> np.ndarray:
        _check_step(step)
        return _vec(self._prox(_vec(x), float(step)))


def _check_step(step):
    if not step > 0:
        raise ValueError(f"prox step must be positive, got {step}")


# ------------------------------------------------------------------- problem


@dataclass
class CompositeProblem:
    """``min f(x) + h(x)`` with optional known solution.

    When ``x_star`` is given its optimality is checked through the prox
    fixed point ``prox_{h/L}(x_star - grad f(x_star)/L) = x_star``.
    """

    f: SmoothOracle
    h: ProxOracle
    x_star: Optional[np.ndarray] = None
    F_star: Optional[float] = None
    name: str = "problem"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.f.dim != self.h.dim:
            raise ValueError(f"dimension mismatch: f is {self.f.dim}, h is {self.h.dim}")
        if self.x_star is not None:
            self.x_star = _vec(self.x_star)
            if self.x_star.size != self.dim:
                raise ValueError("x_star has the wrong dimension")
            if self.fixed_point_residual(self.x_star) > 1e-9 * max(1.0, np.linalg.norm(self.x_star)):
                raise ValueError("x_star fails the prox fixed-point optimality test")
            if self.F_star is None:
                self.F_star = self.F(self.x_star)

    @property
    def dim(self) -> int:
        return self.f.dim

    @property
    def L(self) -> float:
        return self.f.L

    def F(self, x) -> float:
        return self.f.value(x) + self.h.value(x)

    def fixed_point_residual(self, x) -> float:
        x = _vec(x)
        step = 1.0 / self.L
        return float(np.linalg.norm(self.h.prox(x - step * self.f.gradient(x), step) - x))


# ------------------------------------------------------------------ helpers


def recover_subgradient(y_tilde, y, step: float, L: float) -> np.ndarray:
    """Subgradient ``(L/step)(y_tilde - y)`` of h at ``y = prox_{(step/L) h}(y_tilde)``."""
    if not step > 0:
        raise ValueError("step must be positive")
    if not L > 0:
        raise ValueError("L must be positive")
    return (L / step) * (_vec(y_tilde) - _vec(y))


def soft_threshold_prox(x, step: float, lam: float) -> np.ndarray:
    """Prox of ``lam ||.||_1`` with stepsize ``step``."""
    if lam < 0:
        raise ValueError("lambda must be nonnegative")
    x = _vec(x)
    return np.sign(x) * np.maximum(np.abs(x) - step * lam, 0.0)


def prox_max_affine(pieces: Sequence, halfspace_coord: Optional[int], x, step: float,
                    tol: float = 1e-13) -> np.ndarray:
    """Prox of ``max_j (c_j + <s_j, .>)`` plus optionally ``{x[k] <= 0}``.

    The halfspace coordinate ``k`` decouples (no slope touches it) and is
    clamped at 0. The rest comes from the dual simplex problem
    ``max_sigma sum_j sigma_j (c_j + <s_j, x>) - (step/2) ||S sigma||^2``
    through ``y = x - step * S sigma``.

    Parameters
    ----------
    pieces : sequence of (slope, intercept)
    halfspace_coord : int or None
    x : array_like
    step : float
        Positive prox stepsize.
    """
    _check_step(step)
    x = _vec(x)
    if len(pieces) == 0:
        raise ValueError("need at least one affine piece")
    S = np.column_stack([_vec(s) for s, _ in pieces])
    c = np.array([float(ci) for _, ci in pieces])
    if S.shape[0] != x.size:
        raise ValueError("slope dimension does not match x")
    if not np.all(np.isfinite(S)):
        raise ValueError("non-finite slope")
    if halfspace_coord is not None and np.any(S[halfspace_coord] != 0):
        raise ValueError("a piece has a nonzero slope on the halfspace coordinate")
    prob = SimplexQp(-step * (S.T @ S), c + S.T @ x)
    sigma, _ = maximize(prob, tol=tol)
    y = x - step * (S @ sigma)
    if halfspace_coord is not None:
        y[halfspace_coord] = min(x[halfspace_coord], 0.0)
    return y


def translate_problem(problem: CompositeProblem, shift) -> CompositeProblem:
    """Problem with ``f(. - shift)`` and ``h(. - shift)``; minimizer moves by ``+shift``."""
    s = _vec(shift)
    if s.size != problem.dim:
        raise ValueError(f"shift has dimension {s.size}, problem has {problem.dim}")
    f, h = problem.f, problem.h
    f2 = FunctionOracle(f.dim, f.L, lambda x: f.value(x - s), lambda x: f.gradient(x - s))
    h2 = FunctionProx(h.dim, lambda x: h.value(x - s), lambda x, t: h.prox(x - s, t) + s)
    xs = None if problem.x_star is None else problem.x_star + s
    meta = dict(problem.meta, shift=s)
    return CompositeProblem(f2, h2, xs, problem.F_star, problem.name + "+shift", meta)


# ------------------------------------------------------------------ corpus


def quadratic_problem(A, b, h: Optional[ProxOracle] = None, x_star=None, name="quadratic"):
    f = QuadraticOracle(A, b)
    return CompositeProblem(f, h if h is not None else ZeroProx(f.dim), x_star, None, name)


def _rng(seed):
    return np.random.default_rng(seed)


def random_quadratic(seed=0, n: int = 10, rank: Optional[int] = None) -> CompositeProblem:
    """Smooth quadratic with ``h = 0`` and a planted minimizer."""
    rng = _rng(seed)
    M = rng.standard_normal((rank or n, n))
    A = M.T @ M
    x_star = rng.standard_normal(n)
    b = A @ x_star
    return CompositeProblem(QuadraticOracle(A, b), ZeroProx(n), x_star, None, "quadratic",
                            {"seed": seed, "n": n})


def random_lasso(seed=0, m: int = 30, n: int = 20, lam: float = 0.5,
                 sparsity: float = 0.3) -> CompositeProblem:
    """``0.5 ||M x - y||^2 + lam ||x||_1`` with a planted sparse solution.

    The data ``y`` is built so that ``-grad f(x_star)`` is a chosen
    subgradient of ``lam ||.||_1`` at ``x_star``.
    """
    if m < n:
        raise ValueError("need m >= n for the planted construction")
    rng = _rng(seed)
    M = rng.standard_normal((m, n)) / math.sqrt(m)
    k = max(1, int(round(sparsity * n)))
    supp = rng.choice(n, size=k, replace=False)
    x_star = np.zeros(n)
    x_star[supp] = rng.choice([-1.0, 1.0], size=k) * rng.uniform(0.5, 2.0, size=k)
    u = rng.uniform(-0.9, 0.9, size=n)
    u[supp] = np.sign(x_star[supp])
    # M^T r = lam u  with  r in range(M)
    r = M @ np.linalg.solve(M.T @ M, lam * u)
    y = M @ x_star + r
    f = QuadraticOracle(M.T @ M, M.T @ y, 0.5 * float(y @ y))
    return CompositeProblem(f, L1Prox(n, lam), x_star, None, "lasso",
                            {"seed": seed, "m": m, "n": n, "lam": lam})


def random_box_quadratic(seed=0, n: int = 15, rank: Optional[int] = None,
                         active: float = 0.4) -> CompositeProblem:
    """Convex quadratic over a box with a planted solution on the boundary."""
    rng = _rng(seed)
    M = rng.standard_normal((rank or n, n))
    A = M.T @ M / n
    lo = -rng.uniform(0.5, 2.0, n)
    hi = rng.uniform(0.5, 2.0, n)
    x_star = rng.uniform(lo, hi)
    g = np.zeros(n)
    flags = rng.uniform(size=n)
    at_lo = flags < active / 2
    at_hi = (flags >= active / 2) & (flags < active)
    x_star[at_lo], x_star[at_hi] = lo[at_lo], hi[at_hi]
    g[at_lo] = rng.uniform(0.1, 1.0, at_lo.sum())
    g[at_hi] = -rng.uniform(0.1, 1.0, at_hi.sum())
    b = A @ x_star - g
    return CompositeProblem(QuadraticOracle(A, b), BoxIndicator(lo, hi), x_star, None, "box",
                            {"seed": seed, "n": n})


INSTANCE_NAMES = ("lasso", "box", "quadratic")

_BUILDERS = {"lasso": random_lasso, "box": random_box_quadratic, "quadratic": random_quadratic}


def build_instance(name: str, seed=0, **params) -> CompositeProblem:
    try:
        builder = _BUILDERS[name]
    except KeyError:
        raise ValueError(f"unknown instance {name!r}; choose from {', '.join(INSTANCE_NAMES)}") from None
    return builder(seed=seed, **params)


@dataclass
class InstanceSpec:
    """Reproducible instance description, stored as ``key = value`` lines."""

    name: str
    seed: int = 0
    params: dict = field(default_factory=dict)

    def build(self) -> CompositeProblem:
        return build_instance(self.name, self.seed, **self.params)

    def to_text(self) -> str:
        lines = [f"instance = {self.name}", f"seed = {self.seed}"]
        lines += [f"{k} = {v!r}" for k, v in sorted(self.params.items())]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "InstanceSpec":
        kv = parse_key_values(text)
        name = kv.pop("instance", None)
        if name is None:
            raise ValueError("missing 'instance' entry")
        seed = int(kv.pop("seed", 0))
        params = {k: _literal(v) for k, v in kv.items()}
        return cls(name, seed, params)


def parse_key_values(text: str) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"line {lineno}: expected 'key = value'")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _literal(v: str):
    for conv in (int, float):
        try:
            return conv(v)
        except ValueError:
            pass
    return v.strip("'\"")
