"""Concave quadratic maximization over the probability simplex.

Solves ``max_{alpha in simplex} 0.5 alpha^T Q alpha + c^T alpha`` for small
dense ``Q`` (negative semidefinite). Used to evaluate max-of-quadratics
functions and the prox of a max of affine pieces.

The solver is accelerated projected gradient with function-value restart,
followed by an active-set polish that solves the KKT system on the
detected support. The polish usually recovers the exact maximizer, which
matters when the caller needs the value to ~1e-12.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SimplexQp",
    "SimplexQpResult",
    "SimplexSolverError",
    "ConditioningError",
    "project_simplex",
    "maximize",
    "solve",
]

DEFAULT_TOL = 1e-11
MAX_ITER = 100_000
POLISH_EVERY = 25


class SimplexSolverError(RuntimeError):
    """Iteration cap hit; carries the best iterate found."""

    def __init__(self, msg, alpha, residual):
        super().__init__(msg)
        self.alpha = alpha
        self.residual = residual


class ConditioningError(ValueError):
    """Q has a positive eigenvalue beyond rounding level."""


@dataclass(frozen=True)
class SimplexQp:
    Q: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float, ndmin=2)
        c = np.array(self.c, dtype=float).ravel()
        if c.size == 0:
            raise ValueError("empty simplex")
        if Q.shape != (c.size, c.size):
            raise ValueError(f"Q has shape {Q.shape}, expected {(c.size, c.size)}")
        if not (np.all(np.isfinite(Q)) and np.all(np.isfinite(c))):
            raise ValueError("non-finite problem data")
        if np.max(np.abs(Q - Q.T), initial=0.0) > 1e-14 * max(1.0, np.max(np.abs(Q))):
            raise ValueError("Q is not symmetric")
        Q = 0.5 * (Q + Q.T)
        Q.flags.writeable = False
        c.flags.writeable = False
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "c", c)

    @property
    def m(self) -> int:
        return self.c.size

    def objective(self, alpha) -> float:
        alpha = np.asarray(alpha, dtype=float)
        return float(0.5 * alpha @ self.Q @ alpha + self.c @ alpha)

    def gradient(self, alpha) -> np.ndarray:
        return self.Q @ alpha + self.c


@dataclass
class SimplexQpResult:
    alpha: np.ndarray
    value: float
    iterations: int
    fw_gap: float
    polished: bool
    history: list = field(default_factory=list)


def project_simplex(v) -> np.ndarray:
    """Euclidean projection onto the probability simplex.

    Sort-based threshold search; components are scanned in descending order
    (stable sort) so equal entries are treated identically.

    >>> project_simplex([2.0, 0.0]).tolist()
    [1.0, 0.0]
    """
    v = np.asarray(v, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("cannot project an empty vector")
    if not np.all(np.isfinite(v)):
        raise ValueError("non-finite entries")
    u = -np.sort(-v, kind="stable")
    css = np.cumsum(u) - 1.0
    k = np.arange(1, v.size + 1)
    rho = np.nonzero(u - css / k > 0)[0][-1]
    tau = css[rho] / (rho + 1)
    out = np.maximum(v - tau, 0.0)
    # remove the last ulp of drift in the sum
    s = out.sum()
    if s != 1.0:
        out /= s
    return out


def _fw_gap(g, alpha) -> float:
    return float(np.max(g) - g @ alpha)


def _polish(prob: SimplexQp, alpha, tol):
    """Solve the KKT system on the support of alpha; None if it fails."""
    m = prob.m
    g = prob.gradient(alpha)
    cut = max(1e-9 * np.max(alpha), 1e-14)
    tries = [np.nonzero(alpha > cut)[0]]
    near = np.nonzero(g >= np.max(g) - 1e-7 * max(1.0, np.max(np.abs(g))))[0]
    tries.append(np.union1d(tries[0], near))
    # a degenerate face of maximizers also holds points of smaller support
    order = tries[0][np.argsort(alpha[tries[0]])]
    tries.extend(np.sort(order[d:]) for d in range(1, order.size))
    best = None
    for S in tries:
        k = S.size
        K = np.zeros((k + 1, k + 1))
        K[:k, :k] = prob.Q[np.ix_(S, S)]
        K[:k, k] = -1.0
        K[k, :k] = 1.0
        rhs = np.concatenate([-prob.c[S], [1.0]])
        sol = np.linalg.lstsq(K, rhs, rcond=None)[0]
        a = np.zeros(m)
        a[S] = sol[:k]
        if np.min(a) < -1e-13 or abs(a.sum() - 1) > 1e-12:
            continue
        a = np.maximum(a, 0.0)
        a /= a.sum()
        ga = prob.gradient(a)
        gap = _fw_gap(ga, a)
        if gap > tol:
            continue
        if best is None or gap < best[1]:
            best = (a, gap)
    return best


def _scale(prob: SimplexQp, qnorm: float) -> float:
    return max(1.0, qnorm, float(np.max(np.abs(prob.c))))


def solve(problem: SimplexQp, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER,
          record: bool = False) -> SimplexQpResult:
    """Maximize the concave quadratic; see :func:`maximize`.

    ``tol`` is relative to ``max(1, ||Q||_2, ||c||_inf)`` and bounds the
    Frank-Wolfe gap ``max_j g_j - <g, alpha>`` at the returned point.
    With ``record=True`` the objective of every accepted iterate is kept.
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    prob = problem
    m = prob.m
    if m == 1:
        a = np.ones(1)
        return SimplexQpResult(a, prob.objective(a), 0, 0.0, True)

    eig = np.linalg.eigvalsh(prob.Q)
    qnorm = float(np.max(np.abs(eig)))
    if eig[-1] > 1e-10 * max(1.0, qnorm):
        raise ConditioningError(f"Q has positive eigenvalue {eig[-1]:.3e}")
    scale = _scale(prob, qnorm)
    abs_tol = tol * scale

    if qnorm == 0.0:
        a = np.zeros(m)
        a[int(np.argmax(prob.c))] = 1.0
        return SimplexQpResult(a, prob.objective(a), 0, 0.0, True)

    step = 1.0 / qnorm
    x = np.full(m, 1.0 / m)
    fx = prob.objective(x)
    y, x_prev, t = x.copy(), x.copy(), 1.0
    hist = [fx] if record else []
    best_gap = np.inf

    for it in range(1, max_iter + 1):
        x_new = project_simplex(y + step * prob.gradient(y))
        f_new = prob.objective(x_new)
        if f_new < fx:
            # restart: fall back to a plain projected-gradient step from x
            t = 1.0
            x_new = project_simplex(x + step * prob.gradient(x))
            f_new = prob.objective(x_new)
            if f_new < fx:
                x_new, f_new = x, fx
        x_prev, x, fx = x, x_new, f_new
        if record:
            hist.append(fx)
        t_new = (1 + np.sqrt(1 + 4 * t * t)) / 2
        y = x + ((t - 1) / t_new) * (x - x_prev)
        t = t_new

        gap = _fw_gap(prob.gradient(x), x)
        best_gap = min(best_gap, gap)
        if gap <= abs_tol or it % POLISH_EVERY == 0:
            pol = _polish(prob, x, abs_tol)
            if pol is not None:
                a, pgap = pol
                fa = prob.objective(a)
                if fa >= fx - abs_tol:
                    if record:
                        hist.append(fa)
                    return SimplexQpResult(a, fa, it, pgap, True, hist)
            if gap <= abs_tol:
                return SimplexQpResult(x, fx, it, gap, False, hist)

    raise SimplexSolverError(
        f"no convergence in {max_iter} iterations (Frank-Wolfe gap {best_gap:.3e})",
        x, best_gap,
    )


def maximize(problem: SimplexQp, tol: float = DEFAULT_TOL, max_iter: int = MAX_ITER):
    """Return ``(alpha, value)`` maximizing the quadratic over the simplex.

    Examples
    --------
    >>> a, v = maximize(SimplexQp(np.zeros((3, 3)), [1.0, 2.0, 3.0]))
    >>> a.tolist(), v
    ([0.0, 0.0, 1.0], 3.0)
    """
    res = solve(problem, tol=tol, max_iter=max_iter)
    return res.alpha, res.value
