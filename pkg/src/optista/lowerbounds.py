"""Worst-case instances that match the OptISTA and OPPA upper bounds.

Two constructions live here, both in ``R^{N+1}`` with standard unit vectors
``e_0..e_N``:

* a composite pair ``(f, h)``: ``f`` is a max of quadratics whose gradients
  reveal at most one new coordinate per query (a zero chain) and ``h`` is
  the indicator of ``x_star + cone{e_0..e_N}``;
* a proximal-only ``H``: a max of affine pieces ``h_i + a_i x[i]``, a
  steep piece in ``x[N]`` and the constant 0.

Any method obeying the span condition cannot beat ``f_N`` (resp. ``h_N``)
after N steps, and OptISTA (resp. OPPA) attains it, so running them here
reproduces their rates to solver precision.

Points ``x_i`` of an instance are unrelated to the iterates of a method.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .methods import Trajectory, oppa_bound, optista_bound, run_oppa, run_optista
from .oracles import (
    INF,
    CompositeProblem,
    FunctionOracle,
    FunctionProx,
    parse_key_values,
    prox_max_affine,
    translate_problem,
)
from .schedules import composite_zeta, proximal_zeta, theta_schedule
from .simplexqp import SimplexQp, maximize

__all__ = [
    "ConstructionError",
    "ZeroChainInstance",
    "ProxChainInstance",
    "SpanReport",
    "MatchingReport",
    "build_composite_worst_case",
    "build_proximal_worst_case",
    "eval_f",
    "grad_f",
    "project_cone_C",
    "eval_H",
    "prox_H",
    "prox_orthogonal_max_affine",
    "worst_case_problem",
    "proximal_worst_case_oracle",
    "check_span_condition",
    "matching_bound_report",
    "proximal_matching_report",
    "instance_from_text",
]

CONSTRUCTION_TOL = 1e-10
MATCH_TOL = 1e-6
SPAN_RTOL = 1e-8


class ConstructionError(ValueError):
    """An instance failed one of its defining conditions.

    ``condition`` names the failed condition and ``residual`` its size.
    """

    def __init__(self, condition: str, residual: float):
        super().__init__(f"worst-case construction failed: {condition} (residual {residual:.3e})")
        self.condition = condition
        self.residual = residual


def _check(cond: str, residual: float, tol: float):
    if not residual <= tol:  # also catches NaN
        raise ConstructionError(cond, residual)


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.flags.writeable = False
    return a


def _fmt_array(a) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(a))


# ----------------------------------------------------------------- composite


@dataclass(frozen=True, eq=False)
class ZeroChainInstance:
    """Composite worst case for horizon ``n``.

    Built from the weights ``sigma``, the radii ``zeta`` and the slopes
    ``a``; everything else is derived and checked in ``__post_init__``.
    Vertex ``n + 1`` of the simplex problem is the minimizer.
    """

    n: int
    L: float
    R: float
    sigma: np.ndarray
    zeta: np.ndarray
    a: np.ndarray
    points: np.ndarray = field(init=False)  # rows x_0..x_N
    grads: np.ndarray = field(init=False)  # rows g_0..g_N
    values: np.ndarray = field(init=False)  # f_0..f_N
    x_star: np.ndarray = field(init=False)
    g_star: np.ndarray = field(init=False)
    f_star: float = field(init=False, default=0.0)
    gram: np.ndarray = field(init=False)  # columns g_0..g_N, g_star
    consts: np.ndarray = field(init=False)  # per-vertex constants, star last

    def __post_init__(self):
        N, L, R = int(self.n), float(self.L), float(self.R)
        if N < 1 or not L > 0 or not R > 0:
            raise ValueError("need N >= 1 and L, R > 0")
        sigma, zeta, a = (np.asarray(v, dtype=float) for v in (self.sigma, self.zeta, self.a))
        if sigma.shape != (N + 1,) or a.shape != (N + 1,) or zeta.shape != (N + 2,):
            raise ValueError("sigma and a need N+1 entries, zeta needs N+2")
        th = theta_schedule(N).theta
        tn2m1 = th[N] ** 2 - 1
        E = np.eye(N + 1)
        G = L * a[:, None] * E
        X = np.zeros((N + 1, N + 1))
        for i in range(1, N + 1):
            X[i] = X[i - 1] - tn2m1 * sigma[i - 1] * a[i - 1] * E[i - 1]
        xs = X[N] - tn2m1 * sigma[N] * a[N] * E[N]
        gs = -L * xs / tn2m1
        f = np.empty(N + 1)
        f[:N] = 0.5 * L * a[:N] ** 2 * (4 * th[:N] - 1) - L * R**2 / (2 * tn2m1**2)
        f[N] = L * R**2 / (2 * tn2m1)

        def const(fi, gi, xi):
            return fi + (gi - L * xi) @ (gi - L * xi) / (2 * L) - 0.5 * L * (xi @ xi)

        c = np.array([const(f[i], G[i], X[i]) for i in range(N + 1)] + [const(0.0, gs, xs)])
        for name, v in (("sigma", sigma), ("zeta", zeta), ("a", a), ("points", X), ("grads", G),
                        ("values", f), ("x_star", xs), ("g_star", gs),
                        ("gram", np.vstack([G, gs]).T), ("consts", c)):
            object.__setattr__(self, name, _frozen(v))
        object.__setattr__(self, "n", N)
        object.__setattr__(self, "L", L)
        object.__setattr__(self, "R", R)
        self.validate()

    @property
    def dim(self) -> int:
        return self.n + 1

    def chain_slacks(self) -> np.ndarray:
        """``l_j(i) - l_k(i)`` over ``i in [0:N]``, ``j in [0:N-1]``, ``k in [j+1:N]``.

        ``l_j(i) = c_j - <g_i, g_j> / L`` with ``c_j`` the vertex constant.
        """
        N = self.n
        ell = self.consts[None, : N + 1] - (self.grads @ self.grads.T) / self.L  # [i, j]
        j, k = np.triu_indices(N + 1, 1)
        return ell[:, j] - ell[:, k]

    def validate(self):
        N, L, R = self.n, self.L, self.R
        G, X = self.grads, self.points
        scale = max(1.0, L * R**2)
        off = G - np.diag(np.diag(G))
        _check("orthogonal gradients g_i = L a_i e_i", float(np.abs(off).max(initial=0.0)), 0.0)
        if not np.all(self.a > 0):
            raise ConstructionError("positive slopes a_i", float(-self.a.min()))
        _check("x_0 = 0", float(np.abs(X[0]).max()), 0.0)
        cone = max(float(np.abs(np.triu(X)).max()), float(max(0.0, X.max())),
                   float(max(0.0, self.x_star.max())))
        _check("points in the negative cone of earlier unit vectors", cone, 0.0)
        _check("zero-chain interpolation inequalities", float(max(0.0, -self.chain_slacks().min())),
               CONSTRUCTION_TOL * scale)
        _check("nonnegative weights summing to one",
               abs(self.sigma.sum() - 1) + max(0.0, -self.sigma.min()), CONSTRUCTION_TOL)
        _check("g_star as the weighted sum of g_i",
               float(np.abs(self.sigma @ G - self.g_star).max()), CONSTRUCTION_TOL * max(1.0, L * R))
        _check("weighted-sum function equality",
               abs(self.sigma @ self.consts[:-1] - self.consts[-1]), CONSTRUCTION_TOL * scale)
        _check("||x_star|| = R", abs(np.linalg.norm(self.x_star) - R), CONSTRUCTION_TOL * max(1.0, R))
        tn = theta_schedule(N).theta_n
        _check("f_N = L R^2 / (2 (theta_N^2 - 1))",
               abs(self.values[N] - L * R**2 / (2 * (tn**2 - 1))), 1e-12 * scale)

    def qp(self, x, include_star: bool = True) -> SimplexQp:
        m = self.n + 2 if include_star else self.n + 1
        Gm = self.gram[:, :m]
        return SimplexQp(-(Gm.T @ Gm) / self.L, self.consts[:m] + Gm.T @ np.asarray(x, dtype=float))

    def to_text(self) -> str:
        lines = ["kind = composite", f"n = {self.n}", f"dim = {self.dim}",
                 f"L = {self.L!r}", f"R = {self.R!r}",
                 f"sigma = {_fmt_array(self.sigma)}", f"zeta = {_fmt_array(self.zeta)}",
                 f"a = {_fmt_array(self.a)}", f"f = {_fmt_array(self.values)}"]
        return "\n".join(lines) + "\n"


def build_composite_worst_case(N: int, L: float = 1.0, R: float = 1.0) -> ZeroChainInstance:
    """Zero-chain instance whose optimal gap after N steps is ``L R^2 / (2 (theta_N^2 - 1))``.

    Examples
    --------
    >>> inst = build_composite_worst_case(1)
    >>> round(float(inst.values[-1]), 12)
    0.166666666667
    """
    z = composite_zeta(N, R)
    return ZeroChainInstance(N, L, R, z.sigma, z.zeta, z.a)


def _dim_check(x, dim):
    x = np.asarray(x, dtype=float).ravel()
    if x.size != dim:
        raise ValueError(f"expected a point of dimension {dim}, got {x.size}")
    return x


def _solve_f(inst: ZeroChainInstance, x, include_star=True):
    x = _dim_check(x, inst.dim)
    return maximize(inst.qp(x, include_star))


def eval_f(inst: ZeroChainInstance, x, include_star: bool = True) -> float:
    """``max_alpha <x, G alpha> - ||G alpha||^2 / (2L) + <c, alpha>`` over the simplex."""
    return float(_solve_f(inst, x, include_star)[1])


def grad_f(inst: ZeroChainInstance, x, include_star: bool = True) -> np.ndarray:
    alpha, _ = _solve_f(inst, x, include_star)
    m = alpha.size
    return inst.gram[:, :m] @ alpha


def project_cone_C(inst: ZeroChainInstance, x, step: float = 1.0) -> np.ndarray:
    """Projection onto ``x_star + cone{e_0..e_N}``; the step plays no role."""
    x = _dim_check(x, inst.dim)
    return np.maximum(x, inst.x_star)


def worst_case_problem(inst: ZeroChainInstance) -> CompositeProblem:
    """The instance as a :class:`CompositeProblem` (f smooth, h indicator)."""
    xs = inst.x_star
    tol = 1e-12 * max(1.0, inst.R)

    def h_value(x):
        return 0.0 if np.all(np.asarray(x) >= xs - tol) else INF

    f = FunctionOracle(inst.dim, inst.L, lambda x: eval_f(inst, x), lambda x: grad_f(inst, x))
    h = FunctionProx(inst.dim, h_value, lambda x, t: project_cone_C(inst, x, t))
    return CompositeProblem(f, h, xs, inst.f_star, f"zero-chain N={inst.n}",
                            {"instance": inst})


# ------------------------------------------------------------------ proximal

PROX_EPS = 1e-6


@dataclass(frozen=True, eq=False)
class ProxChainInstance:
    """Proximal-only worst case for stepsizes ``gammas`` (length N).

    Pieces are ``h_i + a_i x[i]`` for ``i < N``, ``h_N + a_N x[N]`` and the
    constant ``h_star = 0``. The minimizer is ``-sum b_k e_k - tail e_N``
    with ``a_N = h_N / tail``, so every piece vanishes there. With
    ``tail = 0`` the ``e_N`` piece is the constant ``h_N`` on the halfspace
    ``x[N] <= 0``; that limit object never attains 0 and fails validation.
    """

    gammas: np.ndarray
    R: float
    zeta: np.ndarray
    a: np.ndarray
    b: np.ndarray
    tail: float = 0.0
    n: int = field(init=False)
    values: np.ndarray = field(init=False)  # h_0..h_{N-1}
    h_N: float = field(init=False)
    a_N: float = field(init=False)
    h_star: float = field(init=False, default=0.0)
    points: np.ndarray = field(init=False)  # rows x_0..x_{N-1}
    x_star: np.ndarray = field(init=False)

    def __post_init__(self):
        g = np.asarray(self.gammas, dtype=float).ravel()
        N = g.size
        if N < 1 or np.any(g <= 0) or not self.R > 0:
            raise ValueError("need at least one positive stepsize and R > 0")
        if not self.tail >= 0:
            raise ValueError("tail must be nonnegative")
        zeta, a, b = (np.asarray(v, dtype=float).ravel() for v in (self.zeta, self.a, self.b))
        if zeta.size != N + 1 or a.size != N or b.size != N:
            raise ValueError("zeta needs N+1 entries, a and b need N")
        X = np.zeros((N, N + 1))
        for i in range(1, N):
            X[i] = X[i - 1]
            X[i, i - 1] = -b[i - 1]
        xs = np.zeros(N + 1)
        xs[:N] = -b
        xs[N] = -self.tail
        for name, v in (("gammas", g), ("zeta", zeta), ("a", a), ("b", b), ("values", a * b),
                        ("points", X), ("x_star", xs)):
            object.__setattr__(self, name, _frozen(v))
        object.__setattr__(self, "n", N)
        object.__setattr__(self, "R", float(self.R))
        object.__setattr__(self, "tail", float(self.tail))
        object.__setattr__(self, "h_N", float(zeta[N]))
        object.__setattr__(self, "a_N", float(zeta[N] / self.tail) if self.tail > 0 else INF)
        self.validate()

    @property
    def dim(self) -> int:
        return self.n + 1

    @property
    def slopes(self) -> np.ndarray:
        """Slope of the piece living on coordinate ``i`` (``a_N`` last)."""
        return np.append(self.a, self.a_N)

    @property
    def intercepts(self) -> np.ndarray:
        # <e_i, x_i> = 0, so the intercept of piece i is h_i
        return np.append(self.values, self.h_N)

    def chain_slacks(self) -> np.ndarray:
        """``a_i b_i - a_{i+1} b_{i+1} - gamma_i a_i^2``, and the last one minus ``zeta_N``."""
        ab = self.a * self.b
        out = ab - self.gammas * self.a**2
        out[:-1] -= ab[1:]
        out[-1] -= self.h_N
        return out

    def validate(self):
        scale = max(1.0, float(self.zeta[0]))
        lo = min(self.a.min(), self.b.min(), self.zeta.min())
        if not lo > 0:
            raise ConstructionError("positive a, b and zeta", float(-lo))
        _check("proximal chain inequalities", float(max(0.0, -self.chain_slacks().min())), 1e-12 * scale)
        _check("H(x_star) = 0", abs(eval_H(self, self.x_star)), CONSTRUCTION_TOL * scale)
        _check("||x_star|| = R", abs(np.linalg.norm(self.x_star) - self.R), CONSTRUCTION_TOL * max(1.0, self.R))

    def to_text(self) -> str:
        lines = ["kind = proximal", f"n = {self.n}", f"dim = {self.dim}", f"R = {self.R!r}",
                 f"tail = {self.tail!r}",
                 f"gammas = {_fmt_array(self.gammas)}", f"zeta = {_fmt_array(self.zeta)}",
                 f"a = {_fmt_array(self.a)}", f"b = {_fmt_array(self.b)}",
                 f"h = {_fmt_array(self.values)}"]
        return "\n".join(lines) + "\n"


def build_proximal_worst_case(gammas, R: float = 1.0, eps: float = PROX_EPS) -> ProxChainInstance:
    """Max-affine instance on which no proximal span method beats OPPA's bound.

    The minimizer sits ``eps * R`` off the span of ``e_0..e_{N-1}``; the
    chain is built for radius ``R sqrt(1 - eps^2)`` so that ``||x_star|| = R``.
    The forced gap is therefore the bound times ``1 - eps^2``.

    Examples
    --------
    >>> inst = build_proximal_worst_case([1.0])
    >>> [round(v, 9) for v in (inst.a[0], inst.b[0], inst.h_N)]
    [0.5, 1.0, 0.25]
    """
    if not 0 <= eps < 1:
        raise ValueError("eps must lie in [0, 1)")
    z = proximal_zeta(gammas, R * math.sqrt(1 - eps**2))
    return ProxChainInstance(z.gamma_in, R, z.zeta, z.a, z.b, eps * R)


def eval_H(inst: ProxChainInstance, x) -> float:
    x = _dim_check(x, inst.dim)
    N = inst.n
    vals = inst.values + inst.a * x[:N]
    if inst.tail > 0:
        last = inst.h_N + inst.a_N * x[N]
    elif x[N] > 0:
        return INF
    else:
        last = inst.h_N
    return float(max(vals.max(), last, inst.h_star))


def prox_orthogonal_max_affine(slopes, intercepts, const, x, step):
    """Prox of ``max(const, max_i intercepts[i] + slopes[i] x[i])``.

    Each affine piece acts on its own coordinate, so the dual over the
    simplex is separable and is solved exactly by a threshold search.
    """
    x = np.array(x, dtype=float).ravel()
    w = np.asarray(slopes, dtype=float)
    if not step > 0:
        raise ValueError("prox step must be positive")
    if w.size != x.size or np.any(w <= 0):
        raise ValueError("need one positive slope per coordinate")
    v = np.asarray(intercepts, dtype=float) + w * x  # piece values at x
    inv = 1.0 / (step * w * w)
    mass = np.sum(np.maximum(v - const, 0.0) * inv)
    if mass <= 1.0:
        mu = float(const)
    else:
        order = np.argsort(-v)
        cv = np.cumsum(v[order] * inv[order])
        ci = np.cumsum(inv[order])
        mu_k = (cv - 1.0) / ci
        nxt = np.append(v[order][1:], -np.inf)
        k = int(np.argmax(mu_k >= nxt))
        mu = float(mu_k[k])
    sigma = np.maximum(v - mu, 0.0) * inv
    return x - step * sigma * w


def prox_H(inst: ProxChainInstance, x, step: float) -> np.ndarray:
    x = _dim_check(x, inst.dim)
    if inst.tail > 0:
        return prox_orthogonal_max_affine(inst.slopes, inst.intercepts, inst.h_star, x, step)
    E = np.eye(inst.dim)
    pieces = [(inst.a[i] * E[i], inst.values[i]) for i in range(inst.n)]
    pieces += [(np.zeros(inst.dim), inst.h_N), (np.zeros(inst.dim), inst.h_star)]
    return prox_max_affine(pieces, inst.n, x, step)


def proximal_worst_case_oracle(inst: ProxChainInstance) -> FunctionProx:
    return FunctionProx(inst.dim, lambda x: eval_H(inst, x), lambda x, t: prox_H(inst, x, t))


def instance_from_text(text: str):
    """Rebuild (and re-validate) an instance written by ``to_text``."""
    kv = parse_key_values(text)

    def arr(key):
        return np.array([float(v) for v in kv[key].split()])

    kind = kv.get("kind")
    if kind == "composite":
        return ZeroChainInstance(int(kv["n"]), float(kv["L"]), float(kv["R"]),
                                 arr("sigma"), arr("zeta"), arr("a"))
    if kind == "proximal":
        return ProxChainInstance(arr("gammas"), float(kv["R"]), arr("zeta"), arr("a"), arr("b"),
                                 float(kv.get("tail", 0.0)))
    raise ValueError(f"unknown instance kind {kind!r}")


# --------------------------------------------------------- span condition


@dataclass
class SpanReport:
    passed: bool
    counts_ok: bool
    n_grad: int
    n_prox: int
    max_residual: float
    failures: List[int]
    output_residual: float
    support: List[int]  # highest nonzero coordinate of each query minus x0 (-1 if zero)

    def summary(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"{status}: {self.n_grad} gradient / {self.n_prox} prox calls, "
                f"max span residual {self.max_residual:.3e}")


def _span_residual(D: List[np.ndarray], v: np.ndarray) -> float:
    if not D:
        return float(np.linalg.norm(v))
    M = np.column_stack(D)
    coef, *_ = np.linalg.lstsq(M, v, rcond=None)
    return float(np.linalg.norm(v - M @ coef))


def check_span_condition(traj: Trajectory, x0=None, rtol: float = SPAN_RTOL) -> SpanReport:
    """Check that every oracle query lies in ``x0 + span`` of earlier directions.

    A run with gradient calls must use exactly N of each kind; a prox-only
    run must use exactly N prox calls. The output must lie in the span of
    all directions.
    """
    x0 = np.asarray(traj.x0 if x0 is None else x0, dtype=float)
    N = traj.n
    D, failures, support = [], [], []
    worst = 0.0
    scale = max(1.0, float(np.abs(x0).max(initial=0.0)))
    for k, ev in enumerate(traj.events):
        v = ev.point - x0
        r = _span_residual(D, v)
        worst = max(worst, r / max(1.0, np.linalg.norm(v)))
        if r > rtol * max(1.0, np.linalg.norm(v)):
            failures.append(k)
        nz = np.nonzero(np.abs(v) > 1e-12 * scale)[0]
        support.append(int(nz[-1]) if nz.size else -1)
        D.append(np.asarray(ev.direction, dtype=float))
    v = np.asarray(traj.output, dtype=float) - x0
    out_res = _span_residual(D, v) / max(1.0, np.linalg.norm(v))
    n_grad, n_prox = traj.count("grad"), traj.count("prox")
    counts_ok = n_prox == N and n_grad in (0, N)
    passed = bool(counts_ok and not failures and out_res <= rtol)
    return SpanReport(passed, counts_ok, n_grad, n_prox, worst, failures, out_res, support)


# -------------------------------------------------------- matching bounds


@dataclass
class MatchingReport:
    kind: str
    n: int
    gap: float
    bound: float
    rel_mismatch: float
    span_ok: bool
    passed: bool
    trajectory: Optional[Trajectory] = field(default=None, repr=False)

    FIELDS = ("N", "gap", "bound", "rel_mismatch", "pass")

    @staticmethod
    def csv_header() -> str:
        return ",".join(MatchingReport.FIELDS)

    def to_csv_row(self) -> str:
        nums = [format(v, ".17g") for v in (self.gap, self.bound, self.rel_mismatch)]
        return ",".join([str(self.n)] + nums + ["PASS" if self.passed else "FAIL"])


def matching_bound_report(N: int, L: float = 1.0, R: float = 1.0, shift=None,
                          tol: float = MATCH_TOL) -> MatchingReport:
    """Run OptISTA on the composite worst case from ``x0 = 0`` (or ``shift``).

    With ``shift`` the whole instance and the start are translated by it.
    """
    inst = build_composite_worst_case(N, L, R)
    prob = worst_case_problem(inst)
    x0 = np.zeros(inst.dim)
    if shift is not None:
        s = _dim_check(shift, inst.dim)
        prob = translate_problem(prob, s)
        x0 = x0 + s
    traj = run_optista(prob, x0, N)
    bound = optista_bound(N, L, R)
    gap = float(traj.gap)
    rel = abs(gap - bound) / bound
    span_ok = check_span_condition(traj).passed
    return MatchingReport("composite", N, gap, bound, rel, span_ok,
                          bool(rel <= tol and math.isfinite(gap)), traj)


def proximal_matching_report(gammas, R: float = 1.0, tol: float = MATCH_TOL,
                             eps: float = PROX_EPS) -> MatchingReport:
    """Run OPPA on the proximal worst case from ``x0 = 0``."""
    inst = build_proximal_worst_case(gammas, R, eps)
    traj = run_oppa(proximal_worst_case_oracle(inst), np.zeros(inst.dim), inst.gammas,
                    x_star=inst.x_star, h_star=inst.h_star)
    bound = oppa_bound(inst.gammas, R)
    gap = float(traj.gap)
    rel = abs(gap - bound) / bound
    span_ok = check_span_condition(traj).passed
    return MatchingReport("proximal", inst.n, gap, bound, rel, span_ok,
                          bool(rel <= tol and math.isfinite(gap)), traj)
