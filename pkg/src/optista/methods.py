"""First-order methods with full trajectory recording.

Every run records the iterates, the gradients and recovered subgradients,
the composite values along ``y``, and an ordered log of oracle calls. The
log is what the span-condition checker in :mod:`optista.lowerbounds`
consumes.

Output conventions: OptISTA, FISTA, FGM, ISTA, OPPA and Guler's method
report ``y_N``; OGM and the generic fixed-step engine report ``x_N``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from .oracles import CompositeProblem, ProxOracle, recover_subgradient
from .schedules import gamma_schedule, nesterov_theta, oppa_schedule, theta_schedule

__all__ = [
    "OracleEvent",
    "Trajectory",
    "FsfomCoefficients",
    "optista_fsfom_coefficients",
    "gradient_descent_coefficients",
    "run_optista",
    "run_optista_a",
    "run_fsfom",
    "run_ogm",
    "run_fgm",
    "run_fista",
    "run_ista",
    "run_oppa",
    "run_guler",
    "optista_bound",
    "ogm_bound",
    "fista_bound",
    "ista_bound",
    "oppa_bound",
    "guler_bound",
    "METHODS",
    "run_method",
    "method_bound",
]


@dataclass(frozen=True)
class OracleEvent:
    """One oracle call.

    ``kind`` is ``"grad"`` or ``"prox"``. For a gradient call ``direction``
    is the returned gradient; for a prox call at ``point`` with output
    ``y`` it is ``point - y`` (a scaled subgradient), so the output lies
    in the span of the query and the direction.
    """

    kind: str
    point: np.ndarray
    direction: np.ndarray
    step: Optional[float] = None


@dataclass
class Trajectory:
    method: str
    n: int
    x0: np.ndarray
    x: np.ndarray
    y: np.ndarray
    output: np.ndarray
    F_y: np.ndarray
    events: List[OracleEvent]
    grads: Optional[np.ndarray] = None
    subgrads: Optional[np.ndarray] = None
    z: Optional[np.ndarray] = None
    w: Optional[np.ndarray] = None
    L: Optional[float] = None
    F_star: Optional[float] = None
    bound: Optional[float] = None
    meta: dict = field(default_factory=dict)

    @property
    def F_out(self) -> float:
        return float(self.meta["F_out"])

    @property
    def gap(self) -> Optional[float]:
        if self.F_star is None:
            return None
        return self.F_out - self.F_star

    def count(self, kind: str) -> int:
        return sum(e.kind == kind for e in self.events)

    def bound_holds(self, rtol: float = 1e-9, scale: Optional[float] = None) -> bool:
        """``gap <= bound + rtol * scale``; ``scale`` defaults to ``max(1, bound)``."""
        if self.gap is None or self.bound is None:
            raise ValueError("gap or bound unknown for this run")
        s = max(1.0, self.bound) if scale is None else scale
        return self.gap <= self.bound + rtol * s

    def rows(self):
        """Per-iterate table: iter, F(y_i), gap, ||grad f(x_i)||, ||h'(y_i)||."""
        out = []
        for i in range(self.n + 1):
            Fi = float(self.F_y[i])
            gap = Fi - self.F_star if self.F_star is not None else None
            gn = None
            if self.grads is not None and i < self.grads.shape[0]:
                gn = float(np.linalg.norm(self.grads[i]))
            hn = None
            if self.subgrads is not None and 1 <= i <= self.subgrads.shape[0]:
                hn = float(np.linalg.norm(self.subgrads[i - 1]))
            out.append((i, Fi, gap, gn, hn))
        return out

    def to_csv(self, fh=None) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["iter", "F_y", "gap", "grad_norm", "subgrad_norm"])
        for row in self.rows():
            wr.writerow([_fmt(v) for v in row])
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return format(float(v), ".17g")


class _Recorder:
    """Wraps a problem so every oracle call is logged exactly once."""

    def __init__(self, problem: CompositeProblem):
        self.problem = problem
        self.events: List[OracleEvent] = []
        self.L = problem.L

    def grad(self, x):
        g = self.problem.f.gradient(x)
        self.events.append(OracleEvent("grad", x.copy(), g.copy()))
        return g

    def prox(self, y_tilde, psi):
        """``prox_{(psi/L) h}`` and the recovered subgradient at its output."""
        y = self.problem.h.prox(y_tilde, psi / self.L)
        self.events.append(OracleEvent("prox", y_tilde.copy(), y_tilde - y, psi / self.L))
        return y, recover_subgradient(y_tilde, y, psi, self.L)


def _start(problem, x0):
    x0 = np.array(x0, dtype=float).ravel()
    if x0.size != problem.dim:
        raise ValueError(f"x0 has dimension {x0.size}, problem has {problem.dim}")
    return x0


def _finish(method, problem, x0, xs, ys, out, rec, bound, **extra):
    F_y = np.array([problem.F(y) for y in ys])
    meta = extra.pop("meta", {})
    meta["F_out"] = problem.F(out)
    traj = Trajectory(
        method=method, n=len(xs) - 1, x0=x0, x=np.array(xs), y=np.array(ys), output=out,
        F_y=F_y, events=rec.events, L=problem.L, F_star=problem.F_star, meta=meta, **extra,
    )
    if problem.x_star is not None and bound is not None:
        traj.bound = bound(np.linalg.norm(x0 - problem.x_star))
    return traj


# ------------------------------------------------------------------- bounds


def optista_bound(N, L, R) -> float:
    tn = theta_schedule(N).theta_n
    return L * R**2 / (2 * (tn**2 - 1))


def ogm_bound(N, L, R) -> float:
    return L * R**2 / (2 * theta_schedule(N).theta_n ** 2)


def fista_bound(N, L, R) -> float:
    return L * R**2 / (2 * nesterov_theta(N)[N - 1] ** 2)


def ista_bound(N, L, R) -> float:
    return L * R**2 / (4 * N)


def oppa_bound(gammas, R) -> float:
    s = oppa_schedule(gammas)
    g = s.gamma_in
    return g[-1] * R**2 / (4 * g[0] ** 2 * s.eta[-1] ** 2)


def guler_bound(gammas, R) -> float:
    g = np.asarray(gammas, dtype=float)
    th = nesterov_theta(g.size)
    return R**2 / (4 * g[0] * th[g.size - 1] ** 2)


# ------------------------------------------------------------------ OptISTA


def run_optista(problem: CompositeProblem, x0, N: int) -> Trajectory:
    """OptISTA; returns ``y_N``.

    The theta sequence (which depends on N through its last entry) is
    computed in a first pass, then the three-line update runs in a second.
    """
    x0 = _start(problem, x0)
    sched = theta_schedule(N)
    th, gam = sched.theta, gamma_schedule(sched).gamma
    L = problem.L
    rec = _Recorder(problem)
    xs, ys, zs = [x0], [x0.copy()], [x0.copy()]
    grads, subs = [], []
    for i in range(N):
        x, y, z = xs[-1], ys[-1], zs[-1]
        g = rec.grad(x)
        y_new, hp = rec.prox(y - (gam[i] / L) * g, gam[i])
        z_new = x + (y_new - y) / gam[i]
        x_new = (z_new + ((th[i] - 1) / th[i + 1]) * (z_new - z)
                 + (th[i] / th[i + 1]) * (z_new - x))
        xs.append(x_new)
        ys.append(y_new)
        zs.append(z_new)
        grads.append(g)
        subs.append(hp)
    return _finish("optista", problem, x0, xs, ys, ys[-1], rec,
                   lambda R: optista_bound(N, L, R),
                   grads=np.array(grads), subgrads=np.array(subs), z=np.array(zs))


def run_optista_a(problem: CompositeProblem, x0, N: int) -> Trajectory:
    """OptISTA written with the auxiliary ``w`` sequence (needed by the Lyapunov analysis)."""
    x0 = _start(problem, x0)
    sched = theta_schedule(N)
    th, gam = sched.theta, gamma_schedule(sched).gamma
    L = problem.L
    rec = _Recorder(problem)
    xs, ys, zs, ws = [x0], [x0.copy()], [x0.copy()], [x0.copy()]
    grads, subs = [], []
    for i in range(N):
        x, y = xs[-1], ys[-1]
        g = rec.grad(x)
        y_new, hp = rec.prox(y - (gam[i] / L) * g, gam[i])
        z_new = x + (y_new - y) / gam[i]
        w_new = ws[-1] - (2 * th[i] / L) * (g + hp)
        x_new = (1 - 1 / th[i + 1]) * z_new + w_new / th[i + 1]
        xs.append(x_new)
        ys.append(y_new)
        zs.append(z_new)
        ws.append(w_new)
        grads.append(g)
        subs.append(hp)
    return _finish("optista_a", problem, x0, xs, ys, ys[-1], rec,
                   lambda R: optista_bound(N, L, R),
                   grads=np.array(grads), subgrads=np.array(subs), z=np.array(zs), w=np.array(ws))


# --------------------------------------------------------- fixed-step engine


@dataclass(frozen=True)
class FsfomCoefficients:
    """Stepsizes of a fixed-step method, stored as ``(N+1) x N`` arrays.

    ``phi[i, j]`` is the coefficient of ``grad f(x_j)`` in ``y_i`` (row 0 is
    unused), so rows ``1..N`` and columns ``j < i`` carry data. ``psi``
    weighs the recovered subgradients in ``y``; ``alpha`` and ``beta`` play
    the same roles for ``x``. The last ``psi[i+1, i]`` is the prox step.
    """

    n: int
    phi: np.ndarray
    psi: np.ndarray
    alpha: np.ndarray
    beta: np.ndarray

    def __post_init__(self):
        shape = (self.n + 1, self.n)
        for name in ("phi", "psi", "alpha", "beta"):
            arr = np.array(getattr(self, name), dtype=float)
            if arr.shape != shape:
                raise ValueError(f"{name} must have shape {shape}, got {arr.shape}")
            # zero out everything outside the lower-triangular pattern
            arr = np.tril(arr, -1)
            arr[0] = 0.0
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)
        diag = np.array([self.psi[i + 1, i] for i in range(self.n)])
        if np.any(diag <= 0):
            raise ValueError("prox steps psi[i+1, i] must be positive")


def optista_fsfom_coefficients(N: int) -> FsfomCoefficients:
    """OptISTA in fixed-step form: ``phi = psi`` holds gamma, ``beta = alpha``."""
    sched = theta_schedule(N)
    th, gam = sched.theta, gamma_schedule(sched).gamma
    alpha = np.zeros((N + 1, N))
    phi = np.zeros((N + 1, N))
    for i in range(N):
        alpha[i + 1, :i] = alpha[i, :i] + (2 * th[:i] - alpha[i, :i]) / th[i + 1]
        alpha[i + 1, i] = 1 + (2 * th[i] - 1) / th[i + 1]
        phi[i + 1, : i + 1] = gam[: i + 1]
    return FsfomCoefficients(N, phi, phi.copy(), alpha, alpha.copy())


def gradient_descent_coefficients(N: int, step: float = 1.0) -> FsfomCoefficients:
    """``x_{i+1} = x_i - step * grad f(x_i) / L`` (and the same for ``y``)."""
    a = np.tril(np.full((N + 1, N), float(step)), -1)
    return FsfomCoefficients(N, a, a.copy(), a.copy(), a.copy())


def run_fsfom(coeffs: FsfomCoefficients, problem: CompositeProblem, x0) -> Trajectory:
    """Generic fixed-step method; the output is ``x_N``."""
    x0 = _start(problem, x0)
    N, L = coeffs.n, problem.L
    phi, psi, alpha, beta = coeffs.phi, coeffs.psi, coeffs.alpha, coeffs.beta
    rec = _Recorder(problem)
    xs, ys = [x0], [x0.copy()]
    G = np.zeros((N, x0.size))
    Hs = np.zeros((N, x0.size))
    for i in range(N):
        G[i] = rec.grad(xs[-1])
        y_tilde = x0 - (phi[i + 1, : i + 1] @ G[: i + 1]) / L - (psi[i + 1, :i] @ Hs[:i]) / L
        y_new, Hs[i] = rec.prox(y_tilde, psi[i + 1, i])
        x_new = x0 - (alpha[i + 1, : i + 1] @ G[: i + 1]) / L - (beta[i + 1, : i + 1] @ Hs[: i + 1]) / L
        xs.append(x_new)
        ys.append(y_new)
    return _finish("fsfom", problem, x0, xs, ys, xs[-1], rec,
                   None, grads=G, subgrads=Hs)


# ------------------------------------------------------- reference methods


def _require_smooth_only(problem, name):
    if not problem.h.is_zero:
        raise ValueError(f"{name} handles h = 0 only; use FISTA or OptISTA for composite problems")


def run_ogm(problem: CompositeProblem, x0, N: int) -> Trajectory:
    """Optimized gradient method (``h`` must be zero); returns ``x_N``."""
    _require_smooth_only(problem, "OGM")
    x0 = _start(problem, x0)
    th = theta_schedule(N).theta
    L = problem.L
    rec = _Recorder(problem)
    xs, ys, grads = [x0], [x0.copy()], []
    for i in range(N):
        x, y = xs[-1], ys[-1]
        g = rec.grad(x)
        y_new = x - g / L
        xs.append(y_new + ((th[i] - 1) / th[i + 1]) * (y_new - y) + (th[i] / th[i + 1]) * (y_new - x))
        ys.append(y_new)
        grads.append(g)
    return _finish("ogm", problem, x0, xs, ys, xs[-1], rec,
                   lambda R: ogm_bound(N, L, R), grads=np.array(grads))


def _fista_like(problem, x0, N, use_prox, name):
    x0 = _start(problem, x0)
    th = nesterov_theta(N)
    L = problem.L
    rec = _Recorder(problem)
    xs, ys, grads, subs = [x0], [x0.copy()], [], []
    for i in range(N):
        x, y = xs[-1], ys[-1]
        g = rec.grad(x)
        if use_prox:
            y_new, hp = rec.prox(x - g / L, 1.0)
            subs.append(hp)
        else:
            y_new = x - g / L
        xs.append(y_new + ((th[i] - 1) / th[i + 1]) * (y_new - y))
        ys.append(y_new)
        grads.append(g)
    return _finish(name, problem, x0, xs, ys, ys[-1], rec,
                   lambda R: fista_bound(N, L, R), grads=np.array(grads),
                   subgrads=np.array(subs) if use_prox else None)


def run_fgm(problem: CompositeProblem, x0, N: int) -> Trajectory:
    """Nesterov's fast gradient method (``h`` must be zero); returns ``y_N``."""
    _require_smooth_only(problem, "FGM")
    return _fista_like(problem, x0, N, False, "fgm")


def run_fista(problem: CompositeProblem, x0, N: int) -> Trajectory:
    return _fista_like(problem, x0, N, True, "fista")


def run_ista(problem: CompositeProblem, x0, N: int) -> Trajectory:
    """Proximal gradient with step ``1/L``."""
    x0 = _start(problem, x0)
    L = problem.L
    rec = _Recorder(problem)
    xs, grads, subs = [x0], [], []
    for _ in range(N):
        g = rec.grad(xs[-1])
        y_new, hp = rec.prox(xs[-1] - g / L, 1.0)
        xs.append(y_new)
        grads.append(g)
        subs.append(hp)
    return _finish("ista", problem, x0, xs, list(xs), xs[-1], rec,
                   lambda R: ista_bound(N, L, R), grads=np.array(grads), subgrads=np.array(subs))


# ------------------------------------------------------ proximal-only methods


class _ProxRecorder:
    def __init__(self, h: ProxOracle):
        self.h = h
        self.events: List[OracleEvent] = []

    def prox(self, x, step):
        y = self.h.prox(x, step)
        self.events.append(OracleEvent("prox", x.copy(), x - y, step))
        return y, (x - y) / step


def _prox_run(name, h, x0, gammas, coef, x_star, h_star, bound):
    x0 = np.array(x0, dtype=float).ravel()
    if x0.size != h.dim:
        raise ValueError(f"x0 has dimension {x0.size}, oracle has {h.dim}")
    g = np.asarray(gammas, dtype=float).ravel()
    if g.size == 0 or np.any(g <= 0):
        raise ValueError("stepsizes must be positive")
    rec = _ProxRecorder(h)
    xs, ys, subs = [x0], [x0.copy()], []
    for i in range(g.size):
        x, y = xs[-1], ys[-1]
        y_new, sub = rec.prox(x, g[i])
        subs.append(sub)
        ys.append(y_new)
        if i + 1 < g.size:
            c1, c2 = coef(i)
            xs.append(y_new + c1 * (y_new - y) + c2 * (y_new - x))
        else:
            xs.append(y_new.copy())
    F_y = np.array([h.value(y) for y in ys])
    if x_star is not None and h_star is None:
        h_star = h.value(x_star)
    traj = Trajectory(method=name, n=g.size, x0=x0, x=np.array(xs), y=np.array(ys), output=ys[-1],
                      F_y=F_y, events=rec.events, subgrads=np.array(subs), F_star=h_star,
                      meta={"F_out": F_y[-1], "gammas": g})
    if x_star is not None:
        traj.bound = bound(np.linalg.norm(x0 - np.asarray(x_star, dtype=float)))
    return traj


def run_oppa(prox_oracle: ProxOracle, x0, gammas, x_star=None, h_star=None) -> Trajectory:
    """Optimized proximal point algorithm; returns ``y_N``.

    The last ``x`` is only a placeholder equal to ``y_N`` (no momentum step
    follows the final prox).
    """
    s = oppa_schedule(gammas)
    rho, eta = s.rho, s.eta

    def coef(i):
        base = rho[i + 1] / (rho[i] * eta[i + 1])
        return base * (eta[i] - rho[i]), base * eta[i]

    return _prox_run("oppa", prox_oracle, x0, gammas, coef, x_star, h_star,
                     lambda R: oppa_bound(gammas, R))


def run_guler(prox_oracle: ProxOracle, x0, gammas, x_star=None, h_star=None) -> Trajectory:
    """Guler's second accelerated proximal point method (nondecreasing steps)."""
    g = np.asarray(gammas, dtype=float).ravel()
    if np.any(np.diff(g) < 0):
        raise ValueError("Guler's method needs nondecreasing stepsizes")
    th = nesterov_theta(g.size)

    def coef(i):
        return (th[i] - 1) / th[i + 1], th[i] / th[i + 1]

    return _prox_run("guler", prox_oracle, x0, g, coef, x_star, h_star,
                     lambda R: guler_bound(g, R))


# ------------------------------------------------------------------ registry


METHODS = {
    "optista": run_optista,
    "optista_a": run_optista_a,
    "fista": run_fista,
    "ista": run_ista,
    "ogm": run_ogm,
    "fgm": run_fgm,
}

_BOUNDS = {
    "optista": optista_bound,
    "optista_a": optista_bound,
    "fista": fista_bound,
    "ista": ista_bound,
    "ogm": ogm_bound,
    "fgm": fista_bound,
}


def run_method(name: str, problem: CompositeProblem, x0, N: int) -> Trajectory:
    try:
        fn = METHODS[name]
    except KeyError:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}") from None
    return fn(problem, x0, N)


def method_bound(name: str, N: int, L: float, R: float) -> float:
    return _BOUNDS[name](N, L, R)
