"""Performance-estimation data, the analytic dual certificate, and the
Lyapunov sequence of OptISTA.

Index conventions follow the Gram formulation. Points ``w_i`` run over
``i in [-1:2N]``: ``w_{-1}`` is the minimizer, ``w_0..w_N`` are the
``x``-iterates and ``w_{N+1}..w_{2N}`` are ``y_1..y_N``. Gradients of
``f`` live on ``I_f = [-1:N]`` and subgradients of ``h`` on
``I_h = {-1} U [N:2N]``. Index ``-1`` is the minimizer; in the Lyapunov
formulas the same slot is written ``*``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from typing import Dict, Optional, Tuple

import numpy as np

from .methods import FsfomCoefficients, Trajectory, optista_fsfom_coefficients
from .oracles import CompositeProblem
from .schedules import theta_schedule

__all__ = [
    "PepBasis",
    "ConstraintData",
    "PepCertificate",
    "VerificationReport",
    "LyapunovRecord",
    "sym_outer",
    "build_pep_basis",
    "build_constraints",
    "assemble_Z",
    "analytic_certificate",
    "verify_certificate",
    "lyapunov_sequence",
]

Pair = Tuple[int, int]


def sym_outer(x, y) -> np.ndarray:
    """``x (.) y = (x y^T + y x^T) / 2``."""
    return 0.5 * (np.outer(x, y) + np.outer(y, x))


@dataclass(frozen=True)
class PepBasis:
    n: int
    L: float
    w: Dict[int, np.ndarray]
    fp: Dict[int, np.ndarray]
    hp: Dict[int, np.ndarray]
    fv: Dict[int, np.ndarray]
    hv: Dict[int, np.ndarray]

    @property
    def dim(self) -> int:
        return 2 * self.n + 4

    @property
    def I_f(self):
        return list(range(-1, self.n + 1))

    @property
    def I_h(self):
        return [-1] + list(range(self.n, 2 * self.n + 1))


def _e(k, dim):
    v = np.zeros(dim)
    v[k] = 1.0
    return v


def build_pep_basis(N: int, coeffs: FsfomCoefficients, L: float = 1.0) -> PepBasis:
    """Selector vectors of the Gram formulation for the given stepsizes."""
    if coeffs.n != N:
        raise ValueError(f"coefficients are for N={coeffs.n}, not {N}")
    d = 2 * N + 4
    fp = {i: _e(i + 2, d) for i in range(-1, N + 1)}
    hp = {-1: -_e(1, d)}
    hp.update({N + i: _e(N + i + 3, d) for i in range(N + 1)})
    w = {-1: np.zeros(d), 0: _e(0, d)}
    for i in range(N):
        gsum = sum(coeffs.phi[i + 1, k] * fp[k] for k in range(i + 1))
        hsum = sum(coeffs.psi[i + 1, k] * hp[N + k + 1] for k in range(i + 1))
        w[N + i + 1] = w[0] - (gsum + hsum) / L
        gsum = sum(coeffs.alpha[i + 1, k] * fp[k] for k in range(i + 1))
        hsum = sum(coeffs.beta[i + 1, k] * hp[N + k + 1] for k in range(i + 1))
        w[i + 1] = w[0] - (gsum + hsum) / L
    fv = {i: _e(i + 1, d) for i in range(-1, N + 1)}
    hv = {-1: _e(N + 2, d)}
    hv.update({N + i: _e(N + i + 3, d) for i in range(N + 1)})
    # the F row must not reuse a column
    cols = [int(np.argmax(v)) for v in list(fv.values()) + list(hv.values())]
    if len(set(cols)) != len(cols):
        raise AssertionError("function-value selectors collide")
    return PepBasis(N, float(L), w, fp, hp, fv, hv)


@dataclass(frozen=True)
class ConstraintData:
    basis: PepBasis
    A_f: Dict[Pair, np.ndarray]
    A_h: Dict[Pair, np.ndarray]
    C_f: Dict[Pair, np.ndarray]
    a_f: Dict[Pair, np.ndarray]
    a_h: Dict[Pair, np.ndarray]

    def B(self, i: int, j: int) -> np.ndarray:
        dw = self.basis.w[i] - self.basis.w[j]
        return sym_outer(dw, dw)

    @property
    def n(self) -> int:
        return self.basis.n


def build_constraints(basis: PepBasis) -> ConstraintData:
    A_f, C_f, a_f, A_h, a_h = {}, {}, {}, {}, {}
    w = basis.w
    for i in basis.I_f:
        for j in basis.I_f:
            if i != j:
                A_f[i, j] = sym_outer(basis.fp[j], w[i] - w[j])
                df = basis.fp[i] - basis.fp[j]
                C_f[i, j] = sym_outer(df, df)
                a_f[i, j] = basis.fv[j] - basis.fv[i]
    for i in basis.I_h:
        for j in basis.I_h:
            if i != j:
                A_h[i, j] = sym_outer(basis.hp[j], w[i] - w[j])
                a_h[i, j] = basis.hv[j] - basis.hv[i]
    return ConstraintData(basis, A_f, A_h, C_f, a_f, a_h)


@dataclass(frozen=True)
class PepCertificate:
    """Inner-dual variables; ``lam`` and ``tau`` only store nonzero entries."""

    n: int
    L: float
    nu: float
    lam: Dict[Pair, float]
    tau: Dict[Pair, float]
    coeffs: FsfomCoefficients
    Z: np.ndarray

    def perturbed(self, which: str, pair: Optional[Pair], delta: float,
                  constraints: "ConstraintData") -> "PepCertificate":
        """Copy with one multiplier shifted by ``delta`` (``which`` in nu/lam/tau)."""
        nu, lam, tau = self.nu, dict(self.lam), dict(self.tau)
        if which == "nu":
            nu += delta
        elif which == "lam":
            lam[pair] = lam.get(pair, 0.0) + delta
        elif which == "tau":
            tau[pair] = tau.get(pair, 0.0) + delta
        else:
            raise ValueError(which)
        return replace(self, nu=nu, lam=lam, tau=tau,
                       Z=assemble_Z(nu, lam, tau, constraints, self.L))


def assemble_Z(nu, lam, tau, constraints: ConstraintData, L: float) -> np.ndarray:
    """``nu B_{0,-1} + sum lam (A^f + C^f / 2L) + sum tau A^h``."""
    Z = nu * constraints.B(0, -1)
    for p, v in lam.items():
        Z = Z + v * (constraints.A_f[p] + constraints.C_f[p] / (2 * L))
    for p, v in tau.items():
        Z = Z + v * constraints.A_h[p]
    return 0.5 * (Z + Z.T)


def analytic_tau(N: int) -> Dict[Pair, float]:
    """tau on I_h pairs; point ``N+i`` is ``y_i`` and ``-1`` is the minimizer."""
    s = theta_schedule(N)
    th, tt, tn2 = s.theta, s.theta_tilde, s.theta_n ** 2
    den = tn2 - 2 * th**2 + th  # den[i] for i in [0:N]
    tau = {}
    for i in range(1, N + 1):
        tau[-1, N + i] = 2 * tt[i - 1] / (tn2 - 1)
    for i in range(1, N + 1):
        for j in range(i + 1, N + 1):
            tau[N + i, N + j] = 2 * tt[j - 1] / den[i] - 2 * tt[j - 1] / den[i - 1]
    for i in range(1, N):
        tau[N + i + 1, N + i] = (th[i] - 1) / den[i]
    return tau


def analytic_lambda(N: int) -> Dict[Pair, float]:
    s = theta_schedule(N)
    th, tn = s.theta, s.theta_n
    lam = {(-1, i): 2 * th[i] / tn**2 for i in range(N)}
    lam[-1, N] = 1 / tn
    for i in range(N):
        lam[i, i + 1] = 2 * th[i] ** 2 / tn**2
    return lam


def analytic_certificate(N: int, L: float = 1.0) -> PepCertificate:
    """Closed-form dual certificate for OptISTA's stepsizes.

    ``nu = L / (2 (theta_N^2 - 1))``; ``lam`` and ``tau`` do not depend on L.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    coeffs = optista_fsfom_coefficients(N)
    cons = build_constraints(build_pep_basis(N, coeffs, L))
    tn = theta_schedule(N).theta_n
    nu = L / (2 * (tn**2 - 1))
    lam, tau = analytic_lambda(N), analytic_tau(N)
    return PepCertificate(N, float(L), nu, lam, tau, coeffs, assemble_Z(nu, lam, tau, cons, L))


@dataclass(frozen=True)
class VerificationReport:
    n: int
    residual: float
    min_eig: float
    z_norm: float
    nu_R2: float
    bound: float
    objective_gap: float
    nonnegative: bool
    cholesky_ok: bool
    feasible: bool
    passed: bool

    FIELDS = ("N", "residual", "min_eig", "nu_R2", "bound", "pass")

    def row(self):
        return (self.n, self.residual, self.min_eig, self.nu_R2, self.bound, self.passed)

    @staticmethod
    def csv_header() -> str:
        return ",".join(VerificationReport.FIELDS)

    def to_csv_row(self) -> str:
        out = []
        for v in self.row():
            if isinstance(v, bool):
                out.append("PASS" if v else "FAIL")
            elif isinstance(v, int):
                out.append(str(v))
            else:
                out.append(format(v, ".17g"))
        return ",".join(out)

    def to_json(self) -> str:
        return json.dumps(dict(zip(self.FIELDS, self.row())))


RESIDUAL_TOL = 1e-9
EIG_RTOL = 1e-8
OBJ_RTOL = 1e-12


def verify_certificate(cert: PepCertificate, constraints: ConstraintData, R: float = 1.0) -> VerificationReport:
    """Check dual feasibility of ``cert`` and compare ``nu R^2`` with the rate.

    ``Z`` is rebuilt from the multipliers, so edits to ``lam``/``tau`` are
    seen even if ``cert.Z`` is stale.
    """
    if constraints.n != cert.n:
        raise ValueError(f"certificate is for N={cert.n}, constraints for N={constraints.n}")
    N, L = cert.n, cert.L
    # the objective pairs f at x_N with h at y_N (= x_N for these stepsizes)
    lin = -constraints.a_f[-1, N] - constraints.a_h[-1, 2 * N]
    for p, v in cert.lam.items():
        lin = lin + v * constraints.a_f[p]
    for p, v in cert.tau.items():
        lin = lin + v * constraints.a_h[p]
    residual = float(np.max(np.abs(lin)))
    Z = assemble_Z(cert.nu, cert.lam, cert.tau, constraints, L)
    eig = np.linalg.eigvalsh(Z)
    z_norm = float(np.max(np.abs(eig)))
    min_eig = float(eig[0])
    try:
        np.linalg.cholesky(Z + 1e-10 * np.eye(Z.shape[0]))
        chol = True
    except np.linalg.LinAlgError:
        chol = False
    tn = theta_schedule(N).theta_n
    bound = L * R**2 / (2 * (tn**2 - 1))
    nu_R2 = cert.nu * R**2
    gap = abs(nu_R2 - bound) / bound
    nonneg = cert.nu >= 0 and all(v >= 0 for v in cert.lam.values()) and all(
        v >= -1e-15 for v in cert.tau.values())
    feasible = bool(residual <= RESIDUAL_TOL and min_eig >= -EIG_RTOL * z_norm and nonneg)
    return VerificationReport(N, residual, min_eig, z_norm, nu_R2, bound, gap, nonneg, chol,
                              feasible, bool(feasible and gap <= OBJ_RTOL))


# -------------------------------------------------------------- Lyapunov


@dataclass
class LyapunovRecord:
    """Values for ``k = -1..N``; entry ``k`` sits at array index ``k + 1``."""

    n: int
    U: np.ndarray
    F: np.ndarray
    H: np.ndarray
    U_closed: float
    final_gap: float

    def at(self, k: int) -> float:
        return float(self.U[k + 1])

    def slacks(self):
        """``U_k - U_{k+1}`` for ``k = -1..N-1`` and then ``U_N - gap``."""
        return np.append(-np.diff(self.U), self.U[-1] - self.final_gap)


def lyapunov_sequence(traj: Trajectory, problem: CompositeProblem, x_star) -> LyapunovRecord:
    """Evaluate the OptISTA Lyapunov sequence along an OptISTA-A run.

    ``U_{-1}`` is reported both in closed form and as ``F_{-1} + H_{-1}``
    (stored in ``U``).
    """
    if traj.w is None or traj.subgrads is None or traj.grads is None:
        raise ValueError("trajectory must come from run_optista_a (needs w-iterates and subgradients)")
    N, L = traj.n, problem.L
    s = theta_schedule(N)
    tn2 = s.theta_n ** 2
    tt = s.theta_tilde

    def th(k):
        return 0.0 if k < 0 else float(s.theta[k])

    xs = np.asarray(x_star, dtype=float)
    gs = problem.f.gradient(xs)
    f_s, h_s = problem.f.value(xs), problem.h.value(xs)
    x, y, w = traj.x, traj.y, traj.w
    grad = list(traj.grads) + [problem.f.gradient(x[N])]
    hp = {i: traj.subgrads[i - 1] for i in range(1, N + 1)}
    hy = {i: problem.h.value(y[i]) for i in range(1, N + 1)}
    hy[-1] = h_s
    fx = [problem.f.value(x[k]) for k in range(N + 1)]
    sq = lambda v: float(v @ v)  # noqa: E731
    tau = analytic_tau(N)

    Fk = np.empty(N + 2)
    for k in range(-1, N):
        hk = hp[k + 1] if k + 1 >= 1 else 0.0
        fk = fx[k] if k >= 0 else 0.0
        gk = sq(grad[k]) if k >= 0 else 0.0
        Fk[k + 1] = (2 * th(k) ** 2 / tn2 * (fk - f_s)
                     + L / (2 * tn2) * sq(w[k + 1] - xs + gs / L + 2 * th(k) / L * hk)
                     - (1 / (2 * L) - th(k) ** 2 / (L * tn2)) * sq(gs)
                     - th(k) ** 2 / (L * tn2) * gk)
    Fk[N + 1] = fx[N] - f_s + L / (2 * tn2) * sq(
        w[N] - xs + gs / L + 2 * th(N - 1) / L * hp[N] - th(N) / L * grad[N] - 2 * tt[N - 1] / L * hp[N])

    base = x[0] - xs - (tn2 - 1) / L * gs
    c_sq = L / (2 * tn2 * (tn2 - 1))
    Hk = np.empty(N + 2)
    Hk[0] = Hk[1] = c_sq * sq(base)

    def pair_terms(k, wts):
        out = 0.0
        for i in range(1, k + 1):
            for j in range(1, k + 1):
                if i != j:
                    out += wts[i - 1] * wts[j - 1] / (L * tn2 * (tn2 - 1)) * sq(hp[i] - hp[j])
        for i in range(1, k):
            out += wts[i - 1] ** 2 / (L * tn2) * sq(hp[i] - hp[i + 1])
        return out

    thv = np.array([th(i) for i in range(N)])
    for k in range(1, N):
        ids = [-1] + list(range(1, k + 1))
        hsum = 0.0
        for i in ids:
            for j in ids:
                ti, tj = (i if i < 0 else N + i), (j if j < 0 else N + j)
                t = tau.get((ti, tj), 0.0)
                if t:
                    hsum += t * (hy[j] - hy[i])
        acc = base - sum(2 * th(i) / L * hp[i + 1] for i in range(k))
        tail = sum(2 * tt[l] * th(i - 1) / (L * tn2 * (tn2 - 1)) * sq(hp[i])
                   for i in range(1, k + 1) for l in range(k, N))
        Hk[k + 1] = (hsum + c_sq * sq(acc) + pair_terms(k, thv)
                     + 2 * th(k - 1) ** 2 / (L * tn2) * float(grad[k] @ hp[k])
                     + tail + th(k - 1) ** 2 / (L * tn2) * sq(hp[k]))
    acc = base - sum(2 * tt[i] / L * hp[i + 1] for i in range(N))
    Hk[N + 1] = hy[N] - h_s + c_sq * sq(acc) + pair_terms(N, tt)

    U = Fk + Hk
    U_closed = L * sq(x[0] - xs) / (2 * (tn2 - 1))
    gap = problem.F(y[N]) - (f_s + h_s)
    return LyapunovRecord(N, U, Fk, Hk, U_closed, gap)
