"""Closed-form coefficient sequences.

Every schedule is computed eagerly in float64 and stored as a read-only
numpy array, so instances can be shared freely between methods,
certificates and lower-bound constructions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from numbers import Integral

import numpy as np

__all__ = [
    "HorizonError",
    "ThetaSchedule",
    "GammaSchedule",
    "OppaSchedule",
    "CompositeZeta",
    "ProximalZeta",
    "theta_schedule",
    "nesterov_theta",
    "gamma_schedule",
    "oppa_schedule",
    "composite_zeta",
    "proximal_zeta",
    "rel_residual",
]

RESIDUAL_TOL = 1e-12
SUM_TOL = 1e-10


class HorizonError(ValueError):
    """Raised for an invalid iteration count."""


def _frozen(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.flags.writeable = False
    return arr


def _check_horizon(n) -> int:
    if isinstance(n, bool) or not isinstance(n, Integral):
        raise HorizonError(f"horizon must be an integer, got {n!r}")
    if n < 1:
        raise HorizonError(f"horizon must be >= 1, got {n}")
    return int(n)


def _check_steps(gammas) -> np.ndarray:
    g = np.asarray(gammas, dtype=float).ravel()
    if g.size == 0:
        raise ValueError("need at least one stepsize")
    if not np.all(np.isfinite(g)) or np.any(g <= 0):
        raise ValueError("stepsizes must be finite and positive")
    return g


def rel_residual(lhs: float, rhs: float) -> float:
    """``|lhs - rhs| / max(1, |lhs|, |rhs|)``."""
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs))


@dataclass(frozen=True)
class ThetaSchedule:
    """Momentum sequence with the enlarged last step.

    ``theta`` holds theta_0..theta_N and ``theta_tilde`` holds
    theta~_0..theta~_{N-1}; the two only differ in their last entry.
    """

    n: int
    theta: np.ndarray
    theta_tilde: np.ndarray

    @property
    def theta_n(self) -> float:
        return float(self.theta[-1])

    def residuals(self) -> dict[str, float]:
        """Largest relative residual of each defining identity."""
        th, tt, n = self.theta, self.theta_tilde, self.n
        rec = [rel_residual(th[i + 1] ** 2 - th[i + 1], th[i] ** 2) for i in range(n - 1)]
        rec.append(rel_residual(th[n] ** 2 - th[n], 2 * th[n - 1] ** 2))
        csum = np.cumsum(th[:n])
        sums = [rel_residual(csum[i], th[i] ** 2) for i in range(n)]
        tilde = [rel_residual(tt[i], th[i]) for i in range(n - 1)]
        tilde.append(rel_residual(tt[n - 1], (2 * th[n - 1] + th[n] - 1) / 2))
        return {
            "recursion": max(rec),
            "partial_sums": max(sums),
            "tilde_sum": rel_residual(float(np.sum(tt)), (th[n] ** 2 - 1) / 2),
            "tilde_def": max(tilde),
        }


@dataclass(frozen=True)
class GammaSchedule:
    gamma: np.ndarray


@dataclass(frozen=True)
class OppaSchedule:
    gamma_in: np.ndarray
    rho: np.ndarray
    eta: np.ndarray

    def residuals(self) -> float:
        rho, eta = self.rho, self.eta
        worst = rel_residual(eta[0], 1.0)
        for i in range(1, eta.size):
            lhs = eta[i] ** 2
            rhs = rho[i] * eta[i] + rho[i] / rho[i - 1] * eta[i - 1] ** 2
            worst = max(worst, rel_residual(lhs, rhs))
        return worst


@dataclass(frozen=True)
class CompositeZeta:
    """Data of the composite worst-case construction (before scaling by L)."""

    n: int
    R: float
    zeta: np.ndarray  # zeta_0..zeta_{N+1}
    sigma: np.ndarray  # sigma_0..sigma_N
    a: np.ndarray  # a_0..a_N

    def radius_sum(self) -> float:
        z = self.zeta
        return float(np.sum(z[:-1] ** 2 / (z[:-1] - z[1:])))


@dataclass(frozen=True)
class ProximalZeta:
    gamma_in: np.ndarray
    R: float
    zeta: np.ndarray  # zeta_0..zeta_N
    a: np.ndarray
    b: np.ndarray

    def chain_residuals(self) -> np.ndarray:
        """``a_i b_i - a_{i+1} b_{i+1} - gamma_i a_i^2``, last entry minus zeta_N."""
        a, b, g = self.a, self.b, self.gamma_in
        ab = a * b
        out = np.empty(a.size)
        out[:-1] = ab[:-1] - ab[1:] - g[:-1] * a[:-1] ** 2
        out[-1] = ab[-1] - g[-1] * a[-1] ** 2 - self.zeta[-1]
        return out


def theta_schedule(n: int) -> ThetaSchedule:
    """Momentum sequence theta_0..theta_N with the modified final root.

    >>> theta_schedule(1).theta.tolist()
    [1.0, 2.0]
    """
    n = _check_horizon(n)
    th = [1.0]
    for _ in range(1, n):
        th.append((1 + math.sqrt(1 + 4 * th[-1] ** 2)) / 2)
    th.append((1 + math.sqrt(1 + 8 * th[-1] ** 2)) / 2)
    tt = th[:n]
    tt[-1] = (2 * th[n - 1] + th[n] - 1) / 2
    return ThetaSchedule(n, _frozen(th), _frozen(tt))


def nesterov_theta(n: int) -> np.ndarray:
    """Plain Nesterov sequence theta_0..theta_N, no modified last step.

    Kept apart from :func:`theta_schedule` so the two cannot be mixed up;
    the fast-gradient and FISTA rates use ``theta[N-1]`` of this sequence.
    """
    n = _check_horizon(n)
    th = [1.0]
    for _ in range(n):
        th.append((1 + math.sqrt(1 + 4 * th[-1] ** 2)) / 2)
    return _frozen(th)


def gamma_schedule(sched: ThetaSchedule) -> GammaSchedule:
    th, tn2 = sched.theta, sched.theta_n ** 2
    g = [2 * th[i] / tn2 * (tn2 - 2 * th[i] ** 2 + th[i]) for i in range(sched.n)]
    if min(g) <= 0:
        raise ValueError("non-positive proximal stepsize; theta schedule is corrupt")
    return GammaSchedule(_frozen(g))


def oppa_schedule(gammas) -> OppaSchedule:
    """Stepsize ratios rho and acceleration weights eta for OPPA."""
    g = _check_steps(gammas)
    rho = g / g[0]
    eta = [1.0]
    for i in range(1, g.size):
        r = rho[i]
        eta.append((r + math.sqrt(r * r + 4 * r / rho[i - 1] * eta[-1] ** 2)) / 2)
    return OppaSchedule(_frozen(g), _frozen(rho), _frozen(eta))


def composite_zeta(n: int, R: float) -> CompositeZeta:
    sched = theta_schedule(n)
    if not R > 0:
        raise ValueError("R must be positive")
    th, tn = sched.theta, sched.theta_n
    zeta = np.empty(n + 2)
    zeta[n + 1] = (tn - 1) * R**2 / (tn**2 * (2 * tn - 1))
    zeta[n] = tn / (tn - 1) * zeta[n + 1]
    for i in range(n - 1, -1, -1):
        zeta[i] = 2 * th[i] / (2 * th[i] - 1) * zeta[i + 1]
    sigma = np.empty(n + 1)
    sigma[:n] = 2 * th[:n] / tn**2
    sigma[n] = 1 / tn
    a = zeta[:-1] / ((tn**2 - 1) * sigma * np.sqrt(zeta[:-1] - zeta[1:]))
    return CompositeZeta(n, float(R), _frozen(zeta), _frozen(sigma), _frozen(a))


def proximal_zeta(gammas, R: float) -> ProximalZeta:
    if not R > 0:
        raise ValueError("R must be positive")
    opp = oppa_schedule(gammas)
    g, rho, eta = opp.gamma_in, opp.rho, opp.eta
    n = g.size
    zeta = np.empty(n + 1)
    zeta[n] = g[-1] * R**2 / (4 * g[0] ** 2 * eta[-1] ** 2)
    for i in range(n - 1, -1, -1):
        r = 2 * eta[i] / rho[i]
        zeta[i] = r / (r - 1) * zeta[i + 1]
    gap = np.sqrt(zeta[:-1] - zeta[1:])
    a = gap / np.sqrt(g)
    b = np.sqrt(g) * zeta[:-1] / gap
    return ProximalZeta(g, float(R), _frozen(zeta), _frozen(a), _frozen(b))
