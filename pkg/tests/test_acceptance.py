"""Acceptance criteria 1-8.

Each test prints one ``criterion k: PASS/FAIL ...`` line (shown even under
output capture). Run ``python3 tests/test_acceptance.py`` for the same
lines without pytest.
"""

import sys
import time

import numpy as np
import pytest

from optista.certificates import (
    analytic_certificate,
    build_constraints,
    build_pep_basis,
    lyapunov_sequence,
    verify_certificate,
)
from optista.lowerbounds import (
    build_composite_worst_case,
    eval_f,
    grad_f,
    matching_bound_report,
    project_cone_C,
    proximal_matching_report,
)
from optista.methods import (
    optista_fsfom_coefficients,
    run_fsfom,
    run_ogm,
    run_optista,
    run_optista_a,
)
from optista.oracles import random_box_quadratic, random_lasso, random_quadratic
from optista.schedules import composite_zeta, oppa_schedule, proximal_zeta, theta_schedule


def report(request, k, ok, detail):
    line = f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}"
    if request is None:
        print(line)
        return
    capman = request.config.pluginmanager.getplugin("capturemanager")
    with capman.global_and_fixture_disabled():
        sys.stdout.write("\n" + line + "\n")


def _instance(seed, family):
    if family == "lasso":
        return random_lasso(seed)
    return random_box_quadratic(seed)


# ------------------------------------------------------------------ 1


def criterion_1():
    t0 = time.perf_counter()
    worst = -np.inf
    for family in ("lasso", "box"):
        for seed in range(50):
            p = _instance(seed, family)
            x0 = np.random.default_rng(10_000 + seed).normal(size=p.dim)
            R2 = float(np.sum((x0 - p.x_star) ** 2))
            for N in range(1, 21):
                t = run_optista(p, x0, N)
                worst = max(worst, (t.gap - t.bound) / (p.L * R2))
    elapsed = time.perf_counter() - t0
    ok = worst <= 1e-9 and elapsed <= 30.0
    return ok, f"rate bound on 100 instances x N=1..20: max (gap-bound)/(L R^2) = {worst:.2e}, {elapsed:.1f} s"


# ------------------------------------------------------------------ 2


def criterion_2():
    reps = [matching_bound_report(N, 1.0, 1.0) for N in range(1, 11)]
    worst = max(r.rel_mismatch for r in reps)
    n1 = reps[0].bound == 1 / 6 and abs(reps[0].gap - 1 / 6) <= 1e-8
    ok = worst <= 1e-6 and n1 and all(r.span_ok for r in reps)
    return ok, f"composite matching N=1..10: worst |gap-bound|/bound = {worst:.2e}, N=1 bound = {reps[0].bound!r}"


# ------------------------------------------------------------------ 3


def criterion_3():
    worst = 0.0
    for ratio in (1.0, 2.0):
        for N in range(1, 9):
            g = ratio ** np.arange(N)
            r = proximal_matching_report(g, 1.0)
            s = oppa_schedule(g)
            expected = g[-1] / (4 * g[0] ** 2 * s.eta[-1] ** 2)
            worst = max(worst, r.rel_mismatch, abs(r.bound - expected) / expected)
    r1 = proximal_matching_report([1.0], 1.0)
    n1 = r1.bound == 0.25 and abs(r1.gap - 0.25) <= 1e-11
    ok = worst <= 1e-6 and n1
    return ok, f"proximal matching N=1..8, ratios 1 and 2: worst mismatch {worst:.2e}; N=1 gap {r1.gap!r}"


# ------------------------------------------------------------------ 4


def criterion_4():
    worst_res, worst_eig, worst_obj, ok = 0.0, 0.0, 0.0, True
    for N in range(1, 16):
        cons = build_constraints(build_pep_basis(N, optista_fsfom_coefficients(N)))
        rep = verify_certificate(analytic_certificate(N), cons, 1.0)
        worst_res = max(worst_res, rep.residual)
        worst_eig = min(worst_eig, rep.min_eig / rep.z_norm)
        worst_obj = max(worst_obj, rep.objective_gap)
        ok &= rep.passed and rep.residual <= 1e-9 and rep.min_eig >= -1e-8 * rep.z_norm
        ok &= rep.objective_gap <= 1e-12
    return ok, (f"certificate N=1..15: residual <= {worst_res:.1e}, min_eig/||Z|| >= {worst_eig:.1e}, "
                f"nu R^2 rel err <= {worst_obj:.1e}")


# ------------------------------------------------------------------ 5


def criterion_5():
    worst = np.inf
    for N in range(1, 11):
        for seed in range(100):
            p = _instance(seed, "lasso" if seed % 2 else "box")
            x0 = np.random.default_rng(20_000 + 100 * N + seed).normal(size=p.dim)
            rec = lyapunov_sequence(run_optista_a(p, x0, N), p, p.x_star)
            worst = min(worst, float(rec.slacks().min() / rec.U[0]))
    ok = worst >= -1e-9
    return ok, f"Lyapunov chain on 100 instances x N=1..10: min slack / U_-1 = {worst:.2e}"


# ------------------------------------------------------------------ 6


def _rel(a, b):
    return float(np.max(np.linalg.norm(a - b, axis=-1) / np.maximum(1.0, np.linalg.norm(b, axis=-1))))


def criterion_6():
    eq, xy, ogm = 0.0, 0.0, 0.0
    for seed in range(20):
        p = _instance(seed, "lasso" if seed % 2 else "box")
        x0 = np.random.default_rng(30_000 + seed).normal(size=p.dim)
        N = 1 + seed % 12
        a, b = run_optista(p, x0, N), run_optista_a(p, x0, N)
        c = run_fsfom(optista_fsfom_coefficients(N), p, x0)
        eq = max(eq, _rel(b.x, a.x), _rel(b.y, a.y), _rel(c.x, a.x), _rel(c.y, a.y))
        xy = max(xy, _rel(a.x[-1], a.y[-1]))
        q = random_quadratic(seed, n=12)
        s = run_optista(q, x0[:12], N)
        o = run_ogm(q, x0[:12], N)
        ogm = max(ogm, float(np.abs(s.z - o.y).max() / max(1.0, np.abs(o.y).max())))
    ok = eq <= 1e-8 and xy <= 1e-9 and ogm <= 1e-10
    return ok, f"equivalences on 20 instances: forms {eq:.1e}, x_N vs y_N {xy:.1e}, OGM reduction {ogm:.1e}"


# ------------------------------------------------------------------ 7


def criterion_7():
    worst = 0.0
    for N in range(1, 26):
        res = theta_schedule(N).residuals()
        worst = max(worst, res["partial_sums"], res["tilde_sum"])
        for R in (1.0, 3.0):
            z = composite_zeta(N, R)
            worst = max(worst, abs(z.radius_sum() - R**2) / R**2)
            for g in (np.ones(N), 2.0 ** np.arange(N)):
                b = proximal_zeta(g, R).b
                worst = max(worst, abs(float(b @ b) - R**2) / R**2)
    return worst <= 1e-10, f"schedule identities N=1..25: worst relative residual {worst:.1e}"


# ------------------------------------------------------------------ 8


def criterion_8():
    leak, cone_ok, interp, inf_gap = 0.0, True, 0.0, np.inf
    for N in (1, 3, 5, 8):
        inst = build_composite_worst_case(N)
        rng = np.random.default_rng(40_000 + N)
        for i in range(N + 1):
            for _ in range(10):
                x = np.zeros(inst.dim)
                x[:i] = rng.normal(size=i) * 0.5
                leak = max(leak, float(np.linalg.norm(grad_f(inst, x)[i + 1:])))
                cone_ok &= bool(np.all(project_cone_C(inst, x)[i:] == 0))
        gs = np.abs(inst.grads).max()
        for j in range(N + 1):
            interp = max(interp, abs(eval_f(inst, inst.points[j]) - inst.values[j]),
                         float(np.abs(grad_f(inst, inst.points[j]) - inst.grads[j]).max()) / gs)
        for k in range(1000):
            x = np.zeros(inst.dim)
            x[:N] = rng.normal(size=N) * (1.0 if k % 2 else 0.05)
            if k % 2 == 0:
                x[:N] += inst.points[N][:N]
            inf_gap = min(inf_gap, eval_f(inst, x) - inst.values[N])
    ok = leak <= 1e-9 and cone_ok and interp <= 1e-9 and inf_gap >= -1e-9
    return ok, (f"zero chain N in (1,3,5,8): support leak {leak:.1e}, cone support kept {cone_ok}, "
                f"interpolation err {interp:.1e}, min f - f_N over span {inf_gap:.2e}")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4,
            criterion_5, criterion_6, criterion_7, criterion_8]


@pytest.mark.parametrize("k", range(1, 9))
def test_criterion(request, k):
    ok, detail = CRITERIA[k - 1]()
    report(request, k, ok, detail)
    assert ok, detail


if __name__ == "__main__":
    results = []
    for k, fn in enumerate(CRITERIA, start=1):
        ok, detail = fn()
        report(None, k, ok, detail)
        results.append(ok)
    sys.exit(0 if all(results) else 1)
