import math

import numpy as np
import pytest

from optista.oracles import (
    INF,
    BoxIndicator,
    CompositeProblem,
    InstanceSpec,
    L1Prox,
    QuadraticOracle,
    ZeroProx,
    build_instance,
    parse_key_values,
    prox_max_affine,
    random_box_quadratic,
    random_lasso,
    random_quadratic,
    recover_subgradient,
    soft_threshold_prox,
    translate_problem,
)

INSTANCES = [random_lasso(1), random_box_quadratic(2), random_quadratic(3),
             random_lasso(4, m=12, n=12, lam=2.0), random_box_quadratic(5, rank=3)]


@pytest.mark.parametrize("prob", INSTANCES, ids=lambda p: p.name)
def test_smooth_interpolation(prob):
    rng = np.random.default_rng(0)
    f, L = prob.f, prob.L
    for _ in range(200):
        x, y = rng.normal(size=(2, prob.dim)) * 3
        gx, gy = f.gradient(x), f.gradient(y)
        slack = f.value(y) - f.value(x) - gx @ (y - x) - (gx - gy) @ (gx - gy) / (2 * L)
        assert slack >= -1e-9 * max(1.0, abs(f.value(y)))


@pytest.mark.parametrize("prob", INSTANCES, ids=lambda p: p.name)
def test_gradient_finite_differences(prob):
    rng = np.random.default_rng(1)
    x = rng.normal(size=prob.dim)
    g = prob.f.gradient(x)
    fd = np.array([(prob.f.value(x + 1e-6 * e) - prob.f.value(x - 1e-6 * e)) / 2e-6
                   for e in np.eye(prob.dim)])
    assert np.linalg.norm(fd - g) <= 1e-5 * max(1.0, np.linalg.norm(g))


PROXES = [ZeroProx(6), L1Prox(6, 0.7), BoxIndicator(-np.ones(6), np.arange(6.0))]


@pytest.mark.parametrize("h", PROXES, ids=lambda h: type(h).__name__)
def test_prox_resolvent_identity(h):
    rng = np.random.default_rng(2)
    for _ in range(200):
        x = rng.normal(size=6) * 3
        step = rng.uniform(0.05, 4)
        z = h.prox(x, step)
        assert h.value(z) < INF
        u = (x - z) / step
        w = rng.normal(size=6) * 3
        if isinstance(h, BoxIndicator):
            w = h.prox(w, 1.0)
        assert h.value(w) >= h.value(z) + u @ (w - z) - 1e-10


@pytest.mark.parametrize("prob", INSTANCES, ids=lambda p: p.name)
def test_planted_minimizer(prob):
    assert prob.fixed_point_residual(prob.x_star) <= 1e-9 * max(1, np.linalg.norm(prob.x_star))
    assert math.isfinite(prob.F_star)


def test_bad_minimizer_rejected():
    f = QuadraticOracle(np.eye(2), [1.0, 0.0])
    with pytest.raises(ValueError):
        CompositeProblem(f, ZeroProx(2), x_star=[0.0, 0.0])


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        CompositeProblem(QuadraticOracle(np.eye(2), [0, 0]), ZeroProx(3))


def test_recover_subgradient_examples():
    y = np.array([1.0, -2.0])
    assert np.all(recover_subgradient(y, ZeroProx(2).prox(y, 0.3), 1.7, 2.0) == 0)
    lam, step, L = 0.8, 1.3, 2.0
    yt = np.array([2 * lam * step / L])
    yy = soft_threshold_prox(yt, step / L, lam)
    np.testing.assert_allclose(yy, [lam * step / L], rtol=1e-15)
    np.testing.assert_allclose(recover_subgradient(yt, yy, step, L), [lam], rtol=1e-14)
    with pytest.raises(ValueError):
        recover_subgradient(yt, yy, 0.0, L)


def test_soft_threshold_examples():
    assert soft_threshold_prox([3.0], 1, 1).tolist() == [2.0]
    assert soft_threshold_prox([0.5], 1, 1).tolist() == [0.0]
    x = np.array([-1.5, 0.2, 4.0])
    assert np.all(soft_threshold_prox(x, 2.0, 0.0) == x)


def test_box_value_infinite_outside():
    h = BoxIndicator([0, 0], [1, 1])
    assert h.value([0.5, 1.0]) == 0.0
    assert h.value([1.1, 0.5]) == INF
    assert INF + 1.0 == INF and 5.0 < INF


def test_prox_max_affine_single_piece():
    s, x = np.array([1.0, -2.0, 0.5]), np.array([0.3, 0.1, -1.0])
    np.testing.assert_allclose(prox_max_affine([(s, 4.0)], None, x, 0.7), x - 0.7 * s, atol=1e-14)


def test_prox_max_affine_constants():
    x = np.array([0.3, -2.0])
    np.testing.assert_allclose(prox_max_affine([(np.zeros(2), 1.0), (np.zeros(2), 3.0)], None, x, 2.0), x)


@pytest.mark.parametrize("step", [0.5, 1.0, 3.0])
def test_prox_max_affine_chain_example(step):
    # N=1, gamma=[1], R=1 pieces: 0.5 + 0.5 x_0, constants 0.25 and 0, halfspace on x_1
    pieces = [(np.array([0.5, 0.0]), 0.5), (np.zeros(2), 0.25), (np.zeros(2), 0.0)]
    y = prox_max_affine(pieces, 1, np.zeros(2), step)
    # brute force in the only moving coordinate
    t = np.arange(-2, 0.5, 1e-5)
    obj = np.maximum(0.5 + 0.5 * t, 0.25) + t**2 / (2 * step)
    assert abs(y[0] - t[np.argmin(obj)]) < 1e-4
    assert abs(y[0] + min(0.5 * step, 0.5)) < 1e-12
    assert y[1] == 0.0


def _brute_prox_2d(pieces, x, step):
    S = np.array([s for s, _ in pieces])
    c = np.array([ci for _, ci in pieces])

    def obj(P):
        return np.max(P @ S.T + c, axis=1) + np.sum((P - x) ** 2, axis=1) / (2 * step)

    def grid(center, half, h):
        ax = np.arange(-half, half + h / 2, h)
        X, Y = np.meshgrid(center[0] + ax, center[1] + ax, indexing="ij")
        P = np.column_stack([X.ravel(), Y.ravel()])
        return P[np.argmin(obj(P))]

    # kinks bias a single fine grid along the valley, so refine once more
    p = grid(x, 6.0, 1e-2)
    p = grid(p, 0.03, 1e-4)
    return grid(p, 0.003, 1e-5)


@pytest.mark.parametrize("seed", range(20))
def test_prox_max_affine_brute_force(seed):
    rng = np.random.default_rng(seed)
    k = rng.integers(1, 5)
    pieces = [(rng.normal(size=2), rng.normal()) for _ in range(k)]
    x = rng.normal(size=2)
    step = rng.uniform(0.2, 2.0)
    y = prox_max_affine(pieces, None, x, step)
    assert np.linalg.norm(y - _brute_prox_2d(pieces, x, step)) < 1e-3


def test_prox_max_affine_rejects_slope_on_halfspace():
    with pytest.raises(ValueError):
        prox_max_affine([(np.array([1.0, 1.0]), 0.0)], 1, np.zeros(2), 1.0)


def test_translate_zero_shift():
    p = INSTANCES[0]
    q = translate_problem(p, np.zeros(p.dim))
    x = np.random.default_rng(0).normal(size=p.dim)
    assert q.F(x) == p.F(x)
    np.testing.assert_array_equal(q.h.prox(x, 0.3), p.h.prox(x, 0.3))


def test_translate_quadratic():
    s = np.array([1.0, -2.0, 0.5])
    p = CompositeProblem(QuadraticOracle(np.eye(3), np.zeros(3)), ZeroProx(3), np.zeros(3))
    q = translate_problem(p, s)
    assert np.all(q.f.gradient(s) == 0)
    np.testing.assert_array_equal(q.x_star, s)


def test_translate_box_minimizer():
    p = random_box_quadratic(7)
    s = np.linspace(-1, 1, p.dim)
    q = translate_problem(p, s)
    assert q.fixed_point_residual(p.x_star + s) < 1e-9
    assert abs(q.F_star - p.F_star) < 1e-12


def test_translate_dimension_mismatch():
    with pytest.raises(ValueError):
        translate_problem(INSTANCES[0], np.zeros(3))


def test_instance_spec_roundtrip():
    spec = InstanceSpec("lasso", 7, {"m": 15, "n": 10, "lam": 0.25})
    again = InstanceSpec.from_text(spec.to_text())
    assert again == spec
    a, b = spec.build(), again.build()
    np.testing.assert_array_equal(a.x_star, b.x_star)


def test_seeded_instances_are_deterministic():
    a, b = build_instance("box", seed=11), build_instance("box", seed=11)
    np.testing.assert_array_equal(a.f.A, b.f.A)
    with pytest.raises(ValueError):
        build_instance("nope")


def test_parse_key_values():
    kv = parse_key_values("# comment\nmethod = optista\n n-max = 4  # trailing\n")
    assert kv == {"method": "optista", "n_max": "4"}
    with pytest.raises(ValueError):
        parse_key_values("oops")
