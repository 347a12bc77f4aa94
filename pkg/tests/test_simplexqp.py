import itertools

import numpy as np
import pytest

from optista.simplexqp import (
    ConditioningError,
    SimplexQp,
    SimplexSolverError,
    maximize,
    project_simplex,
    solve,
)


def _grid(m, step):
    n = int(round(1 / step))
    for idx in itertools.product(range(n + 1), repeat=m - 1):
        s = sum(idx)
        if s <= n:
            yield np.array(list(idx) + [n - s], dtype=float) / n


def _grid_points(m, step):
    n = int(round(1 / step))
    if m == 2:
        t = np.arange(n + 1) / n
        return np.column_stack([t, 1 - t])
    if m == 3:
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        i, j = i[keep], j[keep]
        return np.column_stack([i, j, n - i - j]) / n
    return np.array(list(_grid(m, step)))


def _grid_max(prob, step):
    pts = _grid_points(prob.m, step)
    vals = 0.5 * np.einsum("ij,jk,ik->i", pts, prob.Q, pts) + pts @ prob.c
    return vals.max()


def _random_nsd(rng, m, rank=None):
    G = rng.standard_normal((rank or m, m))
    return -G.T @ G


@pytest.mark.parametrize(
    "v, expected",
    [((0.5, 0.5), (0.5, 0.5)), ((2, 0), (1, 0)), ((1, 1), (0.5, 0.5)), ((-1, -1, -1), (1 / 3,) * 3)],
)
def test_project_examples(v, expected):
    np.testing.assert_allclose(project_simplex(v), expected, atol=1e-15)


def test_project_empty():
    with pytest.raises(ValueError):
        project_simplex([])


def test_project_is_optimal():
    # compare against brute force over a fine grid on the 2-simplex
    rng = np.random.default_rng(0)
    pts = _grid_points(3, 1e-2)
    for _ in range(20):
        v = rng.normal(size=3) * 2
        p = project_simplex(v)
        assert p.min() >= 0 and abs(p.sum() - 1) <= 1e-14
        best = np.min(np.sum((pts - v) ** 2, axis=1))
        assert np.sum((p - v) ** 2) <= best + 1e-12


def test_project_ties_deterministic():
    p = project_simplex([0.3, 0.3, 0.3, 0.3])
    assert np.all(p == p[0])


def test_linear_objective():
    a, v = maximize(SimplexQp(np.zeros((3, 3)), [1, 2, 3]))
    assert a.tolist() == [0, 0, 1] and v == 3


def test_symmetric_strictly_concave():
    prob = SimplexQp(-2 * np.eye(2), [0, 0])
    a, v = maximize(prob)
    np.testing.assert_allclose(a, [0.5, 0.5], atol=1e-12)
    # with the 1/2 convention the value is -1/2; the grid confirms it
    assert abs(v + 0.5) < 1e-12
    assert abs(_grid_max(prob, 1e-4) - v) < 1e-8


def test_singleton():
    a, v = maximize(SimplexQp([[-3.0]], [0.7]))
    assert a.tolist() == [1.0] and v == -1.5 + 0.7


@pytest.mark.parametrize("seed", range(12))
def test_grid_oracle(seed):
    rng = np.random.default_rng(seed)
    m = 2 + seed % 2
    prob = SimplexQp(_random_nsd(rng, m, rank=1 + seed % m), rng.normal(size=m))
    a, v = maximize(prob)
    assert abs(prob.objective(a) - v) < 1e-14
    assert _grid_max(prob, 1e-3) <= v + 1e-12
    assert v - _grid_max(prob, 1e-3) < 1e-5


@pytest.mark.parametrize("seed", range(20))
def test_kkt(seed):
    rng = np.random.default_rng(100 + seed)
    m = rng.integers(2, 30)
    prob = SimplexQp(_random_nsd(rng, m, rank=rng.integers(1, m + 1)), rng.normal(size=m) * 3)
    tol = 1e-11
    a, v = maximize(prob, tol=tol)
    assert a.min() >= 0 and abs(a.sum() - 1) < 1e-13
    g = prob.gradient(a)
    scale = max(1.0, np.linalg.norm(prob.Q, 2), np.abs(prob.c).max())
    supp = a > tol
    assert np.all(g <= g[supp].max() + tol * scale)


@pytest.mark.parametrize("seed", range(5))
def test_shift_property(seed):
    rng = np.random.default_rng(seed)
    m = 5
    prob = SimplexQp(_random_nsd(rng, m), rng.normal(size=m))
    _, v = maximize(prob)
    _, v2 = maximize(SimplexQp(prob.Q, prob.c + 4.25))
    assert abs(v2 - v - 4.25) < 1e-10


@pytest.mark.parametrize("seed", range(5))
def test_monotone_history(seed):
    rng = np.random.default_rng(seed)
    m = 8
    prob = SimplexQp(_random_nsd(rng, m, rank=3), rng.normal(size=m))
    res = solve(prob, record=True)
    h = np.array(res.history)
    assert np.all(np.diff(h) >= -1e-11)


def test_rejects_indefinite():
    with pytest.raises(ConditioningError):
        maximize(SimplexQp(np.diag([1.0, -1.0]), [0, 0]))


def test_tiny_positive_eigenvalue_accepted():
    Q = np.diag([5e-11, -1.0])
    a, v = maximize(SimplexQp(Q, [0, 0]))
    assert abs(a.sum() - 1) < 1e-14


def test_rejects_asymmetric():
    with pytest.raises(ValueError):
        SimplexQp([[0.0, 1.0], [0.0, 0.0]], [0, 0])


def test_iteration_cap_error():
    rng = np.random.default_rng(3)
    prob = SimplexQp(_random_nsd(rng, 20, rank=2), rng.normal(size=20))
    with pytest.raises(SimplexSolverError) as info:
        solve(prob, tol=1e-300, max_iter=3)
    assert info.value.alpha.shape == (20,)
    assert info.value.residual >= 0


def test_degenerate_face_of_maximizers():
    # third column is the midpoint of the first two and its constant is the
    # midpoint too, so the maximizers form a segment with a singular KKT system
    a0, a1 = np.sqrt(8 / 27), np.sqrt(4 / 27)
    G = np.array([[a0, 0.0, a0 / 2], [0.0, a1, a1 / 2]])
    c = np.array([29, 13, 21]) / 54
    x = np.array([-1.22735205, -0.68322666])
    res = solve(SimplexQp(-(G.T @ G), c + G.T @ x))
    assert res.fw_gap <= 1e-11
    assert np.all(res.alpha >= 0) and abs(res.alpha.sum() - 1) < 1e-14
