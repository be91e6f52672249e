import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kchase.core import CapacityError
from kchase.regret import (FTLPlayer, Hedge, count_tuples, ftl_grid, ftl_topk_olo, hedge_eta,
                           hedge_subsets, hedge_topk, rademacher_estimate, rademacher_exact,
                           static_opt_all, static_opt_topk, tuple_losses, tuples_of,
                           unit_ball_grid)


def test_grid_and_tuples():
    g = unit_ball_grid(2, 0.5)
    assert np.all(np.linalg.norm(g, axis=1) <= 1 + 1e-12)
    assert len(unit_ball_grid(1, 0.01)) == 201
    assert len(tuples_of(5, 2)) == count_tuples(5, 2) == 15
    assert len(tuples_of(5, 2, multiset=False)) == 10
    with pytest.raises(CapacityError):
        tuples_of(1000, 3, capacity=1000)


def test_hedge_linear_bound():
    x = unit_ball_grid(1, 0.01)[:, 0]
    T = 1000
    L = np.tile(x, (T, 1))
    r = hedge_topk(L, 1, np.random.default_rng(0), loss_range=(-1, 1))
    N = len(x)
    assert r.curve.expected_regret[-1] <= math.sqrt(T * math.log(N) / 2) + T / N


def test_single_cell_has_no_regret():
    L = np.random.default_rng(1).random((50, 1))
    r = hedge_topk(L, 1, np.random.default_rng(0))
    np.testing.assert_allclose(r.curve.regret, 0, atol=1e-12)


def test_zero_losses_keep_uniform_weights():
    r = hedge_topk(np.zeros((30, 6)), 2, np.random.default_rng(0))
    np.testing.assert_allclose(r.weights, 1 / len(r.tuples))
    np.testing.assert_allclose(r.curve.regret, 0)


def test_hedge_class_weights_normalised():
    h = Hedge(10, 0.3)
    rng = np.random.default_rng(2)
    for _ in range(200):
        h.update(rng.random(10))
        assert np.all(h.w >= 0) and abs(h.w.sum() - 1) <= 1e-12
    assert 0 <= h.sample(0.999) < 10


def test_hedge_matches_stepwise_class():
    rng = np.random.default_rng(3)
    L = rng.random((40, 7))
    r = hedge_topk(L, 2, np.random.default_rng(4))
    tl = tuple_losses(L, r.tuples)
    h = Hedge(len(r.tuples), hedge_eta(len(r.tuples), 40))
    mix = np.array([h.update(row) for row in tl])
    np.testing.assert_allclose(mix, r.curve.expected, atol=1e-12)
    np.testing.assert_allclose(h.w, r.weights, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 3), st.floats(0.1, 10))
def test_regret_curves(seed, k, lam):
    rng = np.random.default_rng(seed)
    L = rng.random((30, 6))
    r = hedge_topk(L, k, np.random.default_rng(seed))
    assert np.all(r.curve.expected_regret >= -1e-9)
    f1, f2 = ftl_grid(L, k), ftl_grid(lam * L, k)
    np.testing.assert_array_equal(f1.chosen, f2.chosen)
    np.testing.assert_allclose(f1.curve.scaled(lam).regret, f2.curve.regret, rtol=1e-9, atol=1e-9)
    np.testing.assert_array_equal(ftl_grid(L, k).chosen, f1.chosen)


def test_ftl_plays_against_cumulative_gradient():
    pts = np.linspace(-1, 1, 21)[:, None]
    g = np.random.default_rng(5).uniform(-1, 1, 50)
    r = ftl_topk_olo(pts, 1, g[:, None])
    G = np.cumsum(g)
    played = pts[r.tuples[r.chosen, 0], 0]
    for t in range(1, 50):
        if G[t - 1] != 0:
            assert played[t] == -np.sign(G[t - 1])


def test_ftl_rejects_long_vectors():
    with pytest.raises(ValueError):
        ftl_topk_olo(np.zeros((3, 1)), 1, np.array([[1.5]]))


def test_ftl_stochastic_average_regret_vanishes():
    pts = np.linspace(-1, 1, 21)[:, None]
    rng = np.random.default_rng(6)
    avg = []
    for T in (200, 3200):
        v = 0.5 * rng.choice([-1.0, 1.0], T)
        avg.append(ftl_topk_olo(pts, 1, v[:, None]).curve.regret[-1] / T)
    assert avg[1] < avg[0] and avg[1] < 0.05


def test_player_matches_batch():
    grid = np.linspace(0, 1, 11)
    rng = np.random.default_rng(7)
    L = rng.random((20, 11))
    batch = ftl_grid(L, 2)
    p = FTLPlayer(grid, 2)
    for t in range(20):
        np.testing.assert_allclose(p.act(), grid[batch.tuples[batch.chosen[t]]])
        p.update(L[t])


def test_static_opt_examples():
    grid = np.linspace(0, 1, 11)
    v, x = static_opt_topk(np.abs(grid - 0.3)[None, :], 1, grid)
    assert v == pytest.approx(0) and x[0] == pytest.approx(0.3)
    L = np.array([np.abs(grid), np.abs(grid - 1)] * 5)
    v, x = static_opt_topk(L, 2, grid)
    assert v == 0 and tuple(x) == (0.0, 1.0)


def test_warmup_optima():
    grid = np.round(np.linspace(0, 1, 101), 10)
    ys = np.array([0.0, 0.5, 1.0])
    L = (grid[None, :] - ys[:, None]) ** 2           # one round of each outcome
    v, tups = static_opt_all(L, 2, atol=1e-12)
    got = {tuple(grid[t]) for t in tups}
    assert got == {(0.0, 0.75), (0.25, 1.0)}
    # a sampled sequence settles on one of them, or next to it
    y = np.random.default_rng(8).choice(ys, 3000)
    _, best = static_opt_topk((grid[None, :] - y[:, None]) ** 2, 2, grid)
    assert min(np.abs(best - np.array(o)).max() for o in got) <= 0.02


def test_subsets_full_set_and_bound():
    rng = np.random.default_rng(9)
    L = (rng.random((400, 4)) < 0.5).astype(float)
    r = hedge_subsets(L, 4, rng)
    np.testing.assert_allclose(r.curve.regret, 0)
    n, k, T = 8, 2, 5000
    L = (rng.random((T, n)) < 1 - 1 / k).astype(float)
    r = hedge_subsets(L, k, rng)
    assert r.curve.expected_regret[-1] <= math.sqrt(T * math.log(math.comb(n, k)) / 2) * 1.1


def test_subsets_concentrate_on_good_pair():
    rng = np.random.default_rng(10)
    T, n = 4000, 6
    L = np.ones((T, n))
    L[:, 2] = rng.random(T) < 0.5
    L[:, 4] = 1 - L[:, 2]                            # arms 2 and 4 together always cover
    h = Hedge(math.comb(n, 2), hedge_eta(math.comb(n, 2), T))
    tup = tuples_of(n, 2, multiset=False)
    tl = tuple_losses(L, tup)
    for t in range(T // 2):
        h.update(tl[t])
    assert h.w.max() > 0.9
    assert tuple(tup[int(np.argmax(h.w))]) == (2, 4)


def test_rademacher_single_round_exact():
    v = np.array([[0.6]])
    pts = np.linspace(-1, 1, 5)[:, None]
    tl = np.minimum.reduce([v @ pts.T])[0]
    want = 0.5 * (tl.max() + (-tl).max())
    assert rademacher_exact(v, 1, pts) == pytest.approx(want)


def test_rademacher_identical_vectors():
    t = 64
    V = np.full((t, 1), 1.0)
    pts = np.array([[-1.0], [1.0]])
    est = rademacher_estimate(V, 1, pts, 20_000, np.random.default_rng(11))
    sums = np.abs(np.random.default_rng(12).choice([-1, 1], (20_000, t)).sum(axis=1)).mean() / t
    assert est == pytest.approx(sums, rel=0.05)
    assert est == pytest.approx(math.sqrt(2 / (math.pi * t)), rel=0.1)


def test_rademacher_decay():
    rng = np.random.default_rng(13)
    pts = np.linspace(-1, 1, 11)[:, None]
    ts = np.array([100, 400, 1600])
    est = [rademacher_estimate(rng.uniform(-1, 1, (t, 1)), 2, pts, 400, rng) for t in ts]
    slope = np.polyfit(np.log(ts), np.log(est), 1)[0]
    assert -0.65 < slope < -0.35


def test_ftl_three_point_linear_grows_like_sqrt():
    from kchase.harness import fit_exponent
    pts = np.linspace(-1, 1, 21)[:, None]
    Ts = [250, 500, 1000, 2000, 4000]
    samples = []
    for T in Ts:
        vals = []
        for s in range(50):
            y = np.random.default_rng([T, s]).choice([-1.0, 0.0, 1.0], T)
            vals.append(ftl_topk_olo(pts, 1, 0.5 * y[:, None]).curve.regret[-1])
        samples.append(vals)
    fit = fit_exponent(Ts, samples, bootstrap=200)
    assert 0.35 < fit.exponent < 0.65
