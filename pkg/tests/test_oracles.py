import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kchase.core import (CapacityError, Configuration, Metric, PiecewiseLinear,
                         PowerDistance, match_cost, serve_cost)
from kchase.kserver import ConfigSpace, kserver_opt
from kchase.line_chaser import run_line_chaser
from kchase.oracles import (blind_opt, chasing_opt_exhaustive, chasing_opt_line,
                            chasing_opt_refine, finite_chasing_opt, kmedian_opt, l1_transform,
                            line_grid)

L = Configuration.on_line


def random_pl(rng, T, lo=-5, hi=5):
    out = []
    for _ in range(T):
        z = round(float(rng.uniform(lo, hi)), 1)
        a, b = np.round(rng.uniform(0.2, 2, 2), 2)
        out.append(PiecewiseLinear([z - 1, z, z + 1], [a, 0, b]))
    return out


def test_occupied_minimiser_is_free():
    assert chasing_opt_line([PowerDistance(3, 2)], 2, L([3, 8])).value == 0


def test_move_once_then_sit():
    reqs = [PowerDistance(5, 1, 1)] * 10
    assert chasing_opt_line(reqs, 1, L([0]), np.linspace(0, 10, 101)).value == pytest.approx(5)


def test_empty_requests():
    assert chasing_opt_line([], 2, L([0, 1])).value == 0
    rep = chasing_opt_refine([], 1, L([0]), [1.0, 0.5])
    assert rep.values == [0, 0]


def test_l1_transform_brute():
    rng = np.random.default_rng(0)
    grid = np.sort(rng.uniform(-3, 3, 6))
    V = rng.uniform(0, 5, (6, 6))
    got = l1_transform(V, grid)
    for i in range(6):
        for j in range(6):
            want = min(V[a, b] + abs(grid[i] - grid[a]) + abs(grid[j] - grid[b])
                       for a in range(6) for b in range(6))
            assert got[i, j] == pytest.approx(want)


@pytest.mark.parametrize("seed", range(6))
def test_dp_equals_exhaustive(seed):
    rng = np.random.default_rng(seed)
    grid = np.sort(rng.choice(np.arange(-4, 5), 4, replace=False)).astype(float)
    reqs = random_pl(rng, 4, -4, 4)
    X0 = L(rng.choice(grid, 2))
    dp = chasing_opt_line(reqs, 2, X0, grid).value
    assert dp == pytest.approx(chasing_opt_exhaustive(reqs, 2, X0, grid), abs=1e-9)


def test_trajectory_replays_to_value():
    rng = np.random.default_rng(7)
    reqs = random_pl(rng, 10) + [PowerDistance(1.0, 2.0, 0.5)]
    X0 = L([-1.0, 2.0])
    res = chasing_opt_line(reqs, 2, X0)
    total, X = 0.0, X0
    for f, Y in zip(reqs, res.configs[1:]):
        total += match_cost(X, Y) + serve_cost(Y, f)
        X = Y
    assert total == pytest.approx(res.value, abs=1e-9)
    assert res.trajectory.total == pytest.approx(res.value, abs=1e-9)


def test_checkpointed_recovery_agrees(monkeypatch):
    import kchase.oracles as oracles
    rng = np.random.default_rng(8)
    reqs = random_pl(rng, 16)
    X0 = L([0.0, 1.0])
    full = chasing_opt_line(reqs, 2, X0)
    monkeypatch.setattr(oracles, "TABLE_BYTES_BUDGET", 1)
    ck = chasing_opt_line(reqs, 2, X0)
    assert ck.trajectory.total == pytest.approx(full.value)


def test_capacity_error():
    reqs = [PowerDistance(float(z), 1) for z in range(120)]
    with pytest.raises(CapacityError):
        chasing_opt_line(reqs, 3, L([0, 1, 2]))


def test_linear_pieces_exact_once_breakpoints_present():
    rng = np.random.default_rng(9)
    reqs = random_pl(rng, 6)
    X0 = L([0.0, 0.5])
    rep = chasing_opt_refine(reqs, 2, X0, [0.5, 0.25, 0.125])
    assert max(rep.values) - min(rep.values) <= 1e-9


def test_quadratic_refinement_converges():
    rng = np.random.default_rng(10)
    reqs = [PowerDistance(round(float(z), 3), 2.0, 1.0) for z in rng.uniform(-2, 2, 6)]
    rep = chasing_opt_refine(reqs, 1, L([0.0]), [0.4, 0.2, 0.1, 0.05, 0.025])
    assert rep.monotone
    d = np.array(rep.differences)
    assert np.all(d >= -1e-12) and d[-1] <= d[0]


def test_blind_identity_and_repeat():
    X0 = L([1.0, 4.0])
    reqs = [PowerDistance(1.0, 1), PowerDistance(4.0, 2)]
    assert blind_opt(reqs, 2, X0) == 0 == chasing_opt_line(reqs, 2, X0).value
    assert blind_opt(reqs, 2, X0, initial_move=False) == 0
    rep = [PowerDistance(3.0, 1)] * 5
    assert blind_opt(rep, 1, L([0.0])) == pytest.approx(chasing_opt_line(rep, 1, L([0.0])).value)


def test_blind_without_initial_move_pays_first_request_at_start():
    f = PowerDistance(3.0, 1)
    assert blind_opt([f], 1, L([0.0]), initial_move=False) == pytest.approx(3.0)
    assert blind_opt([f], 1, L([0.0])) == pytest.approx(3.0)


@pytest.mark.parametrize("seed", range(5))
def test_line_chaser_never_beats_opt(seed):
    rng = np.random.default_rng(50 + seed)
    reqs = random_pl(rng, 15)
    X0 = L(np.round(rng.uniform(-5, 5, 2), 1))
    traj, _ = run_line_chaser(X0, reqs)
    assert traj.total >= chasing_opt_line(reqs, 2, X0).value - 1e-9


def test_finite_opt_point_requests_match_kserver():
    rng = np.random.default_rng(11)
    m = Metric.from_points(rng.random((6, 2)))
    sp = ConfigSpace(m, 2)
    req = rng.integers(0, 6, 12)
    big = [PowerDistance(int(r), 1.0, 1e6, m) for r in req]
    assert finite_chasing_opt(sp, big, (0, 1)) == pytest.approx(kserver_opt(sp, req, (0, 1)))


def test_kmedian_opt_matches_finite_opt():
    rng = np.random.default_rng(12)
    m = Metric.from_points(rng.random((5, 2)))
    sp = ConfigSpace(m, 2)
    c, z = rng.uniform(0.1, 1, 8), rng.integers(0, 5, 8)
    reqs = [PowerDistance(int(zz), 1.0, float(cc), m) for cc, zz in zip(c, z)]
    assert kmedian_opt(sp, c, z, (0, 1)) == pytest.approx(finite_chasing_opt(sp, reqs, (0, 1)))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.floats(-3, 3), st.floats(0.1, 2)), min_size=1, max_size=6),
       st.floats(-3, 3))
def test_dp_lower_bounds_any_grid_strategy(specs, x0):
    reqs = [PowerDistance(round(z, 2), 1.0, round(c, 2)) for z, c in specs]
    X0 = L([round(x0, 2)])
    opt = chasing_opt_line(reqs, 1, X0).value
    # staying put and jumping to each minimiser are two grid strategies
    stay = sum(serve_cost(X0, f) for f in reqs)
    jump, X = 0.0, X0
    for f in reqs:
        Y = L([f.minimizer()])
        jump += match_cost(X, Y)
        X = Y
    assert opt <= min(stay, jump) + 1e-9
    assert line_grid(reqs, X0)[0] <= min(f.minimizer() for f in reqs)
