import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kchase.core import Configuration, IntervalIndicator, PiecewiseLinear, PowerDistance
from kchase.line_chaser import certify_step, chase_step, potential, run_line_chaser
from kchase.oracles import chasing_opt_line

L = Configuration.on_line


def simulate(X, f, dt=1e-6):
    """Independent time-stepped run of the same movement rule."""
    pos = np.array(X.positions, float)
    m = f.minimizer()
    if m < pos[0] or m > pos[-1]:
        idx = [0] if m < pos[0] else [len(pos) - 1]
    else:
        i = int(np.max(np.nonzero(pos < m)[0]))
        idx = [i, i + 1]
    dirs = np.sign(m - pos[idx])
    travel = np.abs(m - pos[idx]).min()
    t = np.arange(0, travel + dt, dt)
    serve = np.min(np.stack([f.value(pos[j] + d * t) for j, d in zip(idx, dirs)]), axis=0)
    stop = t[np.argmax(serve <= len(idx) * t)] if np.any(serve <= len(idx) * t) else travel
    out = pos.copy()
    out[idx] += dirs * stop
    return out


def test_single_server_balances():
    st_ = chase_step(L([0]), PowerDistance(5, 1, 1))
    assert st_.post.positions == pytest.approx((2.5,))
    assert st_.service == pytest.approx(2.5) and st_.movement == pytest.approx(2.5)
    assert st_.stop_reason == "cost_balance"


def test_two_servers_bracket_centre():
    st_ = chase_step(L([0, 10]), PowerDistance(4, 1, 1))
    assert st_.post.positions == pytest.approx((4 / 3, 26 / 3))
    assert st_.service == pytest.approx(8 / 3) and st_.movement == pytest.approx(8 / 3)
    np.testing.assert_allclose(simulate(L([0, 10]), PowerDistance(4, 1, 1)),
                               st_.post.positions, atol=1e-4)


def test_server_at_argmin_stays():
    st_ = chase_step(L([4, 9]), PowerDistance(4, 2, 1))
    assert st_.post == st_.pre and st_.service == 0 and st_.movement == 0


def test_quadratic_matches_simulation():
    X, f = L([-3, 7]), PowerDistance(1.5, 2.0, 0.3)
    st_ = chase_step(X, f)
    np.testing.assert_allclose(simulate(X, f), st_.post.positions, atol=1e-4)


def test_indicator_reaches_body():
    st_ = chase_step(L([0, 10]), IntervalIndicator(2, 3))
    assert st_.post.positions[0] == pytest.approx(2.0)
    assert st_.service == 0


def test_potential_values():
    assert potential(L([0, 2]), L([1, 3])).phi == 12
    assert potential(L([1, 1]), L([1, 1])).phi == 0
    assert potential(L([0]), L([5])).phi == 10


def test_certificate_on_zero_move():
    X = L([4, 9])
    f = PowerDistance(4, 2, 1)
    assert certify_step(X, X, X, X, f)


def test_certificate_catches_bad_move():
    X, Y, f = L([0]), L([5]), PowerDistance(5, 1, 1)
    assert not certify_step(X, L([-3]), Y, Y, f)


def test_certificate_against_opt_trajectory():
    rng = np.random.default_rng(4)
    X0 = L([-2.0, 3.0])
    reqs = [PiecewiseLinear([z - 1, z, z + 1], [a, 0, b])
            for z, a, b in zip(np.round(rng.uniform(-5, 5, 12), 2), *rng.uniform(0.2, 2, (2, 12)))]
    Y = chasing_opt_line(reqs, 2, X0).configs
    _, steps = run_line_chaser(X0, reqs)
    X = X0
    for t, (f, s) in enumerate(zip(reqs, steps)):
        assert certify_step(X, s.post, Y[t], Y[t + 1], f)
        X = s.post


def test_no_minimiser_raises():
    with pytest.raises(ValueError):
        chase_step(L([0]), PiecewiseLinear([0, 1], [0, 1]))


requests = st.builds(
    lambda z, g, c: PowerDistance(round(z, 2), g, c),
    st.floats(-10, 10), st.sampled_from([1.0, 1.5, 2.0]), st.floats(0.1, 3.0))


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(-10, 10), min_size=1, max_size=3), requests)
def test_step_properties(xs, f):
    X = L(xs)
    s = chase_step(X, f)
    # order kept, movers approach the minimiser, balance at a cost stop
    pre, post = np.array(X.positions), np.array(s.post.positions)
    assert np.all(np.diff(post) >= -1e-12)
    m = f.minimizer()
    assert np.all(np.abs(post - m) <= np.abs(pre - m) + 1e-12)
    if s.stop_reason == "cost_balance" and s.movement > 0:
        assert abs(s.service - s.movement) <= 1e-6
