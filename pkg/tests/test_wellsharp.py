import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kchase.core import (LINE, CapacityError, Combination, IntervalIndicator,
                         Metric, PowerDistance)
from kchase.kmedian import KMedianFilter, MedianRequest, make_backend
from kchase.kserver import ConfigSpace
from kchase.wellsharp import (WSRWFA, DegenerateAnchorError, _is_mtm, check_well_sharpened,
                              replacement_bound_holds, kmedian_replacement, power_requests, run_wsrwfa,
                              split_request)


def rng(s=0):
    return np.random.default_rng(s)


def test_quadratic_accepted():
    w = check_well_sharpened(PowerDistance(0.0, 2.0), alpha=2, beta=2, rng=rng())
    assert w.accepted and w.checked > 10_000


def test_cone_accepted_with_equality():
    f = PowerDistance(1.0, 1.0, 0.7)
    w = check_well_sharpened(f, alpha=2, beta=1, rng=rng())
    assert w.accepted
    x = np.array([-3.0, 0.5, 4.0])
    np.testing.assert_allclose(f.value(x) / np.abs(x - 1.0), 0.7)


def test_indicator_rejected_with_witness():
    w = check_well_sharpened(IntervalIndicator(-1, 1), z=0.0, alpha=2, beta=0.5, rng=rng())
    assert not w.accepted
    x, y, z = w.violations[0]
    assert z == 0.0


@pytest.mark.parametrize("gamma", [1.0, 1.5, 2.0])
@pytest.mark.parametrize("alpha", [1.5, 2.0, 4.0])
def test_power_family_closed_form(alpha, gamma):
    # at the boundary d(x) = alpha d(y) the ratio test is an equality
    dy = np.array([0.1, 1.0, 3.0])
    dx = alpha * dy
    lhs = alpha ** (gamma - 1) * dy ** gamma / dy
    rhs = dx ** gamma / dx
    np.testing.assert_allclose(lhs, rhs)
    assert check_well_sharpened(PowerDistance(0.0, gamma), alpha=alpha, beta=alpha ** (gamma - 1),
                                sample_budget=20_000, rng=rng(1)).accepted


def test_slightly_smaller_beta_rejected():
    w = check_well_sharpened(PowerDistance(0.0, 2.0), alpha=2, beta=1.9, rng=rng(2))
    assert not w.accepted


def test_planar_and_finite_metrics():
    f = PowerDistance(np.zeros(2), 2.0, 1.0, Metric.euclidean(2))
    assert check_well_sharpened(f, alpha=2, beta=2, sample_budget=5000, rng=rng(3)).accepted
    m = Metric.from_points(rng(4).random((8, 2)))
    g = PowerDistance(3, 1.5, 1.0, m)
    assert check_well_sharpened(g, alpha=2, beta=2 ** 0.5, sample_budget=5000, rng=rng(5)).accepted


@settings(max_examples=20, deadline=None)
@given(st.floats(0.1, 5), st.floats(0.1, 5), st.sampled_from([1.0, 1.5, 2.0]),
       st.sampled_from([1.5, 2.0, 4.0]))
def test_positive_combination_stays_well_sharpened(a, b, gamma, alpha):
    beta = alpha ** (gamma - 1)
    f1, f2 = PowerDistance(0.0, gamma, 1.0), PowerDistance(0.0, 1.0, 1.0)
    r = np.random.default_rng(7)
    assert check_well_sharpened(f1, alpha=alpha, beta=beta, sample_budget=4000, rng=r).accepted
    assert check_well_sharpened(f2, alpha=alpha, beta=beta, sample_budget=4000, rng=r).accepted
    g = Combination([(a, f1), (b, f2)])
    assert check_well_sharpened(g, alpha=alpha, beta=beta, sample_budget=4000, rng=r).accepted


def test_replacement_coefficient():
    f = PowerDistance(0.0, 2.0, 1.0)
    rep = kmedian_replacement(f, 0.0, 2.0, LINE)
    assert rep.c == pytest.approx(2.0)
    assert rep.value(3.0) == pytest.approx(6.0)
    g = PowerDistance(0.0, 1.0, 0.5)
    rep = kmedian_replacement(g, 0.0, 4.0, LINE)
    np.testing.assert_allclose(rep.value(np.array([-2.0, 1.0, 7.0])), g.value(np.array([-2.0, 1.0, 7.0])))
    with pytest.raises(DegenerateAnchorError):
        kmedian_replacement(f, 0.0, 0.0, LINE)


def test_replacement_substitution():
    f = PowerDistance(0.0, 2.0, 1.0)
    rep = kmedian_replacement(f, 0.0, 2.0, LINE)
    assert rep.value(3.0) >= rep.value(2.0) / 2
    assert f.value(3.0) >= rep.value(3.0) / 2
    assert replacement_bound_holds(f, rep, 3.0, alpha=2, beta=2)


def test_split_counts():
    f = PowerDistance(0.0, 2.0, 1.0)
    M, copies = split_request(f, [2.0, 5.0])
    assert M == 5 and len(copies) == 5
    assert copies[0].value(5.0) == pytest.approx(5.0)
    assert split_request(PowerDistance(0.0, 1.0, 0.4), [3.0, 9.0])[0] == 1
    assert split_request(PowerDistance(0.0, 1.0, 1.0), [30.0, 90.0])[0] == 1
    with pytest.raises(CapacityError):
        split_request(PowerDistance(0.0, 2.0, 1.0), [2e4])


def space(seed=0, n=6, k=2):
    m = Metric.from_points(rng(seed).random((n, 2)))
    return m, ConfigSpace(m, k)


def test_first_step_by_hand():
    m, sp = space(1)
    X0 = (0, 1)
    z = 4
    f = PowerDistance(z, 2.0, 1.0, m)
    alg = WSRWFA(sp, X0, alpha=6, beta=6)
    alg.step(f, np.random.default_rng(0))
    D = m.dist_matrix
    M, copies = split_request(f, X0, z, m)
    s = alg.steps[0]
    anchor = X0[int(np.argmin(D[list(X0), z]))]
    assert s.anchor == anchor
    assert s.coef == pytest.approx(copies[0].value(anchor) / D[anchor, z])
    assert len([p for p in alg.steps if p.t == 1]) == M


def test_occupied_centre_is_free():
    m, sp = space(2)
    alg = WSRWFA(sp, (0, 3), 6, 6)
    assert alg.step(PowerDistance(3, 2.0, 1.0, m), np.random.default_rng(0)) == 0
    assert alg.steps[-1].movement == 0 and alg.total == 0


@pytest.mark.parametrize("blind", [False, True])
def test_reduces_to_kmedian_filter(blind):
    m, sp = space(3)
    r = rng(8)
    z, c = r.integers(0, 6, 30), r.uniform(0.05, 1.0, 30)
    reqs = [PowerDistance(int(zz), 1.0, float(cc), m) for zz, cc in zip(z, c)]
    alg = run_wsrwfa(sp, (0, 1), reqs, np.random.default_rng(4), alpha=6, beta=1, blind=blind)
    filt = KMedianFilter(make_backend("wfa", sp, (0, 1)), blind)
    coins = np.random.default_rng(4)
    confs = []
    for zz, cc in zip(z, c):
        _, conf, _ = filt.step(MedianRequest(float(cc), int(zz)), coins)
        confs.append(conf.positions)
    assert [s.post for s in alg.steps] == confs
    assert alg.total == pytest.approx(filt.total)


def test_runs_respect_mtm_and_replacement_bound():
    for seed in range(5):
        m, sp = space(10 + seed)
        r = rng(seed)
        reqs = power_requests(m, r.integers(0, 6, 15), r.uniform(1, 2, 15))
        alpha = 10 * 3
        alg = run_wsrwfa(sp, (0, 1), reqs, r, alpha, alpha ** 1.0)
        assert alg.mtm_violations == 0 and not alg.anchor_violations


def test_mtm_predicate():
    assert _is_mtm((0, 1), (0, 1), 4)
    assert _is_mtm((0, 1), (0, 4), 4)
    assert not _is_mtm((0, 1), (0, 3), 4)
    assert not _is_mtm((0, 1), (3, 4), 4)
