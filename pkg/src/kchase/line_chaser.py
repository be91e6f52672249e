"""Deterministic double-coverage chaser for convex requests on the line.

The rule: leave things alone if some server already sits at the request's
minimiser; otherwise move the nearest extreme server (minimiser outside the
hull) or the two servers bracketing the minimiser (inside the hull) towards it,
at equal speed, for as long as the current service cost exceeds the movement
spent in this step. ``potential`` and ``certify_step`` expose the amortised
analysis so every simulated step can be checked against an adversary move.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import (LINE, Configuration, Request, Trajectory, match_cost,
                   pairwise_spread, serve_cost)

AT_ARGMIN_TOL = 1e-12


@dataclass(frozen=True)
class ChaseStep:
    pre: Configuration
    post: Configuration
    moved: frozenset
    stop_reason: str  # reached_argmin | cost_balance | already_at_argmin
    service: float
    movement: float


@dataclass(frozen=True)
class PotentialState:
    phi: float
    match: float
    spread: float


def _branch_root(f: Request, x0: float, direction: float, rate: float,
                 t_marks: np.ndarray, linear: bool) -> float:
    """First t in the marked range where f(x0 + direction*t) <= rate*t.

    ``t_marks`` is sorted, starts at 0 and ends at the full travel distance;
    the branch value minus ``rate*t`` is strictly decreasing, so there is at
    most one crossing. Returns ``inf`` when there is none.
    """
    vals = np.asarray(f.value(x0 + direction * t_marks), dtype=float) - rate * t_marks
    hit = np.nonzero(vals <= 0.0)[0]
    if len(hit) == 0:
        return math.inf
    i = int(hit[0])
    if i == 0:
        return 0.0
    t_lo, t_hi = float(t_marks[i - 1]), float(t_marks[i])
    g_lo, g_hi = float(vals[i - 1]), float(vals[i])
    if not math.isfinite(g_lo):
        # indicator: +inf until the body is entered exactly at t_hi
        return t_hi
    if linear:
        return t_lo + (t_hi - t_lo) * g_lo / (g_lo - g_hi)

    def g(t):
        return float(f.value(x0 + direction * t)) - rate * t

    return brentq(g, t_lo, t_hi, xtol=1e-13, rtol=4 * np.finfo(float).eps)


def _t_marks(f: Request, movers, travel: float) -> np.ndarray:
    marks = {0.0, travel}
    for x0, direction in movers:
        for b in f.breakpoints():
            t = (b - x0) * direction
            if 0.0 < t < travel:
                marks.add(float(t))
    return np.array(sorted(marks))


def chase_step(X: Configuration, f: Request) -> ChaseStep:
    """Serve one request with the line double-coverage rule."""
    if X.metric.kind != "line":
        raise ValueError("chase_step works on the line only")
    try:
        m = float(f.minimizer())
    except (TypeError, ValueError) as exc:
        raise ValueError(f"request has no finite minimiser: {exc}") from exc
    if not math.isfinite(m):
        raise ValueError("request has no finite minimiser")
    pos = list(X.positions)
    k = len(pos)
    fmin = float(f.value(m))
    vals = np.asarray(f.value(np.array(pos)), dtype=float)
    if np.any(vals <= fmin + AT_ARGMIN_TOL):
        return ChaseStep(X, X, frozenset(), "already_at_argmin", float(vals.min()), 0.0)

    if m < pos[0] or m > pos[-1]:
        idx = [0] if m < pos[0] else [k - 1]
    else:
        left = max(i for i in range(k) if pos[i] < m)
        idx = [left, left + 1]
    movers = [(pos[i], 1.0 if m > pos[i] else -1.0) for i in idx]
    travel = min(abs(m - pos[i]) for i in idx)
    rate = float(len(idx))
    marks = _t_marks(f, movers, travel)
    t_star = min(_branch_root(f, x0, d, rate, marks, f.piecewise_linear) for x0, d in movers)

    if t_star >= travel:
        t_star, reason = travel, "reached_argmin"
    else:
        reason = "cost_balance"
    new = list(pos)
    for i, (x0, d) in zip(idx, movers):
        new[i] = x0 + d * t_star
        if reason == "reached_argmin" and abs(m - x0) == travel:
            new[i] = m
    post = Configuration(LINE, tuple(new))
    movement = match_cost(X, post)
    return ChaseStep(X, post, frozenset(idx), reason, serve_cost(post, f), movement)


def run_line_chaser(X0: Configuration, requests) -> tuple[Trajectory, list[ChaseStep]]:
    traj = Trajectory(X0)
    steps = []
    X = X0
    for f in requests:
        st = chase_step(X, f)
        traj.append(f, X, st.post, st.service, st.movement)
        steps.append(st)
        X = st.post
    return traj, steps


def potential(X: Configuration, Y: Configuration) -> PotentialState:
    """2k * match(X, Y) + 2 * (sum of pairwise distances within X)."""
    if X.metric.kind != "line":
        raise ValueError("potential is defined for line configurations")
    mc = match_cost(X, Y)
    sp = pairwise_spread(X)
    return PotentialState(2 * X.k * mc + 2 * sp, mc, sp)


def step_inequality(X, X_post, Y, Y_post, f):
    """Both sides of the per-step amortised inequality (lhs <= rhs)."""
    k = X.k
    lhs = potential(X_post, Y_post).phi - potential(X, Y).phi
    rhs = 4 * k * (match_cost(Y, Y_post) + serve_cost(Y_post, f)) - (
        match_cost(X, X_post) + serve_cost(X_post, f))
    return lhs, rhs


def certify_step(X, X_post, Y, Y_post, f, tol: float = 1e-7) -> bool:
    lhs, rhs = step_inequality(X, X_post, Y, Y_post, f)
    return bool(lhs <= rhs + tol)
