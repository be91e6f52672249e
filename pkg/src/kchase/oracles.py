"""Offline optima by dynamic programming, plus exhaustive cross-checks.

On the line the DP runs over ordered k-tuples of grid points. Moving labelled
servers coordinate-wise costs the L1 distance between tuples, which is
separable, so one DP layer is k one-dimensional distance transforms (two
cumulative-min passes per axis). The optimum over ordered tuples equals the
optimum under min-cost matching because any matching move can be replayed
with server labels attached.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import LINE, CapacityError, Configuration, Trajectory, match_cost, serve_cost
from .kserver import ConfigSpace

MAX_GRID_CONFIGS = 10 ** 6
TABLE_BYTES_BUDGET = 400 * 2 ** 20


@dataclass
class DPState:
    layer: int
    values: np.ndarray
    grid: np.ndarray


@dataclass
class OptResult:
    value: float
    trajectory: Trajectory | None
    grid: np.ndarray
    configs: list = field(default_factory=list)


def line_grid(requests, X0: Configuration, extra=()) -> np.ndarray:
    """Initial positions plus every request minimiser and breakpoint."""
    pts = set(float(p) for p in X0.positions)
    for f in requests:
        pts.update(float(b) for b in f.breakpoints())
        pts.add(float(f.minimizer()))
    pts.update(float(e) for e in extra)
    return np.array(sorted(pts))


def _check_capacity(G: int, k: int) -> None:
    if G ** k > MAX_GRID_CONFIGS:
        raise CapacityError(f"grid of {G} points with k={k} gives {G ** k} tuples "
                            f"(capacity {MAX_GRID_CONFIGS})")


def l1_transform(V: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """out(C) = min over C' of V(C') + sum_i |grid[C_i] - grid[C'_i]|."""
    out = V
    for axis in range(V.ndim):
        shape = [1] * V.ndim
        shape[axis] = len(grid)
        g = grid.reshape(shape)
        out = g + np.minimum.accumulate(out - g, axis=axis)
        rev = np.flip(out + g, axis=axis)
        back = np.flip(np.minimum.accumulate(rev, axis=axis), axis=axis) - g
        out = np.minimum(out, back)
    return out


def _serve_tensor(f, grid: np.ndarray, k: int) -> np.ndarray:
    vals = np.asarray(f.value(grid), dtype=float)
    out = None
    for axis in range(k):
        shape = [1] * k
        shape[axis] = len(grid)
        a = vals.reshape(shape)
        out = a if out is None else np.minimum(out, a)
    return np.broadcast_to(out, (len(grid),) * k)


def _start_table(grid, X0, k):
    V = np.full((len(grid),) * k, np.inf)
    idx = tuple(int(np.searchsorted(grid, p)) for p in X0.positions)
    for a, p in zip(idx, X0.positions):
        if a >= len(grid) or grid[a] != p:
            raise ValueError("grid must contain the initial positions")
    V[idx] = 0.0
    return V


def _tuple_l1_to(grid, k, target):
    out = 0.0
    for axis in range(k):
        shape = [1] * k
        shape[axis] = len(grid)
        out = out + np.abs(grid.reshape(shape) - grid[target[axis]])
    return out


def chasing_opt_line(requests, k: int, X0: Configuration, grid=None,
                     recover: bool = True) -> OptResult:
    """Offline optimum of k-chasing on the line restricted to grid positions."""
    requests = list(requests)
    if X0.k != k:
        raise ValueError("X0 has the wrong number of servers")
    grid = np.union1d(line_grid(requests, X0) if grid is None else np.asarray(grid, float),
                      np.asarray(X0.positions, dtype=float))
    G = len(grid)
    _check_capacity(G, k)
    T = len(requests)
    V = _start_table(grid, X0, k)
    per_table = V.nbytes
    stride = 1
    if recover and per_table * (T + 1) > TABLE_BYTES_BUDGET:
        stride = max(1, math.ceil(math.sqrt(T)))
    saved = {0: V}

    def advance(V, t):
        return l1_transform(V, grid) + _serve_tensor(requests[t - 1], grid, k)

    for t in range(1, T + 1):
        V = advance(V, t)
        if recover and t % stride == 0:
            saved[t] = V
    value = float(V.min())
    if not recover or not math.isfinite(value):
        return OptResult(value, None, grid)

    def table(t):
        if t in saved:
            return saved[t]
        base = (t // stride) * stride
        W = saved[base]
        for s in range(base + 1, t + 1):
            W = advance(W, s)
        return W

    cur = np.unravel_index(int(np.argmin(V)), V.shape)
    idx_path = [cur]
    for t in range(T, 0, -1):
        prev_table = table(t - 1)
        cand = prev_table + _tuple_l1_to(grid, k, cur)
        cur = np.unravel_index(int(np.argmin(cand)), cand.shape)
        idx_path.append(cur)
    idx_path.reverse()
    configs = [Configuration(LINE, tuple(grid[list(c)])) for c in idx_path]
    traj = Trajectory(configs[0])
    for t, f in enumerate(requests, start=1):
        pre, post = configs[t - 1], configs[t]
        traj.append(f, pre, post, serve_cost(post, f), match_cost(pre, post))
    return OptResult(value, traj, grid, configs)


def chasing_opt_exhaustive(requests, k: int, X0: Configuration, grid) -> float:
    """Enumerate every sequence of sorted grid configurations (tiny instances)."""
    requests = list(requests)
    grid = np.union1d(np.asarray(grid, dtype=float), np.asarray(X0.positions, dtype=float))
    confs = [Configuration(LINE, c) for c in itertools.combinations_with_replacement(grid, k)]
    n = len(confs)
    if n ** max(1, len(requests)) > 5 * 10 ** 6:
        raise CapacityError("exhaustive enumeration too large")
    if not requests:
        return 0.0
    M = np.array([[match_cost(a, b) for b in confs] for a in confs])
    start = np.array([match_cost(X0, b) for b in confs])
    S = np.array([[serve_cost(c, f) for c in confs] for f in requests])
    T = len(requests)
    paths = np.array(list(itertools.product(range(n), repeat=T)))
    total = start[paths[:, 0]] + S[0, paths[:, 0]]
    for t in range(1, T):
        total = total + M[paths[:, t - 1], paths[:, t]] + S[t, paths[:, t]]
    return float(total.min())


def blind_opt(requests, k: int, X0: Configuration, grid=None, initial_move: bool = True) -> float:
    """Offline optimum when each request is charged before that step's move.

    With ``initial_move`` the servers may be positioned (paying movement)
    before the first charge, which is what a prescient solution does.
    """
    requests = list(requests)
    grid = np.union1d(line_grid(requests, X0) if grid is None else np.asarray(grid, float),
                      np.asarray(X0.positions, dtype=float))
    _check_capacity(len(grid), k)
    U = _start_table(grid, X0, k)
    if initial_move:
        U = l1_transform(U, grid)
    for f in requests:
        U = l1_transform(U + _serve_tensor(f, grid, k), grid)
    return float(U.min())


@dataclass
class RefineReport:
    resolutions: list
    values: list
    monotone: bool
    differences: list
    value: float
    error_bar: float


def chasing_opt_refine(requests, k: int, X0: Configuration, resolutions,
                       margin: float = 1.0) -> RefineReport:
    """OPT on successively finer nested grids; finer grids never do worse."""
    requests = list(requests)
    res = [float(h) for h in resolutions]
    if any(b >= a for a, b in zip(res, res[1:])):
        raise ValueError("resolutions must be strictly decreasing")
    ess = line_grid(requests, X0)
    lo, hi = float(ess.min()) - margin, float(ess.max()) + margin
    values = []
    grid = ess
    for h in res:
        uniform = lo + h * np.arange(int(math.floor((hi - lo) / h)) + 1)
        grid = np.union1d(grid, uniform)
        values.append(chasing_opt_line(requests, k, X0, grid, recover=False).value)
    monotone = all(b <= a + 1e-9 for a, b in zip(values, values[1:]))
    if not monotone:
        raise AssertionError(f"OPT increased under grid refinement: {values}")
    diffs = [a - b for a, b in zip(values, values[1:])]
    return RefineReport(res, values, monotone, diffs, values[-1] if values else 0.0,
                        diffs[-1] if diffs else 0.0)


# ---------------------------------------------------------------------------
# finite metrics

def finite_chasing_opt(space: ConfigSpace, requests, X0) -> float:
    """Offline optimum for arbitrary requests on a finite metric (move, then serve)."""
    requests = list(requests)
    if not requests:
        return 0.0
    serve = space.serve_table(requests)
    return kernels.serve_dp_run(space.idx(X0), serve, space.replace, space.cost)


def kmedian_serve_table(space: ConfigSpace, coefs, centers) -> np.ndarray:
    D = space.metric.dist_matrix
    centers = np.asarray(centers, dtype=int)
    coefs = np.asarray(coefs, dtype=float)
    # (T, S): c_t * min_i d(C_i, z_t)
    d = D[space.configs][:, :, centers].min(axis=1).T
    return coefs[:, None] * d


def kmedian_opt(space: ConfigSpace, coefs, centers, X0) -> float:
    if len(centers) == 0:
        return 0.0
    serve = kmedian_serve_table(space, coefs, centers)
    return kernels.serve_dp_run(space.idx(X0), serve, space.replace, space.cost)
