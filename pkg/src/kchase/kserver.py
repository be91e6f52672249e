"""k-server backends: work-function algorithm, exact offline optimum, and
double coverage on the line.

Configurations over a finite metric are sorted multisets of point indices,
numbered in lexicographic order by :class:`ConfigSpace`. A matching-cost
"distance transform" over that space is done by relaxing single-server moves
``k`` times; a min-cost matching between two k-multisets always decomposes
into at most k such moves, so the relaxation is exact.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import LINE, CapacityError, Configuration, Metric

MAX_CONFIGS = 10 ** 6


def count_configs(n: int, k: int) -> int:
    return math.comb(n + k - 1, k)


class ConfigSpace:
    """All k-multisets of a finite metric's points, with move tables."""

    def __init__(self, metric: Metric, k: int, capacity: int = MAX_CONFIGS):
        if metric.kind != "finite":
            raise ValueError("configuration spaces need a finite metric")
        n = metric.n
        size = count_configs(n, k)
        if size > capacity:
            raise CapacityError(
                f"{size} configurations for n={n}, k={k} exceeds the capacity {capacity}")
        self.metric, self.k, self.n = metric, k, n
        self.configs = np.array(list(itertools.combinations_with_replacement(range(n), k)),
                                dtype=np.int64).reshape(-1, k)
        self.size = len(self.configs)
        self.index = {tuple(c): i for i, c in enumerate(self.configs.tolist())}
        D = metric.dist_matrix
        S = self.size
        replace = np.empty((S, k, n), dtype=np.int32)
        for c, conf in enumerate(self.configs.tolist()):
            for i in range(k):
                rest = conf[:i] + conf[i + 1:]
                for p in range(n):
                    replace[c, i, p] = self.index[tuple(sorted(rest + [p]))]
        self.replace = replace
        self.cost = np.ascontiguousarray(D[self.configs][:, :, :], dtype=np.float64)
        contains = np.zeros((S, n), dtype=np.uint8)
        for i in range(k):
            contains[np.arange(S), self.configs[:, i]] = 1
        self.contains = contains

    def idx(self, conf) -> int:
        if isinstance(conf, (int, np.integer)):
            return int(conf)
        if isinstance(conf, Configuration):
            conf = conf.positions
        return self.index[tuple(sorted(int(p) for p in conf))]

    def config(self, i: int) -> Configuration:
        return Configuration(self.metric, tuple(self.configs[i]))

    def relax(self, values, rounds: int | None = None) -> np.ndarray:
        return kernels.relax_moves(np.asarray(values, dtype=np.float64), self.replace,
                                   self.cost, self.k if rounds is None else rounds)

    def match_from(self, conf) -> np.ndarray:
        """match(conf, C) for every configuration C."""
        v = np.full(self.size, np.inf)
        v[self.idx(conf)] = 0.0
        return self.relax(v)

    def match_table(self) -> np.ndarray:
        return np.stack([self.match_from(self.configs[i]) for i in range(self.size)])

    def serve_table(self, requests) -> np.ndarray:
        """serve[t, c] = min over servers of request t's value."""
        pts = np.arange(self.n)
        out = np.empty((len(requests), self.size))
        for t, f in enumerate(requests):
            vals = np.asarray(f.value(pts), dtype=float)
            out[t] = vals[self.configs].min(axis=1)
        return out


@dataclass
class WorkFunction:
    table: np.ndarray
    t: int = 0


def initial_work_function(space: ConfigSpace, X0) -> WorkFunction:
    return WorkFunction(space.match_from(X0), 0)


def update_work_function(space: ConfigSpace, w: WorkFunction, r: int) -> WorkFunction:
    """w_t(C) = min over C' containing r of w_{t-1}(C') + match(C', C)."""
    restricted = np.where(space.contains[:, r].astype(bool), w.table, np.inf)
    return WorkFunction(space.relax(restricted), w.t + 1)


def wfa_step(space: ConfigSpace, w: WorkFunction, X, r: int):
    """One work-function step. Returns (new work function, new configuration, movement).

    The algorithm moves a single server: among ``X - x + r`` it picks the one
    minimising ``w_t(C) + d(x, r)`` (this attains the minimum over all
    configurations containing r), ties to the lexicographically smallest C.
    """
    r = int(r)
    x = space.idx(X)
    w_new = update_work_function(space, w, r)
    if space.contains[x, r]:
        return w_new, space.config(x), 0.0
    best = None
    for i in range(space.k):
        c = int(space.replace[x, i, r])
        val = w_new.table[c] + space.cost[x, i, r]
        key = (val, c)
        if best is None or key < best[0]:
            best = (key, c, float(space.cost[x, i, r]))
    _, c, mv = best
    return w_new, space.config(c), mv


@dataclass
class InvariantReport:
    steps: int
    lipschitz_violations: int
    monotone_violations: int


def work_function_invariants(space: ConfigSpace, X0, requests, tol: float = 1e-9,
                             match: np.ndarray | None = None) -> InvariantReport:
    """Check after every step that w_t is 1-Lipschitz under matching distance
    and that w_t >= w_{t-1} pointwise.

    With ``match`` (the full matching table) the Lipschitz test is against all
    pairs; otherwise against single-server moves, which is equivalent.
    """
    w = initial_work_function(space, X0)
    lip = mono = 0
    for r in requests:
        new = update_work_function(space, w, int(r))
        v = new.table
        if match is not None:
            gap = np.abs(v[:, None] - v[None, :]) - match
            lip += int((gap > tol).sum())
        else:
            one = (v[space.replace] + space.cost).min(axis=(1, 2))
            lip += int((v > one + tol).sum())
        mono += int((v < w.table - tol).sum())
        w = new
    return InvariantReport(len(requests), lip, mono)


class WFA:
    """Stateful work-function algorithm on a finite metric."""

    def __init__(self, space: ConfigSpace, X0):
        self.space = space
        self.w = initial_work_function(space, X0)
        self.x = space.idx(X0)

    @property
    def config(self) -> Configuration:
        return self.space.config(self.x)

    @property
    def positions(self) -> np.ndarray:
        return self.space.configs[self.x]

    def serve(self, r: int) -> float:
        self.w, conf, mv = wfa_step(self.space, self.w, self.x, r)
        self.x = self.space.idx(conf)
        return mv

    def dist_to(self, z: int) -> float:
        return float(self.space.metric.dist_matrix[self.positions, int(z)].min())


def run_wfa(space: ConfigSpace, X0, requests):
    """Whole-sequence WFA through the compiled kernel.

    Returns (configuration ids after each step incl. the start, movement per step,
    final work function table).
    """
    w0 = space.match_from(X0)
    w, configs, moves = kernels.wfa_run(w0, space.idx(X0), np.asarray(requests, dtype=np.int64),
                                        space.replace, space.cost, space.contains)
    return configs, moves, w


def kserver_opt(space: ConfigSpace, requests, X0) -> float:
    """Minimum total movement serving every request point in order."""
    req = np.asarray(list(requests), dtype=np.int64)
    if len(req) == 0:
        return 0.0
    return kernels.opt_run(space.idx(X0), req, space.replace, space.cost, space.contains)


def kserver_opt_bruteforce(metric: Metric, k: int, requests, X0) -> float:
    """Exhaustive enumeration of per-step configurations (tiny instances only)."""
    space = ConfigSpace(metric, k)
    M = space.match_table()
    start = space.idx(X0)
    layers = [[c for c in range(space.size) if space.contains[c, r]] for r in requests]
    best = math.inf
    for path in itertools.product(*layers):
        cost, prev = 0.0, start
        for c in path:
            cost += M[prev, c]
            prev = c
        best = min(best, cost)
    return 0.0 if not requests else best


# ---------------------------------------------------------------------------
# double coverage on the line

def double_coverage_line(X: Configuration, r: float) -> Configuration:
    """Classical double coverage for a point request on the line."""
    pos = list(X.positions)
    r = float(r)
    if r in pos:
        return X
    if r < pos[0]:
        pos[0] = r
    elif r > pos[-1]:
        pos[-1] = r
    else:
        i = max(j for j in range(len(pos)) if pos[j] < r)
        d = min(r - pos[i], pos[i + 1] - r)
        pos[i] += d
        pos[i + 1] -= d
        # snap the server that arrived
        if r - X.positions[i] <= X.positions[i + 1] - r:
            pos[i] = r
        else:
            pos[i + 1] = r
    return Configuration(LINE, tuple(pos))


class DoubleCoverage:
    """Double coverage on a finite metric whose points are embedded on the line.

    Positions are kept as coordinates; ``positions`` reports the nearest point
    labels only when every server sits exactly on a point.
    """

    def __init__(self, coords, X0):
        self.coords = np.asarray(coords, dtype=float)
        self.X = Configuration(LINE, tuple(self.coords[list(X0)]))

    @property
    def config(self):
        return self.X

    def serve(self, r: int) -> float:
        new = double_coverage_line(self.X, self.coords[int(r)])
        mv = float(np.abs(np.asarray(new.positions) - np.asarray(self.X.positions)).sum())
        self.X = new
        return mv

    def dist_to(self, r: int) -> float:
        return float(np.abs(np.asarray(self.X.positions) - self.coords[int(r)]).min())


def run_double_coverage(X0: Configuration, requests):
    X = X0
    total = 0.0
    path = [X0]
    for r in requests:
        new = double_coverage_line(X, r)
        total += float(np.abs(np.asarray(new.positions) - np.asarray(X.positions)).sum())
        X = new
        path.append(X)
    return total, path
