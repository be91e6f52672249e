"""Top-k action online learning: Hedge over k-tuples of grid cells, follow the
leader for linear losses, Hedge over k-subsets of arms, and an empirical
Rademacher estimate.

Every learner works on a ``(T, G)`` matrix of losses evaluated at the grid
points (or arms). A k-tuple's loss in a round is the minimum over its members.
"""
from __future__ import annotations

import io
import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import CapacityError

MAX_TUPLES = 10 ** 7


def unit_ball_grid(d: int, resolution: float) -> np.ndarray:
    """Regular lattice of spacing ``resolution`` intersected with the unit ball, shape (G, d)."""
    if resolution <= 0:
        raise ValueError("resolution must be positive")
    m = int(math.floor(1.0 / resolution + 1e-9))
    axis = resolution * np.arange(-m, m + 1)
    pts = np.stack(np.meshgrid(*([axis] * d), indexing="ij"), axis=-1).reshape(-1, d)
    return pts[np.linalg.norm(pts, axis=1) <= 1 + 1e-12]


def count_tuples(G: int, k: int, multiset: bool = True) -> int:
    return math.comb(G + k - 1, k) if multiset else math.comb(G, k)


def tuples_of(G: int, k: int, multiset: bool = True, capacity: int = MAX_TUPLES) -> np.ndarray:
    """All k-tuples of indices in lexicographic order (with or without repeats)."""
    need = count_tuples(G, k, multiset)
    if need > capacity:
        raise CapacityError(f"{need} tuples of {G} cells with k={k} exceed the capacity {capacity}")
    it = itertools.combinations_with_replacement(range(G), k) if multiset else \
        itertools.combinations(range(G), k)
    return np.fromiter(itertools.chain.from_iterable(it), dtype=np.int32,
                       count=need * k).reshape(need, k)


def tuple_losses(grid_losses: np.ndarray, tuples: np.ndarray) -> np.ndarray:
    """(T, N) min-of-tuple losses."""
    return np.asarray(grid_losses)[:, tuples].min(axis=2)


@dataclass
class RegretCurve:
    loss: np.ndarray
    opt: np.ndarray
    expected: np.ndarray | None = None

    @property
    def cum_loss(self) -> np.ndarray:
        return np.cumsum(self.loss)

    @property
    def regret(self) -> np.ndarray:
        return self.cum_loss - self.opt

    @property
    def expected_regret(self) -> np.ndarray:
        if self.expected is None:
            raise ValueError("curve has no mixture losses")
        return np.cumsum(self.expected) - self.opt

    @property
    def T(self) -> int:
        return len(self.loss)

    def scaled(self, lam: float) -> "RegretCurve":
        return RegretCurve(self.loss * lam, self.opt * lam,
                           None if self.expected is None else self.expected * lam)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("t,loss,cum_loss,opt,regret\n")
        cl, rg = self.cum_loss, self.regret
        for t in range(self.T):
            buf.write(f"{t + 1},{self.loss[t]!r},{cl[t]!r},{self.opt[t]!r},{rg[t]!r}\n")
        return buf.getvalue()


def _normalize(grid_losses, loss_range):
    L = np.asarray(grid_losses, dtype=float)
    if loss_range is None:
        return L
    lo, hi = loss_range
    if hi <= lo:
        raise ValueError("loss range must be non-degenerate")
    return (L - lo) / (hi - lo)


def hedge_eta(N: int, T: int) -> float:
    return math.sqrt(8 * math.log(N) / T) if N > 1 else 0.0


@dataclass
class HedgeResult:
    curve: RegretCurve
    chosen: np.ndarray
    weights: np.ndarray
    tuples: np.ndarray


def hedge_topk(grid_losses, k: int, rng, loss_range=None, eta: float | None = None,
               tuples: np.ndarray | None = None, capacity: int = MAX_TUPLES) -> HedgeResult:
    """Multiplicative weights over every k-multiset of grid cells.

    ``loss_range`` rescales losses to [0, 1] before anything else, so the
    returned curve is in normalised units.
    """
    L = _normalize(grid_losses, loss_range)
    T, G = L.shape
    tup = tuples_of(G, k, True, capacity) if tuples is None else tuples
    eta = hedge_eta(len(tup), T) if eta is None else eta
    u = rng.random(T)
    chosen, realized, expected, popt, w = kernels.hedge_run(L, tup, eta, u)
    return HedgeResult(RegretCurve(realized, popt, expected), chosen, w, tup)


def hedge_subsets(arm_losses, k: int, rng, eta: float | None = None,
                  capacity: int = MAX_TUPLES) -> HedgeResult:
    """Hedge over all k-subsets of n arms; a subset pays its best arm's loss."""
    L = np.asarray(arm_losses, dtype=float)
    tup = tuples_of(L.shape[1], k, False, capacity)
    return hedge_topk(L, k, rng, eta=eta, tuples=tup)


class Hedge:
    """Incremental multiplicative weights over N experts."""

    def __init__(self, N: int, eta: float):
        self.w = np.full(N, 1.0 / N)
        self.eta = eta

    def sample(self, u: float) -> int:
        cdf = np.cumsum(self.w)
        return min(int(np.searchsorted(cdf, u * cdf[-1], side="right")), len(self.w) - 1)

    def update(self, losses) -> float:
        """Apply one round of losses; returns the mixture loss before the update."""
        losses = np.asarray(losses, dtype=float)
        mix = float(self.w @ losses)
        w = self.w * np.exp(-self.eta * losses)
        self.w = w / w.sum()
        return mix


@dataclass
class FTLResult:
    curve: RegretCurve
    chosen: np.ndarray
    tuples: np.ndarray


def ftl_topk_olo(points: np.ndarray, k: int, loss_vectors, capacity: int = MAX_TUPLES) -> FTLResult:
    """Follow the leader for linear losses over k-tuples of candidate points.

    ``points`` is (G, d); ``loss_vectors`` is (T, d) with norms at most one.
    Round t plays the lexicographically first minimiser of the cumulative
    min-of-k loss over rounds before t.
    """
    P = np.atleast_2d(np.asarray(points, dtype=float))
    V = np.atleast_2d(np.asarray(loss_vectors, dtype=float))
    if np.any(np.linalg.norm(V, axis=1) > 1 + 1e-12):
        raise ValueError("linear losses must have norm at most one")
    return ftl_grid(V @ P.T, k, capacity=capacity)


def ftl_grid(grid_losses, k: int, capacity: int = MAX_TUPLES) -> FTLResult:
    L = np.asarray(grid_losses, dtype=float)
    tup = tuples_of(L.shape[1], k, True, capacity)
    chosen, realized, popt = kernels.ftl_run(L, tup)
    return FTLResult(RegretCurve(realized, popt), chosen, tup)


class FTLPlayer:
    """Stepwise follow the leader, for adversaries that react to the play."""

    def __init__(self, grid: np.ndarray, k: int, capacity: int = MAX_TUPLES):
        self.grid = np.asarray(grid, dtype=float)
        self.tuples = tuples_of(len(self.grid), k, True, capacity)
        self.cum = np.zeros(len(self.tuples))

    def act(self) -> np.ndarray:
        return self.grid[self.tuples[int(np.argmin(self.cum))]]

    def update(self, grid_loss_row) -> None:
        self.cum += np.asarray(grid_loss_row, dtype=float)[self.tuples].min(axis=1)


def static_opt_topk(grid_losses, k: int, points=None, capacity: int = MAX_TUPLES):
    """Exact best fixed k-tuple in hindsight. Returns (value, tuple of points or indices)."""
    L = np.asarray(grid_losses, dtype=float)
    tup = tuples_of(L.shape[1], k, True, capacity)
    total = np.zeros(len(tup))
    for row in L:  # row-wise keeps memory at O(N)
        total += row[tup].min(axis=1)
    i = int(np.argmin(total))
    best = tup[i] if points is None else np.asarray(points)[tup[i]]
    return float(total[i]), best


def static_opt_all(grid_losses, k: int, atol: float = 1e-12):
    """Every optimal tuple (index form) with its value."""
    L = np.asarray(grid_losses, dtype=float)
    tup = tuples_of(L.shape[1], k)
    total = np.zeros(len(tup))
    for row in L:
        total += row[tup].min(axis=1)
    m = total.min()
    return float(m), tup[np.flatnonzero(total <= m + atol)]


def rademacher_estimate(loss_vectors, k: int, points, num_sign_draws: int, rng,
                        capacity: int = MAX_TUPLES) -> float:
    """Average over random signs of sup over k-tuples of (1/t) sum_s eps_s min_j f_s . x_j."""
    V = np.atleast_2d(np.asarray(loss_vectors, dtype=float))
    P = np.atleast_2d(np.asarray(points, dtype=float))
    t = V.shape[0]
    tup = tuples_of(P.shape[0], k, True, capacity)
    TL = tuple_losses(V @ P.T, tup)                     # (t, N)
    eps = rng.choice([-1.0, 1.0], size=(num_sign_draws, t))
    return float((eps @ TL).max(axis=1).mean() / t)


def rademacher_exact(loss_vectors, k: int, points) -> float:
    """Exact expectation by enumerating every sign pattern (small t only)."""
    V = np.atleast_2d(np.asarray(loss_vectors, dtype=float))
    P = np.atleast_2d(np.asarray(points, dtype=float))
    t = V.shape[0]
    if t > 16:
        raise CapacityError("exact enumeration limited to t <= 16")
    TL = tuple_losses(V @ P.T, tuples_of(P.shape[0], k))
    eps = np.array(list(itertools.product([-1.0, 1.0], repeat=t)))
    return float((eps @ TL).max(axis=1).mean() / t)
