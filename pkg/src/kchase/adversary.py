"""Lower-bound constructions as runnable instance generators and adaptive
adversaries.

* two-interval requests that encode an (n-1)-server hole on n points;
* the planar 4-set gadget that forces two servers to mimic one chaser of
  two-interval unions, plus planar baselines to run against it;
* the pigeonhole adversary that costs any deterministic top-k player
  ``f(1/(2k))`` per round;
* the clustered k-means instance, the matrix linear-loss instance and the
  Bernoulli best-of-k instance.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import Request
from .geometry import ConvexPolygon
from .oracles import l1_transform
from .regret import FTLPlayer

TOL = 1e-9


# ---------------------------------------------------------------------------
# unions of two intervals

@dataclass(frozen=True)
class IntervalUnionRequest:
    """Up to two disjoint closed intervals in [0, 1]."""
    intervals: tuple

    def __post_init__(self):
        ivs = tuple(sorted((float(a), float(b)) for a, b in self.intervals))
        for a, b in ivs:
            if not (0 - TOL <= a <= b <= 1 + TOL):
                raise ValueError(f"interval [{a}, {b}] not inside [0, 1]")
        for (a1, b1), (a2, b2) in zip(ivs, ivs[1:]):
            if a2 <= b1:
                raise ValueError("intervals must be disjoint")
        if len(ivs) > 2:
            raise ValueError("at most two intervals")
        object.__setattr__(self, "intervals", ivs)

    def contains(self, x, tol: float = TOL):
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for a, b in self.intervals:
            out |= (x >= a - tol) & (x <= b + tol)
        return out

    def value(self, x):
        v = np.where(self.contains(x), 0.0, np.inf)
        return float(v) if np.ndim(v) == 0 else v

    def to_dict(self):
        return {"family": "interval_union", "intervals": [list(iv) for iv in self.intervals]}


def _unit(n: int) -> float:
    return 1.0 / (2 * n - 1)


def interval_union_from_kserver(n: int, i: int) -> IntervalUnionRequest:
    """Two-interval request mimicking a k-server request at point i of {1..n}."""
    if n < 2 or not 1 <= i <= n:
        raise ValueError(f"need 2 <= n and 1 <= i <= n, got n={n}, i={i}")
    h = _unit(n)
    ivs = []
    if i > 1:
        ivs.append((0.0, (2 * i - 3) * h))
    if i < n:
        ivs.append((2 * i * h, 1.0))
    return IntervalUnionRequest(tuple(ivs))


def interpret_hole(p: float, n: int) -> int:
    """Point of {1..n} that a chaser at p stands for.

    [0, 1] is cut into 2n-1 equal closed pieces; odd pieces are the points,
    a position in an even piece goes to the nearer odd neighbour, with the
    midpoint going right.
    """
    h = _unit(n)
    j = min(int(math.floor(p / h)), 2 * n - 2) + 1
    if j % 2 == 1:
        return (j + 1) // 2
    return j // 2 if p < (j - 0.5) * h else j // 2 + 1


def hole_region(n: int, i: int) -> tuple[float, float]:
    """[lo, hi) of positions interpreted as point i (closed at 1 for i = n)."""
    h = _unit(n)
    return max(0.0, (2 * i - 2.5) * h), min(1.0, (2 * i - 0.5) * h)


def reinterpretation_movement(n: int, i: int, j: int) -> tuple[float, float]:
    """(least, greatest) movement from the piece standing for point i to the
    nearest position that the request at i allows and that reads as j.

    Start positions range over the odd piece of point i; the extremes sit at
    its endpoints because the targets lie on one side of it.
    """
    if i == j:
        raise ValueError("i and j must differ")
    h = _unit(n)
    lo_i, hi_i = (2 * i - 2) * h, (2 * i - 1) * h
    lo_j, hi_j = hole_region(n, j)
    req = interval_union_from_kserver(n, i)
    targets = []
    for a, b in req.intervals:
        lo, hi = max(a, lo_j), min(b, hi_j)
        if lo <= hi:
            targets.append((lo, hi))
    if not targets:
        raise ValueError("no allowed position reads as j")

    def m(p):
        return min(0.0 if a <= p <= b else min(abs(p - a), abs(p - b)) for a, b in targets)

    ends = (m(lo_i), m(hi_i))
    return min(ends), max(ends)


def interval_chasing_opt(requests, x0: float, n: int, refine: int = 2) -> float:
    """One-server offline optimum for interval-union requests on [0, 1].

    Every endpoint is a multiple of 1/(2n-1), so a grid containing those
    multiples and ``x0`` is exact.
    """
    h = _unit(n) / refine
    grid = np.union1d(h * np.arange(int(round(1 / h)) + 1), [x0])
    V = np.where(grid == x0, 0.0, np.inf)
    for r in requests:
        V = l1_transform(V, grid) + np.where(r.contains(grid), 0.0, np.inf)
    return float(V.min())


# ---------------------------------------------------------------------------
# planar gadget

@dataclass(frozen=True)
class PlanarGadget:
    """Sets forcing two planar servers to x-coordinates in [a1, a2] or in [b1, b2].

    Horizontal coordinate first: the two lines are y = 0 and y = 1 and
    Q(a, b, c, d) has corners (a, 0), (b, 0), (c, 1), (d, 1).
    """
    a1: float
    a2: float
    b1: float
    b2: float

    def __post_init__(self):
        if not (0 <= self.a1 < self.a2 < self.b1 < self.b2 <= 1):
            raise ValueError("need 0 <= a1 < a2 < b1 < b2 <= 1")

    def sets(self) -> list[ConvexPolygon]:
        a1, a2, b1, b2 = self.a1, self.a2, self.b1, self.b2
        return [ConvexPolygon([(0, 0), (1, 0)]),
                ConvexPolygon([(0, 1), (1, 1)]),
                quad(a1, a2, b1, b2),
                quad(b1, b2, a1, a2)]


def quad(a, b, c, d) -> ConvexPolygon:
    return ConvexPolygon([(a, 0), (b, 0), (c, 1), (d, 1)])


def single_interval_sets(a: float, b: float) -> list[ConvexPolygon]:
    """Both servers pinned to x in [a, b], one per line."""
    return [ConvexPolygon([(a, 0), (b, 0)]), ConvexPolygon([(a, 1), (b, 1)])]


def hole_sets(n: int, i: int) -> list[ConvexPolygon]:
    """Planar request family whose feasible pairs encode the request at point i."""
    req = interval_union_from_kserver(n, i)
    if len(req.intervals) == 2:
        (a1, a2), (b1, b2) = req.intervals
        return PlanarGadget(a1, a2, b1, b2).sets()
    (a, b), = req.intervals
    return single_interval_sets(a, b)


def pair_feasible(sets, s1, s2, tol: float = TOL) -> bool:
    return all(S.contains(s1, tol) or S.contains(s2, tol) for S in sets)


@dataclass
class FeasibilityReport:
    n_points: int
    n_feasible_pairs: int
    category_a: int
    category_b: int
    stray: list = field(default_factory=list)

    @property
    def categories(self) -> int:
        return int(self.category_a > 0) + int(self.category_b > 0)

    @property
    def exactly_two(self) -> bool:
        return self.categories == 2 and not self.stray


def gadget_feasible_pairs(g: PlanarGadget, resolution: float = 0.01,
                          tol: float = TOL) -> FeasibilityReport:
    """Enumerate unordered pairs of grid points meeting all four sets.

    Each grid point gets a 4-bit mask of the sets it meets; a pair is feasible
    iff the masks OR to all four bits, so the work is per mask pair.
    """
    m = int(round(1 / resolution))
    ax = np.arange(m + 1) * resolution
    P = np.stack(np.meshgrid(ax, ax, indexing="ij"), axis=-1).reshape(-1, 2)
    masks = np.zeros(len(P), dtype=np.int64)
    for b, S in enumerate(g.sets()):
        masks |= S.contains_many(P, tol).astype(np.int64) << b
    groups = {mk: np.flatnonzero(masks == mk) for mk in np.unique(masks)}
    rep = FeasibilityReport(len(P), 0, 0, 0)

    def in_iv(x, a, b):
        return (x >= a - tol) & (x <= b + tol)

    keys = sorted(groups)
    for u, v in itertools.combinations_with_replacement(keys, 2):
        if (u | v) != 15:
            continue
        I, J = groups[u], groups[v]
        A, B = P[I], P[J]
        # every pair (p, q) with p from I and q from J
        x1, y1 = A[:, None, 0], A[:, None, 1]
        x2, y2 = B[None, :, 0], B[None, :, 1]
        one_each = (np.abs(y1 - y2) > 0.5) & ((np.abs(y1) < tol) | (np.abs(y1 - 1) < tol)) & \
                   ((np.abs(y2) < tol) | (np.abs(y2 - 1) < tol))
        cat_a = one_each & in_iv(x1, g.a1, g.a2) & in_iv(x2, g.a1, g.a2)
        cat_b = one_each & in_iv(x1, g.b1, g.b2) & in_iv(x2, g.b1, g.b2)
        total = len(I) * len(J)
        if u == v:  # unordered pairs within one group, p != q
            n_a = (cat_a.sum() - np.trace(cat_a)) // 2
            n_b = (cat_b.sum() - np.trace(cat_b)) // 2
            total = len(I) * (len(I) - 1) // 2
            bad = ~(cat_a | cat_b)
            np.fill_diagonal(bad, False)
        else:
            n_a, n_b = cat_a.sum(), cat_b.sum()
            bad = ~(cat_a | cat_b)
        rep.n_feasible_pairs += int(total)
        rep.category_a += int(n_a)
        rep.category_b += int(n_b)
        for p, q in zip(*np.nonzero(bad)):
            if len(rep.stray) < 10:
                rep.stray.append((A[p].tolist(), B[q].tolist()))
    return rep


# planar two-server chasers --------------------------------------------------

class PlanarChaser:
    name = "base"

    def __init__(self, S0):
        self.S = np.array(S0, dtype=float).reshape(-1, 2)
        self.movement = 0.0

    def meets(self, body: ConvexPolygon, tol: float = TOL) -> bool:
        return any(body.contains(s, tol) for s in self.S)

    def serve(self, body: ConvexPolygon) -> float:
        raise NotImplementedError


class GreedyPlanar(PlanarChaser):
    """Move the server closest to the set onto its projection."""
    name = "greedy"

    def serve(self, body):
        if self.meets(body):
            return 0.0
        Q = [body.project(s) for s in self.S]
        d = [float(np.hypot(*(q - s))) for q, s in zip(Q, self.S)]
        i = int(np.argmin(d))
        self.S[i] = Q[i]
        self.movement += d[i]
        return d[i]


class DoubleCoveragePlanar(PlanarChaser):
    """All servers head for their projections at unit speed until one arrives."""
    name = "double_coverage"

    def serve(self, body):
        if self.meets(body):
            return 0.0
        Q = [body.project(s) for s in self.S]
        d = np.array([float(np.hypot(*(q - s))) for q, s in zip(Q, self.S)])
        t = float(d.min())
        for i in range(len(self.S)):
            if d[i] <= t:
                self.S[i] = Q[i]
            else:
                self.S[i] = self.S[i] + (t / d[i]) * (Q[i] - self.S[i])
        mv = t * len(self.S)
        self.movement += mv
        return mv


PLANAR_CHASERS = {"greedy": GreedyPlanar, "double_coverage": DoubleCoveragePlanar}


@dataclass
class GadgetRun:
    holes: list
    alg_cost: float
    opt_upper: float
    rounds_feasible: int
    rounds: int

    @property
    def ratio(self) -> float:
        return self.alg_cost / self.opt_upper if self.opt_upper > 0 else math.inf


def gadget_adversary(chaser: PlanarChaser, n: int, rounds: int, max_cycles: int = 50,
                     record=None) -> GadgetRun:
    """Each round requests the hole the chaser currently stands for.

    The round's sets are repeated until the chaser meets all of them at once
    (at most ``max_cycles`` times). The offline comparison is twice the
    one-server optimum for the matching interval requests: two servers
    sharing an x-coordinate meet every set of a round.
    """
    holes, feasible = [], 0
    x0 = float(chaser.S[:, 0].mean())
    for _ in range(rounds):
        i = interpret_hole(float(np.clip(chaser.S[:, 0].mean(), 0, 1)), n)
        holes.append(i)
        sets = hole_sets(n, i)
        for _ in range(max_cycles):
            for S in sets:
                chaser.serve(S)
                if record is not None:
                    record.append({"hole": i, "set": S.vertices.tolist()})
            if all(chaser.meets(S) for S in sets):
                feasible += 1
                break
    reqs = [interval_union_from_kserver(n, i) for i in holes]
    opt1 = interval_chasing_opt(reqs, x0, n)
    return GadgetRun(holes, chaser.movement, 2 * opt1, feasible, rounds)


# ---------------------------------------------------------------------------
# pigeonhole adversary for deterministic top-k players on [0, 1]

class ShiftedProfile(Request):
    """``f(|x - center|)`` for a scalar profile f."""
    family = "shifted_profile"

    def __init__(self, center: float, f):
        self.center, self.f = float(center), f

    def value(self, x):
        return self.f(np.abs(np.asarray(x, dtype=float) - self.center))

    def minimizer(self):
        return self.center

    def to_dict(self):
        return {"family": self.family, "center": self.center}


def deterministic_regret_adversary(k: int, actions, f, tol: float = 1e-12):
    """Pick a request costing the player at least f(1/(2k)).

    Returns (case, request): case 1 centres at 0 when every action is at
    least 1/(2k); case 2 centres at the midpoint of the leftmost widest gap
    when that gap is at least 1/k; case 3 centres at 1 otherwise.
    """
    s = np.sort(np.asarray(actions, dtype=float))
    q = 1.0 / (2 * k)
    if s[0] >= q - tol:
        case, c = 1, 0.0
    else:
        gaps = np.diff(s)
        g = int(np.argmax(gaps)) if len(gaps) else -1
        if g >= 0 and gaps[g] >= 2 * q - tol:
            case, c = 2, float((s[g] + s[g + 1]) / 2)
        elif s[-1] <= 1 - q + tol:
            case, c = 3, 1.0
        else:
            raise AssertionError(f"no case applies to actions {s.tolist()}")
    req = ShiftedProfile(c, f)
    loss = float(np.min(req.value(s)))
    if loss < f(q) - 1e-12:
        raise AssertionError("adversary failed to force the guaranteed loss")
    return case, req


@dataclass
class SeparationRun:
    losses: np.ndarray
    prefix_opt: np.ndarray
    cases: list

    @property
    def regret(self) -> np.ndarray:
        return np.cumsum(self.losses) - self.prefix_opt


def ftl_vs_pigeonhole(k: int, T: int, f=lambda u: u, grid=None) -> SeparationRun:
    """Follow the leader on a grid of [0, 1] against the pigeonhole adversary."""
    grid = np.linspace(0, 1, 101) if grid is None else np.asarray(grid, dtype=float)
    player = FTLPlayer(grid, k)
    losses, popt, cases = np.empty(T), np.empty(T), []
    for t in range(T):
        acts = player.act()
        case, req = deterministic_regret_adversary(k, acts, f)
        cases.append(case)
        row = req.value(grid)
        losses[t] = float(np.min(req.value(acts)))
        player.update(row)
        popt[t] = float(player.cum.min())
    return SeparationRun(losses, popt, cases)


# ---------------------------------------------------------------------------
# clustered k-means instance

@dataclass
class ClusterInstance:
    k: int
    d: int
    centers: np.ndarray          # (j, d) region centres on the unit sphere
    triples: np.ndarray          # (j, 3, d): p_A, p_B, p_C
    singles: np.ndarray          # (s, d) lone points for odd k
    radius: float
    spacing: float
    separation: float

    @property
    def points(self) -> np.ndarray:
        pts = self.triples.reshape(-1, self.d)
        return np.vstack([pts, self.singles]) if len(self.singles) else pts

    def sample(self, rng, T: int) -> np.ndarray:
        """Indices of T i.i.d. uniform draws over the points."""
        return rng.integers(0, len(self.points), size=T)

    def stream(self, rng, T: int) -> np.ndarray:
        return self.points[self.sample(rng, T)]


def _sphere_centres(j: int, d: int) -> np.ndarray:
    out = []
    for i in range(d):
        for s in (1.0, -1.0):
            e = np.zeros(d)
            e[i] = s
            out.append(e)
    if j > len(out):
        for signs in itertools.product((1.0, -1.0), repeat=d):
            out.append(np.array(signs) / math.sqrt(d))
            if len(out) >= j:
                break
    if j > len(out):
        raise ValueError(f"cannot place {j} regions in dimension {d}")
    return np.array(out[:j])


def cluster_instance(k: int, d: int, spacing: float = 0.01, radius: float = 0.1,
                     min_separation: float = 0.1) -> ClusterInstance:
    """j = k // 2 regions each holding a collinear triple; odd k adds one lone point."""
    if k < 2 or d < 2:
        raise ValueError("need k >= 2 and d >= 2")
    j = k // 2
    extra = k % 2
    C = _sphere_centres(j + extra, d)
    tri = []
    for c in C[:j]:
        u = np.zeros(d)
        # a unit tangent direction
        a = int(np.argmin(np.abs(c)))
        u[a] = 1.0
        u -= (u @ c) * c
        u /= np.linalg.norm(u)
        tri.append([c - spacing * u, c, c + spacing * u])
    tri = np.array(tri)
    singles = C[j:]
    D = np.linalg.norm(C[:, None] - C[None, :], axis=-1)
    sep = float((D[np.triu_indices(len(C), 1)] - 2 * radius).min()) if len(C) > 1 else math.inf
    if sep < min_separation:
        raise ValueError(f"region separation {sep:.4f} below {min_separation}")
    if np.any(np.linalg.norm(tri - C[:j, None], axis=-1) > radius):
        raise ValueError("triple leaves its region")
    return ClusterInstance(k, d, C[:j], tri, singles, radius, spacing, sep)


def cluster_cost(points, center) -> float:
    """Sum of squared distances to one centre."""
    P = np.atleast_2d(points)
    return float(((P - np.asarray(center)) ** 2).sum())


def best_center_pairs(triple, resolution: float = 1 / 2000, reach: float = 0.015,
                      atol: float = 1e-15):
    """Grid search over pairs of centres on the triple's line.

    Returns (best expected cost, list of optimal (s1, s2) offsets along the line
    from the middle point).
    """
    pA, pB, pC = (np.asarray(p, dtype=float) for p in triple)
    u = (pC - pA) / np.linalg.norm(pC - pA)
    m = int(round(reach / resolution))
    offs = np.arange(-m, m + 1) * resolution
    pos = np.array([((p - pB) @ u) for p in (pA, pB, pC)])
    sq = (offs[:, None] - pos[None, :]) ** 2               # (G, 3)
    i, j = np.triu_indices(len(offs))
    cost = np.minimum(sq[i], sq[j]).mean(axis=1)
    best = cost.min()
    hits = np.flatnonzero(cost <= best + atol)
    return float(best), [(float(offs[i[h]]), float(offs[j[h]])) for h in hits]


# ---------------------------------------------------------------------------
# matrix linear losses and Bernoulli arms

@dataclass
class MatrixOLO:
    W: np.ndarray

    @property
    def d(self) -> int:
        return self.W.shape[0]

    def draw(self, rng, T: int) -> np.ndarray:
        """(T, d) loss vectors: a uniform row with a uniform sign."""
        rows = rng.integers(0, self.W.shape[0], size=T)
        sign = rng.choice([-1.0, 1.0], size=T)
        return sign[:, None] * self.W[rows]

    def expected_pair_loss(self, x) -> float:
        """Mean of min(v.x, -v.x), the loss of the antipodal pair {x, -x}."""
        return -float(np.abs(self.W @ np.asarray(x, dtype=float)).sum()) / self.W.shape[0]


def pair_loss(V, x) -> np.ndarray:
    v = np.atleast_2d(V) @ np.asarray(x, dtype=float)
    return np.minimum(v, -v)


def matrix_olo_instance(W) -> MatrixOLO:
    W = np.atleast_2d(np.asarray(W, dtype=float))
    if W.shape[0] != W.shape[1]:
        raise ValueError("W must be square")
    r = np.linalg.norm(W, axis=1).max()
    if r == 0:
        raise ValueError("zero matrix cannot be normalised")
    return MatrixOLO(W / r)


def bandit_lb_instance(n: int, k: int, rng, T: int) -> np.ndarray:
    """(T, n) i.i.d. losses, each 1 with probability 1 - 1/k and 0 otherwise."""
    if not n >= k >= 1:
        raise ValueError("need n >= k >= 1")
    return (rng.random((T, n)) < 1 - 1 / k).astype(float)


def write_jsonl(records, fh) -> int:
    """One JSON document per line; returns the count written."""
    n = 0
    for r in records:
        fh.write(json.dumps(r, sort_keys=True) + "\n")
        n += 1
    return n
