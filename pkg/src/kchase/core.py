"""Metric spaces, server configurations, request families and cost accounting.

Everything here is shared by the online algorithms, the adversaries and the
offline oracles. Positions and costs are plain doubles; ``math.inf`` stands in
for the value of a convex indicator outside its body.
"""
from __future__ import annotations

import csv
import hashlib
import io
import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import geometry

TOL = 1e-9


class CapacityError(RuntimeError):
    """Raised when an exhaustive table or enumeration would exceed its budget."""


# ---------------------------------------------------------------------------
# metrics

class Metric:
    """A metric space: the real line, euclidean R^d, or a finite point set.

    Finite metrics address their points by integer index ``0..n-1``.
    """

    def __init__(self, kind: str, dim: int | None = None, dist=None, labels=None):
        if kind not in ("line", "euclidean", "finite"):
            raise ValueError(f"unknown metric kind {kind!r}")
        self.kind = kind
        self.dim = 1 if kind == "line" else dim
        self.dist_matrix = None
        self.labels = None
        if kind == "euclidean":
            if dim is None or dim < 1:
                raise ValueError("euclidean metric needs a positive dimension")
        if kind == "finite":
            D = np.asarray(dist, dtype=float)
            _check_finite_metric(D)
            self.dist_matrix = D
            self.labels = list(labels) if labels is not None else list(range(len(D)))
            if len(self.labels) != len(D):
                raise ValueError("labels and distance matrix disagree in size")

    @classmethod
    def line(cls) -> "Metric":
        return cls("line")

    @classmethod
    def euclidean(cls, dim: int) -> "Metric":
        return cls("euclidean", dim=dim)

    @classmethod
    def finite(cls, dist, labels=None) -> "Metric":
        return cls("finite", dist=dist, labels=labels)

    @classmethod
    def from_points(cls, points, labels=None) -> "Metric":
        """Finite metric induced by euclidean points (rows of ``points``)."""
        P = np.atleast_2d(np.asarray(points, dtype=float))
        if P.shape[0] == 1 and np.ndim(points) == 1:
            P = P.T
        D = np.sqrt(((P[:, None, :] - P[None, :, :]) ** 2).sum(-1))
        m = cls.finite(D, labels)
        m.points = P
        return m

    @property
    def n(self) -> int:
        if self.kind != "finite":
            raise AttributeError("only finite metrics have a point count")
        return len(self.dist_matrix)

    def dist(self, a, b) -> float:
        if self.kind == "line":
            return abs(float(a) - float(b))
        if self.kind == "euclidean":
            return float(np.linalg.norm(np.asarray(a, float) - np.asarray(b, float)))
        return float(self.dist_matrix[int(a), int(b)])

    def dists(self, points, z) -> np.ndarray:
        """Vectorised distance from each of ``points`` to ``z``."""
        if self.kind == "line":
            return np.abs(np.asarray(points, dtype=float) - float(z))
        if self.kind == "euclidean":
            P = np.asarray(points, dtype=float).reshape(-1, self.dim)
            return np.linalg.norm(P - np.asarray(z, float), axis=1)
        return self.dist_matrix[np.asarray(points, dtype=int), int(z)]

    def diameter(self) -> float:
        if self.kind != "finite":
            return math.inf
        return float(self.dist_matrix.max())

    def __eq__(self, other):
        if not isinstance(other, Metric) or self.kind != other.kind:
            return False
        if self.kind == "finite":
            return self.dist_matrix.shape == other.dist_matrix.shape and bool(
                np.array_equal(self.dist_matrix, other.dist_matrix))
        return self.dim == other.dim

    def __hash__(self):
        return hash((self.kind, self.dim))

    def __repr__(self):
        if self.kind == "finite":
            return f"Metric.finite(n={self.n})"
        if self.kind == "euclidean":
            return f"Metric.euclidean({self.dim})"
        return "Metric.line()"


def _check_finite_metric(D: np.ndarray) -> None:
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise ValueError("distance matrix must be square")
    if np.any(D < 0) or not np.all(np.isfinite(D)):
        raise ValueError("distances must be finite and non-negative")
    if not np.allclose(D, D.T, atol=TOL, rtol=0):
        raise ValueError("distance matrix is not symmetric")
    if np.any(np.abs(np.diag(D)) > TOL):
        raise ValueError("distance matrix has a non-zero diagonal")
    # d(i,j) <= d(i,m) + d(m,j) for every m
    via = (D[:, :, None] + D[None, :, :]).min(axis=1)
    if np.any(D > via + TOL * max(1.0, float(D.max()))):
        raise ValueError("distance matrix violates the triangle inequality")


LINE = Metric.line()


# ---------------------------------------------------------------------------
# configurations

@dataclass(frozen=True)
class Configuration:
    """k server positions. Sorted on the line and on finite metrics (as a multiset)."""

    metric: Metric
    positions: tuple

    def __post_init__(self):
        pos = self.positions
        if self.metric.kind == "line":
            pos = tuple(sorted(float(p) for p in pos))
        elif self.metric.kind == "finite":
            pos = tuple(sorted(int(p) for p in pos))
            if pos and (pos[0] < 0 or pos[-1] >= self.metric.n):
                raise ValueError("finite-metric position out of range")
        else:
            pos = tuple(tuple(float(c) for c in p) for p in pos)
            if any(len(p) != self.metric.dim for p in pos):
                raise ValueError("position dimension does not match the metric")
        if not pos:
            raise ValueError("a configuration needs at least one server")
        object.__setattr__(self, "positions", pos)

    @classmethod
    def on_line(cls, positions) -> "Configuration":
        return cls(LINE, tuple(positions))

    @property
    def k(self) -> int:
        return len(self.positions)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.positions, dtype=float)

    def flat_columns(self) -> list[str]:
        if self.metric.kind == "euclidean":
            return [";".join(repr(c) for c in p) for p in self.positions]
        return [repr(p) for p in self.positions]


def _same_space(X: Configuration, Y: Configuration) -> None:
    if X.k != Y.k:
        raise ValueError(f"configurations have different sizes ({X.k} vs {Y.k})")
    if X.metric != Y.metric:
        raise ValueError("configurations live in different metric spaces")


def match_cost(X: Configuration, Y: Configuration) -> float:
    """Minimum-cost perfect matching between the servers of X and Y."""
    _same_space(X, Y)
    if X.metric.kind == "line":
        return float(np.abs(np.asarray(X.positions) - np.asarray(Y.positions)).sum())
    cost = pairwise_cost_matrix(X, Y)
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].sum())


def pairwise_cost_matrix(X: Configuration, Y: Configuration) -> np.ndarray:
    m = X.metric
    return np.array([[m.dist(a, b) for b in Y.positions] for a in X.positions])


def brute_force_match(X: Configuration, Y: Configuration) -> float:
    """Matching cost by trying every permutation; only for tiny k."""
    _same_space(X, Y)
    C = pairwise_cost_matrix(X, Y)
    k = X.k
    return min(sum(C[i, p[i]] for i in range(k)) for p in itertools.permutations(range(k)))


def serve_cost(X: Configuration, f: "Request") -> float:
    """Cost of serving ``f`` from configuration X: the best server's value."""
    return min(f.value(p) for p in X.positions)


def pairwise_spread(X: Configuration) -> float:
    """Sum of distances over unordered server pairs."""
    m = X.metric
    return float(sum(m.dist(a, b) for a, b in itertools.combinations(X.positions, 2)))


# ---------------------------------------------------------------------------
# requests

class Request:
    """A convex (or at least well-behaved) cost function on a metric space.

    Subclasses implement ``value`` (scalar or vectorised on the line),
    ``minimizer`` and ``lipschitz``. ``breakpoints`` lists the places where a
    line request changes linear piece; ``piecewise_linear`` tells the line
    chaser whether it may solve stopping conditions in closed form.
    """

    metric: Metric = LINE
    piecewise_linear = False
    family = "generic"

    def value(self, x):
        raise NotImplementedError

    def minimizer(self):
        raise NotImplementedError

    @property
    def lipschitz(self) -> float:
        return math.inf

    def breakpoints(self) -> list[float]:
        return []

    def min_value(self) -> float:
        return float(self.value(self.minimizer()))

    def scaled(self, factor: float) -> "Request":
        return Combination([(factor, self)])

    def to_dict(self) -> dict:
        raise NotImplementedError

    def __call__(self, x):
        return self.value(x)


@dataclass(frozen=True, eq=True)
class IntervalIndicator(Request):
    """0 on [a, b], +inf elsewhere (line only)."""

    a: float
    b: float
    family = "interval_indicator"
    piecewise_linear = True

    def __post_init__(self):
        if not self.a <= self.b:
            raise ValueError("interval needs a <= b")

    @property
    def metric(self):
        return LINE

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.where((x >= self.a - 1e-12) & (x <= self.b + 1e-12), 0.0, np.inf)
        return float(out) if out.ndim == 0 else out

    def minimizer(self):
        return 0.5 * (self.a + self.b)

    def breakpoints(self):
        return [self.a, self.b]

    def to_dict(self):
        return {"family": self.family, "a": self.a, "b": self.b}


class PiecewiseLinear(Request):
    """Convex piecewise-linear function on the line given by breakpoints.

    Outside ``[xs[0], xs[-1]]`` the end slopes continue linearly. A single
    breakpoint is allowed together with explicit ``left_slope``/``right_slope``.
    """

    family = "piecewise_linear"
    piecewise_linear = True

    def __init__(self, xs: Sequence[float], ys: Sequence[float],
                 left_slope: float | None = None, right_slope: float | None = None):
        xs = np.asarray(xs, dtype=float)
        ys = np.asarray(ys, dtype=float)
        if xs.ndim != 1 or xs.shape != ys.shape or len(xs) == 0:
            raise ValueError("breakpoints and values must be equal-length 1-d sequences")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("breakpoints must be strictly increasing")
        inner = np.diff(ys) / np.diff(xs) if len(xs) > 1 else np.array([])
        if left_slope is None:
            if len(xs) < 2:
                raise ValueError("a single breakpoint needs explicit end slopes")
            left_slope = inner[0]
        if right_slope is None:
            if len(xs) < 2:
                raise ValueError("a single breakpoint needs explicit end slopes")
            right_slope = inner[-1]
        slopes = np.concatenate([[left_slope], inner, [right_slope]])
        if np.any(np.diff(slopes) < -1e-12):
            raise ValueError("slopes must be non-decreasing for a convex function")
        self.xs, self.ys, self.slopes = xs, ys, slopes

    @property
    def metric(self):
        return LINE

    def value(self, x):
        x = np.asarray(x, dtype=float)
        xs, ys, s = self.xs, self.ys, self.slopes
        out = np.interp(x, xs, ys)
        out = np.where(x < xs[0], ys[0] + s[0] * (x - xs[0]), out)
        out = np.where(x > xs[-1], ys[-1] + s[-1] * (x - xs[-1]), out)
        return float(out) if out.ndim == 0 else out

    def minimizer(self):
        s = self.slopes
        if s[0] >= 0 or s[-1] <= 0:
            # the argmin set would be unbounded (or empty)
            raise ValueError("piecewise-linear request has no finite minimiser")
        # the argmin is [xs[i], xs[j]] where the slope changes sign
        lo = int(np.searchsorted(s, 0.0, side="left"))   # first slope >= 0
        hi = int(np.searchsorted(s, 0.0, side="right"))  # first slope > 0
        left = self.xs[lo - 1] if lo >= 1 else self.xs[0]
        right = self.xs[hi - 1] if hi >= 1 else self.xs[0]
        return 0.5 * (float(left) + float(right))

    @property
    def lipschitz(self):
        return float(np.abs(self.slopes).max())

    def breakpoints(self):
        return [float(x) for x in self.xs]

    def to_dict(self):
        return {"family": self.family, "xs": [float(x) for x in self.xs],
                "ys": [float(y) for y in self.ys],
                "left_slope": float(self.slopes[0]), "right_slope": float(self.slopes[-1])}

    def __repr__(self):
        return f"PiecewiseLinear(xs={self.xs.tolist()}, ys={self.ys.tolist()})"


class PowerDistance(Request):
    """``scale * dist(x, center) ** gamma`` on any metric."""

    family = "power_distance"

    def __init__(self, center, gamma: float = 1.0, scale: float = 1.0, metric: Metric = LINE):
        if gamma < 1:
            raise ValueError("gamma must be >= 1")
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.metric = metric
        if metric.kind == "line":
            center = float(center)
        elif metric.kind == "finite":
            center = int(center)
        else:
            center = np.asarray(center, dtype=float)
        self.center, self.gamma, self.scale = center, float(gamma), float(scale)
        self.piecewise_linear = self.gamma == 1.0

    def value(self, x):
        if self.metric.kind == "line":
            d = np.abs(np.asarray(x, dtype=float) - self.center)
            out = self.scale * d ** self.gamma
            return float(out) if out.ndim == 0 else out
        if self.metric.kind == "finite" and np.ndim(x) == 0:
            return self.scale * self.metric.dist(x, self.center) ** self.gamma
        if self.metric.kind == "euclidean" and np.ndim(x) == 1:
            return self.scale * self.metric.dist(x, self.center) ** self.gamma
        return self.scale * self.metric.dists(x, self.center) ** self.gamma

    def minimizer(self):
        return self.center

    def min_value(self):
        return 0.0

    @property
    def lipschitz(self):
        return self.scale if self.gamma == 1.0 else math.inf

    def breakpoints(self):
        return [self.center] if self.metric.kind == "line" else []

    def to_dict(self):
        c = self.center.tolist() if isinstance(self.center, np.ndarray) else self.center
        return {"family": self.family, "center": c, "gamma": self.gamma, "scale": self.scale}

    def __repr__(self):
        return f"PowerDistance(center={self.center!r}, gamma={self.gamma}, scale={self.scale})"


class Linear(Request):
    """``w . x`` on euclidean space, meant for the unit ball."""

    family = "linear"
    piecewise_linear = True

    def __init__(self, w):
        w = np.atleast_1d(np.asarray(w, dtype=float))
        if np.linalg.norm(w) > 1 + 1e-12:
            raise ValueError("linear request needs ||w|| <= 1")
        self.w = w
        self.metric = Metric.euclidean(len(w))

    def value(self, x):
        X = np.asarray(x, dtype=float)
        if X.ndim <= 1 and X.size == len(self.w):
            return float(X.reshape(-1) @ self.w)
        return X.reshape(-1, len(self.w)) @ self.w

    def minimizer(self):
        n = np.linalg.norm(self.w)
        return np.zeros_like(self.w) if n == 0 else -self.w / n

    @property
    def lipschitz(self):
        return float(np.linalg.norm(self.w))

    def to_dict(self):
        return {"family": self.family, "w": self.w.tolist()}


class PlanarBody(Request):
    """Indicator of a convex polygon in the plane (segments allowed)."""

    family = "planar_body"

    def __init__(self, vertices, name: str = ""):
        self.polygon = geometry.ConvexPolygon(vertices)
        self.metric = Metric.euclidean(2)
        self.name = name

    def value(self, x):
        return 0.0 if self.polygon.contains(x) else math.inf

    def minimizer(self):
        return self.polygon.centroid()

    def project(self, x):
        return self.polygon.project(x)

    def to_dict(self):
        return {"family": self.family, "name": self.name,
                "vertices": [list(map(float, v)) for v in self.polygon.vertices]}


class Combination(Request):
    """Positive linear combination of requests sharing a metric (and a centre)."""

    family = "combination"

    def __init__(self, terms: Iterable[tuple[float, Request]]):
        self.terms = [(float(c), r) for c, r in terms]
        if not self.terms or any(c <= 0 for c, _ in self.terms):
            raise ValueError("combination needs positive coefficients")
        self.metric = self.terms[0][1].metric
        self.piecewise_linear = all(r.piecewise_linear for _, r in self.terms)

    def value(self, x):
        return sum(c * r.value(x) for c, r in self.terms)

    def minimizer(self):
        mins = [r.minimizer() for _, r in self.terms]
        if all(np.array_equal(np.asarray(m), np.asarray(mins[0])) for m in mins):
            return mins[0]
        if self.metric.kind != "line":
            raise ValueError("minimiser of a mixed-centre combination is only available on the line")
        from scipy.optimize import minimize_scalar
        lo, hi = min(mins), max(mins)
        if lo == hi:
            return lo
        res = minimize_scalar(lambda t: float(self.value(t)), bounds=(lo, hi),
                              method="bounded", options={"xatol": 1e-12})
        return float(res.x)

    def min_value(self):
        return float(self.value(self.minimizer()))

    @property
    def center(self):
        return self.minimizer()

    @property
    def gamma(self):
        return max(getattr(r, "gamma", 1.0) for _, r in self.terms)

    @property
    def lipschitz(self):
        return sum(c * r.lipschitz for c, r in self.terms)

    def breakpoints(self):
        return sorted({b for _, r in self.terms for b in r.breakpoints()})

    def to_dict(self):
        return {"family": self.family,
                "terms": [{"coef": c, "request": r.to_dict()} for c, r in self.terms]}


def request_from_dict(d: dict, metric: Metric = LINE) -> Request:
    fam = d.get("family")
    if fam == "interval_indicator":
        return IntervalIndicator(d["a"], d["b"])
    if fam == "piecewise_linear":
        return PiecewiseLinear(d["xs"], d["ys"], d.get("left_slope"), d.get("right_slope"))
    if fam == "power_distance":
        return PowerDistance(d["center"], d.get("gamma", 1.0), d.get("scale", 1.0), metric)
    if fam == "linear":
        return Linear(d["w"])
    if fam == "planar_body":
        return PlanarBody(d["vertices"], d.get("name", ""))
    if fam == "combination":
        return Combination((t["coef"], request_from_dict(t["request"], metric)) for t in d["terms"])
    raise ValueError(f"unknown request family {fam!r}")


# ---------------------------------------------------------------------------
# ledgers and trajectories

class CostLedger:
    """Running service and movement totals with the per-step breakdown."""

    def __init__(self):
        self.service_total = 0.0
        self.movement_total = 0.0
        self.per_step: list[tuple[float, float]] = []

    def add(self, service: float, movement: float) -> None:
        for name, v in (("service", service), ("movement", movement)):
            if not math.isfinite(v):
                raise ValueError(f"refusing to charge a non-finite {name} cost ({v})")
            if v < -TOL:
                raise ValueError(f"negative {name} cost {v}")
        service, movement = max(0.0, float(service)), max(0.0, float(movement))
        self.per_step.append((service, movement))
        self.service_total += service
        self.movement_total += movement

    @property
    def total(self) -> float:
        return self.service_total + self.movement_total

    def __len__(self):
        return len(self.per_step)

    def consistent(self, tol: float = TOL) -> bool:
        s = math.fsum(p[0] for p in self.per_step)
        m = math.fsum(p[1] for p in self.per_step)
        return abs(s - self.service_total) <= tol * max(1, s) and \
            abs(m - self.movement_total) <= tol * max(1, m)


@dataclass
class TrajectoryStep:
    request: Request | None
    pre: Configuration
    post: Configuration
    service: float
    movement: float


@dataclass
class Trajectory:
    initial: Configuration
    steps: list[TrajectoryStep] = field(default_factory=list)

    def append(self, request, pre, post, service, movement):
        self.steps.append(TrajectoryStep(request, pre, post, service, movement))

    @property
    def service_total(self):
        return math.fsum(s.service for s in self.steps)

    @property
    def movement_total(self):
        return math.fsum(s.movement for s in self.steps)

    @property
    def total(self):
        return self.service_total + self.movement_total

    def ledger(self) -> CostLedger:
        led = CostLedger()
        for s in self.steps:
            led.add(s.service, s.movement)
        return led

    def to_csv(self, fh=None) -> str:
        """One row per step: step, service_cost, movement_cost, then k positions.

        Euclidean positions are flattened as semicolon-separated coordinates.
        """
        buf = io.StringIO()
        k = self.initial.k
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "service_cost", "movement_cost"] + [f"pos{i}" for i in range(k)])
        for t, s in enumerate(self.steps, start=1):
            w.writerow([t, repr(float(s.service)), repr(float(s.movement))] + s.post.flat_columns())
        text = buf.getvalue()
        if fh is not None:
            fh.write(text)
        return text


def read_trajectory_csv(text: str) -> list[dict]:
    rows = list(csv.DictReader(io.StringIO(text)))
    out = []
    for r in rows:
        pos = [v for key, v in r.items() if key.startswith("pos")]
        out.append({"step": int(r["step"]), "service_cost": float(r["service_cost"]),
                    "movement_cost": float(r["movement_cost"]), "positions": pos})
    return out


# ---------------------------------------------------------------------------
# seeded randomness

def _label_key(label) -> int:
    digest = hashlib.blake2b(str(label).encode(), digest_size=4).digest()
    return int.from_bytes(digest, "little")


@dataclass(frozen=True)
class SeedTree:
    """Labelled derivation of independent random streams from one master seed.

    ``SeedTree(7).child("trial", 3).rng()`` always yields the same generator
    state; different paths give independent ``SeedSequence`` spawn keys.
    """

    master_seed: int
    path: tuple = ()

    def __post_init__(self):
        if not 0 <= int(self.master_seed) < 2 ** 64:
            raise ValueError("master seed must fit in 64 unsigned bits")

    def child(self, *labels) -> "SeedTree":
        return SeedTree(self.master_seed, self.path + tuple(labels))

    def seed_sequence(self) -> np.random.SeedSequence:
        return np.random.SeedSequence(int(self.master_seed),
                                      spawn_key=tuple(_label_key(x) for x in self.path))

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.seed_sequence()))
