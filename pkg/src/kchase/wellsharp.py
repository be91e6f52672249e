"""Well-sharpened requests: sampling checker, k-median replacement, splitting
and the composite move-to-minimum pipeline built on the filtered WFA.

A request f centred at z is (alpha, beta) well-sharpened when
``alpha * d(y, z) >= d(x, z)`` forces ``beta * f(y) / d(y, z) >= f(x) / d(x, z)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import CapacityError, Metric, PowerDistance, Request
from .kserver import WFA, ConfigSpace

MAX_SPLIT = 10 ** 4


class DegenerateAnchorError(ValueError):
    """The replacement anchor coincides with the request centre."""


@dataclass
class SharpnessWitness:
    alpha: float
    beta: float
    violations: list = field(default_factory=list)
    checked: int = 0
    skipped: int = 0

    @property
    def accepted(self) -> bool:
        return not self.violations


def _sample_points(metric: Metric, z, n: int, rng, radius: float):
    """Points around ``z`` with distances spread over several scales."""
    if metric.kind == "finite":
        return rng.integers(0, metric.n, size=n)
    r = radius * np.exp(rng.uniform(np.log(1e-4), 0.0, size=n))
    if metric.kind == "line":
        return float(z) + r * rng.choice([-1.0, 1.0], size=n)
    u = rng.standard_normal((n, metric.dim))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return np.asarray(z, dtype=float) + r[:, None] * u


def _values_and_dists(f: Request, metric: Metric, z, pts):
    if metric.kind == "finite":
        d = metric.dist_matrix[pts, int(z)]
    else:
        d = metric.dists(pts, z) if metric.kind == "euclidean" else np.abs(pts - float(z))
    return np.asarray(f.value(pts), dtype=float), np.asarray(d, dtype=float)


def check_well_sharpened(f: Request, z=None, alpha: float = 2.0, beta: float = 1.0,
                         sample_budget: int = 10 ** 5, rng=None, radius: float = 10.0,
                         tol: float = 1e-9, max_report: int = 20) -> SharpnessWitness:
    """Sample ``(x, y)`` pairs and record every violated implication.

    Pairs are built so that about half satisfy the hypothesis tightly
    (``d(x, z)`` close to ``alpha * d(y, z)``). Points at ``z`` are skipped.
    """
    if alpha <= 1:
        raise ValueError("alpha must exceed 1")
    rng = np.random.default_rng() if rng is None else rng
    metric = f.metric
    z = f.minimizer() if z is None else z
    wit = SharpnessWitness(alpha, beta)
    n = int(sample_budget)
    ys = _sample_points(metric, z, n, rng, radius)
    if metric.kind == "finite":
        xs = _sample_points(metric, z, n, rng, radius)
    else:
        # half the pairs put x near the boundary d(x,z) = alpha d(y,z)
        xs = _sample_points(metric, z, n, rng, radius * alpha)
        fy_, dy_ = _values_and_dists(f, metric, z, ys)
        tight = rng.random(n) < 0.5
        scale = alpha * rng.uniform(0.9, 1.0, size=n)
        if metric.kind == "line":
            direction = rng.choice([-1.0, 1.0], size=n)
            xs = np.where(tight, float(z) + direction * scale * dy_, xs)
        else:
            u = rng.standard_normal((n, metric.dim))
            u /= np.linalg.norm(u, axis=1, keepdims=True)
            xs = np.where(tight[:, None], np.asarray(z) + (scale * dy_)[:, None] * u, xs)
    with np.errstate(divide="ignore", invalid="ignore"):
        fx, dx = _values_and_dists(f, metric, z, xs)
        fy, dy = _values_and_dists(f, metric, z, ys)
        degenerate = (dx == 0) | (dy == 0)
        wit.skipped = int(degenerate.sum())
        use = ~degenerate & (alpha * dy >= dx)
        lhs = beta * fy / dy
        rhs = fx / dx
        bad = use & ~(lhs >= rhs - tol)
    wit.checked = int(use.sum())
    for i in np.flatnonzero(bad)[:max_report]:
        x = xs[i].tolist() if np.ndim(xs[i]) else float(xs[i]) if metric.kind != "finite" else int(xs[i])
        y = ys[i].tolist() if np.ndim(ys[i]) else float(ys[i]) if metric.kind != "finite" else int(ys[i])
        wit.violations.append((x, y, z if np.ndim(z) == 0 else list(z)))
    if bad.sum() > max_report:
        wit.violations.append(("...", int(bad.sum()) - max_report, "more"))
    return wit


@dataclass
class ReplacementRequest:
    """``c * dist(., z)`` calibrated to agree with the original at the anchor."""
    center: object
    c: float
    anchor: object
    metric: Metric

    def value(self, y):
        if self.metric.kind == "finite":
            return self.c * self.metric.dist_matrix[y, int(self.center)]
        if self.metric.kind == "line":
            return self.c * np.abs(np.asarray(y, dtype=float) - float(self.center))
        return self.c * self.metric.dists(y, self.center)


def kmedian_replacement(f: Request, z, anchor, metric: Metric | None = None) -> ReplacementRequest:
    metric = metric or f.metric
    d = metric.dist(anchor, z)
    if d == 0:
        raise DegenerateAnchorError("anchor coincides with the request centre")
    return ReplacementRequest(z, float(f.value(anchor)) / d, anchor, metric)


def replacement_bound_holds(f: Request, rep: ReplacementRequest, y, alpha: float, beta: float,
              tol: float = 1e-9) -> bool:
    """If rep(y) >= rep(anchor) / alpha then f(y) >= rep(y) / beta."""
    ry = float(rep.value(y))
    ra = float(rep.value(rep.anchor))
    if ry >= ra / alpha:
        return float(f.value(y)) >= ry / beta - tol * max(1.0, ry / beta)
    return True


def split_request(f: Request, servers, z=None, metric: Metric | None = None,
                  cap: int = MAX_SPLIT):
    """Number of copies ``M`` so that ``(f / M)(x_j) <= d(z, x_j)`` at every server."""
    metric = metric or f.metric
    z = f.minimizer() if z is None else z
    ratio = 0.0
    for x in servers:
        d = metric.dist(x, z)
        v = float(f.value(x))
        if d == 0:
            if v > 0:
                raise ValueError("a server sits at the centre where the request is positive")
            continue
        ratio = max(ratio, v / d)
    M = max(1, math.ceil(ratio - 1e-12))
    if M > cap:
        raise CapacityError(f"split needs {M} copies (cap {cap})")
    return M, [f.scaled(1.0 / M) for _ in range(M)]


# ---------------------------------------------------------------------------
# the composite pipeline on finite metrics

@dataclass
class PipelineStep:
    t: int
    copy: int
    anchor: int
    coef: float | None
    coin: float
    passed: bool
    service: float
    movement: float
    pre: tuple
    post: tuple


class WSRWFA:
    """Chases well-sharpened requests on a finite metric through the filtered WFA.

    Every request is split once (at arrival) into ``M`` copies. For each copy
    the nearest server to the centre anchors a k-median replacement whose
    coefficient is the filter's pass probability; passed copies move the WFA.
    Exactly one coin is drawn per copy so the stream lines up with the plain
    k-median filter.
    """

    def __init__(self, space: ConfigSpace, X0, alpha: float, beta: float,
                 blind: bool = True, check_replacement: bool = True):
        self.space = space
        self.D = space.metric.dist_matrix
        self.wfa = WFA(space, X0)
        self.alpha, self.beta = alpha, beta
        self.blind, self.check_replacement = blind, check_replacement
        self.steps: list[PipelineStep] = []
        self.anchor_pairs = 0
        self.anchor_violations: list = []
        self.mtm_violations = 0
        self.service = 0.0
        self.movement = 0.0
        self.t = 0

    @property
    def positions(self):
        return tuple(int(p) for p in self.wfa.positions)

    def _check_replacement(self, g, z, anchor, c):
        pts = np.arange(self.space.n)
        rep = c * self.D[pts, z]
        ra = c * self.D[anchor, z]
        gv = np.asarray(g.value(pts), dtype=float)
        hyp = rep >= ra / self.alpha
        ok = gv >= rep / self.beta - 1e-9 * np.maximum(1.0, rep / self.beta)
        self.anchor_pairs += int(hyp.sum())
        for y in np.flatnonzero(hyp & ~ok):
            self.anchor_violations.append((self.t, int(anchor), int(y)))

    def step(self, f: Request, rng) -> float:
        """Serve one request. ``rng`` supplies the coins. Returns the step's cost."""
        z = int(f.minimizer())
        self.t += 1
        pos = self.positions
        if z in pos:
            # still consume one coin so the stream stays aligned with the filter
            coin = float(rng.random())
            self.steps.append(PipelineStep(self.t, 0, z, None, coin, False, 0.0, 0.0, pos, pos))
            return 0.0
        M, copies = split_request(f, pos, z, self.space.metric)
        cost = 0.0
        for j, g in enumerate(copies):
            coin = float(rng.random())
            pre = self.positions
            d_pre = self.D[list(pre), z]
            anchor = int(pre[int(np.argmin(d_pre))])
            if d_pre.min() == 0:
                self.steps.append(PipelineStep(self.t, j, anchor, None, coin, False, 0.0, 0.0,
                                               pre, pre))
                continue
            c = float(g.value(anchor)) / float(self.D[anchor, z])
            if self.check_replacement:
                self._check_replacement(g, z, anchor, c)
            passed = coin < c
            mv = self.wfa.serve(z) if passed else 0.0
            post = self.positions
            at = pre if self.blind else post
            serv = float(np.min(np.asarray(g.value(np.array(at)), dtype=float)))
            if not _is_mtm(pre, post, z):
                self.mtm_violations += 1
            self.steps.append(PipelineStep(self.t, j, anchor, c, coin, passed, serv, mv, pre, post))
            self.service += serv
            self.movement += mv
            cost += serv + mv
        return cost

    @property
    def total(self) -> float:
        return self.service + self.movement


def _is_mtm(pre, post, z) -> bool:
    """No move, or exactly one server relocated onto ``z``."""
    if tuple(pre) == tuple(post):
        return True
    a, b = list(pre), list(post)
    if z not in b:
        return False
    b.remove(z)
    for x in b:
        if x in a:
            a.remove(x)
        else:
            return False
    return len(a) == 1


def power_requests(metric: Metric, centers, gammas, scale: float = 1.0) -> list[PowerDistance]:
    return [PowerDistance(int(z), float(g), scale, metric) for z, g in zip(centers, gammas)]


def run_wsrwfa(space: ConfigSpace, X0, requests, rng, alpha: float, beta: float,
               blind: bool = True) -> WSRWFA:
    alg = WSRWFA(space, X0, alpha, beta, blind=blind)
    for f in requests:
        alg.step(f, rng)
    return alg
