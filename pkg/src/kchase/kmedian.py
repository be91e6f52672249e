"""Online k-median by randomly filtering requests into a k-server algorithm.

A request ``c * dist(x, z)`` is forwarded to the k-server backend with
probability ``c`` and otherwise ignored. The k-median algorithm pays the
backend's movement plus ``c`` times the distance from ``z`` to its nearest
server, measured after the move (standard) or before it (blind).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import Configuration, Metric, Request, SeedTree, match_cost, serve_cost
from .kserver import WFA, ConfigSpace, DoubleCoverage
from .oracles import kmedian_opt
from .stats import mean_ci, mean_le_zero

MIN_TRIALS = 30


@dataclass(frozen=True)
class MedianRequest:
    c: float
    z: int

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ValueError(f"coefficient must lie in (0, 1], got {self.c}")


@dataclass(frozen=True)
class FilterDecision:
    passed: bool
    coin: float


def split_coefficient(c: float, z: int) -> list[MedianRequest]:
    """Break ``c * dist(., z)`` with ``c > 1`` into ``ceil(c)`` admissible copies."""
    if c <= 0:
        raise ValueError("coefficient must be positive")
    m = max(1, math.ceil(c))
    return [MedianRequest(c / m, z) for _ in range(m)]


def make_backend(kind: str, space: ConfigSpace, X0, coords=None):
    if kind == "wfa":
        return WFA(space, X0)
    if kind in ("dc", "double_coverage"):
        if coords is None:
            raise ValueError("double coverage needs line coordinates for the points")
        return DoubleCoverage(coords, X0)
    raise ValueError(f"unknown k-server backend {kind!r}")


def filter_step(req: MedianRequest, backend, rng, blind: bool = False):
    """Serve one k-median request through the filter.

    ``rng`` is a Generator or an already drawn coin in [0, 1). Returns
    (decision, configuration after the step, (service, movement)).
    """
    coin = float(rng.random()) if hasattr(rng, "random") else float(rng)
    passed = coin < req.c
    pre = backend.dist_to(req.z)
    movement = backend.serve(req.z) if passed else 0.0
    service = req.c * (pre if blind else backend.dist_to(req.z))
    return FilterDecision(passed, coin), backend.config, (service, movement)


class KMedianFilter:
    """Stateful filtered k-median algorithm with a running ledger."""

    def __init__(self, backend, blind: bool = False):
        self.backend, self.blind = backend, blind
        self.service = 0.0
        self.movement = 0.0
        self.decisions: list[FilterDecision] = []

    def step(self, req: MedianRequest, rng):
        dec, conf, (s, m) = filter_step(req, self.backend, rng, self.blind)
        self.service += s
        self.movement += m
        self.decisions.append(dec)
        return dec, conf, (s, m)

    @property
    def total(self) -> float:
        return self.service + self.movement


# ---------------------------------------------------------------------------
# blind chasing

@dataclass
class BlindStep:
    pre: Configuration
    post: Configuration
    blind_service: float
    service: float
    movement: float


class BlindChaser:
    """Charges each request at the configuration held before responding to it."""

    def __init__(self, step_fn, X0: Configuration, tol: float = 1e-9):
        self.step_fn, self.X, self.tol = step_fn, X0, tol
        self.steps: list[BlindStep] = []

    def step(self, f: Request) -> BlindStep:
        if f.lipschitz > 1 + 1e-12:
            raise ValueError("blind chasing needs 1-Lipschitz requests")
        pre = self.X
        post = self.step_fn(pre, f)
        st = BlindStep(pre, post, serve_cost(pre, f), serve_cost(post, f), match_cost(pre, post))
        # a 1-Lipschitz service can only drop by the distance travelled
        if st.blind_service > st.service + st.movement + self.tol:
            raise AssertionError("blind service exceeds service plus movement")
        self.X = post
        self.steps.append(st)
        return st

    @property
    def total(self) -> float:
        return sum(s.blind_service + s.movement for s in self.steps)


def blind_wrap(step_fn, X0: Configuration) -> BlindChaser:
    """Wrap ``step_fn(config, request) -> new config`` for blind charging."""
    return BlindChaser(step_fn, X0)


# ---------------------------------------------------------------------------
# instances and Monte Carlo

@dataclass
class KMedianInstance:
    metric: Metric
    k: int
    X0: tuple
    coefs: np.ndarray
    centers: np.ndarray

    @property
    def T(self) -> int:
        return len(self.centers)

    def requests(self) -> list[MedianRequest]:
        return [MedianRequest(float(c), int(z)) for c, z in zip(self.coefs, self.centers)]


def random_kmedian_instance(rng, n: int = 6, k: int = 2, T: int = 20, dim: int = 2,
                            c_range=(0.05, 1.0)) -> KMedianInstance:
    """Points uniform in the unit cube, random centres and coefficients."""
    pts = rng.random((n, dim))
    metric = Metric.from_points(pts)
    X0 = tuple(sorted(int(i) for i in rng.choice(n, size=k, replace=False)))
    centers = rng.integers(0, n, size=T)
    coefs = rng.uniform(c_range[0], c_range[1], size=T)
    return KMedianInstance(metric, k, X0, coefs, centers)


@dataclass
class TrialResult:
    cost_af: float
    cost_as: float
    opt_s: float
    passed: np.ndarray
    configs: np.ndarray        # post-step configuration id per original step (T + 1)
    mtm_violations: int


class FilterSimulator:
    """Vectorised filtered k-median with the compiled WFA backend."""

    def __init__(self, space: ConfigSpace, inst: KMedianInstance):
        self.space, self.inst = space, inst
        self.start = space.idx(inst.X0)
        self.w0 = space.match_from(inst.X0)
        D = inst.metric.dist_matrix
        self.nearest = D[space.configs].min(axis=1)          # (S, n)

    def trial(self, coins, blind: bool = False) -> TrialResult:
        inst, sp = self.inst, self.space
        passed = np.asarray(coins) < inst.coefs
        sub = inst.centers[passed].astype(np.int64)
        if len(sub):
            _, ids, moves = kernels.wfa_run(self.w0, self.start, sub, sp.replace, sp.cost,
                                            sp.contains)
        else:
            ids, moves = np.array([self.start]), np.zeros(0)
        cnt = np.cumsum(passed)
        post = ids[cnt]
        pre = ids[cnt - passed]
        at = pre if blind else post
        service = inst.coefs * self.nearest[at, inst.centers]
        cost_as = float(moves.sum())
        # one-server-to-centre or no move at all
        ok = (post == pre) | (sp.replace[pre, :, inst.centers] == post[:, None]).any(axis=1)
        mtm = int((~ok).sum())
        opt_s = kernels.opt_run(self.start, sub, sp.replace, sp.cost, sp.contains) if len(sub) else 0.0
        configs = np.concatenate([[self.start], post])
        return TrialResult(cost_as + float(service.sum()), cost_as, float(opt_s), passed,
                           configs, mtm)


@dataclass
class ChainReport:
    trials: int
    mean_af: float
    mean_as: float
    mean_opt_s: float
    opt_f: float
    chain_af_le_2as: bool | None
    chain_opts_le_2optf: bool | None
    underpowered: bool
    ratio_mean: float
    ratio_ci_low: float
    ratio_ci_high: float
    mtm_violations: int
    per_trial_af: list = field(default_factory=list, repr=False)

    @property
    def chain_flags(self) -> dict:
        return {"af_le_2as": self.chain_af_le_2as, "opts_le_2optf": self.chain_opts_le_2optf,
                "underpowered": self.underpowered}


def verify_cost_chain(inst: KMedianInstance, trials: int, seeds: SeedTree, blind: bool = False,
                      level: float = 0.99, space: ConfigSpace | None = None,
                      opt_f: float | None = None, min_trials: int = MIN_TRIALS) -> ChainReport:
    """Monte Carlo estimates of the filter's cost chain.

    Checks ``E[A_F] <= 2 E[A_S]`` and ``E[OPT_S] <= 2 OPT_F`` with paired
    one-sided t slack at the given level. Fewer than ``min_trials`` trials
    sets ``underpowered`` and leaves both flags undecided (None).
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    space = space or ConfigSpace(inst.metric, inst.k)
    if opt_f is None:
        opt_f = kmedian_opt(space, inst.coefs, inst.centers, inst.X0)
    sim = FilterSimulator(space, inst)
    af, as_, os_ = np.empty(trials), np.empty(trials), np.empty(trials)
    mtm = 0
    for j in range(trials):
        coins = seeds.child("trial", j).rng().random(inst.T)
        r = sim.trial(coins, blind)
        af[j], as_[j], os_[j] = r.cost_af, r.cost_as, r.opt_s
        mtm += r.mtm_violations
    under = trials < min_trials
    c1 = c3 = None
    if not under:
        c1 = mean_le_zero(af - 2 * as_, level)
        c3 = mean_le_zero(os_ - 2 * opt_f, level)
    if opt_f > 0:
        ci = mean_ci(af / opt_f, level) if trials > 1 else None
        rm = float((af / opt_f).mean())
        lo, hi = (ci.low, ci.high) if ci else (-math.inf, math.inf)
    else:
        rm, lo, hi = math.nan, math.nan, math.nan
    return ChainReport(trials, float(af.mean()), float(as_.mean()), float(os_.mean()), float(opt_f),
                       c1, c3, under, rm, lo, hi, mtm, af.tolist())
