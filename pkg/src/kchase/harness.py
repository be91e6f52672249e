"""Experiment runner: config validation, seeded trials, reports and exponent fits.

A config is a TOML document with an ``[experiment]`` table plus one table
named after the experiment kind. Unknown keys are errors. Every random stream
comes from ``SeedTree(seed)`` so identical configs give identical reports,
whatever the worker count.
"""
from __future__ import annotations

import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import __version__
from .core import (Configuration, Metric, PiecewiseLinear, PowerDistance, SeedTree,
                   request_from_dict)
from .stats import mean_ci

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class ValidationError(ValueError):
    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


class FitError(ValueError):
    pass


# ---------------------------------------------------------------------------
# schema

def _pos_int(v):
    return isinstance(v, int) and not isinstance(v, bool) and v >= 1


def _nonneg_num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool) and v >= 0


def _int_list(v):
    return isinstance(v, list) and len(v) > 0 and all(_pos_int(x) for x in v)


def _num_pair(v):
    return (isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) for x in v)
            and v[0] < v[1])


def _one_of(*opts):
    def check(v):
        return v in opts
    check.__doc__ = f"one of {list(opts)}"
    return check


def _bool(v):
    return isinstance(v, bool)


def _num(v):
    return isinstance(v, (int, float)) and not isinstance(v, bool)


def _list(v):
    return isinstance(v, list)


EXPERIMENT_KEYS = {
    "kind": (None, None),
    "seed": (None, lambda v: isinstance(v, int) and not isinstance(v, bool) and 0 <= v < 2 ** 64),
    "trials": (10, _pos_int),
    "workers": (1, _pos_int),
}

SCHEMAS = {
    "chase-line": {
        "k": (2, _pos_int), "T": (20, _pos_int), "domain": ([-10.0, 10.0], _num_pair),
        "families": (["piecewise_linear", "power1", "power2"],
                     lambda v: _list(v) and v and set(v) <= {"piecewise_linear", "power1", "power2"}),
        "resolution": (0.0, _nonneg_num),
    },
    "kserver-wfa": {
        "n": (6, _pos_int), "k": (2, _pos_int), "T": (20, _pos_int),
        "metric": ("plane", _one_of("plane", "line")),
    },
    "kmedian-filter": {
        "n": (6, _pos_int), "k": (2, _pos_int), "T": (20, _pos_int), "dim": (2, _pos_int),
        "mc_trials": (200, _pos_int), "blind": (False, _bool),
        "c_range": ([0.05, 1.0], lambda v: _num_pair(v) and 0 < v[0] and v[1] <= 1),
        "level": (0.99, lambda v: _num(v) and 0 < v < 1),
    },
    "wsrwfa": {
        "n": (6, _pos_int), "k": (2, _pos_int), "T": (20, _pos_int), "dim": (2, _pos_int),
        "gamma_range": ([1.0, 2.0], lambda v: (isinstance(v, list) and len(v) == 2
                                              and all(_num(x) for x in v) and 1 <= v[0] <= v[1])),
        "blind": (True, _bool), "alpha_factor": (10.0, lambda v: _num(v) and v > 0),
        "family": ("power_distance", _one_of("power_distance")),
        "backend": ("wfa", _one_of("wfa")),
    },
    "regret-hedge": {
        "d": (1, _pos_int), "k": (2, _pos_int), "T": ([250, 500, 1000, 2000, 4000], _int_list),
        "grid_points": (101, lambda v: _pos_int(v) and v >= 2),
        "losses": ("abs_mixture", _one_of("abs_mixture", "warmup", "linear")),
    },
    "regret-ftl": {
        "k": (2, _pos_int), "T": ([250, 500, 1000, 2000], _int_list),
        "grid_points": (101, lambda v: _pos_int(v) and v >= 2),
        "adversary": ("pigeonhole", _one_of("pigeonhole", "stochastic")),
        "w": (0.5, lambda v: _num(v) and 0 < v <= 1),
    },
    "regret-subsets": {
        "n": (8, _pos_int), "k": (2, _pos_int), "T": ([5000], _int_list),
    },
    "lowerbound": {
        "generator": ("gadget", _one_of("gadget", "interval", "cluster", "matrix", "bandit")),
        "n": (5, _pos_int), "k": (2, _pos_int), "d": (6, _pos_int), "T": (500, _pos_int),
        "chaser": ("greedy", _one_of("greedy", "double_coverage")),
        "max_cycles": (50, _pos_int), "draws": (100000, _pos_int),
    },
    "opt": {
        "k": (1, _pos_int), "X0": (None, lambda v: _list(v) and all(_num(x) for x in v)),
        "requests": ([], _list), "resolutions": ([], lambda v: _list(v) and all(_num(x) and x > 0 for x in v)),
    },
    "fit": {
        "T": (None, _int_list), "values": (None, lambda v: _list(v) and all(_list(r) for r in v)),
        "bootstrap": (1000, _pos_int), "min_trials": (10, _pos_int),
    },
}

KINDS = tuple(SCHEMAS)


@dataclass
class ExperimentConfig:
    kind: str
    seed: int
    trials: int
    workers: int
    params: dict

    def echo(self) -> dict:
        return {"experiment": {"kind": self.kind, "seed": self.seed, "trials": self.trials},
                self.kind: self.params}


def load_config(path) -> dict:
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        raise ValidationError([f"cannot read config {path}: {exc}"]) from exc


def validate(doc: dict, kind: str | None = None, seed: int | None = None) -> ExperimentConfig:
    """Check a parsed config; every problem is listed in the raised error."""
    problems = []
    exp = dict(doc.get("experiment", {}))
    if not isinstance(exp, dict):
        raise ValidationError(["[experiment] must be a table"])
    if kind is not None:
        if "kind" in exp and exp["kind"] != kind:
            problems.append(f"experiment.kind={exp['kind']!r} does not match subcommand {kind!r}")
        exp["kind"] = kind
    if seed is not None:
        exp["seed"] = seed
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            problems.append(f"unknown key experiment.{key}")
    k = exp.get("kind")
    if k not in SCHEMAS:
        problems.append(f"experiment.kind must be one of {list(KINDS)}, got {k!r}")
    if "seed" not in exp:
        problems.append("experiment.seed is required")
    for key, (default, check) in EXPERIMENT_KEYS.items():
        if key in exp and check is not None and not check(exp[key]):
            problems.append(f"experiment.{key} has invalid value {exp[key]!r}")
    for section in doc:
        if section != "experiment" and section != k:
            problems.append(f"unknown section [{section}]")
    params = {}
    if k in SCHEMAS:
        given = doc.get(k, {})
        if not isinstance(given, dict):
            problems.append(f"[{k}] must be a table")
            given = {}
        for key in given:
            if key not in SCHEMAS[k]:
                problems.append(f"unknown key {k}.{key}")
        for key, (default, check) in SCHEMAS[k].items():
            if key in given:
                v = given[key]
                if isinstance(v, int) and not isinstance(v, bool) and isinstance(default, float):
                    v = float(v)
                if not check(v):
                    problems.append(f"{k}.{key} has invalid value {v!r}")
                params[key] = v
            elif default is None:
                problems.append(f"{k}.{key} is required")
            else:
                params[key] = default
    if problems:
        raise ValidationError(problems)
    return ExperimentConfig(k, int(exp["seed"]), int(exp.get("trials", 10)),
                            int(exp.get("workers", 1)), params)


# ---------------------------------------------------------------------------
# instance generators

def random_line_instance(rng, k: int, T: int, families=("piecewise_linear", "power1", "power2"),
                         domain=(-10.0, 10.0)):
    """Random start and requests on the line; centres rounded to 0.01."""
    lo, hi = domain
    X0 = Configuration.on_line(np.round(rng.uniform(lo, hi, k), 2))
    fams = list(families)
    reqs = []
    for _ in range(T):
        z = round(float(rng.uniform(lo, hi)), 2)
        fam = fams[int(rng.integers(len(fams)))]
        if fam == "piecewise_linear":
            w = np.round(rng.uniform(0.25, 2.0, 2), 2)
            a, b = np.round(rng.uniform(0.2, 3.0, 2), 3)
            reqs.append(PiecewiseLinear([z - w[0], z, z + w[1]], [a * w[0], 0.0, b * w[1]],
                                        left_slope=-2 * a, right_slope=2 * b))
        elif fam == "power1":
            reqs.append(PowerDistance(z, 1.0, round(float(rng.uniform(0.2, 2.0)), 3)))
        else:
            reqs.append(PowerDistance(z, 2.0, round(float(rng.uniform(0.2, 2.0)), 3)))
    return X0, reqs


def random_finite_metric(rng, n: int, kind: str = "plane", dim: int = 2) -> Metric:
    if kind == "line":
        return Metric.from_points(np.sort(rng.random(n))[:, None])
    return Metric.from_points(rng.random((n, dim)))


# ---------------------------------------------------------------------------
# trial functions (module level so worker processes can pickle them)

def _trial_chase_line(p, seeds: SeedTree, j: int) -> dict:
    from .line_chaser import potential, run_line_chaser, step_inequality
    from .oracles import chasing_opt_line, line_grid
    rng = seeds.child("chase-line", j).rng()
    X0, reqs = random_line_instance(rng, p["k"], p["T"], p["families"], p["domain"])
    grid = line_grid(reqs, X0)
    if p["resolution"] > 0:
        lo, hi = p["domain"]
        h = p["resolution"]
        grid = np.union1d(grid, lo + h * np.arange(int((hi - lo) / h) + 1))
    opt = chasing_opt_line(reqs, p["k"], X0, grid)
    traj, steps = run_line_chaser(X0, reqs)
    Y = opt.configs
    phi0 = potential(X0, Y[0]).phi
    X, viol = X0, 0
    for t, (f, st) in enumerate(zip(reqs, steps)):
        lhs, rhs = step_inequality(X, st.post, Y[t], Y[t + 1], f)
        viol += int(lhs > rhs + 1e-7)
        X = st.post
    bound = 4 * p["k"] * opt.value + phi0
    return {"trial": j, "alg_cost": traj.total, "opt": opt.value, "phi0": phi0,
            "ratio": traj.total / opt.value if opt.value > 0 else None,
            "bound_ok": bool(traj.total <= bound + 1e-6), "certificate_violations": viol,
            "_csv": {"alg": traj.to_csv(), "opt": opt.trajectory.to_csv()}}


def _trial_kserver(p, seeds, j):
    from .kserver import ConfigSpace, kserver_opt, run_wfa, work_function_invariants
    rng = seeds.child("kserver-wfa", j).rng()
    m = random_finite_metric(rng, p["n"], p["metric"])
    k = p["k"]
    X0 = tuple(sorted(int(x) for x in rng.choice(p["n"], k, replace=p["n"] < k)))
    req = rng.integers(0, p["n"], p["T"])
    sp = ConfigSpace(m, k)
    _, moves, _ = run_wfa(sp, X0, req)
    opt = kserver_opt(sp, req, X0)
    inv = work_function_invariants(sp, X0, req)
    cost = float(moves.sum())
    return {"trial": j, "alg_cost": cost, "opt": opt,
            "ratio": cost / opt if opt > 0 else None,
            "bound_ok": bool(cost <= (2 * k - 1) * opt + k * m.diameter() + 1e-9),
            "lipschitz_violations": inv.lipschitz_violations,
            "monotone_violations": inv.monotone_violations}


def _trial_kmedian(p, seeds, j):
    from .kmedian import random_kmedian_instance, verify_cost_chain
    rng = seeds.child("kmedian-instance", j).rng()
    inst = random_kmedian_instance(rng, p["n"], p["k"], p["T"], p["dim"], tuple(p["c_range"]))
    rep = verify_cost_chain(inst, p["mc_trials"], seeds.child("kmedian-coins", j),
                            blind=p["blind"], level=p["level"])
    return {"trial": j, "mean_af": rep.mean_af, "mean_as": rep.mean_as,
            "mean_opt_s": rep.mean_opt_s, "opt_f": rep.opt_f, "ratio": rep.ratio_mean,
            "chain_flags": rep.chain_flags, "mtm_violations": rep.mtm_violations}


def _trial_wsrwfa(p, seeds, j):
    from .kserver import ConfigSpace
    from .oracles import finite_chasing_opt
    from .wellsharp import power_requests, run_wsrwfa
    rng = seeds.child("wsrwfa-instance", j).rng()
    m = random_finite_metric(rng, p["n"], "plane", p["dim"])
    k = p["k"]
    X0 = tuple(sorted(int(x) for x in rng.choice(p["n"], k, replace=p["n"] < k)))
    g_lo, g_hi = p["gamma_range"]
    gam = rng.uniform(g_lo, g_hi, p["T"])
    reqs = power_requests(m, rng.integers(0, p["n"], p["T"]), gam)
    sp = ConfigSpace(m, k)
    alpha = p["alpha_factor"] * (2 * k - 1)
    beta = alpha ** (g_hi - 1)
    alg = run_wsrwfa(sp, X0, reqs, seeds.child("wsrwfa-coins", j).rng(), alpha, beta, p["blind"])
    opt = finite_chasing_opt(sp, reqs, X0)
    ratio = alg.total / opt if opt > 0 else None
    return {"trial": j, "alg_cost": alg.total, "opt": opt, "ratio": ratio,
            "fitted_c": ratio / k ** g_hi if ratio is not None else None,
            "anchor_pairs": alg.anchor_pairs, "anchor_violations": len(alg.anchor_violations),
            "mtm_violations": alg.mtm_violations}


def hedge_losses(kind: str, rng, T: int, points: np.ndarray):
    """Loss matrix (T, G) on grid points and its declared range."""
    x = points[:, 0]
    if kind == "abs_mixture":
        y = np.where(rng.random(T) < 0.5, rng.uniform(-0.7, -0.3, T), rng.uniform(0.3, 0.7, T))
        return np.abs(x[None, :] - y[:, None]), (0.0, 2.0)
    if kind == "warmup":
        y = rng.choice([0.0, 0.5, 1.0], T)
        return (x[None, :] - y[:, None]) ** 2, (0.0, 4.0)
    v = rng.uniform(-1, 1, (T, points.shape[1]))
    v /= np.maximum(1.0, np.linalg.norm(v, axis=1, keepdims=True))
    return v @ points.T, (-1.0, 1.0)


def _trial_hedge(p, seeds, j):
    from .regret import hedge_topk, unit_ball_grid
    res = 2.0 / (p["grid_points"] - 1)
    pts = unit_ball_grid(p["d"], res)
    out = {"trial": j, "regret": {}, "mixture_regret": {}, "_curves": {}}
    for T in p["T"]:
        L, rng_range = hedge_losses(p["losses"], seeds.child("hedge-loss", T, j).rng(), T, pts)
        r = hedge_topk(L, p["k"], seeds.child("hedge-coin", T, j).rng(), loss_range=rng_range)
        out["regret"][str(T)] = float(r.curve.regret[-1])
        out["mixture_regret"][str(T)] = float(r.curve.expected_regret[-1])
        out["n_tuples"] = len(r.tuples)
        out["_curves"][f"hedge_T{T}"] = r.curve.to_csv()
    return out


def _trial_ftl(p, seeds, j):
    from .adversary import ftl_vs_pigeonhole
    from .regret import ftl_topk_olo
    grid = np.linspace(0, 1, p["grid_points"]) if p["adversary"] == "pigeonhole" else \
        np.linspace(-1, 1, p["grid_points"])
    Tmax = max(p["T"])
    out = {"trial": j, "regret": {}}
    if p["adversary"] == "pigeonhole":
        run = ftl_vs_pigeonhole(p["k"], Tmax, grid=grid)
        reg = run.regret
        out["min_step_loss"] = float(run.losses.min())
        out["guarantee"] = 1.0 / (2 * p["k"])
    else:
        rng = seeds.child("ftl-loss", j).rng()
        v = p["w"] * rng.choice([-1.0, 1.0], Tmax)
        r = ftl_topk_olo(grid[:, None], p["k"], v[:, None])
        reg = r.curve.regret
    for T in p["T"]:
        out["regret"][str(T)] = float(reg[T - 1])
    return out


def _trial_subsets(p, seeds, j):
    from .adversary import bandit_lb_instance
    from .regret import hedge_subsets
    out = {"trial": j, "regret": {}, "mixture_regret": {}, "bound": {}}
    for T in p["T"]:
        L = bandit_lb_instance(p["n"], p["k"], seeds.child("bandit", T, j).rng(), T)
        r = hedge_subsets(L, p["k"], seeds.child("subsets-coin", T, j).rng())
        out["regret"][str(T)] = float(r.curve.regret[-1])
        out["mixture_regret"][str(T)] = float(r.curve.expected_regret[-1])
        out["bound"][str(T)] = math.sqrt(T * math.log(math.comb(p["n"], p["k"])) / 2)
    return out


TRIALS = {"chase-line": _trial_chase_line, "kserver-wfa": _trial_kserver,
          "kmedian-filter": _trial_kmedian, "wsrwfa": _trial_wsrwfa,
          "regret-hedge": _trial_hedge, "regret-ftl": _trial_ftl,
          "regret-subsets": _trial_subsets}


def _call(args):
    fn, p, seeds, j = args
    return fn(p, seeds, j)


def map_trials(fn, p, seeds, trials: int, workers: int = 1) -> list:
    """Run trials, in a process pool when workers > 1; results in index order."""
    jobs = [(fn, p, seeds, j) for j in range(trials)]
    if workers <= 1 or trials <= 1:
        return [_call(a) for a in jobs]
    with ProcessPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(_call, jobs))


# ---------------------------------------------------------------------------
# aggregation

def _ci(values, level=0.99) -> dict:
    vals = [v for v in values if v is not None and math.isfinite(v)]
    if not vals:
        return {"mean": None, "ci_low": None, "ci_high": None, "n": 0}
    c = mean_ci(vals, level)
    return {"mean": c.mean, "ci_low": c.low, "ci_high": c.high, "n": c.n}


@dataclass
class FitResult:
    exponent: float
    intercept: float
    band_low: float
    band_high: float


def fit_exponent(Ts, samples, bootstrap: int = 1000, rng=None, min_trials: int = 10) -> FitResult:
    """Least-squares slope of log(mean regret) against log T with a bootstrap 90% band.

    ``samples[i]`` holds the per-trial regrets at ``Ts[i]``.
    """
    Ts = np.asarray(Ts, dtype=float)
    if len(np.unique(Ts)) < 4:
        raise FitError("need at least 4 distinct T values")
    S = [np.asarray(s, dtype=float) for s in samples]
    if len(S) != len(Ts):
        raise FitError("one sample list per T value")
    if any(len(s) < min_trials for s in S):
        raise FitError(f"need at least {min_trials} trials per T value")
    means = np.array([s.mean() for s in S])
    if np.any(means <= 0):
        raise FitError(f"non-positive mean regret {means.tolist()}; cannot fit a power law")
    lx = np.log(Ts)
    slope, icpt = np.polyfit(lx, np.log(means), 1)
    rng = np.random.default_rng(0) if rng is None else rng
    boots = []
    for _ in range(bootstrap):
        m = np.array([s[rng.integers(0, len(s), len(s))].mean() for s in S])
        if np.all(m > 0):
            boots.append(np.polyfit(lx, np.log(m), 1)[0])
    lo, hi = (np.percentile(boots, [5, 95]) if boots else (math.nan, math.nan))
    return FitResult(float(slope), float(icpt), float(lo), float(hi))


def _aggregate(kind, p, trials) -> dict:
    agg = {}
    if kind in ("chase-line", "kserver-wfa", "wsrwfa"):
        agg["ratio"] = _ci([t["ratio"] for t in trials])
        agg["alg_cost"] = _ci([t["alg_cost"] for t in trials])
        agg["opt"] = _ci([t["opt"] for t in trials])
    if kind == "chase-line":
        agg["bound_violations"] = sum(not t["bound_ok"] for t in trials)
        agg["certificate_violations"] = sum(t["certificate_violations"] for t in trials)
    if kind == "kserver-wfa":
        agg["bound_violations"] = sum(not t["bound_ok"] for t in trials)
        agg["invariant_violations"] = sum(t["lipschitz_violations"] + t["monotone_violations"]
                                          for t in trials)
    if kind == "wsrwfa":
        cs = [t["fitted_c"] for t in trials if t["fitted_c"] is not None]
        agg["fitted_c"] = max(cs) if cs else None
        agg["anchor_violations"] = sum(t["anchor_violations"] for t in trials)
        agg["mtm_violations"] = sum(t["mtm_violations"] for t in trials)
    if kind == "kmedian-filter":
        r = _ci([t["ratio"] for t in trials])
        agg.update(ratio_mean=r["mean"], ratio_ci_low=r["ci_low"], ratio_ci_high=r["ci_high"])
        flags = [t["chain_flags"] for t in trials]
        agg["chain_flags"] = {
            "af_le_2as": all(f["af_le_2as"] for f in flags),
            "opts_le_2optf": all(f["opts_le_2optf"] for f in flags),
            "underpowered": any(f["underpowered"] for f in flags)}
        agg["mtm_violations"] = sum(t["mtm_violations"] for t in trials)
    if kind in ("regret-hedge", "regret-ftl", "regret-subsets"):
        Ts = p["T"]
        key = "mixture_regret" if kind != "regret-ftl" else "regret"
        agg["mean_regret"] = {str(T): float(np.mean([t[key][str(T)] for t in trials])) for T in Ts}
        if len(set(Ts)) >= 4:
            try:
                min_tr = 1 if (kind == "regret-ftl" and p["adversary"] == "pigeonhole") else 10
                fr = fit_exponent(Ts, [[t[key][str(T)] for t in trials] for T in Ts],
                                  min_trials=min_tr)
                agg["fit"] = {"exponent": fr.exponent, "band_low": fr.band_low,
                              "band_high": fr.band_high}
            except FitError as exc:
                agg["fit"] = {"error": str(exc)}
    if kind == "regret-subsets":
        agg["bound"] = trials[0]["bound"]
    return agg


def _json_safe(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return x
    if isinstance(x, (np.floating, np.integer)):
        return _json_safe(x.item())
    if isinstance(x, dict):
        return {str(k): _json_safe(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_json_safe(v) for v in x]
    if isinstance(x, np.ndarray):
        return _json_safe(x.tolist())
    return x


def dumps_report(report: dict) -> str:
    return json.dumps(_json_safe(report), sort_keys=True, indent=2) + "\n"


# ---------------------------------------------------------------------------
# non-trial kinds

def _run_lowerbound(p, seeds, trials):
    from . import adversary as adv
    gen = p["generator"]
    out, stream = {"generator": gen}, []
    if gen == "gadget":
        ratios = []
        for j in range(trials):
            ch = adv.PLANAR_CHASERS[p["chaser"]]([(0.5, 0.0), (0.5, 1.0)])
            rec = [] if j == 0 else None
            run = adv.gadget_adversary(ch, p["n"], p["T"], p["max_cycles"], record=rec)
            if rec is not None:
                stream = rec
            ratios.append(run.ratio)
            out.setdefault("runs", []).append({"alg_cost": run.alg_cost, "opt_upper": run.opt_upper,
                                               "ratio": run.ratio,
                                               "rounds_feasible": run.rounds_feasible})
        out["min_ratio"] = min(ratios)
    elif gen == "interval":
        n = p["n"]
        out["requests"] = [adv.interval_union_from_kserver(n, i).to_dict() for i in range(1, n + 1)]
        out["movement"] = {f"{i}->{j}": list(adv.reinterpretation_movement(n, i, j))
                           for i in range(1, n + 1) for j in range(1, n + 1) if i != j}
        stream = out["requests"]
    elif gen == "cluster":
        ci = adv.cluster_instance(p["k"], p["d"])
        pts = ci.stream(seeds.child("cluster").rng(), p["T"])
        stream = [{"family": "power_distance", "gamma": 2.0, "center": x.tolist()} for x in pts]
        out.update(separation=ci.separation, regions=len(ci.centers),
                   two_point_cost=adv.cluster_cost(ci.triples[0][:2], ci.triples[0][:2].mean(0)))
    elif gen == "matrix":
        rng = seeds.child("matrix").rng()
        W = rng.standard_normal((p["d"], p["d"]))
        inst = adv.matrix_olo_instance(W)
        V = inst.draw(seeds.child("matrix-draws").rng(), p["T"])
        stream = [{"family": "linear", "w": v.tolist()} for v in V]
        out["W"] = inst.W.tolist()
    else:
        L = adv.bandit_lb_instance(p["n"], p["k"], seeds.child("bandit").rng(), p["T"])
        stream = [{"losses": row.tolist()} for row in L]
        out["fixed_subset_mean"] = float(L[:, :p["k"]].min(axis=1).mean())
        out["expected"] = (1 - 1 / p["k"]) ** p["k"]
    return out, stream


def _run_opt(p):
    from .oracles import chasing_opt_line, chasing_opt_refine
    reqs = [request_from_dict(d) for d in p["requests"]]
    if p["X0"] is None or len(p["X0"]) != p["k"]:
        raise ValidationError(["opt.X0 must list k positions"])
    X0 = Configuration.on_line(p["X0"])
    res = chasing_opt_line(reqs, p["k"], X0)
    out = {"value": res.value}
    if p["resolutions"]:
        rr = chasing_opt_refine(reqs, p["k"], X0, p["resolutions"])
        out["refine"] = {"resolutions": rr.resolutions, "values": rr.values,
                         "error_bar": rr.error_bar}
    csv = res.trajectory.to_csv() if res.trajectory is not None else None
    return out, csv


def _run_fit(p):
    vals = p["values"]
    fr = fit_exponent(p["T"], vals, p["bootstrap"], min_trials=p["min_trials"])
    return {"exponent": fr.exponent, "intercept": fr.intercept,
            "band_low": fr.band_low, "band_high": fr.band_high}


# ---------------------------------------------------------------------------

def run(cfg: ExperimentConfig, out_dir: str | None = None) -> dict:
    """Execute an experiment; writes report.json and CSV artifacts when out_dir is set."""
    seeds = SeedTree(cfg.seed)
    p = cfg.params
    report = {"version": __version__, "config": cfg.echo(), "kind": cfg.kind}
    csvs, curves, stream = {}, {}, None
    if cfg.kind in TRIALS:
        trials = map_trials(TRIALS[cfg.kind], p, seeds, cfg.trials, cfg.workers)
        for t in trials:
            for name, text in t.pop("_csv", {}).items():
                csvs[f"trial_{t['trial']:03d}_{name}.csv"] = text
            for name, text in t.pop("_curves", {}).items():
                curves[f"trial_{t['trial']:03d}_{name}.csv"] = text
        report["trials"] = trials
        report["aggregate"] = _aggregate(cfg.kind, p, trials)
    elif cfg.kind == "lowerbound":
        report["result"], stream = _run_lowerbound(p, seeds, cfg.trials)
    elif cfg.kind == "opt":
        report["result"], csv = _run_opt(p)
        if csv:
            csvs["opt.csv"] = csv
    elif cfg.kind == "fit":
        try:
            report["result"] = _run_fit(p)
        except FitError as exc:
            raise ValidationError([f"fit refused: {exc}"]) from exc
    if out_dir is not None:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "report.json"), "w") as fh:
            fh.write(dumps_report(report))
        for sub, files in (("trajectories", csvs), ("curves", curves)):
            if files:
                os.makedirs(os.path.join(out_dir, sub), exist_ok=True)
                for name, text in files.items():
                    with open(os.path.join(out_dir, sub, name), "w") as fh:
                        fh.write(text)
        if stream is not None:
            from .adversary import write_jsonl
            with open(os.path.join(out_dir, "requests.jsonl"), "w") as fh:
                write_jsonl(stream, fh)
    return report
