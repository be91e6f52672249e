import os
import subprocess
import sys

import numpy as np
import pytest

from kchase import kernels
from kchase.core import Metric
from kchase.kserver import ConfigSpace
from kchase.regret import tuples_of

impls = kernels.backends()
needs_both = pytest.mark.skipif("cython" not in impls, reason="compiled extension not built")


def setup(seed, n=6, k=2, T=20):
    rng = np.random.default_rng(seed)
    sp = ConfigSpace(Metric.from_points(rng.random((n, 2))), k)
    req = rng.integers(0, n, T).astype(np.int64)
    return rng, sp, req


@needs_both
@pytest.mark.parametrize("seed", range(5))
def test_kserver_kernels_agree(seed):
    rng, sp, req = setup(seed, k=1 + seed % 3)
    py, cy = impls["python"], impls["cython"]
    w0 = sp.match_from(sp.configs[0])
    np.testing.assert_allclose(py.relax_moves(w0, sp.replace, sp.cost, sp.k),
                               cy.relax_moves(w0, sp.replace, sp.cost, sp.k))
    a = py.wfa_run(w0, 0, req, sp.replace, sp.cost, sp.contains)
    b = cy.wfa_run(w0, 0, req, sp.replace, sp.cost, sp.contains)
    np.testing.assert_allclose(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    np.testing.assert_allclose(a[2], b[2])
    assert py.opt_run(0, req, sp.replace, sp.cost, sp.contains) == pytest.approx(
        cy.opt_run(0, req, sp.replace, sp.cost, sp.contains))
    serve = rng.random((len(req), sp.size))
    assert py.serve_dp_run(0, serve, sp.replace, sp.cost) == pytest.approx(
        cy.serve_dp_run(0, serve, sp.replace, sp.cost))


@needs_both
@pytest.mark.parametrize("seed", range(5))
def test_learning_kernels_agree(seed):
    rng = np.random.default_rng(seed)
    L = rng.random((60, 9))
    tup = tuples_of(9, 2)
    u = rng.random(60)
    a = impls["python"].hedge_run(L, tup, 0.2, u)
    b = impls["cython"].hedge_run(L, tup, 0.2, u)
    np.testing.assert_array_equal(a[0], b[0])
    for x, y in zip(a[1:], b[1:]):
        np.testing.assert_allclose(x, y, rtol=1e-10, atol=1e-12)
    a = impls["python"].ftl_run(L, tup)
    b = impls["cython"].ftl_run(L, tup)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_allclose(a[1], b[1])
    np.testing.assert_allclose(a[2], b[2])


def test_environment_forces_fallback():
    env = dict(os.environ, KCHASE_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", "from kchase import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_benchmark_script_runs():
    root = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    out = subprocess.run([sys.executable, os.path.join(root, "benchmarks", "bench_kernels.py"),
                          "--quick", "--repeat", "1"], capture_output=True, text=True, check=True)
    assert "wfa_run" in out.stdout
