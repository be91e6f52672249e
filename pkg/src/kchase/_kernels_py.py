"""Pure-numpy versions of the hot loops; same signatures as ``_kernels.pyx``.

Configuration-space kernels work on a table indexed by configuration id.
``replace[c, i, p]`` is the id reached from configuration ``c`` by moving its
``i``-th server to point ``p`` and ``cost[c, i, p]`` is that move's length.
Relaxation rounds are Jacobi sweeps so both backends take identical minima.
"""
import numpy as np

INF = np.inf


def relax_moves(values, replace, cost, rounds):
    v = np.array(values, dtype=np.float64, copy=True)
    for _ in range(int(rounds)):
        cand = (v[replace] + cost).min(axis=(1, 2))
        new = np.minimum(v, cand)
        if np.array_equal(new, v):
            break
        v = new
    return v


def wfa_run(w, start, requests, replace, cost, contains):
    """Work-function algorithm over a request sequence.

    Returns the final work function, the configuration id after every step
    (``T + 1`` entries, starting with ``start``) and the movement per step.
    """
    k = replace.shape[1]
    w = np.array(w, dtype=np.float64, copy=True)
    requests = np.asarray(requests, dtype=np.int64)
    T = len(requests)
    configs = np.empty(T + 1, dtype=np.int64)
    moves = np.zeros(T, dtype=np.float64)
    x = int(start)
    configs[0] = x
    for t in range(T):
        r = int(requests[t])
        w = relax_moves(np.where(contains[:, r], w, INF), replace, cost, k)
        if not contains[x, r]:
            best, best_val, best_cost = -1, INF, 0.0
            for i in range(k):
                c = int(replace[x, i, r])
                val = w[c] + cost[x, i, r]
                if val < best_val or (val == best_val and c < best):
                    best, best_val, best_cost = c, val, float(cost[x, i, r])
            moves[t] = best_cost
            x = best
        configs[t + 1] = x
    return w, configs, moves


def opt_run(start, requests, replace, cost, contains):
    """Offline k-server optimum: minimal movement serving every request in order."""
    k = replace.shape[1]
    v = np.full(replace.shape[0], INF)
    v[int(start)] = 0.0
    for r in np.asarray(requests, dtype=np.int64):
        v = relax_moves(v, replace, cost, k)
        v[~contains[:, int(r)].astype(bool)] = INF
    return float(v.min())


def serve_dp_run(start, serve, replace, cost):
    """Offline chasing optimum over a finite configuration space.

    ``serve[t, c]`` is the service cost of configuration ``c`` at step ``t``;
    servers move (paying matching cost) and then pay service.
    """
    k = replace.shape[1]
    v = np.full(replace.shape[0], INF)
    v[int(start)] = 0.0
    for t in range(serve.shape[0]):
        v = relax_moves(v, replace, cost, k) + serve[t]
    return float(v.min())


def _tuple_losses(row, tuples):
    return row[tuples].min(axis=1)


def hedge_run(grid_losses, tuples, eta, uniforms):
    """Multiplicative weights over k-tuples of grid cells.

    Returns (chosen, realized, expected, prefix_opt, weights): the sampled tuple
    id, its loss, the mixture loss, the best cumulative tuple loss so far, and
    the final normalised weights.
    """
    T = grid_losses.shape[0]
    N = tuples.shape[0]
    w = np.full(N, 1.0 / N)
    cum = np.zeros(N)
    chosen = np.empty(T, dtype=np.int64)
    realized = np.empty(T)
    expected = np.empty(T)
    prefix_opt = np.empty(T)
    for t in range(T):
        loss = _tuple_losses(grid_losses[t], tuples)
        cdf = np.cumsum(w)
        i = int(np.searchsorted(cdf, uniforms[t] * cdf[-1], side="right"))
        i = min(i, N - 1)
        chosen[t] = i
        realized[t] = loss[i]
        expected[t] = float(w @ loss)
        cum += loss
        prefix_opt[t] = cum.min()
        w = w * np.exp(-eta * loss)
        w /= w.sum()
    return chosen, realized, expected, prefix_opt, w


def ftl_run(grid_losses, tuples):
    """Follow the leader over k-tuples; ties go to the lowest tuple id."""
    T = grid_losses.shape[0]
    N = tuples.shape[0]
    cum = np.zeros(N)
    chosen = np.empty(T, dtype=np.int64)
    realized = np.empty(T)
    prefix_opt = np.empty(T)
    for t in range(T):
        loss = _tuple_losses(grid_losses[t], tuples)
        i = int(np.argmin(cum))
        chosen[t] = i
        realized[t] = loss[i]
        cum += loss
        prefix_opt[t] = cum.min()
    return chosen, realized, prefix_opt
