# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops. Mirrors ``_kernels_py`` exactly in signature and semantics."""
import numpy as np

from libc.math cimport INFINITY, exp

ctypedef long long i64


cdef void _relax(double[::1] v, double[::1] tmp, int[:, :, ::1] replace,
                 double[:, :, ::1] cost, int rounds) noexcept nogil:
    cdef Py_ssize_t S = replace.shape[0], K = replace.shape[1], N = replace.shape[2]
    cdef Py_ssize_t c, i, p
    cdef double best, cand
    cdef int r
    cdef bint changed
    for r in range(rounds):
        changed = False
        for c in range(S):
            best = v[c]
            for i in range(K):
                for p in range(N):
                    cand = v[replace[c, i, p]] + cost[c, i, p]
                    if cand < best:
                        best = cand
            tmp[c] = best
        for c in range(S):
            if tmp[c] != v[c]:
                changed = True
                v[c] = tmp[c]
        if not changed:
            break


def relax_moves(values, int[:, :, ::1] replace, double[:, :, ::1] cost, int rounds):
    cdef double[::1] v = np.array(values, dtype=np.float64, copy=True)
    cdef double[::1] tmp = np.empty(v.shape[0], dtype=np.float64)
    with nogil:
        _relax(v, tmp, replace, cost, rounds)
    return np.asarray(v)


def wfa_run(w, i64 start, requests, int[:, :, ::1] replace, double[:, :, ::1] cost,
            contains):
    cdef Py_ssize_t S = replace.shape[0], K = replace.shape[1]
    cdef double[::1] wv = np.array(w, dtype=np.float64, copy=True)
    cdef double[::1] tmp = np.empty(S, dtype=np.float64)
    cdef i64[::1] req = np.ascontiguousarray(requests, dtype=np.int64)
    cdef unsigned char[:, ::1] cont = np.ascontiguousarray(contains, dtype=np.uint8)
    cdef Py_ssize_t T = req.shape[0]
    configs_arr = np.empty(T + 1, dtype=np.int64)
    moves_arr = np.zeros(T, dtype=np.float64)
    cdef i64[::1] configs = configs_arr
    cdef double[::1] moves = moves_arr
    cdef i64 x = start, r, best, cc
    cdef Py_ssize_t t, c, i
    cdef double val, best_val, best_cost
    configs[0] = x
    with nogil:
        for t in range(T):
            r = req[t]
            for c in range(S):
                if not cont[c, r]:
                    wv[c] = INFINITY
            _relax(wv, tmp, replace, cost, <int>K)
            if not cont[x, r]:
                best = -1
                best_val = INFINITY
                best_cost = 0.0
                for i in range(K):
                    cc = replace[x, i, r]
                    val = wv[cc] + cost[x, i, r]
                    if val < best_val or (val == best_val and cc < best):
                        best = cc
                        best_val = val
                        best_cost = cost[x, i, r]
                moves[t] = best_cost
                x = best
            configs[t + 1] = x
    return np.asarray(wv), configs_arr, moves_arr


def opt_run(i64 start, requests, int[:, :, ::1] replace, double[:, :, ::1] cost, contains):
    cdef Py_ssize_t S = replace.shape[0], K = replace.shape[1]
    cdef double[::1] v = np.full(S, np.inf)
    cdef double[::1] tmp = np.empty(S, dtype=np.float64)
    cdef i64[::1] req = np.ascontiguousarray(requests, dtype=np.int64)
    cdef unsigned char[:, ::1] cont = np.ascontiguousarray(contains, dtype=np.uint8)
    cdef Py_ssize_t t, c
    cdef i64 r
    cdef double best = INFINITY
    v[start] = 0.0
    with nogil:
        for t in range(req.shape[0]):
            r = req[t]
            _relax(v, tmp, replace, cost, <int>K)
            for c in range(S):
                if not cont[c, r]:
                    v[c] = INFINITY
        for c in range(S):
            if v[c] < best:
                best = v[c]
    return float(best)


def serve_dp_run(i64 start, serve, int[:, :, ::1] replace, double[:, :, ::1] cost):
    cdef Py_ssize_t S = replace.shape[0], K = replace.shape[1]
    cdef double[:, ::1] sv = np.ascontiguousarray(serve, dtype=np.float64)
    cdef double[::1] v = np.full(S, np.inf)
    cdef double[::1] tmp = np.empty(S, dtype=np.float64)
    cdef Py_ssize_t t, c
    cdef double best = INFINITY
    v[start] = 0.0
    with nogil:
        for t in range(sv.shape[0]):
            _relax(v, tmp, replace, cost, <int>K)
            for c in range(S):
                v[c] = v[c] + sv[t, c]
        for c in range(S):
            if v[c] < best:
                best = v[c]
    return float(best)


cdef inline double _tuple_loss(double[:, ::1] gl, Py_ssize_t t, int[:, ::1] tuples,
                               Py_ssize_t i) noexcept nogil:
    cdef Py_ssize_t j
    cdef double m = gl[t, tuples[i, 0]]
    for j in range(1, tuples.shape[1]):
        if gl[t, tuples[i, j]] < m:
            m = gl[t, tuples[i, j]]
    return m


def hedge_run(grid_losses, int[:, ::1] tuples, double eta, uniforms):
    cdef double[:, ::1] gl = np.ascontiguousarray(grid_losses, dtype=np.float64)
    cdef double[::1] u = np.ascontiguousarray(uniforms, dtype=np.float64)
    cdef Py_ssize_t T = gl.shape[0], N = tuples.shape[0]
    w_arr = np.full(N, 1.0 / N)
    cdef double[::1] w = w_arr
    cdef double[::1] cum = np.zeros(N)
    cdef double[::1] loss = np.empty(N)
    chosen_arr = np.empty(T, dtype=np.int64)
    realized_arr = np.empty(T)
    expected_arr = np.empty(T)
    opt_arr = np.empty(T)
    cdef i64[::1] chosen = chosen_arr
    cdef double[::1] realized = realized_arr, expected = expected_arr, popt = opt_arr
    cdef Py_ssize_t t, i, pick
    cdef double total, acc, target, ex, mn
    with nogil:
        for t in range(T):
            total = 0.0
            for i in range(N):
                loss[i] = _tuple_loss(gl, t, tuples, i)
                total = total + w[i]
            target = u[t] * total
            acc = 0.0
            pick = N - 1
            for i in range(N):
                acc = acc + w[i]
                if acc > target:
                    pick = i
                    break
            chosen[t] = pick
            realized[t] = loss[pick]
            ex = 0.0
            mn = INFINITY
            total = 0.0
            for i in range(N):
                ex = ex + w[i] * loss[i]
                cum[i] = cum[i] + loss[i]
                if cum[i] < mn:
                    mn = cum[i]
                w[i] = w[i] * exp(-eta * loss[i])
                total = total + w[i]
            expected[t] = ex
            popt[t] = mn
            for i in range(N):
                w[i] = w[i] / total
    return chosen_arr, realized_arr, expected_arr, opt_arr, w_arr


def ftl_run(grid_losses, int[:, ::1] tuples):
    cdef double[:, ::1] gl = np.ascontiguousarray(grid_losses, dtype=np.float64)
    cdef Py_ssize_t T = gl.shape[0], N = tuples.shape[0]
    cdef double[::1] cum = np.zeros(N)
    chosen_arr = np.empty(T, dtype=np.int64)
    realized_arr = np.empty(T)
    opt_arr = np.empty(T)
    cdef i64[::1] chosen = chosen_arr
    cdef double[::1] realized = realized_arr, popt = opt_arr
    cdef Py_ssize_t t, i, pick
    cdef double mn, l
    with nogil:
        for t in range(T):
            pick = 0
            for i in range(1, N):
                if cum[i] < cum[pick]:
                    pick = i
            chosen[t] = pick
            realized[t] = _tuple_loss(gl, t, tuples, pick)
            mn = INFINITY
            for i in range(N):
                l = _tuple_loss(gl, t, tuples, i)
                cum[i] = cum[i] + l
                if cum[i] < mn:
                    mn = cum[i]
            popt[t] = mn
    return chosen_arr, realized_arr, opt_arr
