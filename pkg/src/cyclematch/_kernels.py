"""Hot numeric loops, each in a numba and a pure-numpy flavour.

The numba path is used when numba imports and ``CYCLEMATCH_NUMBA`` is not set
to ``0``. Both flavours are always importable under their suffixed names
(``*_nb`` / ``*_np``) so tests and the benchmark can compare them directly.
"""

import heapq
import os

import numpy as np
from scipy.sparse import csgraph, csr_matrix

try:
    import numba
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None

USE_NUMBA = numba is not None and os.environ.get("CYCLEMATCH_NUMBA", "1").lower() not in (
    "0", "false", "off", "no",
)

NORMS = {"l2": 0, "l1": 1, "cosine": 2}


def _njit(*args, **kwargs):
    if numba is None:
        return args[0] if args and callable(args[0]) else (lambda f: f)
    return numba.njit(*args, cache=True, **kwargs)


# --------------------------------------------------------------- feature costs


def _feature_distance_np(a, b, code):
    if code == 0:
        return np.linalg.norm(a - b, axis=1)
    if code == 1:
        return np.abs(a - b).sum(axis=1)
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    cos = np.where(denom > 0, np.einsum("ij,ij->i", a, b) / np.where(denom > 0, denom, 1.0), 1.0)
    return np.clip(1.0 - cos, 0.0, 2.0)


def pair_costs_np(fx, fy, x_tail, x_head, y_tail, y_head, code):
    """``d(fx[x_tail], fy[y_tail]) + d(fx[x_head], fy[y_head])`` per variable."""
    return (_feature_distance_np(fx[x_tail], fy[y_tail], code)
            + _feature_distance_np(fx[x_head], fy[y_head], code))


@_njit
def _dist_nb(a, b, code):
    d = a.shape[0]
    if code == 0:
        s = 0.0
        for t in range(d):
            s += (a[t] - b[t]) ** 2
        return np.sqrt(s)
    if code == 1:
        s = 0.0
        for t in range(d):
            s += abs(a[t] - b[t])
        return s
    dot = 0.0
    na = 0.0
    nb = 0.0
    for t in range(d):
        dot += a[t] * b[t]
        na += a[t] * a[t]
        nb += b[t] * b[t]
    if na == 0.0 or nb == 0.0:
        return 0.0
    v = 1.0 - dot / np.sqrt(na * nb)
    return min(max(v, 0.0), 2.0)


@_njit
def pair_costs_nb(fx, fy, x_tail, x_head, y_tail, y_head, code):
    m = x_tail.shape[0]
    out = np.empty(m)
    for i in range(m):
        out[i] = (_dist_nb(fx[x_tail[i]], fy[y_tail[i]], code)
                  + _dist_nb(fx[x_head[i]], fy[y_head[i]], code))
    return out


# -------------------------------------------------------------------- dijkstra


def dijkstra_np(indptr, indices, weights, sources):
    """Shortest-path distances from each source; returns ``(len(sources), n)``."""
    n = len(indptr) - 1
    g = csr_matrix((weights, indices, indptr), shape=(n, n))
    return np.atleast_2d(csgraph.dijkstra(g, directed=True, indices=np.asarray(sources)))


@_njit
def dijkstra_nb(indptr, indices, weights, sources):
    n = indptr.shape[0] - 1
    out = np.full((sources.shape[0], n), np.inf)
    for s_i in range(sources.shape[0]):
        dist = out[s_i]
        done = np.zeros(n, dtype=np.bool_)
        src = sources[s_i]
        dist[src] = 0.0
        heap = [(0.0, src)]
        while len(heap) > 0:
            d, u = heapq.heappop(heap)
            if done[u]:
                continue
            done[u] = True
            for p in range(indptr[u], indptr[u + 1]):
                v = indices[p]
                nd = d + weights[p]
                if nd < dist[v]:
                    dist[v] = nd
                    heapq.heappush(heap, (nd, v))
    return out


# -------------------------------------------------------- brute-force oracle


def enumerate_maps_np(nx, ny, und_edges, dir_edges, adj_y, cost_xy, chunk=1 << 16):
    """Scan all ``ny ** nx`` vertex maps in odometer order (vertex 0 most significant).

    Returns ``(best_cost, best_map, n_consistent)``; ``best_map`` is the first
    minimiser in scan order.
    """
    total = ny ** nx
    radix = ny ** np.arange(nx - 1, -1, -1, dtype=np.int64)
    best, best_idx, count = np.inf, -1, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(total, start + chunk), dtype=np.int64)
        maps = (idx[:, None] // radix[None, :]) % ny
        ok = np.ones(len(idx), dtype=bool)
        for a, b in und_edges:
            ok &= adj_y[maps[:, a], maps[:, b]]
        if not ok.any():
            continue
        maps, idx = maps[ok], idx[ok]
        count += len(idx)
        score = np.zeros(len(idx))
        for a, b in dir_edges:
            score += cost_xy[a, maps[:, a]] + cost_xy[b, maps[:, b]]
        k = int(np.argmin(score))
        if score[k] < best:
            best, best_idx = float(score[k]), int(idx[k])
    best_map = None if best_idx < 0 else (best_idx // radix) % ny
    return best, best_map, count


@_njit
def enumerate_maps_nb(nx, ny, und_edges, dir_edges, adj_y, cost_xy):
    phi = np.zeros(nx, dtype=np.int64)
    best = np.inf
    best_map = np.full(nx, -1, dtype=np.int64)
    count = 0
    while True:
        ok = True
        for e in range(und_edges.shape[0]):
            if not adj_y[phi[und_edges[e, 0]], phi[und_edges[e, 1]]]:
                ok = False
                break
        if ok:
            count += 1
            s = 0.0
            for e in range(dir_edges.shape[0]):
                a = dir_edges[e, 0]
                b = dir_edges[e, 1]
                s += cost_xy[a, phi[a]] + cost_xy[b, phi[b]]
            if s < best:
                best = s
                best_map[:] = phi
        pos = nx - 1
        while pos >= 0:
            phi[pos] += 1
            if phi[pos] < ny:
                break
            phi[pos] = 0
            pos -= 1
        if pos < 0:
            break
    return best, best_map, count


# ------------------------------------------------------------ simplex pricing

AT_LOWER, AT_UPPER, BASIC = 0, 1, 2


def reduced_costs_np(indptr, indices, data, c, y):
    n = len(indptr) - 1
    col = np.repeat(np.arange(n), np.diff(indptr))
    return c - np.bincount(col, weights=data * y[indices], minlength=n)


@_njit
def reduced_costs_nb(indptr, indices, data, c, y):
    n = indptr.shape[0] - 1
    d = c.copy()
    for j in range(n):
        s = 0.0
        for p in range(indptr[j], indptr[j + 1]):
            s += data[p] * y[indices[p]]
        d[j] -= s
    return d


def choose_entering_np(d, status, tol, bland):
    """Dantzig (largest violation) or Bland (lowest index) entering column, ``-1`` if optimal."""
    viol = np.where(status == AT_LOWER, -d, np.where(status == AT_UPPER, d, 0.0))
    eligible = viol > tol
    if not eligible.any():
        return -1
    if bland:
        return int(np.argmax(eligible))
    return int(np.argmax(np.where(eligible, viol, -np.inf)))


@_njit
def choose_entering_nb(d, status, tol, bland):
    best = -1
    best_v = tol
    for j in range(d.shape[0]):
        s = status[j]
        if s == AT_LOWER:
            v = -d[j]
        elif s == AT_UPPER:
            v = d[j]
        else:
            continue
        if v > best_v:
            if bland:
                return j
            best = j
            best_v = v
    return best


def ratio_test_np(x_b, alpha, lb_b, ub_b, basis, sign, step_cap, pivot_tol, bland=False):
    """Bounded ratio test for the entering direction ``-sign * alpha``.

    Returns ``(theta, row, to_upper)`` with ``row == -1`` meaning the entering
    variable flips to its opposite bound. Ties go to the largest pivot, or
    to the lowest basis index when ``bland`` is set.
    """
    delta = sign * alpha
    theta = np.full(len(x_b), np.inf)
    dec = delta > pivot_tol
    inc = delta < -pivot_tol
    theta[dec] = (x_b[dec] - lb_b[dec]) / delta[dec]
    theta[inc] = (ub_b[inc] - x_b[inc]) / -delta[inc]
    theta = np.maximum(theta, 0.0)
    t = theta.min() if len(theta) else np.inf
    if step_cap <= t:
        return step_cap, -1, False
    ties = np.flatnonzero(theta <= t + 1e-12)
    # largest pivot among ties for stability, lowest basis index as final tie-break
    mag = np.abs(delta[ties])
    cand = ties if bland else ties[mag >= mag.max() * 0.999]
    r = int(cand[np.argmin(basis[cand])])
    return float(t), r, bool(inc[r])


@_njit
def ratio_test_nb(x_b, alpha, lb_b, ub_b, basis, sign, step_cap, pivot_tol, bland=False):
    m = x_b.shape[0]
    t = np.inf
    for i in range(m):
        dl = sign * alpha[i]
        if dl > pivot_tol:
            v = max((x_b[i] - lb_b[i]) / dl, 0.0)
        elif dl < -pivot_tol:
            v = max((ub_b[i] - x_b[i]) / -dl, 0.0)
        else:
            continue
        if v < t:
            t = v
    if step_cap <= t:
        return step_cap, -1, False
    big = 0.0
    for i in range(m):
        dl = sign * alpha[i]
        if dl > pivot_tol:
            v = max((x_b[i] - lb_b[i]) / dl, 0.0)
        elif dl < -pivot_tol:
            v = max((ub_b[i] - x_b[i]) / -dl, 0.0)
        else:
            continue
        if v <= t + 1e-12 and abs(dl) > big:
            big = abs(dl)
    r = -1
    for i in range(m):
        dl = sign * alpha[i]
        if dl > pivot_tol:
            v = max((x_b[i] - lb_b[i]) / dl, 0.0)
        elif dl < -pivot_tol:
            v = max((ub_b[i] - x_b[i]) / -dl, 0.0)
        else:
            continue
        if v <= t + 1e-12 and (bland or abs(dl) >= big * 0.999):
            if r < 0 or basis[i] < basis[r]:
                r = i
    return t, r, sign * alpha[r] < 0


if USE_NUMBA:
    pair_costs = pair_costs_nb
    dijkstra = dijkstra_nb
    enumerate_maps = enumerate_maps_nb
    reduced_costs = reduced_costs_nb
    choose_entering = choose_entering_nb
    ratio_test = ratio_test_nb
else:
    pair_costs = pair_costs_np
    dijkstra = dijkstra_np
    enumerate_maps = enumerate_maps_np
    reduced_costs = reduced_costs_np
    choose_entering = choose_entering_np
    ratio_test = ratio_test_np
