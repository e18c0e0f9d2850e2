"""Jit-compiled kernels for tour evaluation, construction and k-opt search.

Everything in here operates on plain numpy arrays so the hot loops stay
allocation-free. Distances are computed on demand from coordinates using the
TSPLIB EUC_2D convention (nearest integer, half up), so a coordinate change
is immediately visible to every kernel without rebuilding a matrix.
"""

import numpy as np
from numba import njit


@njit(cache=True, inline="always")
def dist(coords, i, j):
    dx = coords[i, 0] - coords[j, 0]
    dy = coords[i, 1] - coords[j, 1]
    return np.int64(np.sqrt(dx * dx + dy * dy) + 0.5)


@njit(cache=True, inline="always")
def point_dist(ax, ay, bx, by):
    dx = ax - bx
    dy = ay - by
    return np.int64(np.sqrt(dx * dx + dy * dy) + 0.5)


@njit(cache=True)
def tour_length(coords, order):
    n = order.shape[0]
    total = np.int64(0)
    for t in range(n - 1):
        total += dist(coords, order[t], order[t + 1])
    total += dist(coords, order[n - 1], order[0])
    return total


@njit(cache=True)
def distances_from(coords, i):
    """Row of rounded distances from city i to every city."""
    n = coords.shape[0]
    out = np.empty(n, np.int64)
    for j in range(n):
        out[j] = dist(coords, i, j)
    return out


@njit(cache=True)
def nearest_neighbor_tour(coords, start):
    """Greedy tour; ties broken toward the lower city index."""
    n = coords.shape[0]
    order = np.empty(n, np.int64)
    visited = np.zeros(n, np.bool_)
    order[0] = start
    visited[start] = True
    cur = start
    for step in range(1, n):
        best = -1
        best_d = np.int64(1 << 60)
        for j in range(n):
            if not visited[j]:
                d = dist(coords, cur, j)
                if d < best_d:
                    best_d = d
                    best = j
        order[step] = best
        visited[best] = True
        cur = best
    return order


@njit(cache=True, inline="always")
def _edge_weight(coords, tau, alpha, beta, i, j):
    d = dist(coords, i, j)
    if d < 1:
        d = 1
    return (tau[i, j] ** alpha) * ((1.0 / d) ** beta)


@njit(cache=True)
def _pick_candidate(coords, nn, tau, alpha, beta, visited, cur, rng, wbuf, cbuf):
    """Roulette over unvisited candidate-list members of ``cur``.

    Falls back to the deterministic argmax of tau^alpha * eta^beta over all
    unvisited cities when the candidate list is exhausted (lowest index wins
    ties via strict comparison in scan order).
    """
    k = nn.shape[1]
    m = 0
    total = 0.0
    for ci in range(k):
        j = nn[cur, ci]
        if not visited[j]:
            w = _edge_weight(coords, tau, alpha, beta, cur, j)
            wbuf[m] = w
            cbuf[m] = j
            total += w
            m += 1
    if m > 0:
        r = rng.random() * total
        acc = 0.0
        for idx in range(m - 1):
            acc += wbuf[idx]
            if r < acc:
                return cbuf[idx]
        return cbuf[m - 1]
    n = coords.shape[0]
    best = np.int64(-1)
    best_w = -1.0
    for j in range(n):
        if not visited[j] and j != cur:
            w = _edge_weight(coords, tau, alpha, beta, cur, j)
            if w > best_w:
                best_w = w
                best = j
    return best


@njit(cache=True)
def choose_next(coords, nn, tau, alpha, beta, visited, cur, rng):
    k = nn.shape[1]
    wbuf = np.empty(k, np.float64)
    cbuf = np.empty(k, np.int64)
    return _pick_candidate(coords, nn, tau, alpha, beta, visited, cur, rng, wbuf, cbuf)


@njit(cache=True)
def construct(coords, nn, tau, alpha, beta, start, rng):
    n = coords.shape[0]
    k = nn.shape[1]
    order = np.empty(n, np.int64)
    visited = np.zeros(n, np.bool_)
    wbuf = np.empty(k, np.float64)
    cbuf = np.empty(k, np.int64)
    order[0] = start
    visited[start] = True
    cur = np.int64(start)
    for step in range(1, n):
        nxt = _pick_candidate(coords, nn, tau, alpha, beta, visited, cur, rng, wbuf, cbuf)
        order[step] = nxt
        visited[nxt] = True
        cur = nxt
    return order


@njit(cache=True)
def deposit_edges(tau, order, amount):
    n = order.shape[0]
    for t in range(n - 1):
        a = order[t]
        b = order[t + 1]
        tau[a, b] += amount
        tau[b, a] += amount
    a = order[n - 1]
    b = order[0]
    tau[a, b] += amount
    tau[b, a] += amount


# ---------------------------------------------------------------------------
# 2-opt / 3-opt with candidate lists and don't-look bits.
#
# The driver alternates a pruned don't-look sweep (fast) with a full
# verification sweep over every city and candidate without pruning. The
# verification sweep defines the fixpoint: when it applies nothing, no
# exchange reachable through the candidate lists improves the tour, so a
# second invocation returns the tour unchanged.
# ---------------------------------------------------------------------------


@njit(cache=True)
def _reverse_segment(order, pos, i, j):
    """Reverse the cyclic slice of positions i..j inclusive."""
    n = order.shape[0]
    length = ((j - i) % n) + 1
    for s in range(length // 2):
        a = (i + s) % n
        b = (j - s) % n
        ca = order[a]
        cb = order[b]
        order[a] = cb
        order[b] = ca
        pos[cb] = a
        pos[ca] = b


@njit(cache=True)
def _apply_2exchange(order, pos, u, v):
    """Remove (u, succ u) and (v, succ v); add (u, v) and (succ u, succ v)."""
    n = order.shape[0]
    i = pos[u]
    j = pos[v]
    inner = (j - i) % n
    if 2 * inner <= n:
        _reverse_segment(order, pos, (i + 1) % n, j)
    else:
        _reverse_segment(order, pos, (j + 1) % n, i)


@njit(cache=True)
def _touch(dlb, eligible, c):
    dlb[c] = False
    eligible[c] = True


@njit(cache=True)
def _try_2opt_city(coords, nn, order, pos, dlb, eligible, c1, pruned):
    n = order.shape[0]
    k = nn.shape[1]
    p1 = pos[c1]
    for direction in range(2):
        if direction == 0:
            c2 = order[(p1 + 1) % n]
        else:
            c2 = order[(p1 - 1) % n]
        d12 = dist(coords, c1, c2)
        for ci in range(k):
            c3 = nn[c1, ci]
            if c3 == c2:
                continue
            d13 = dist(coords, c1, c3)
            if pruned and d13 >= d12:
                break
            p3 = pos[c3]
            if direction == 0:
                c4 = order[(p3 + 1) % n]
            else:
                c4 = order[(p3 - 1) % n]
            if c4 == c1:
                continue
            gain = d12 + dist(coords, c3, c4) - d13 - dist(coords, c2, c4)
            if gain > 0:
                if direction == 0:
                    _apply_2exchange(order, pos, c1, c3)
                else:
                    _apply_2exchange(order, pos, c2, c4)
                _touch(dlb, eligible, c1)
                _touch(dlb, eligible, c2)
                _touch(dlb, eligible, c3)
                _touch(dlb, eligible, c4)
                return True
    return False


@njit(cache=True)
def two_opt(coords, nn, order, active, use_dlb):
    n = order.shape[0]
    pos = np.empty(n, np.int64)
    for t in range(n):
        pos[order[t]] = t
    dlb = np.empty(n, np.bool_)
    eligible = np.empty(n, np.bool_)
    for c in range(n):
        dlb[c] = not active[c]
        eligible[c] = active[c]
    while True:
        if use_dlb:
            improved = False
            for c1 in range(n):
                if dlb[c1]:
                    continue
                if _try_2opt_city(coords, nn, order, pos, dlb, eligible, c1, True):
                    improved = True
                else:
                    dlb[c1] = True
            if improved:
                continue
        settled = True
        for c1 in range(n):
            if not eligible[c1]:
                continue
            if _try_2opt_city(coords, nn, order, pos, dlb, eligible, c1, False):
                settled = False
        if settled:
            break
    return tour_length(coords, order)


@njit(cache=True)
def _swap_segments(order, pos, i, j, kk, rev_c, rev_b):
    """Rewrite positions i+1..kk as segment C (j+1..kk) followed by B (i+1..j)."""
    nb = j - i
    nc = kk - j
    tmp = np.empty(nb + nc, np.int64)
    idx = 0
    if rev_c:
        for t in range(kk, j, -1):
            tmp[idx] = order[t]
            idx += 1
    else:
        for t in range(j + 1, kk + 1):
            tmp[idx] = order[t]
            idx += 1
    if rev_b:
        for t in range(j, i, -1):
            tmp[idx] = order[t]
            idx += 1
    else:
        for t in range(i + 1, j + 1):
            tmp[idx] = order[t]
            idx += 1
    for t in range(nb + nc):
        c = tmp[t]
        order[i + 1 + t] = c
        pos[c] = i + 1 + t


@njit(cache=True)
def _try_3opt_triple(coords, order, pos, dlb, eligible, i, j, kk):
    """Evaluate the seven reconnections of the cuts after positions i, j, kk."""
    n = order.shape[0]
    a = order[i]
    b = order[i + 1]
    c = order[j]
    d = order[j + 1]
    e = order[kk]
    f = order[(kk + 1) % n]
    d_ab = dist(coords, a, b)
    d_cd = dist(coords, c, d)
    d_ef = dist(coords, e, f)
    base = d_ab + d_cd + d_ef
    # case 1: reverse B
    if base - (dist(coords, a, c) + dist(coords, b, d) + d_ef) > 0:
        _reverse_segment(order, pos, i + 1, j)
    # case 2: reverse C
    elif base - (d_ab + dist(coords, c, e) + dist(coords, d, f)) > 0:
        _reverse_segment(order, pos, j + 1, kk)
    # case 3: reverse both
    elif base - (dist(coords, a, c) + dist(coords, b, e) + dist(coords, d, f)) > 0:
        _reverse_segment(order, pos, i + 1, j)
        _reverse_segment(order, pos, j + 1, kk)
    # case 4: A C B D
    elif base - (dist(coords, a, d) + dist(coords, e, b) + dist(coords, c, f)) > 0:
        _swap_segments(order, pos, i, j, kk, False, False)
    # case 5: A C' B D
    elif base - (dist(coords, a, e) + dist(coords, d, b) + dist(coords, c, f)) > 0:
        _swap_segments(order, pos, i, j, kk, True, False)
    # case 6: A C B' D
    elif base - (dist(coords, a, d) + dist(coords, e, c) + dist(coords, b, f)) > 0:
        _swap_segments(order, pos, i, j, kk, False, True)
    # case 7: reverse the whole B+C block
    elif base - (dist(coords, a, e) + dist(coords, d, c) + dist(coords, b, f)) > 0:
        _reverse_segment(order, pos, i + 1, kk)
    else:
        return False
    _touch(dlb, eligible, a)
    _touch(dlb, eligible, b)
    _touch(dlb, eligible, c)
    _touch(dlb, eligible, d)
    _touch(dlb, eligible, e)
    _touch(dlb, eligible, f)
    return True


@njit(cache=True)
def _try_3opt_city(coords, nn, order, pos, dlb, eligible, c1, pruned):
    if _try_2opt_city(coords, nn, order, pos, dlb, eligible, c1, pruned):
        return True
    n = order.shape[0]
    k = nn.shape[1]
    p1 = pos[c1]
    d1succ = dist(coords, c1, order[(p1 + 1) % n])
    for ci in range(k):
        c2 = nn[c1, ci]
        if pruned and dist(coords, c1, c2) >= d1succ:
            break
        p2 = pos[c2]
        for cj in range(k):
            c3 = nn[c2, cj]
            if c3 == c1:
                continue
            p3 = pos[c3]
            # order the three cut positions
            i = p1
            j = p2
            kk = p3
            if i > j:
                i, j = j, i
            if j > kk:
                j, kk = kk, j
            if i > j:
                i, j = j, i
            if i == j or j == kk:
                continue
            if _try_3opt_triple(coords, order, pos, dlb, eligible, i, j, kk):
                return True
    return False


@njit(cache=True)
def three_opt(coords, nn, order, active, use_dlb):
    # settle the 2-exchange neighborhood first: the result then never trails
    # plain two_opt from the same start, and the pre-pass is cheap
    two_opt(coords, nn, order, active, use_dlb)
    n = order.shape[0]
    pos = np.empty(n, np.int64)
    for t in range(n):
        pos[order[t]] = t
    dlb = np.empty(n, np.bool_)
    eligible = np.empty(n, np.bool_)
    for c in range(n):
        dlb[c] = not active[c]
        eligible[c] = active[c]
    while True:
        if use_dlb:
            improved = False
            for c1 in range(n):
                if dlb[c1]:
                    continue
                if _try_3opt_city(coords, nn, order, pos, dlb, eligible, c1, True):
                    improved = True
                else:
                    dlb[c1] = True
            if improved:
                continue
        settled = True
        for c1 in range(n):
            if not eligible[c1]:
                continue
            if _try_3opt_city(coords, nn, order, pos, dlb, eligible, c1, False):
                settled = False
        if settled:
            break
    return tour_length(coords, order)
