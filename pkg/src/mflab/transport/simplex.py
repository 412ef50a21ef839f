"""Transportation network simplex, compiled with numba.

Nodes: sources 0..m-1, sinks m..m+n-1 and an artificial root m+n.  Real
arcs run source -> sink and are never stored explicitly; their costs are
evaluated on the fly from the coordinates, so memory stays O(m + n).

The basis is a strongly feasible spanning tree (every zero-flow tree arc
points towards the root), maintained by Cunningham's leaving-arc rule.
This prevents cycling under any entering rule, so block-wise Dantzig
pricing can be used throughout.  The initial tree consists of artificial
root arcs with cost 2 * max real cost, which is enough to expel them.
"""
import numpy as np
from numba import njit

STATUS_OPTIMAL = 0
STATUS_MAX_ITER = 1
STATUS_INFEASIBLE = 2


@njit(cache=True, inline="always")
def _cost(X, Y, i, j, p):
    s = 0.0
    for k in range(X.shape[1]):
        t = X[i, k] - Y[j, k]
        s += t * t
    if p == 2.0:
        return s
    if p == 1.0:
        return np.sqrt(s)
    return s ** (0.5 * p)


@njit(cache=True, inline="always")
def _arc_cost(k, src, dst, art, m, X, Y, p, big):
    if art[k]:
        return big
    return _cost(X, Y, src[k], dst[k] - m, p)


@njit(cache=True)
def _link(v, h, head, nxt, prv):
    nxt[h] = head[v]
    prv[h] = -1
    if head[v] >= 0:
        prv[head[v]] = h
    head[v] = h


@njit(cache=True)
def _unlink(v, h, head, nxt, prv):
    if prv[h] >= 0:
        nxt[prv[h]] = nxt[h]
    else:
        head[v] = nxt[h]
    if nxt[h] >= 0:
        prv[nxt[h]] = prv[h]


@njit(cache=True)
def _hang(r, par, via, src, dst, art, m, X, Y, p, big, head, nxt,
          parent, parc, up, depth, pot, stack):
    """Recompute parent, arc direction, depth and potential below r.

    Potentials satisfy pot[dst] = pot[src] + cost on every tree arc.
    """
    parent[r] = par
    parc[r] = via
    if par >= 0:
        depth[r] = depth[par] + 1
        c = _arc_cost(via, src, dst, art, m, X, Y, p, big)
        if src[via] == r:
            up[r] = True
            pot[r] = pot[par] - c
        else:
            up[r] = False
            pot[r] = pot[par] + c
    else:
        depth[r] = 0
        pot[r] = 0.0
    top = 0
    stack[0] = r
    while top >= 0:
        u = stack[top]
        top -= 1
        h = head[u]
        while h >= 0:
            k = h >> 1
            if k != parc[u]:
                if src[k] == u:
                    w = dst[k]
                    up[w] = False
                    pot[w] = pot[u] + _arc_cost(k, src, dst, art, m, X, Y, p, big)
                else:
                    w = src[k]
                    up[w] = True
                    pot[w] = pot[u] - _arc_cost(k, src, dst, art, m, X, Y, p, big)
                parent[w] = u
                parc[w] = k
                depth[w] = depth[u] + 1
                top += 1
                stack[top] = w
            h = nxt[h]


@njit(cache=True)
def network_simplex(X, Y, a, b, p, tol, big, max_iter, block):
    """Solve min sum c_ij f_ij subject to row sums a and column sums b.

    Returns (src, dst, flow, is_artificial, u, v, iterations, status);
    the first four describe the final tree, with sink ids offset by m.
    Duals satisfy u_i + v_j <= c_ij with equality on basic arcs.
    """
    m = a.shape[0]
    n = b.shape[0]
    root = m + n
    nv = m + n + 1
    na = m + n
    src = np.empty(na, np.int64)
    dst = np.empty(na, np.int64)
    fl = np.empty(na, np.float64)
    art = np.ones(na, np.bool_)
    for i in range(m):
        src[i] = i
        dst[i] = root
        fl[i] = a[i]
    for j in range(n):
        k = m + j
        if b[j] > 0:
            src[k] = root
            dst[k] = m + j
        else:
            src[k] = m + j
            dst[k] = root
        fl[k] = b[j]

    head = np.full(nv, -1, np.int64)
    nxt = np.empty(2 * na, np.int64)
    prv = np.empty(2 * na, np.int64)
    for k in range(na):
        _link(src[k], 2 * k, head, nxt, prv)
        _link(dst[k], 2 * k + 1, head, nxt, prv)
    parent = np.empty(nv, np.int64)
    parc = np.empty(nv, np.int64)
    up = np.empty(nv, np.bool_)
    depth = np.empty(nv, np.int64)
    pot = np.empty(nv, np.float64)
    stack = np.empty(nv, np.int64)
    _hang(root, -1, -1, src, dst, art, m, X, Y, p, big, head, nxt,
          parent, parc, up, depth, pot, stack)

    total = m * n
    pos = 0
    it = 0
    status = STATUS_OPTIMAL
    while True:
        # block search: most negative reduced cost within the first block
        # that contains an eligible arc; ties keep the earliest scanned arc
        enter = -1
        best = -tol
        cnt = 0
        while cnt < total:
            i = pos // n
            j = pos - i * n
            rc = _cost(X, Y, i, j, p) + pot[i] - pot[m + j]
            if rc < best:
                best = rc
                enter = pos
            pos += 1
            if pos == total:
                pos = 0
            cnt += 1
            if enter >= 0 and cnt % block == 0:
                break
        if enter < 0:
            break
        if it >= max_iter:
            status = STATUS_MAX_ITER
            break
        it += 1
        first = enter // n
        second = m + (enter - first * n)
        # join node
        u1 = first
        u2 = second
        while u1 != u2:
            if depth[u1] >= depth[u2]:
                u1 = parent[u1]
            else:
                u2 = parent[u2]
        join = u1
        # Cunningham: the last blocking arc met when walking the cycle from
        # the join along the entering arc's direction
        delta = np.inf
        u_out = -1
        side = 0
        u = first
        while u != join:
            if up[u] and fl[parc[u]] < delta:
                delta = fl[parc[u]]
                u_out = u
                side = 1
            u = parent[u]
        u = second
        while u != join:
            if (not up[u]) and fl[parc[u]] <= delta:
                delta = fl[parc[u]]
                u_out = u
                side = 2
            u = parent[u]
        if u_out < 0:
            status = STATUS_INFEASIBLE
            break
        u = first
        while u != join:
            if up[u]:
                fl[parc[u]] -= delta
            else:
                fl[parc[u]] += delta
            u = parent[u]
        u = second
        while u != join:
            if up[u]:
                fl[parc[u]] += delta
            else:
                fl[parc[u]] -= delta
            u = parent[u]
        k = parc[u_out]
        _unlink(src[k], 2 * k, head, nxt, prv)
        _unlink(dst[k], 2 * k + 1, head, nxt, prv)
        src[k] = first
        dst[k] = second
        fl[k] = delta
        art[k] = False
        _link(first, 2 * k, head, nxt, prv)
        _link(second, 2 * k + 1, head, nxt, prv)
        if side == 1:
            _hang(first, second, k, src, dst, art, m, X, Y, p, big, head, nxt,
                  parent, parc, up, depth, pot, stack)
        else:
            _hang(second, first, k, src, dst, art, m, X, Y, p, big, head, nxt,
                  parent, parc, up, depth, pot, stack)
    u_dual = np.empty(m)
    v_dual = np.empty(n)
    for i in range(m):
        u_dual[i] = -pot[i]
    for j in range(n):
        v_dual[j] = pot[m + j]
    return src, dst, fl, art, u_dual, v_dual, it, status


@njit(cache=True)
def pair_costs(X, Y, bi, bj, p):
    out = np.empty(bi.shape[0])
    for k in range(bi.shape[0]):
        out[k] = _cost(X, Y, bi[k], bj[k], p)
    return out


@njit(cache=True)
def max_cost(X, Y, p):
    c = 0.0
    for i in range(X.shape[0]):
        for j in range(Y.shape[0]):
            v = _cost(X, Y, i, j, p)
            if v > c:
                c = v
    return c


@njit(cache=True)
def c_transform_min(x, Y, v):
    """f(x_k) = min_j |x_k - y_j| - v_j for each row x_k."""
    out = np.empty(x.shape[0])
    for k in range(x.shape[0]):
        best = np.inf
        for j in range(Y.shape[0]):
            s = 0.0
            for q in range(x.shape[1]):
                t = x[k, q] - Y[j, q]
                s += t * t
            val = np.sqrt(s) - v[j]
            if val < best:
                best = val
        out[k] = best
    return out
