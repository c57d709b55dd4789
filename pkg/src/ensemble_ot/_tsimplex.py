"""Transportation simplex kernel (numba).

The basis is a spanning tree of the bipartite row/column graph stored as
``m + n - 1`` cells ``(bi[k], bj[k])`` with flows ``xb[k]``. Row nodes are
``0..m-1`` and column nodes ``m..m+n-1``.
"""
from __future__ import annotations

import numpy as np
from numba import njit

RULE_BLAND = 0
RULE_BLOCK = 1

STATUS_OPTIMAL = 0
STATUS_PIVOT_CAP = 1


@njit(cache=True)
def _northwest_corner(a, b):
    m, n = a.size, b.size
    ra = a.copy()
    rb = b.copy()
    bi = np.empty(m + n - 1, np.int64)
    bj = np.empty(m + n - 1, np.int64)
    xb = np.empty(m + n - 1)
    i = 0
    j = 0
    k = 0
    while True:
        q = min(ra[i], rb[j])
        bi[k] = i
        bj[k] = j
        xb[k] = q
        k += 1
        ra[i] -= q
        rb[j] -= q
        if i == m - 1 and j == n - 1:
            break
        if i == m - 1:
            j += 1
        elif j == n - 1:
            i += 1
        elif ra[i] <= rb[j]:
            i += 1
        else:
            j += 1
    return bi, bj, xb


@njit(cache=True)
def _adjacency(bi, bj, m, n):
    N = m + n
    ptr = np.zeros(N + 1, np.int64)
    for k in range(bi.size):
        ptr[bi[k] + 1] += 1
        ptr[m + bj[k] + 1] += 1
    for x in range(N):
        ptr[x + 1] += ptr[x]
    fill = ptr[:N].copy()
    adj = np.empty(2 * bi.size, np.int64)
    for k in range(bi.size):
        adj[fill[bi[k]]] = k
        fill[bi[k]] += 1
        adj[fill[m + bj[k]]] = k
        fill[m + bj[k]] += 1
    return ptr, adj


@njit(cache=True)
def _rooted_tree(C, bi, bj, m, n):
    """BFS from row 0: potentials (u, v), parent cell and depth per node."""
    N = m + n
    ptr, adj = _adjacency(bi, bj, m, n)
    pot = np.zeros(N)
    parent_cell = -np.ones(N, np.int64)
    depth = -np.ones(N, np.int64)
    queue = np.empty(N, np.int64)
    queue[0] = 0
    depth[0] = 0
    head = 0
    tail = 1
    while head < tail:
        x = queue[head]
        head += 1
        for s in range(ptr[x], ptr[x + 1]):
            k = adj[s]
            if x < m:
                y = m + bj[k]
            else:
                y = bi[k]
            if depth[y] >= 0:
                continue
            depth[y] = depth[x] + 1
            parent_cell[y] = k
            # u_i + v_j = C_ij on basic cells
            pot[y] = C[bi[k], bj[k]] - pot[x]
            queue[tail] = y
            tail += 1
    return pot, parent_cell, depth


@njit(cache=True)
def _other_end(k, x, bi, bj, m):
    if x < m:
        return m + bj[k]
    return bi[k]


@njit(cache=True)
def _cycle(p, q, parent_cell, depth, bi, bj, m):
    """Tree path cells from column node m+q to row node p, in order."""
    left = np.empty(depth.size, np.int64)
    right = np.empty(depth.size, np.int64)
    nl = 0
    nr = 0
    x = m + q
    y = p
    while depth[x] > depth[y]:
        k = parent_cell[x]
        left[nl] = k
        nl += 1
        x = _other_end(k, x, bi, bj, m)
    while depth[y] > depth[x]:
        k = parent_cell[y]
        right[nr] = k
        nr += 1
        y = _other_end(k, y, bi, bj, m)
    while x != y:
        k = parent_cell[x]
        left[nl] = k
        nl += 1
        x = _other_end(k, x, bi, bj, m)
        k = parent_cell[y]
        right[nr] = k
        nr += 1
        y = _other_end(k, y, bi, bj, m)
    path = np.empty(nl + nr, np.int64)
    for s in range(nl):
        path[s] = left[s]
    for s in range(nr):
        path[nl + s] = right[nr - 1 - s]
    return path


@njit(cache=True)
def _price_bland(C, u, v, tol):
    m, n = C.shape
    for i in range(m):
        for j in range(n):
            if C[i, j] - u[i] - v[j] < -tol:
                return i, j
    return -1, -1


@njit(cache=True)
def _price_block(C, u, v, tol, start, block):
    m, n = C.shape
    total = m * n
    scanned = 0
    pos = start
    while scanned < total:
        best = -tol
        bi = -1
        bj = -1
        stop = min(block, total - scanned)
        for _ in range(stop):
            i = pos // n
            j = pos - i * n
            d = C[i, j] - u[i] - v[j]
            if d < best:
                best = d
                bi = i
                bj = j
            pos += 1
            if pos == total:
                pos = 0
        scanned += stop
        if bi >= 0:
            return bi, bj, pos
    return -1, -1, pos


@njit(cache=True)
def solve_transport(a, b, C, rule, max_pivots, tol):
    """Primal transportation simplex from the northwest corner.

    Returns basis cells, basic flows, row/column potentials, status and the
    pivot count. Marginals are expected to be balanced (and perturbed).
    """
    m, n = C.shape
    bi, bj, xb = _northwest_corner(a, b)
    block = max(n, int(np.sqrt(m * n)))
    pos = 0
    pivots = 0
    status = STATUS_OPTIMAL
    while True:
        pot, parent_cell, depth = _rooted_tree(C, bi, bj, m, n)
        u = pot[:m]
        v = pot[m:]
        if rule == RULE_BLAND:
            p, q = _price_bland(C, u, v, tol)
        else:
            p, q, pos = _price_block(C, u, v, tol, pos, block)
        if p < 0:
            break
        if pivots >= max_pivots:
            status = STATUS_PIVOT_CAP
            break
        path = _cycle(p, q, parent_cell, depth, bi, bj, m)
        # path alternates -, +, -, ... starting at the column end
        leave = -1
        theta = np.inf
        best_id = -1
        for s in range(0, path.size, 2):
            k = path[s]
            cid = bi[k] * n + bj[k]
            if xb[k] < theta or (xb[k] == theta and cid < best_id):
                theta = xb[k]
                leave = k
                best_id = cid
        for s in range(path.size):
            k = path[s]
            if s % 2 == 0:
                xb[k] -= theta
            else:
                xb[k] += theta
        bi[leave] = p
        bj[leave] = q
        xb[leave] = theta
        pivots += 1
    return bi, bj, xb, u.copy(), v.copy(), status, pivots


@njit(cache=True)
def tree_flows(a, b, bi, bj):
    """Flows of the spanning-tree basis that reproduce the marginals (a, b)."""
    m, n = a.size, b.size
    ptr, adj = _adjacency(bi, bj, m, n)
    N = m + n
    rem = np.empty(N)
    rem[:m] = a
    rem[m:] = b
    deg = np.zeros(N, np.int64)
    for x in range(N):
        deg[x] = ptr[x + 1] - ptr[x]
    used = np.zeros(bi.size, np.bool_)
    xb = np.zeros(bi.size)
    stack = np.empty(N, np.int64)
    top = 0
    for x in range(N):
        if deg[x] == 1:
            stack[top] = x
            top += 1
    while top > 0:
        top -= 1
        x = stack[top]
        if deg[x] != 1:
            continue
        k = -1
        for s in range(ptr[x], ptr[x + 1]):
            if not used[adj[s]]:
                k = adj[s]
                break
        used[k] = True
        xb[k] = rem[x]
        y = _other_end(k, x, bi, bj, m)
        rem[y] -= rem[x]
        rem[x] = 0.0
        deg[x] = 0
        deg[y] -= 1
        if deg[y] == 1:
            stack[top] = y
            top += 1
    return xb
