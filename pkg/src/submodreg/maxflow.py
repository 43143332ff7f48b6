"""Exact s-t max-flow / min-cut on small dense-ish networks.

Highest-label push-relabel with the gap heuristic.  Capacities are
non-negative floats; the algorithm is exact up to accumulated rounding,
and cut-side extraction applies an explicit residual tolerance so that
minimal and maximal min-cuts are reproducible.

The kernel works on flat CSR-style arrays so numba can JIT it when
available (set SUBMODREG_NO_NUMBA=1 to force the pure-Python path).
"""

import os
from collections import deque

import numpy as np

if os.environ.get("SUBMODREG_NO_NUMBA"):
    _njit = None
else:
    try:
        from numba import njit as _njit
    except ImportError:
        _njit = None


def _push_relabel_kernel(n, s, t, arc_to, res, adj_start, adj_list, eps):
    """Discharge-based highest-label push-relabel on paired arcs.

    Arc a and arc a^1 are mutual reverses.  Mutates ``res`` into the
    residual capacities; returns the flow value (excess at the sink).
    """
    height = np.zeros(n, np.int64)
    height[s] = n
    excess = np.zeros(n)
    cnt = np.zeros(2 * n + 1, np.int64)
    cnt[0] = n - 1
    cnt[n] = 1

    for ai in range(adj_start[s], adj_start[s + 1]):
        a = adj_list[ai]
        c = res[a]
        if c > eps:
            res[a] -= c
            res[a ^ 1] += c
            excess[arc_to[a]] += c
            excess[s] -= c

    # bucket queues as intrusive linked lists per height
    head = np.full(2 * n + 1, -1, np.int64)
    nxt = np.full(n, -1, np.int64)
    in_bucket = np.zeros(n, np.bool_)
    hi = 0
    for v in range(n):
        if v != s and v != t and excess[v] > eps:
            nxt[v] = head[height[v]]
            head[height[v]] = v
            in_bucket[v] = True
            if height[v] > hi:
                hi = height[v]
    cur = np.zeros(n, np.int64)

    while hi >= 0:
        u = head[hi]
        if u == -1:
            hi -= 1
            continue
        head[hi] = nxt[u]
        in_bucket[u] = False
        if excess[u] <= eps:
            continue
        alive = True
        while excess[u] > eps and alive:
            if cur[u] == adj_start[u + 1] - adj_start[u]:
                old = height[u]
                new_h = 2 * n
                for ai in range(adj_start[u], adj_start[u + 1]):
                    a = adj_list[ai]
                    if res[a] > eps and height[arc_to[a]] + 1 < new_h:
                        new_h = height[arc_to[a]] + 1
                cnt[old] -= 1
                if cnt[old] == 0 and old < n:
                    # gap: heights in (old, n) are unreachable from t
                    for v in range(n):
                        if v != s and old < height[v] < n:
                            cnt[height[v]] -= 1
                            height[v] = n + 1
                            cnt[n + 1] += 1
                    if old < new_h < n + 1:
                        new_h = n + 1
                height[u] = new_h
                cnt[new_h] += 1
                cur[u] = 0
                if new_h >= 2 * n:
                    alive = False
            else:
                a = adj_list[adj_start[u] + cur[u]]
                v = arc_to[a]
                if res[a] > eps and height[u] == height[v] + 1:
                    send = excess[u] if excess[u] < res[a] else res[a]
                    res[a] -= send
                    res[a ^ 1] += send
                    excess[u] -= send
                    excess[v] += send
                    if v != s and v != t and not in_bucket[v] and excess[v] > eps:
                        nxt[v] = head[height[v]]
                        head[height[v]] = v
                        in_bucket[v] = True
                        if height[v] > hi:
                            hi = height[v]
                else:
                    cur[u] += 1
        if excess[u] > eps and height[u] < 2 * n:
            nxt[u] = head[height[u]]
            head[height[u]] = u
            in_bucket[u] = True
            if height[u] > hi:
                hi = height[u]
    return excess[t]


if _njit is not None:
    _push_relabel_kernel = _njit(cache=True)(_push_relabel_kernel)


class FlowNetwork:
    """Directed flow network; arcs are stored with paired reverse arcs.

    Arc 2k and arc 2k+1 are reverses of each other, so the residual update
    of arc ``a`` always touches ``a ^ 1``.
    """

    def __init__(self, n_nodes, source, sink):
        if not (0 <= source < n_nodes and 0 <= sink < n_nodes):
            raise ValueError("source/sink out of range")
        if source == sink:
            raise ValueError("source and sink must differ")
        self.n = n_nodes
        self.source = source
        self.sink = sink
        self.arc_to = []
        self.arc_cap = []
        self.arc_from = []

    def add_arc(self, u, v, cap, rev_cap=0.0):
        """Add arc u->v with capacity cap and its reverse with rev_cap."""
        if cap < 0 or rev_cap < 0:
            raise ValueError("capacities must be non-negative")
        self.arc_to.extend((v, u))
        self.arc_from.extend((u, v))
        self.arc_cap.extend((float(cap), float(rev_cap)))

    def add_edge(self, u, v, cap):
        """Undirected edge: capacity cap in both directions."""
        self.add_arc(u, v, cap, cap)

    @classmethod
    def from_arrays(cls, n_nodes, source, sink, u, v, cap, rev_cap):
        """Vectorized batch construction of paired arcs u->v / v->u."""
        net = cls(n_nodes, source, sink)
        u = np.asarray(u, dtype=np.int64)
        v = np.asarray(v, dtype=np.int64)
        cap = np.asarray(cap, dtype=float)
        rev_cap = np.asarray(rev_cap, dtype=float)
        if u.size and (u.min() < 0 or u.max() >= n_nodes or
                       v.min() < 0 or v.max() >= n_nodes):
            raise ValueError("arc endpoint out of range")
        if (u == v).any():
            raise ValueError("self-loops are not allowed")
        if (cap < 0).any() or (rev_cap < 0).any():
            raise ValueError("capacities must be non-negative")
        af = np.empty(2 * u.size, dtype=np.int64)
        at = np.empty(2 * u.size, dtype=np.int64)
        ac = np.empty(2 * u.size)
        af[0::2], af[1::2] = u, v
        at[0::2], at[1::2] = v, u
        ac[0::2], ac[1::2] = cap, rev_cap
        net.arc_from = af
        net.arc_to = at
        net.arc_cap = ac
        return net

    def _csr(self):
        arc_from = np.asarray(self.arc_from, dtype=np.int64)
        order = np.argsort(arc_from, kind="stable")
        adj_start = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(adj_start, arc_from + 1, 1)
        np.cumsum(adj_start, out=adj_start)
        return adj_start, order

    def max_flow(self):
        """Run push-relabel; returns a MaxFlowResult with residual caps."""
        res = np.asarray(self.arc_cap, dtype=float).copy()
        arc_to = np.asarray(self.arc_to, dtype=np.int64)
        adj_start, adj_list = self._csr()
        eps = 1e-12 * max(1.0, res.max() if res.size else 1.0)
        value = _push_relabel_kernel(self.n, self.source, self.sink,
                                     arc_to, res, adj_start, adj_list, eps)
        return MaxFlowResult(self, arc_to, adj_start, adj_list, res, float(value))


class MaxFlowResult:
    def __init__(self, net, arc_to, adj_start, adj_list, residual, value):
        self.net = net
        self.arc_to = arc_to
        self.adj_start = adj_start
        self.adj_list = adj_list
        self.residual = residual
        self.value = value

    def _bfs(self, start, forward, tol):
        seen = np.zeros(self.net.n, dtype=bool)
        seen[start] = True
        q = deque([start])
        while q:
            u = q.popleft()
            for ai in range(self.adj_start[u], self.adj_start[u + 1]):
                a = self.adj_list[ai]
                v = self.arc_to[a]
                r = self.residual[a] if forward else self.residual[a ^ 1]
                if not seen[v] and r > tol:
                    seen[v] = True
                    q.append(v)
        return seen

    def min_cut_minimal(self, tol=1e-10):
        """Source side of the minimal min-cut (excluding source)."""
        seen = self._bfs(self.net.source, True, tol)
        s = self.net.source
        return [v for v in range(self.net.n) if seen[v] and v != s]

    def min_cut_maximal(self, tol=1e-10):
        """Source side of the maximal min-cut (excluding source)."""
        seen = self._bfs(self.net.sink, False, tol)
        src = self.net.source
        return [v for v in range(self.net.n) if not seen[v] and v != src]