"""Proximal operator of the extension: argmin_w 0.5||w - z||^2 + lam*f(w).

Routes:

* ``prox_decomposition`` -- divide and conquer over the ground set driven
  by a family-specific minimizer of lam*F(A) - z(A) + alpha*|A|;
* ``prox_via_mnp`` -- projection of z/lam onto the base polyhedron;
* ``prox_cardinality`` / ``prox_tv1d`` -- dedicated fast paths;
* ``prox_bruteforce`` -- certificate enumeration over all ordered
  partitions, the small-p oracle.

Solutions carry the dual point s = (z - w)/lam and the ordered partition
of constant sets.
"""

from dataclasses import dataclass
from itertools import permutations

import numpy as np

from ._bits import int_to_mask, mask_to_int
from .lovasz import OrderedPartition, in_base_polyhedron, lovasz_extension
from .setfn import (CardinalityFunction, CutFunction, NoisyCutFunction,
                    SetFunction)
from .sfm import (MnpConvergenceError, min_norm_point, sfm_bruteforce,
                  sfm_cardinality, sfm_cut, sfm_noisy_cut)

BRUTE_PARTITION_GUARD = 8


@dataclass
class ProxProblem:
    F: SetFunction
    z: np.ndarray
    lam: float

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.shape != (self.F.p,):
            raise ValueError("signal has wrong length")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class ProxSolution:
    w: np.ndarray
    dual: np.ndarray
    lattice: OrderedPartition


def _finalize(F, z, lam, w):
    dual = (z - w) / lam if lam > 0 else np.zeros_like(w)
    tol = 1e-7 * max(1.0, float(np.abs(z).max()))
    return ProxSolution(w=w, dual=dual, lattice=extract_lattice(w, tol))


def extract_lattice(w, tol=0.0) -> OrderedPartition:
    """Constant sets of w, totally ordered by decreasing value."""
    return OrderedPartition.from_values(np.asarray(w, dtype=float), tol)


def soft_threshold(w, thresh):
    w = np.asarray(w, dtype=float)
    return np.sign(w) * np.maximum(np.abs(w) - thresh, 0.0)


# ---------------------------------------------------------------------------
# SFM engines for the decomposition: minimize lam*(F(base u C) - F(base)) - y(C)
# over C inside ``active``.  Each returns (minimal mask, optimal value).

class BruteForceEngine:
    """Enumerates subsets; works for any family (exponential in |active|)."""

    def __init__(self, F: SetFunction):
        self.F = F
        self._memo = {}

    def _val(self, mask_int):
        v = self._memo.get(mask_int)
        if v is None:
            v = self.F.value(int_to_mask(mask_int, self.F.p))
            self._memo[mask_int] = v
        return v

    def minimize(self, active, base, y, lam, f_base=None):
        base_int = mask_to_int(base)
        f_base = self._val(base_int)
        elems = np.flatnonzero(active)
        best = 0.0
        best_sets = [0]
        for m in range(1, 1 << elems.size):
            c_int = 0
            acc = 0.0
            for i, k in enumerate(elems):
                if (m >> i) & 1:
                    c_int |= 1 << int(k)
                    acc += y[k]
            val = lam * (self._val(base_int | c_int) - f_base) - acc
            if val < best - 1e-13:
                best = val
                best_sets = [c_int]
            elif val <= best + 1e-13:
                best_sets.append(c_int)
        inter = best_sets[0]
        for s in best_sets[1:]:
            inter &= s
        return int_to_mask(inter, self.F.p), best


class CutEngine:
    """Min-cut on the induced subgraph with the contraction's modular shift."""

    def __init__(self, graph: CutFunction):
        self.graph = graph

    def minimize(self, active, base, y, lam, f_base=None):
        g = self.graph
        rest = ~(active | base)
        nodes = np.flatnonzero(active)
        local = {int(k): i for i, k in enumerate(nodes)}
        sub_edges = []
        corr = np.zeros(nodes.size)
        for i, j, w in zip(g.ei, g.ej, g.ew):
            i, j = int(i), int(j)
            if active[i] and active[j]:
                sub_edges.append((local[i], local[j], w))
            elif active[i]:
                corr[local[i]] += w if rest[j] else -w
            elif active[j]:
                corr[local[j]] += w if rest[i] else -w
        sub = CutFunction(nodes.size, sub_edges) if nodes.size else None
        z_loc = y[nodes] - lam * corr
        res = sfm_cut(sub, z_loc, lam)
        minimal = np.zeros(g.p, dtype=bool)
        minimal[nodes[res.minimal]] = True
        f_base = g.value(base)
        value = lam * (g.value(base | minimal) - f_base) - float(y[minimal].sum())
        return minimal, value


class ChainEngine:
    """Dynamic program over path segments; exact min-cut for chain graphs."""

    def __init__(self, weights):
        self.w = np.asarray(weights, dtype=float)
        self.p = self.w.size + 1

    def minimize(self, active, base, y, lam, f_base=None):
        p = self.p
        rest = ~(active | base)
        corr = np.zeros(p)
        for k in np.flatnonzero(active):
            for nb, wt in ((k - 1, self.w[k - 1] if k > 0 else 0.0),
                           (k + 1, self.w[k] if k + 1 < p else 0.0)):
                if 0 <= nb < p and not active[nb]:
                    corr[k] += wt if rest[nb] else -wt
        zp = y - lam * corr
        minimal = np.zeros(p, dtype=bool)
        total = 0.0
        nodes = np.flatnonzero(active)
        seg_start = 0
        for i in range(1, nodes.size + 1):
            contiguous = i < nodes.size and nodes[i] == nodes[i - 1] + 1
            if not contiguous:
                seg = nodes[seg_start:i]
                val = self._segment(seg, zp, lam, minimal)
                total += val
                seg_start = i
        return minimal, total

    def _segment(self, seg, zp, lam, minimal):
        n = seg.size
        INF = np.inf
        fw = np.empty((n, 2))
        fw[0] = (0.0, -zp[seg[0]])
        for i in range(1, n):
            c = lam * self.w[seg[i - 1]]
            fw[i, 0] = min(fw[i - 1, 0], fw[i - 1, 1] + c)
            fw[i, 1] = min(fw[i - 1, 1], fw[i - 1, 0] + c) - zp[seg[i]]
        bw = np.empty((n, 2))
        bw[n - 1] = (0.0, -zp[seg[n - 1]])
        for i in range(n - 2, -1, -1):
            c = lam * self.w[seg[i]]
            bw[i, 0] = min(bw[i + 1, 0], bw[i + 1, 1] + c)
            bw[i, 1] = min(bw[i + 1, 1], bw[i + 1, 0] + c) - zp[seg[i]]
        best = min(fw[n - 1, 0], fw[n - 1, 1])
        tol = 1e-11 * max(1.0, np.abs(fw).max() if np.isfinite(fw).all() else 1.0)
        for i in range(n):
            forced_out = fw[i, 0] + bw[i, 0]
            if forced_out > best + tol:
                minimal[seg[i]] = True
        return best


class CardinalityEngine:
    """Sorting-based minimizer; the contraction shifts the profile."""

    def __init__(self, h):
        self.h = np.asarray(h, dtype=float)

    def minimize(self, active, base, y, lam, f_base=None):
        b = int(base.sum())
        nodes = np.flatnonzero(active)
        hloc = self.h[b:b + nodes.size + 1] - self.h[b]
        res = sfm_cardinality(hloc, y[nodes], lam)
        minimal = np.zeros(active.size, dtype=bool)
        minimal[nodes[res.minimal]] = True
        return minimal, res.value


class NoisyCutEngine:
    """Joint min-cut over the hidden labelling; exact for noisy cuts."""

    def __init__(self, F: NoisyCutFunction):
        self.F = F

    def minimize(self, active, base, y, lam, f_base=None):
        res = sfm_noisy_cut(self.F, y, lam, active=active, base=base,
                            f_base=f_base)
        return res.minimal, res.value


def _is_chain(graph: CutFunction):
    if graph.ew.size != graph.p - 1:
        return None
    want = {(k, k + 1) for k in range(graph.p - 1)}
    have = set(zip(graph.ei.tolist(), graph.ej.tolist()))
    if have != want:
        return None
    w = np.empty(graph.p - 1)
    for i, j, wt in zip(graph.ei, graph.ej, graph.ew):
        w[int(i)] = wt
    return w


def default_engine(F: SetFunction):
    if isinstance(F, CutFunction):
        w = _is_chain(F)
        return ChainEngine(w) if w is not None else CutEngine(F)
    if isinstance(F, CardinalityFunction):
        return CardinalityEngine(F.h)
    if isinstance(F, NoisyCutFunction):
        return NoisyCutEngine(F)
    return BruteForceEngine(F)


def prox_decomposition(F: SetFunction, z, lam, engine=None) -> ProxSolution:
    """Divide-and-conquer prox through at most p modular-offset SFMs.

    On a subset S with the part above already fixed to ``base``: with
    alpha the value a constant block on S would take, the minimal
    minimizer A of lam*F_S(C) - z(C) + alpha*|C| either certifies S as one
    constant block (optimal value 0, attained by C = empty and C = S) or
    splits S into A (values above alpha) and S \\ A (below).
    """
    z = np.asarray(z, dtype=float)
    if z.shape != (F.p,):
        raise ValueError("signal has wrong length")
    if lam < 0:
        raise ValueError("lambda must be non-negative")
    if lam == 0:
        return _finalize(F, z, lam, z.copy())
    if engine is None:
        engine = default_engine(F)
    w = np.empty(F.p)
    tol = 1e-10 * max(1.0, float(np.abs(z).max()), lam)
    full = np.ones(F.p, dtype=bool)
    empty = np.zeros(F.p, dtype=bool)

    # (set, part fixed above it, F(base), F(base u set)); the children's
    # oracle values follow arithmetically from each split's SFM value, so
    # no oracle evaluations are needed beyond the normalization F(0)=F(V)=0
    stack = [(full, empty, 0.0, 0.0)]
    while stack:
        active, base, f_base, f_all = stack.pop()
        n_active = int(active.sum())
        alpha = (float(z[active].sum()) - lam * (f_all - f_base)) / n_active
        if n_active == 1:
            w[active] = alpha
            continue
        y = z - alpha
        minimal, value = engine.minimize(active, base, y, lam, f_base)
        n_min = int(minimal.sum())
        if value >= -tol or n_min == 0 or n_min == n_active:
            w[active] = alpha
        else:
            f_mid = f_base + (value + float(y[minimal].sum())) / lam
            stack.append((minimal, base, f_base, f_mid))
            stack.append((active & ~minimal, base | minimal, f_mid, f_all))
    return _finalize(F, z, lam, w)


def prox_via_mnp(F: SetFunction, z, lam, tol=1e-9, max_major=None,
                 strict=True) -> ProxSolution:
    """w = z - lam * (projection of z/lam onto the base polyhedron).

    With strict=False a projection that stalls above tol is used as-is
    (an approximate prox for time-budgeted solvers) instead of raising.
    """
    z = np.asarray(z, dtype=float)
    if lam == 0:
        return _finalize(F, z, lam, z.copy())
    try:
        s = min_norm_point(F, z / lam, tol, max_major=max_major).s
    except MnpConvergenceError as err:
        if strict:
            raise
        s = err.s
    return _finalize(F, z, lam, z - lam * s)


def prox_cardinality(h, z, lam, method="pav") -> ProxSolution:
    """Dedicated prox for F(A) = h(|A|).

    ``pav``: the extension is linear on the sorted cone with coefficients
    h(k) - h(k-1), so the prox is an isotonic (non-increasing) regression
    of sorted z minus lam times those coefficients.  ``decomposition``
    runs the generic recursion with the sorting SFM; both agree to
    rounding.
    """
    if isinstance(h, CardinalityFunction):
        F = h
    else:
        F = CardinalityFunction(np.asarray(h).size - 1, h)
    z = np.asarray(z, dtype=float)
    if method == "decomposition":
        return prox_decomposition(F, z, lam, engine=CardinalityEngine(F.h))
    order = np.argsort(-z, kind="stable")
    c = np.diff(F.h)
    target = z[order] - lam * c
    w_sorted = _pav_decreasing(target)
    w = np.empty_like(z)
    w[order] = w_sorted
    return _finalize(F, z, lam, w)


def _pav_decreasing(y):
    """Pool-adjacent-violators projection onto non-increasing sequences."""
    vals = []
    wts = []
    for v in y:
        vals.append(float(v))
        wts.append(1)
        while len(vals) > 1 and vals[-2] < vals[-1]:
            v2, w2 = vals.pop(), wts.pop()
            v1, w1 = vals.pop(), wts.pop()
            vals.append((v1 * w1 + v2 * w2) / (w1 + w2))
            wts.append(w1 + w2)
    return np.repeat(vals, wts)


def prox_tv1d(z, lam, weights=None, method="auto") -> ProxSolution:
    """Weighted 1-D total-variation prox on a chain graph.

    The reference route is the decomposition with the chain min-cut; the
    dynamic-programming engine solves each SFM exactly in linear time, so
    no separate taut-string path is needed.  ``method="maxflow"`` swaps in
    the generic push-relabel cut engine (for cross-checking).
    """
    z = np.asarray(z, dtype=float)
    p = z.size
    if weights is None:
        weights = np.ones(max(p - 1, 0))
    weights = np.asarray(weights, dtype=float)
    F = CutFunction.chain(p, weights)
    if method == "maxflow":
        engine = CutEngine(F)
    else:
        engine = ChainEngine(weights)
    return prox_decomposition(F, z, lam, engine=engine)


def prox_l1_composed(F: SetFunction, z, lam_f, lam_1, engine=None) -> np.ndarray:
    """Prox of lam_f * f + lam_1 * ||.||_1: soft-threshold after the f-prox."""
    if lam_f < 0 or lam_1 < 0:
        raise ValueError("penalty levels must be non-negative")
    sol = prox_decomposition(F, z, lam_f, engine=engine)
    return soft_threshold(sol.w, lam_1)


# ---------------------------------------------------------------------------
# certificates

@dataclass
class LatticeCertificate:
    order_ok: bool
    base_ok: bool
    v: np.ndarray

    def ok(self):
        return self.order_ok and self.base_ok


def block_values(z, lam, part: OrderedPartition, F: SetFunction):
    """Closed-form block values mean(z on A_i) - lam * t_i / |A_i|, with
    t_i the increment of F along the partition's prefix sets."""
    z = np.asarray(z, dtype=float)
    m = part.m
    t = np.empty(m)
    prev = 0.0
    for j in range(m):
        cur = F.value(part.prefix_mask(j))
        t[j] = cur - prev
        prev = cur
    sizes = part.block_sizes()
    means = np.array([z[list(b)].mean() for b in part.blocks])
    return means - lam * t / sizes, t


def certify_lattice(F: SetFunction, z, lam, part: OrderedPartition,
                    tol=1e-9) -> LatticeCertificate:
    """Optimality certificate for a candidate ordered partition.

    order_ok: the closed-form block values strictly respect the poset.
    base_ok: the residual (z - w)/lam lies in the base polyhedron.  Both
    hold iff the partition is the prox solution's.
    """
    if lam <= 0:
        raise ValueError("certification requires lambda > 0")
    z = np.asarray(z, dtype=float)
    v, _t = block_values(z, lam, part, F)
    order_ok = all(v[i] > v[j] for (i, j) in part.comparable_pairs())
    w = np.empty(F.p)
    for j, b in enumerate(part.blocks):
        w[list(b)] = v[j]
    base_ok = in_base_polyhedron(F, (z - w) / lam, tol)
    return LatticeCertificate(order_ok, bool(base_ok), v)


def prox_bruteforce(F: SetFunction, z, lam, tol=1e-9) -> np.ndarray:
    """Oracle: scan every ordered partition for the certified one.

    Exponential (ordered Bell numbers); guarded at p <= 8.  Returns the
    assembled w of the unique certified partition.
    """
    z = np.asarray(z, dtype=float)
    p = F.p
    if p > BRUTE_PARTITION_GUARD:
        raise ValueError(f"p={p} too large for ordered-partition enumeration")
    if lam == 0:
        return z.copy()
    table = F.value_table()
    for blocks in _set_partitions(p):
        for perm in permutations(range(len(blocks))):
            seq = [blocks[i] for i in perm]
            v, ok = _closed_form_if_ordered(seq, z, lam, table, p)
            if not ok:
                continue
            w = np.empty(p)
            for val, blk in zip(v, seq):
                for k in blk:
                    w[k] = val
            if _residual_in_base(table, (z - w) / lam, p, tol):
                return w
    raise RuntimeError("no certified ordered partition found")


def _closed_form_if_ordered(seq, z, lam, table, p):
    prev_val = 0.0
    prefix = 0
    v = []
    for blk in seq:
        bint = 0
        acc = 0.0
        for k in blk:
            bint |= 1 << k
            acc += z[k]
        prefix |= bint
        cur = table[prefix]
        vi = acc / len(blk) - lam * (cur - prev_val) / len(blk)
        prev_val = cur
        if v and not (v[-1] > vi):
            return None, False
        v.append(vi)
    return v, True


def _residual_in_base(table, u, p, tol):
    if abs(u.sum()) > tol:
        return False
    sums = np.zeros(1)
    for k in range(p):
        sums = np.concatenate([sums, sums + u[k]])
    return bool((sums <= table + tol).all())


def _set_partitions(p):
    """All partitions of {0..p-1} as lists of index tuples."""
    def rec(k, blocks):
        if k == p:
            yield [tuple(b) for b in blocks]
            return
        for b in blocks:
            b.append(k)
            yield from rec(k + 1, blocks)
            b.pop()
        blocks.append([k])
        yield from rec(k + 1, blocks)
        blocks.pop()
    yield from rec(0, [])


def verify_threshold(F: SetFunction, z, lam, w, alphas, tol=1e-7):
    """Check the level sets of w solve the offset SFMs (oracle route).

    For each alpha, {w >= alpha} must attain the brute-force minimum of
    lam*F(A) - z(A) + alpha*|A| within tol.
    """
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    for alpha in np.atleast_1d(alphas):
        ref = sfm_bruteforce(F, z - alpha, lam)
        level = w >= alpha
        val = lam * F.value(level) - float((z - alpha)[level].sum())
        if val > ref.value + tol:
            return False
    return True
