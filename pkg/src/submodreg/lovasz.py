"""Lovasz extension, greedy vertices of the base polyhedron, and the
polyhedral geometry of the unit ball {w : f(w) <= 1}.

The extension of F evaluated here is the piecewise-linear interpolation
that is linear on each order cone; it is convex iff F is submodular, is
invariant to adding multiples of the all-ones vector, and restricts to F
on indicator vectors.
"""

import itertools
import warnings
from dataclasses import dataclass

import numpy as np

from ._bits import as_mask, int_to_mask, mask_to_int
from .setfn import CardinalityFunction, CutFunction, SetFunction, is_inseparable

BASE_GUARD_P = 20


def sort_decreasing(w):
    """Stable decreasing order: value descending, index ascending on ties."""
    w = np.asarray(w, dtype=float)
    return np.argsort(-w, kind="stable")


@dataclass
class GreedyResult:
    s: np.ndarray        # base-polyhedron vertex with s^T w = f(w)
    order: np.ndarray    # the decreasing permutation used


def greedy(F: SetFunction, w, order=None) -> GreedyResult:
    """Greedy algorithm: marginal gains of F along a decreasing order of w.

    The output lies in B(F) and maximizes s^T w over B(F).  Any tie-break
    yields a valid vertex; the default is deterministic (stable sort).
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (F.p,):
        raise ValueError(f"w has shape {w.shape}, expected ({F.p},)")
    if order is None:
        order = sort_decreasing(w)
    else:
        order = np.asarray(order)
        if sorted(order.tolist()) != list(range(F.p)):
            raise ValueError("order must be a permutation of 0..p-1")
        if (np.diff(w[order]) > 1e-12).any():
            raise ValueError("order must sort w in decreasing order")
    s = np.zeros(F.p)
    if isinstance(F, CardinalityFunction):
        # prefix values are h(1..p); marginals reduce to profile increments
        s[order] = np.diff(F.h)
        return GreedyResult(s=s, order=order)
    prefix = np.zeros(F.p, dtype=bool)
    prev = 0.0
    for k in order:
        prefix[k] = True
        cur = F.value(prefix)
        s[k] = cur - prev
        prev = cur
    return GreedyResult(s=s, order=order)


def lovasz_extension(F: SetFunction, w) -> float:
    """f(w) via the order-statistics form sum_k F(prefix_k) (w_(k) - w_(k+1)).

    Exact (not merely to rounding) at indicator vectors, where a single
    term F(A) * 1 survives.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (F.p,):
        raise ValueError(f"w has shape {w.shape}, expected ({F.p},)")
    order = sort_decreasing(w)
    total = 0.0
    prefix = np.zeros(F.p, dtype=bool)
    for a, b in zip(order[:-1], order[1:]):
        prefix[a] = True
        gap = w[a] - w[b]
        if gap != 0.0:
            total += F.value(prefix) * gap
    return total  # the final term F(V) * w_min vanishes by normalization


def level_set_integral(F: SetFunction, w) -> float:
    """f(w) as the integral of F over super-level sets {w >= alpha}.

    Independent route used as the oracle for :func:`lovasz_extension`:
    sums F({w >= v}) times the gap between consecutive distinct values.
    """
    w = np.asarray(w, dtype=float)
    if w.shape != (F.p,):
        raise ValueError(f"w has shape {w.shape}, expected ({F.p},)")
    values = np.unique(w)[::-1]
    total = 0.0
    for hi, lo in zip(values[:-1], values[1:]):
        total += F.value(w >= hi) * (hi - lo)
    return total


def in_base_polyhedron(F: SetFunction, s, tol=1e-9):
    """Test s(V) = F(V) = 0 and s(A) <= F(A) + tol for all A.

    Exhaustive up to p = 20; beyond that a min-cut certificate is used for
    cut functions (min_A F(A) - s(A) >= -tol).
    """
    s = np.asarray(s, dtype=float)
    if s.shape != (F.p,):
        raise ValueError(f"s has shape {s.shape}, expected ({F.p},)")
    if abs(s.sum()) > tol:
        return False
    if F.p <= BASE_GUARD_P:
        table = F.value_table()
        sums = np.zeros(1)
        for k in range(F.p):
            sums = np.concatenate([sums, sums + s[k]])
        return bool((sums <= table + tol).all())
    if isinstance(F, CutFunction):
        from .sfm import sfm_cut
        return sfm_cut(F, s, 1.0).value >= -tol
    raise ValueError(f"p={F.p} too large for exhaustive base-polyhedron check")


@dataclass
class ExtremePoint:
    generating_set: tuple      # indices of A
    coordinates: np.ndarray    # projection of 1_A / F(A) onto {sum w = 0}


def extreme_points(F: SetFunction):
    """Extreme points of {f <= 1} cut to the zero-sum hyperplane.

    Generated by proper subsets A that are inseparable for F and whose
    complement is inseparable for the contraction B -> F(A u B) - F(A).
    Subsets with F(A) = 0 are degenerate and skipped with a warning.
    """
    p = F.p
    limit = 16 if isinstance(F, CutFunction) else 12
    if p > limit:
        raise ValueError(f"p={p} too large for extreme-point enumeration")
    out = []
    ones = np.ones(p)
    for m in range(1, (1 << p) - 1):
        mask = int_to_mask(m, p)
        if not is_inseparable(F, mask):
            continue
        if not is_inseparable(F, ~mask, base=mask):
            continue
        fa = F.value(mask)
        if abs(fa) < 1e-12:
            warnings.warn(f"skipping generating set {tuple(np.flatnonzero(mask))}: F(A) = 0")
            continue
        vec = mask.astype(float) / fa
        vec = vec - vec.sum() / p * ones
        out.append(ExtremePoint(tuple(int(k) for k in np.flatnonzero(mask)), vec))
    return out


class OrderedPartition:
    """Blocks A_1,...,A_m partitioning V with a strict partial order.

    ``order`` holds pairs (i, j) meaning values on blocks[i] exceed values
    on blocks[j].  Indexing is topological with ancestors (larger values)
    first: (i, j) in the order implies i < j, so prefix unions
    blocks[0] u ... u blocks[j] are the level sets of any consistent w.
    """

    def __init__(self, p, blocks, order=()):
        self.p = int(p)
        self.blocks = [tuple(sorted(int(k) for k in b)) for b in blocks]
        cover = [k for b in self.blocks for k in b]
        if sorted(cover) != list(range(p)):
            raise ValueError("blocks must partition 0..p-1")
        m = len(self.blocks)
        pairs = {(int(i), int(j)) for (i, j) in order}
        for i, j in pairs:
            if not (0 <= i < m and 0 <= j < m) or i == j:
                raise ValueError(f"invalid order pair {(i, j)}")
            if i > j:
                raise ValueError("indexing must be topological (ancestors first)")
        self.order = frozenset(pairs)
        self._closure_cache = None

    @property
    def _closure(self):
        # topological indexing (i < j) already rules out cycles, so the
        # closure can be built lazily in one back-to-front sweep
        if self._closure_cache is None:
            m = len(self.blocks)
            reach = [set() for _ in range(m)]
            for i, j in sorted(self.order, key=lambda ij: -ij[0]):
                reach[i].add(j)
                reach[i] |= reach[j]
            self._closure_cache = frozenset(
                (i, j) for i in range(m) for j in reach[i])
        return self._closure_cache

    @property
    def m(self):
        return len(self.blocks)

    def comparable_pairs(self):
        """Transitive closure of the order relation."""
        return self._closure

    def ancestors(self, j):
        """Indices of blocks above block j in the poset."""
        return {i for (i, jj) in self._closure if jj == j}

    def block_mask(self, j):
        mask = np.zeros(self.p, dtype=bool)
        mask[list(self.blocks[j])] = True
        return mask

    def prefix_mask(self, j):
        """Union of blocks[0..j] (inclusive), the j-th level set."""
        mask = np.zeros(self.p, dtype=bool)
        for b in self.blocks[:j + 1]:
            mask[list(b)] = True
        return mask

    def ancestor_mask(self, j):
        mask = np.zeros(self.p, dtype=bool)
        for i in self.ancestors(j):
            mask[list(self.blocks[i])] = True
        return mask

    def block_sizes(self):
        return np.array([len(b) for b in self.blocks])

    def block_of(self):
        """Element -> block index lookup array."""
        out = np.empty(self.p, dtype=np.int64)
        for j, b in enumerate(self.blocks):
            out[list(b)] = j
        return out

    def indicator_matrix(self):
        M = np.zeros((self.p, self.m))
        for j, b in enumerate(self.blocks):
            M[list(b), j] = 1.0
        return M

    def is_total(self):
        m = self.m
        return all((i, j) in self._closure for i in range(m) for j in range(i + 1, m))

    def up_sets(self):
        """All ancestor-closed block index sets, sorted by (size, indices)."""
        m = self.m
        anc = [self.ancestors(j) for j in range(m)]
        out = []
        for sub in range(1 << m):
            members = {j for j in range(m) if (sub >> j) & 1}
            if all(anc[j] <= members for j in members):
                out.append(frozenset(members))
        return sorted(out, key=lambda s: (len(s), sorted(s)))

    def lattice_sets(self):
        """The distributive lattice: one vertex mask per allowed level set."""
        sets = []
        for members in self.up_sets():
            mask = np.zeros(self.p, dtype=bool)
            for j in members:
                mask[list(self.blocks[j])] = True
            sets.append(mask)
        return sets

    def same_partition(self, other):
        return sorted(self.blocks) == sorted(other.blocks)

    def __repr__(self):
        rel = " ".join(f"{i}>{j}" for i, j in sorted(self.order))
        return f"OrderedPartition(blocks={self.blocks}, order=[{rel}])"

    @classmethod
    def total(cls, p, blocks):
        """Totally ordered partition: blocks listed from largest value down."""
        m = len(blocks)
        return cls(p, blocks, [(i, i + 1) for i in range(m - 1)])

    @classmethod
    def from_values(cls, w, tol=0.0):
        """Group coordinates equal within tol; order blocks by value, decreasing."""
        w = np.asarray(w, dtype=float)
        order = np.argsort(-w, kind="stable")
        blocks = []
        cur = [int(order[0])]
        for a, b in zip(order[:-1], order[1:]):
            if w[a] - w[b] <= tol:
                cur.append(int(b))
            else:
                blocks.append(cur)
                cur = [int(b)]
        blocks.append(cur)
        return cls.total(w.size, blocks)


@dataclass
class FaceReport:
    modular_on_lattice: bool
    blocks_inseparable: bool
    maximal: bool | None = None

    def ok(self):
        return self.modular_on_lattice and self.blocks_inseparable


def check_face_lattice(F: SetFunction, part: OrderedPartition, tol=1e-9,
                       check_maximal=False):
    """Test the face conditions of the unit ball for a candidate lattice.

    (i) F restricted to the lattice generated by the poset's ideals is
    modular; (ii) each block is inseparable for the contraction by the
    union of its ancestors; (iii) optionally, no coarser order on the same
    unordered partition also satisfies (i)+(ii) (small m only, off by
    default).
    """
    if F.p != part.p:
        raise ValueError("partition and function live on different ground sets")
    modular = _lattice_modular(F, part, tol)
    insep = _blocks_inseparable(F, part)
    maximal = None
    if check_maximal:
        if part.m > 5:
            raise ValueError("maximality check limited to m <= 5 blocks")
        maximal = _is_maximal(F, part, tol)
    return FaceReport(modular, insep, maximal)


def _lattice_modular(F, part, tol):
    sets = part.lattice_sets()
    vals = [F.value(s) for s in sets]
    n = len(sets)
    as_int = [mask_to_int(s) for s in sets]
    val_by_int = dict(zip(as_int, vals))
    for a in range(n):
        for b in range(a + 1, n):
            u = as_int[a] | as_int[b]
            i = as_int[a] & as_int[b]
            if abs(vals[a] + vals[b] - val_by_int[u] - val_by_int[i]) > tol:
                return False
    return True


def _blocks_inseparable(F, part):
    for j in range(part.m):
        base = part.ancestor_mask(j)
        if not is_inseparable(F, part.block_mask(j), base=base):
            return False
    return True


def _is_maximal(F, part, tol):
    """No strictly larger lattice on the same blocks passes (i) and (ii)."""
    m = part.m
    ours = {frozenset(s) for s in part.up_sets()}
    pairs = [(i, j) for i in range(m) for j in range(m) if i != j]
    for bits in range(1 << len(pairs)):
        rel = {pairs[k] for k in range(len(pairs)) if (bits >> k) & 1}
        if not _is_strict_partial_order(rel, m):
            continue
        cand = _reindex_topological(part, rel)
        if cand is None:
            continue
        cand_sets = {frozenset(s) for s in cand.up_sets()}
        if cand_sets > ours:
            if _lattice_modular(F, cand, tol) and _blocks_inseparable(F, cand):
                return False
    return True


def _is_strict_partial_order(rel, m):
    for (i, j) in rel:
        if (j, i) in rel:
            return False
        for k in range(m):
            if (j, k) in rel and (i, k) not in rel:
                return False
    return True


def _reindex_topological(part, rel):
    """Relabel blocks so the relation is ancestors-first, keeping block sets."""
    m = part.m
    indeg = {j: 0 for j in range(m)}
    for (_, j) in rel:
        indeg[j] += 1
    order = []
    ready = sorted(j for j in range(m) if indeg[j] == 0)
    rel_set = set(rel)
    while ready:
        u = ready.pop(0)
        order.append(u)
        for v in range(m):
            if (u, v) in rel_set:
                indeg[v] -= 1
                if indeg[v] == 0:
                    ready.append(v)
        ready.sort()
    if len(order) != m:
        return None
    pos = {old: new for new, old in enumerate(order)}
    blocks = [part.blocks[old] for old in order]
    new_rel = [(pos[i], pos[j]) for (i, j) in rel]
    return OrderedPartition(part.p, blocks, new_rel)
