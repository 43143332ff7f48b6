"""Set-function families on a ground set V = {0,...,p-1}.

All families are normalized so that F(empty) = F(V) = 0 and evaluate
deterministically.  Subsets are boolean masks of length p (index lists are
accepted and converted).  File I/O is 1-based; everything in memory is
0-based.
"""

import io
from abc import ABC, abstractmethod

import numpy as np

from ._bits import as_mask, int_to_mask, mask_to_int, popcounts, submasks
from .maxflow import FlowNetwork

AXIOM_TOL = 1e-9

#: exhaustive pairwise checks cost 4^p evaluations
AXIOM_GUARD_P = 20
#: exhaustive partition search costs 2^|A| evaluations
INSEPARABLE_GUARD = 20


class SetFunction(ABC):
    """A set function F: 2^V -> R with F(empty) = F(V) = 0."""

    kind = "abstract"

    def __init__(self, p):
        if p < 1:
            raise ValueError("ground set must have at least one element")
        self.p = int(p)

    @abstractmethod
    def value(self, mask) -> float:
        """F(A) for a boolean mask (or index list) A."""

    def __call__(self, mask):
        return self.value(as_mask(mask, self.p))

    def value_of_int(self, m):
        """F(A) for A given as a bitmask integer."""
        return self.value(int_to_mask(m, self.p))

    def value_table(self):
        """All 2^p values, indexed by bitmask.  Exponential; small p only."""
        return np.array([self.value_of_int(m) for m in range(1 << self.p)])

    def _check_normalized(self, tol=1e-12):
        if abs(self.value(np.zeros(self.p, dtype=bool))) > tol:
            raise ValueError("F(empty set) must be 0")
        if abs(self.value(np.ones(self.p, dtype=bool))) > tol:
            raise ValueError("F(full set) must be 0")


class CutFunction(SetFunction):
    """Cut in an undirected graph with non-negative weights.

    Edges are stored once per unordered pair.  F(A) is the total weight of
    edges with exactly one endpoint in A.
    """

    kind = "cut"

    def __init__(self, p, edges):
        super().__init__(p)
        ei, ej, ew = [], [], []
        seen = {}
        for (i, j, w) in edges:
            i, j, w = int(i), int(j), float(w)
            if not (0 <= i < p and 0 <= j < p):
                raise ValueError(f"edge ({i},{j}) out of range for p={p}")
            if i == j:
                raise ValueError("self-loops are not allowed")
            if w < 0:
                raise ValueError("edge weights must be non-negative")
            key = (min(i, j), max(i, j))
            if key in seen:
                ew[seen[key]] += w
            else:
                seen[key] = len(ei)
                ei.append(key[0])
                ej.append(key[1])
                ew.append(w)
        self.ei = np.asarray(ei, dtype=np.int64)
        self.ej = np.asarray(ej, dtype=np.int64)
        self.ew = np.asarray(ew, dtype=float)

    @classmethod
    def chain(cls, p, weights=None):
        """Path graph 0-1-...-(p-1); the 1-D total-variation function."""
        if weights is None:
            weights = np.ones(max(p - 1, 0))
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (p - 1,):
            raise ValueError("chain on p nodes needs p-1 weights")
        return cls(p, [(k, k + 1, weights[k]) for k in range(p - 1)])

    @classmethod
    def grid(cls, rows, cols, weight=1.0):
        """4-neighbor grid graph; node (r,c) has index r*cols + c."""
        edges = []
        for r in range(rows):
            for c in range(cols):
                k = r * cols + c
                if c + 1 < cols:
                    edges.append((k, k + 1, weight))
                if r + 1 < rows:
                    edges.append((k, k + cols, weight))
        return cls(rows * cols, edges)

    def value(self, mask):
        mask = as_mask(mask, self.p)
        if self.ew.size == 0:
            return 0.0
        return float(self.ew[mask[self.ei] != mask[self.ej]].sum())

    def value_table(self):
        n = 1 << self.p
        masks = np.arange(n)
        out = np.zeros(n)
        for i, j, w in zip(self.ei, self.ej, self.ew):
            out += w * (((masks >> int(i)) ^ (masks >> int(j))) & 1)
        return out

    def edge_list(self):
        return list(zip(self.ei.tolist(), self.ej.tolist(), self.ew.tolist()))

    def boundary_weight(self, k, mask):
        """Total weight from node k into the set given by mask."""
        mask = as_mask(mask, self.p)
        w = self.ew[(self.ei == k) & mask[self.ej]].sum()
        w += self.ew[(self.ej == k) & mask[self.ei]].sum()
        return float(w)

    def is_connected(self, mask):
        """Connectivity of the subgraph induced on the masked nodes."""
        mask = as_mask(mask, self.p)
        nodes = np.flatnonzero(mask)
        if nodes.size <= 1:
            return True
        inside = set(nodes.tolist())
        adj = {v: [] for v in inside}
        for i, j in zip(self.ei, self.ej):
            if i in inside and j in inside:
                adj[int(i)].append(int(j))
                adj[int(j)].append(int(i))
        stack = [int(nodes[0])]
        seen = {int(nodes[0])}
        while stack:
            u = stack.pop()
            for v in adj[u]:
                if v not in seen:
                    seen.add(v)
                    stack.append(v)
        return len(seen) == nodes.size


class CardinalityFunction(SetFunction):
    """F(A) = h(|A|) for a concave profile h with h(0) = h(p) = 0."""

    kind = "cardinality"

    def __init__(self, p, h):
        super().__init__(p)
        h = np.asarray(h, dtype=float)
        if h.shape != (p + 1,):
            raise ValueError(f"profile needs p+1={p + 1} values, got {h.shape}")
        if abs(h[0]) > 1e-12 or abs(h[p]) > 1e-12:
            raise ValueError("profile must satisfy h(0) = h(p) = 0")
        if (h < -1e-12).any():
            raise ValueError("profile must be non-negative")
        d = np.diff(h)
        if (np.diff(d) > 1e-9).any():
            raise ValueError("profile must be concave")
        self.h = h

    @classmethod
    def homogeneous(cls, p):
        """F(A) = |A| * |V \\ A|, the cut in the complete unit graph."""
        k = np.arange(p + 1, dtype=float)
        return cls(p, k * (p - k))

    def value(self, mask):
        mask = as_mask(mask, self.p)
        return float(self.h[int(mask.sum())])

    def value_table(self):
        return self.h[popcounts(self.p)]


class TableFunction(SetFunction):
    """Explicit table of all 2^p values; the universal test fixture."""

    kind = "table"

    def __init__(self, p, values):
        super().__init__(p)
        values = np.asarray(values, dtype=float)
        if values.shape != (1 << p,):
            raise ValueError(f"table needs 2^p={1 << p} values")
        if abs(values[0]) > 1e-12 or abs(values[-1]) > 1e-12:
            raise ValueError("table must satisfy F(empty) = F(V) = 0")
        self.values = values

    def value(self, mask):
        mask = as_mask(mask, self.p)
        return float(self.values[mask_to_int(mask)])

    def value_of_int(self, m):
        return float(self.values[m])

    def value_table(self):
        return self.values.copy()


class SymmetrizedFunction(SetFunction):
    """F(A) = G(A) + G(V\\A) - G(empty) - G(V) for a submodular G."""

    kind = "symmetrized"

    def __init__(self, base: SetFunction):
        super().__init__(base.p)
        self.base = base
        g = base.value
        empty = np.zeros(base.p, dtype=bool)
        self._offset = g(empty) + g(~empty)

    def value(self, mask):
        mask = as_mask(mask, self.p)
        return float(self.base.value(mask) + self.base.value(~mask) - self._offset)

    def value_table(self):
        t = self.base.value_table()
        return t + t[(t.size - 1) ^ np.arange(t.size)] - self._offset


class NoisyCutFunction(SetFunction):
    """Partially minimized cut tolerating label mismatches.

    F(A) = min over B of cut_W(B) + penalty * |A symm-diff B|, where the cut
    lives on a hidden copy W of the ground set.  Each evaluation is one
    s-t min-cut on the hidden graph augmented with terminal arcs of
    capacity ``penalty``.
    """

    kind = "noisy_cut"

    def __init__(self, hidden: CutFunction, penalty):
        super().__init__(hidden.p)
        if penalty < 0:
            raise ValueError("mismatch penalty must be non-negative")
        self.hidden = hidden
        self.penalty = float(penalty)

    def value(self, mask):
        mask = as_mask(mask, self.p)
        p = self.p
        inside = np.flatnonzero(mask)
        outside = np.flatnonzero(~mask)
        keep = self.hidden.ew > 0
        u = np.concatenate([np.full(inside.size, p), outside, self.hidden.ei[keep]])
        v = np.concatenate([inside, np.full(outside.size, p + 1), self.hidden.ej[keep]])
        cap = np.concatenate([np.full(p, self.penalty), self.hidden.ew[keep]])
        rev = np.concatenate([np.zeros(p), self.hidden.ew[keep]])
        net = FlowNetwork.from_arrays(p + 2, p, p + 1, u, v, cap, rev)
        return float(net.max_flow().value)

    def bruteforce_value(self, mask):
        """min over all B by enumeration; oracle for the flow reduction."""
        mask = as_mask(mask, self.p)
        best = np.inf
        for m in range(1 << self.p):
            b = int_to_mask(m, self.p)
            best = min(best, self.hidden.value(b) + self.penalty * int((mask != b).sum()))
        return best


class CallableFunction(SetFunction):
    """Black-box oracle defined by a callable mask -> value.

    No structure is exposed, so every consumer falls back to its generic
    oracle-access path (useful for user-defined functions and for timing
    generic algorithms against dedicated ones).
    """

    kind = "callable"

    def __init__(self, p, fn):
        super().__init__(p)
        self.fn = fn
        self._check_normalized()

    def value(self, mask):
        return float(self.fn(as_mask(mask, self.p)))


class AxiomReport:
    def __init__(self, submodular, symmetric, nonnegative, witness=None):
        self.submodular = submodular
        self.symmetric = symmetric
        self.nonnegative = nonnegative
        self.witness = witness

    def __repr__(self):
        return (f"AxiomReport(submodular={self.submodular}, symmetric={self.symmetric}, "
                f"nonnegative={self.nonnegative}, witness={self.witness})")


def check_axioms(F: SetFunction, tol=AXIOM_TOL):
    """Exhaustively test submodularity, symmetry and non-negativity.

    Returns the first violating witness pair (A, B) as index tuples for a
    submodularity violation, or a single set for sign violations.
    """
    p = F.p
    if p > AXIOM_GUARD_P:
        raise ValueError(f"ground set too large for exhaustive check (p={p})")
    table = F.value_table()
    n = 1 << p

    nonnegative = True
    sym = True
    sub = True
    witness = None

    bad = np.flatnonzero(table < -tol)
    if bad.size:
        nonnegative = False
        witness = (_mask_indices(int(bad[0]), p),)

    rev = (n - 1) ^ np.arange(n)
    if np.max(np.abs(table - table[rev])) > tol:
        a = int(np.argmax(np.abs(table - table[rev])))
        sym = False
        if witness is None:
            witness = (_mask_indices(a, p),)

    allb = np.arange(n)
    for a in range(n):
        lhs = table[a] + table
        rhs = table[a | allb] + table[a & allb]
        viol = np.flatnonzero(lhs < rhs - tol)
        if viol.size:
            sub = False
            if witness is None:
                witness = (_mask_indices(a, p), _mask_indices(int(viol[0]), p))
            break

    return AxiomReport(sub, sym, nonnegative, witness)


def _mask_indices(m, p):
    return tuple(k for k in range(p) if (m >> k) & 1)


def is_inseparable(F: SetFunction, subset, base=None, tol=AXIOM_TOL):
    """True iff no non-trivial split A = B u C has F(A) = F(B) + F(C).

    With ``base`` given, the test applies to the contraction
    C -> F(base u C) - F(base).  For cut functions inseparable sets are
    exactly the connected ones, which is independent of the base.
    """
    p = F.p
    mask = as_mask(subset, p)
    size = int(mask.sum())
    if size == 0:
        raise ValueError("inseparability is defined for non-empty sets")
    if size == 1:
        return True
    if isinstance(F, CutFunction):
        return F.is_connected(mask)
    base_mask = np.zeros(p, dtype=bool) if base is None else as_mask(base, p)
    if (base_mask & mask).any():
        raise ValueError("base must be disjoint from the tested set")
    if isinstance(F, CardinalityFunction):
        # contraction value depends on sizes only
        b, h = int(base_mask.sum()), F.h
        total = h[b + size] - h[b]
        for c in range(1, size):
            if abs((h[b + c] - h[b]) + (h[b + size - c] - h[b]) - total) <= tol:
                return False
        return True
    if size > INSEPARABLE_GUARD:
        raise ValueError(f"set too large for exhaustive partition search (|A|={size})")
    f_base = F.value(base_mask)
    total = F.value(base_mask | mask) - f_base
    amask_int = 0
    for k in np.flatnonzero(mask):
        amask_int |= 1 << int(k)
    low = amask_int & (-amask_int)
    for sub in submasks(amask_int):
        if not (sub & low):
            continue  # each split visited once: keep the lowest element in B
        rest = amask_int ^ sub
        vb = F.value(base_mask | int_to_mask(sub, p)) - f_base
        vc = F.value(base_mask | int_to_mask(rest, p)) - f_base
        if abs(vb + vc - total) <= tol:
            return False
    return True


def read_graph(source):
    """Parse a whitespace-separated edge list: "i j weight", 1-based, with
    '#' comments.  Returns (p, edges) with 0-based node indices; p is the
    largest node index seen."""
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.IOBase):
        text = source.read()
    else:
        text = str(source)
    edges = []
    p = 0
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'i j weight'")
        i, j, w = int(parts[0]), int(parts[1]), float(parts[2])
        if i < 1 or j < 1:
            raise ValueError(f"line {lineno}: node indices are 1-based")
        edges.append((i - 1, j - 1, w))
        p = max(p, i, j)
    return p, edges


def read_profile(source):
    """Parse a cardinality profile: one real per line, p+1 lines."""
    if isinstance(source, (str, bytes)):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.IOBase):
        text = source.read()
    else:
        text = str(source)
    vals = []
    for line in text.splitlines():
        line = line.split("#", 1)[0].strip()
        if line:
            vals.append(float(line))
    if len(vals) < 2:
        raise ValueError("profile needs at least 2 values")
    return np.asarray(vals)
