"""Shared helpers: random instances of every set-function family."""

import numpy as np
import pytest

from submodreg.setfn import (CardinalityFunction, CutFunction,
                             NoisyCutFunction, SetFunction,
                             SymmetrizedFunction, TableFunction)

FAMILIES = ("chain", "cut", "cardinality", "noisy_cut", "symmetrized", "table")


class RawTable(SetFunction):
    """Unnormalized table oracle, for symmetrization bases in tests."""

    kind = "raw"

    def __init__(self, p, values):
        super().__init__(p)
        self.values = np.asarray(values, dtype=float)

    def value(self, mask):
        from submodreg._bits import as_mask, mask_to_int
        return float(self.values[mask_to_int(as_mask(mask, self.p))])

    def value_table(self):
        return self.values.copy()


def random_concave_profile(rng, p):
    """Concave h with h(0) = h(p) = 0; such profiles are non-negative."""
    d = np.sort(rng.random(p))[::-1]
    d = d - d.mean()
    return np.concatenate([[0.0], np.cumsum(d)])


def random_graph_edges(rng, p, density=0.6):
    edges = [(i, j, float(rng.random() * 2))
             for i in range(p) for j in range(i + 1, p)
             if rng.random() < density]
    if not edges:
        edges = [(0, p - 1 if p > 1 else 0 + 1, 1.0)] if p > 1 else []
    return edges


def coverage_table(rng, p, n_sets=None):
    """Weighted coverage values G(A) = sum_j u_j [A meets S_j]."""
    n_sets = n_sets or p
    vals = np.zeros(1 << p)
    for _ in range(n_sets):
        members = rng.random(p) < 0.5
        if not members.any():
            members[rng.integers(p)] = True
        u = float(rng.random()) + 0.2
        sel = 0
        for k in np.flatnonzero(members):
            sel |= 1 << int(k)
        hits = np.array([(m & sel) != 0 for m in range(1 << p)])
        vals += u * hits
    return vals


def sample_family(rng, p, family):
    if family == "chain":
        return CutFunction.chain(p, rng.random(max(p - 1, 0)) + 0.2)
    if family == "cut":
        return CutFunction(p, random_graph_edges(rng, p))
    if family == "cardinality":
        h = random_concave_profile(rng, p)
        if np.abs(h).max() < 1e-9:
            return CardinalityFunction.homogeneous(p)
        return CardinalityFunction(p, h)
    if family == "noisy_cut":
        hidden = CutFunction(p, random_graph_edges(rng, p))
        return NoisyCutFunction(hidden, float(rng.random() * 1.5 + 0.1))
    if family == "symmetrized":
        return SymmetrizedFunction(RawTable(p, coverage_table(rng, p)))
    if family == "table":
        cut = CutFunction(p, random_graph_edges(rng, p))
        card = CardinalityFunction.homogeneous(p)
        mix = cut.value_table() + float(rng.random()) * card.value_table()
        return TableFunction(p, mix)
    raise ValueError(family)


@pytest.fixture
def rng():
    return np.random.default_rng(20240811)
