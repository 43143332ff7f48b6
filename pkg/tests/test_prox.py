from itertools import permutations

import cvxpy as cp
import numpy as np
import pytest

from conftest import FAMILIES, sample_family
from test_lovasz import _distinct_vertices
from submodreg.lovasz import OrderedPartition, check_face_lattice, lovasz_extension
from submodreg.prox import (BruteForceEngine, certify_lattice, extract_lattice,
                            prox_bruteforce, prox_cardinality,
                            prox_decomposition, prox_l1_composed, prox_tv1d,
                            prox_via_mnp, soft_threshold, verify_threshold)
from submodreg.setfn import CardinalityFunction, CutFunction


def test_chain_prox_examples():
    F = CutFunction.chain(2)
    z = np.array([1.0, 0.0])
    assert prox_decomposition(F, z, 0.25).w == pytest.approx([0.75, 0.25])
    assert prox_decomposition(F, z, 0.75).w == pytest.approx([0.5, 0.5])
    assert prox_decomposition(F, z, 0.0).w == pytest.approx(z)


def test_mnp_prox_examples():
    F = CutFunction.chain(2)
    z = np.array([1.0, 0.0])
    assert prox_via_mnp(F, z, 0.25).w == pytest.approx([0.75, 0.25], abs=1e-9)
    assert prox_via_mnp(F, z, 2.0).w == pytest.approx([0.5, 0.5], abs=1e-9)
    c = np.full(3, 1.3)
    assert prox_via_mnp(CutFunction.chain(3), c, 1.0).w == pytest.approx(c, abs=1e-9)


def test_cardinality_prox_examples():
    h = [0, 2, 2, 0]
    z = np.array([3.0, 0.0, 0.0])
    assert prox_cardinality(h, z, 0.5).w == pytest.approx([2.0, 0.5, 0.5])
    assert prox_cardinality(h, z, 2.0).w == pytest.approx([1.0, 1.0, 1.0])
    const = np.full(3, 0.7)
    assert prox_cardinality(h, const, 1.3).w == pytest.approx(const)
    both = prox_cardinality(h, z, 0.5, method="decomposition")
    assert both.w == pytest.approx([2.0, 0.5, 0.5], abs=1e-12)


def test_tv1d_examples():
    assert prox_tv1d(np.array([2.0, 1.0, 0.0]), 0.1).w == pytest.approx([1.9, 1.0, 0.1])
    assert prox_tv1d(np.array([1.0, 1.0, 0.0]), 0.25).w == pytest.approx([0.875, 0.875, 0.25])
    big = prox_tv1d(np.array([2.0, 1.0, 0.0]), 50.0).w
    assert big == pytest.approx(np.full(3, 1.0))


def test_tv1d_weighted_and_maxflow_route(rng):
    for _ in range(25):
        p = int(rng.integers(2, 10))
        z = rng.normal(size=p) * 2
        wts = rng.random(p - 1) + 0.1
        lam = float(rng.random() * 2)
        a = prox_tv1d(z, lam, wts).w
        b = prox_tv1d(z, lam, wts, method="maxflow").w
        assert a == pytest.approx(b, abs=1e-9)


def test_l1_composition_examples():
    F = CutFunction.chain(2)
    z = np.array([1.0, 0.0])
    assert prox_l1_composed(F, z, 0.25, 0.3) == pytest.approx([0.45, 0.0])
    assert prox_l1_composed(F, z, 0.25, 0.0) == pytest.approx([0.75, 0.25])
    assert prox_l1_composed(F, z, 0.75, 0.6) == pytest.approx([0.0, 0.0])


def test_soft_threshold():
    assert soft_threshold([1.0, -0.2, 0.5], 0.3) == pytest.approx([0.7, 0.0, 0.2])


@pytest.mark.parametrize("family", FAMILIES)
def test_engine_equivalence(family, rng):
    fast_paths = {"cardinality": lambda F, z, lam: prox_cardinality(F, z, lam).w,
                  "chain": lambda F, z, lam: prox_tv1d(z, lam, F.ew).w}
    for trial in range(12):
        p = int(rng.integers(2, 7))
        F = sample_family(rng, p, family)
        z = rng.normal(size=p) * 2
        lam = float(rng.random() * 1.5 + 0.01)
        ref = prox_bruteforce(F, z, lam)
        assert prox_decomposition(F, z, lam).w == pytest.approx(ref, abs=1e-6)
        assert prox_via_mnp(F, z, lam, tol=1e-10).w == pytest.approx(ref, abs=1e-6)
        assert prox_decomposition(F, z, lam, engine=BruteForceEngine(F)).w == \
            pytest.approx(ref, abs=1e-6)
        if family in fast_paths:
            assert fast_paths[family](F, z, lam) == pytest.approx(ref, abs=1e-6)


def test_prox_solution_contracts(rng):
    from submodreg.lovasz import in_base_polyhedron
    for family in FAMILIES:
        p = 6
        F = sample_family(rng, p, family)
        z = rng.normal(size=p) * 2
        lam = 0.7
        sol = prox_decomposition(F, z, lam)
        assert np.abs(sol.w - z + lam * sol.dual).max() < 1e-9
        assert in_base_polyhedron(F, sol.dual, tol=1e-7)
        assert lovasz_extension(F, sol.w) == pytest.approx(
            float(sol.w @ sol.dual), abs=1e-7)
        values = [sol.w[b[0]] for b in sol.lattice.blocks]
        assert all(values[i] > values[i + 1] for i in range(len(values) - 1))


def test_nonexpansive_and_shift(rng):
    F = CutFunction.chain(6)
    for _ in range(20):
        z1, z2 = rng.normal(size=6), rng.normal(size=6)
        lam = float(rng.random() * 2)
        w1 = prox_decomposition(F, z1, lam).w
        w2 = prox_decomposition(F, z2, lam).w
        assert np.linalg.norm(w1 - w2) <= np.linalg.norm(z1 - z2) + 1e-9
        a = float(rng.normal())
        assert prox_decomposition(F, z1 + a, lam).w == pytest.approx(w1 + a, abs=1e-9)


def test_threshold_property(rng):
    for family in FAMILIES:
        for _ in range(4):
            p = int(rng.integers(2, 9))
            F = sample_family(rng, p, family)
            z = rng.normal(size=p) * 2
            lam = float(rng.random() * 1.5 + 0.05)
            w = prox_decomposition(F, z, lam).w
            alphas = rng.uniform(w.min() - 0.5, w.max() + 0.5, size=20)
            assert verify_threshold(F, z, lam, w, alphas, tol=1e-7)


def test_decomposition_uses_at_most_p_sfm_calls(rng):
    class CountingEngine:
        def __init__(self, inner):
            self.inner = inner
            self.calls = 0

        def minimize(self, *args, **kwargs):
            self.calls += 1
            return self.inner.minimize(*args, **kwargs)

    for family in ("chain", "cardinality", "table"):
        for _ in range(10):
            p = int(rng.integers(2, 9))
            F = sample_family(rng, p, family)
            from submodreg.prox import default_engine
            eng = CountingEngine(default_engine(F))
            prox_decomposition(F, rng.normal(size=p) * 2, 0.5, engine=eng)
            assert eng.calls <= p


def test_l1_composition_vs_direct(rng):
    # direct convex solve of the three-term objective through the
    # max-of-linear representation of the extension
    for trial in range(15):
        p = int(rng.integers(2, 6))
        family = ("chain", "cardinality", "cut")[trial % 3]
        F = sample_family(rng, p, family)
        z = rng.normal(size=p) * 2
        lf, l1 = float(rng.random()), float(rng.random())
        ours = prox_l1_composed(F, z, lf, l1)
        V = _distinct_vertices(F)
        x = cp.Variable(p)
        obj = 0.5 * cp.sum_squares(x - z) + lf * cp.max(V @ x) + l1 * cp.norm1(x)
        cp.Problem(cp.Minimize(obj)).solve(
            solver=cp.CLARABEL, tol_gap_abs=1e-12, tol_gap_rel=1e-12, tol_feas=1e-12)
        assert ours == pytest.approx(x.value, abs=1e-5)


def test_certify_lattice_examples():
    F = CutFunction.chain(2)
    z = np.array([1.0, 0.0])
    split = OrderedPartition.total(2, [(0,), (1,)])
    cert = certify_lattice(F, z, 0.25, split)
    assert cert.order_ok and cert.base_ok
    assert cert.v == pytest.approx([0.75, 0.25])

    cert = certify_lattice(F, z, 0.75, split)
    assert not cert.order_ok
    assert cert.v == pytest.approx([0.25, 0.75])

    merged = OrderedPartition.total(2, [(0, 1)])
    cert = certify_lattice(F, z, 0.75, merged)
    assert cert.order_ok and cert.base_ok
    assert cert.v == pytest.approx([0.5])

    with pytest.raises(ValueError):
        certify_lattice(F, z, 0.0, split)


def test_certificate_iff_prox_lattice(rng):
    # among all totally ordered partitions, exactly the prox solution's
    # lattice is certified
    F = CutFunction.chain(3)
    for _ in range(10):
        z = rng.normal(size=3) * 2
        lam = float(rng.random() + 0.05)
        sol = prox_decomposition(F, z, lam)
        good = sol.lattice
        n_cert = 0
        from submodreg.prox import _set_partitions
        for blocks in _set_partitions(3):
            for perm in permutations(range(len(blocks))):
                part = OrderedPartition.total(3, [blocks[i] for i in perm])
                cert = certify_lattice(F, z, lam, part)
                if cert.ok():
                    n_cert += 1
                    assert sorted(part.blocks) == sorted(good.blocks)
        assert n_cert == 1


def test_extract_lattice_examples():
    part = extract_lattice(np.array([0.875, 0.875, 0.25]), 1e-9)
    assert part.blocks == [(0, 1), (2,)]
    assert extract_lattice(np.full(4, 2.0)).m == 1
    three = extract_lattice(np.array([3.0, 1.0, 2.0]))
    assert three.blocks == [(0,), (2,), (1,)]
    assert three.is_total()


def test_stable_lattices_random(rng):
    # random prox solutions always land on allowed face lattices
    for family in FAMILIES:
        for _ in range(8):
            p = int(rng.integers(2, 8))
            F = sample_family(rng, p, family)
            z = rng.standard_normal(p)
            lam = float(rng.random() * 1.5 + 0.05)
            sol = prox_decomposition(F, z, lam)
            rep = check_face_lattice(F, sol.lattice)
            assert rep.modular_on_lattice and rep.blocks_inseparable


def test_lambda_zero_lattice():
    sol = prox_decomposition(CutFunction.chain(3), np.array([3.0, 1.0, 1.0]), 0.0)
    assert (sol.dual == 0).all()
    assert sol.lattice.blocks == [(0,), (1, 2)]
