import numpy as np
import pytest
from scipy.optimize import nnls

from conftest import FAMILIES, sample_family
from test_lovasz import _distinct_vertices
from submodreg.lovasz import in_base_polyhedron
from submodreg.prox import prox_decomposition
from submodreg.setfn import CardinalityFunction, CutFunction
from submodreg.sfm import (MnpConvergenceError, min_norm_point,
                           sfm_bruteforce, sfm_cardinality, sfm_cut,
                           sfm_noisy_cut)


def test_bruteforce_examples():
    res = sfm_bruteforce(CardinalityFunction(3, [0, 2, 2, 0]),
                         np.array([3.0, -1.0, 2.0]), 1.0)
    assert res.minimal.all() and res.value == pytest.approx(-4.0)

    res = sfm_bruteforce(CutFunction.chain(2), np.array([1.0, -2.0]), 0.5)
    assert res.minimal.tolist() == [True, False]
    assert res.value == pytest.approx(-0.5)

    res = sfm_bruteforce(CutFunction.chain(3), np.zeros(3), 1.0)
    assert not res.minimal.any() and res.value == 0.0


def test_cardinality_examples():
    res = sfm_cardinality([0, 2, 2, 0], np.array([3.0, -1.0, 2.0]), 1.0)
    assert res.minimal.all() and res.value == pytest.approx(-4.0)
    # large lambda cannot beat k = p when h(p) = 0 and z(V) > 0
    res = sfm_cardinality([0, 2, 2, 0], np.array([3.0, -1.0, 2.0]), 10.0)
    assert res.value == pytest.approx(-4.0)
    res = sfm_cardinality([0, 2, 2, 0], np.array([-1.0, -2.0, -3.0]), 5.0)
    assert not res.minimal.any() and res.value == 0.0


def test_cut_examples():
    res = sfm_cut(CutFunction.chain(2), np.array([1.0, -2.0]), 0.5)
    assert res.minimal.tolist() == [True, False]
    assert res.value == pytest.approx(-0.5)

    res = sfm_cut(CutFunction.chain(3), np.zeros(3), 1.0)
    assert not res.minimal.any() and res.maximal.all() and res.value == 0.0

    res = sfm_cut(CutFunction.chain(3), np.array([1.0, 1.0, 1.0]), 0.0)
    assert res.minimal.all() and res.value == pytest.approx(-3.0)


@pytest.mark.parametrize("family,engine", [
    ("cardinality", "cardinality"),
    ("chain", "cut"),
    ("cut", "cut"),
    ("noisy_cut", "noisy"),
])
def test_engines_match_bruteforce(family, engine, rng):
    for trial in range(40):
        p = int(rng.integers(2, 9))
        F = sample_family(rng, p, family)
        # integer-ish z makes ties frequent, stressing the tie rules
        z = rng.integers(-2, 3, size=p).astype(float) if trial % 3 == 0 \
            else rng.normal(size=p) * 2
        lam = float(rng.choice([0.0, 0.25, 1.0, rng.random() * 2]))
        ref = sfm_bruteforce(F, z, lam)
        if engine == "cardinality":
            res = sfm_cardinality(F, z, lam)
        elif engine == "cut":
            res = sfm_cut(F, z, lam)
        else:
            res = sfm_noisy_cut(F, z, lam)
        assert res.value == pytest.approx(ref.value, abs=1e-9)
        assert (res.minimal == ref.minimal).all(), (trial, z, lam)
        assert (res.maximal == ref.maximal).all(), (trial, z, lam)
        # both reported sets attain the optimum
        for mask in (res.minimal, res.maximal):
            attained = lam * F.value(mask) - z[mask].sum()
            assert attained == pytest.approx(ref.value, abs=1e-9)


def test_minimizer_lattice_bruteforce(rng):
    for trial in range(20):
        p = int(rng.integers(2, 8))
        F = sample_family(rng, p, "table")
        z = rng.integers(-2, 3, size=p).astype(float)
        res = sfm_bruteforce(F, z, 1.0)
        assert (res.minimal <= res.maximal).all()


def test_noisy_cut_contraction_matches_bruteforce(rng):
    for trial in range(30):
        p = int(rng.integers(3, 7))
        F = sample_family(rng, p, "noisy_cut")
        roles = rng.integers(0, 3, size=p)
        active = roles == 0
        base = roles == 1
        if not active.any():
            active[0] = True
            base[0] = False
        z = rng.normal(size=p) * 2
        lam = float(rng.random() * 2 + 0.05)
        res = sfm_noisy_cut(F, z, lam, active=active, base=base)
        # exhaustive reference over subsets of the active set
        f_base = F.value(base)
        best, best_sets = np.inf, []
        idx = np.flatnonzero(active)
        for m in range(1 << idx.size):
            c = np.zeros(p, dtype=bool)
            c[idx[[bool(m >> i & 1) for i in range(idx.size)]]] = True
            val = lam * (F.value(base | c) - f_base) - z[c].sum()
            if val < best - 1e-12:
                best, best_sets = val, [c]
            elif val <= best + 1e-12:
                best_sets.append(c)
        assert res.value == pytest.approx(best, abs=1e-8)
        inter = np.logical_and.reduce(best_sets)
        union = np.logical_or.reduce(best_sets)
        assert (res.minimal == inter).all()
        assert (res.maximal == union).all()


def test_mnp_chain_examples():
    F = CutFunction.chain(2)
    assert min_norm_point(F, np.zeros(2), 1e-10).s == pytest.approx([0, 0], abs=1e-9)
    assert min_norm_point(F, np.array([2.0, -2.0]), 1e-10).s == pytest.approx([1, -1], abs=1e-9)
    assert min_norm_point(F, np.array([0.5, -0.5]), 1e-10).s == pytest.approx([0.5, -0.5], abs=1e-9)


@pytest.mark.parametrize("family", FAMILIES)
def test_mnp_membership_and_optimality(family, rng):
    for trial in range(10):
        p = int(rng.integers(2, 6))
        F = sample_family(rng, p, family)
        target = rng.normal(size=p) * 2
        res = min_norm_point(F, target, tol=1e-10)
        assert in_base_polyhedron(F, res.s, tol=1e-7)
        V = _distinct_vertices(F).T
        big = 1e5
        A = np.vstack([V - target[:, None], big * np.ones((1, V.shape[1]))])
        b = np.concatenate([np.zeros(p), [big]])
        lam_, _ = nnls(A, b)
        ref = V @ lam_
        assert np.linalg.norm(res.s - target) <= np.linalg.norm(ref - target) + 1e-7


def test_mnp_iteration_cap():
    F = CutFunction.chain(4)
    with pytest.raises(MnpConvergenceError) as exc:
        min_norm_point(F, np.array([3.0, -1.0, 1.0, -3.0]), tol=1e-14, max_major=1)
    assert exc.value.gap > 0
    assert exc.value.s.shape == (4,)


def test_sign_set_identity(rng):
    # minimizers of lam*F - z are bracketed by the sign sets of the prox:
    # minimal = strictly positive part, maximal = non-negative part
    # (equivalently the negative parts of the prox at -z)
    for family in FAMILIES:
        for trial in range(8):
            p = int(rng.integers(2, 8))
            F = sample_family(rng, p, family)
            z = rng.normal(size=p) * 2
            lam = float(rng.random() * 1.5 + 0.05)
            w = prox_decomposition(F, z, lam).w
            ref = sfm_bruteforce(F, z, lam)
            assert ((w > 1e-7) == ref.minimal).all(), (family, z, lam, w)
            assert ((w >= -1e-7) == ref.maximal).all(), (family, z, lam, w)


def test_problem_validation():
    F = CutFunction.chain(3)
    with pytest.raises(ValueError):
        sfm_bruteforce(F, np.zeros(2), 1.0)
    with pytest.raises(ValueError):
        sfm_bruteforce(F, np.zeros(3), -1.0)
