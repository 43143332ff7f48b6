"""Minimization of A -> lam * F(A) - z(A).

Engines: exhaustive scan (the oracle), sorting for cardinality-based
functions, s-t min-cut for graph cuts and noisy cuts, plus the
minimum-norm-point projection onto the base polyhedron.  All engines
report both the minimal and the maximal minimizer; the set of minimizers
of a submodular function is a lattice, so those are themselves optimal.
"""

from dataclasses import dataclass

import numpy as np

from ._bits import as_mask, int_to_mask
from .maxflow import FlowNetwork
from .lovasz import greedy
from .setfn import (CardinalityFunction, CutFunction, NoisyCutFunction,
                    SetFunction)

BRUTE_GUARD_P = 22
MINIMIZER_TOL = 1e-11
RESIDUAL_TOL = 1e-10


@dataclass
class SfmProblem:
    F: SetFunction
    z: np.ndarray
    lam: float

    def __post_init__(self):
        self.z = np.asarray(self.z, dtype=float)
        if self.z.shape != (self.F.p,):
            raise ValueError("modular part has wrong length")
        if self.lam < 0:
            raise ValueError("lambda must be non-negative")


@dataclass
class SfmResult:
    minimal: np.ndarray   # boolean mask, intersection of all minimizers
    maximal: np.ndarray   # boolean mask, union of all minimizers
    value: float


def sfm_bruteforce(F: SetFunction, z, lam) -> SfmResult:
    """Exhaustive scan of all 2^p subsets; the verification oracle."""
    prob = SfmProblem(F, z, lam)
    p = F.p
    if p > BRUTE_GUARD_P:
        raise ValueError(f"p={p} too large for exhaustive minimization")
    table = prob.lam * F.value_table()
    zsums = np.zeros(1)
    for k in range(p):
        zsums = np.concatenate([zsums, zsums + prob.z[k]])
    vals = table - zsums
    best = float(vals.min())
    tol = MINIMIZER_TOL * max(1.0, np.abs(vals).max())
    mins = np.flatnonzero(vals <= best + tol)
    minimal = int_to_mask(int(np.bitwise_and.reduce(mins)), p)
    maximal = int_to_mask(int(np.bitwise_or.reduce(mins)), p)
    return SfmResult(minimal, maximal, best)


def _profile_values(h):
    if isinstance(h, CardinalityFunction):
        return h.h
    return np.asarray(h, dtype=float)


def sfm_cardinality(h, z, lam, tie_tol=1e-12) -> SfmResult:
    """Closed form by sorting for F(A) = h(|A|).

    Scans k = 0..p for the best lam*h(k) minus the top-k sum of z.  When
    equal z values straddle the optimal boundary, the minimal minimizer
    drops all of them and the maximal keeps all of them.
    """
    hv = _profile_values(h)
    z = np.asarray(z, dtype=float)
    p = z.size
    if hv.shape != (p + 1,):
        raise ValueError("profile length must be p+1")
    order = np.argsort(-z, kind="stable")
    zs = z[order]
    prefix = np.concatenate([[0.0], np.cumsum(zs)])
    vals = lam * hv - prefix
    best = float(vals.min())
    tol = MINIMIZER_TOL * max(1.0, np.abs(vals).max())
    ks = np.flatnonzero(vals <= best + tol)
    kmin, kmax = int(ks[0]), int(ks[-1])

    minimal = np.zeros(p, dtype=bool)
    if kmin > 0:
        theta = zs[kmin - 1]
        ge = z >= theta - tie_tol
        if int(ge.sum()) == kmin:
            minimal = ge
        else:
            minimal = z > theta + tie_tol
    maximal = np.zeros(p, dtype=bool)
    if kmax > 0:
        maximal = z >= zs[kmax - 1] - tie_tol
    return SfmResult(minimal, maximal, best)


def sfm_cut(graph: CutFunction, z, lam) -> SfmResult:
    """lam*cut(A) - z(A) via one s-t min-cut.

    Source feeds each node its positive z part, each node pays its
    negative part to the sink, and internal edges carry lam times the
    graph weight.  Minimal and maximal minimizers come from residual
    reachability.
    """
    z = np.asarray(z, dtype=float)
    p = graph.p
    if z.shape != (p,):
        raise ValueError("modular part has wrong length")
    src, snk = p, p + 1
    pos = np.flatnonzero(z > 0)
    neg = np.flatnonzero(z < 0)
    keep = lam * graph.ew > 0
    u = np.concatenate([np.full(pos.size, src), neg, graph.ei[keep]])
    v = np.concatenate([pos, np.full(neg.size, snk), graph.ej[keep]])
    cap = np.concatenate([z[pos], -z[neg], lam * graph.ew[keep]])
    rev = np.concatenate([np.zeros(pos.size + neg.size), lam * graph.ew[keep]])
    net = FlowNetwork.from_arrays(p + 2, src, snk, u, v, cap, rev)
    res = net.max_flow()
    minimal = _side_mask(res.min_cut_minimal(RESIDUAL_TOL), p)
    maximal = _side_mask(res.min_cut_maximal(RESIDUAL_TOL), p)
    value = lam * graph.value(minimal) - float(z[minimal].sum())
    return SfmResult(minimal, maximal, value)


def sfm_noisy_cut(F: NoisyCutFunction, z, lam, active=None, base=None,
                  f_base=None) -> SfmResult:
    """lam*F(A) - z(A) for a noisy-cut F, jointly over (A, B) in one min-cut.

    The hidden-graph labelling B is a free variable of the same network:
    pair k of V couples to pair k of W with capacity lam*penalty in both
    directions.  With ``active``/``base`` given, the minimization runs
    over A = base u C with C inside ``active`` (the contraction used by
    the proximal decomposition); nodes outside both are forced out.
    ``f_base`` = F(base) may be supplied to skip its evaluation.
    """
    z = np.asarray(z, dtype=float)
    p = F.p
    active_mask = np.ones(p, dtype=bool) if active is None else as_mask(active, p)
    base_mask = np.zeros(p, dtype=bool) if base is None else as_mask(base, p)
    if (active_mask & base_mask).any():
        raise ValueError("active and base sets must be disjoint")
    gamma = lam * F.penalty
    act = np.flatnonzero(active_mask)
    src = p + act.size
    snk = src + 1
    vnodes = p + np.arange(act.size)

    hid = F.hidden
    keep = lam * hid.ew > 0
    rest = np.flatnonzero(~(active_mask | base_mask))
    bidx = np.flatnonzero(base_mask)
    y = z[act]
    pos = y > 0
    neg = y < 0
    u_parts = [hid.ei[keep]]
    v_parts = [hid.ej[keep]]
    cap_parts = [lam * hid.ew[keep]]
    rev_parts = [lam * hid.ew[keep]]
    if gamma > 0:
        # coupling of each free pair, plus forced-in/out mismatch arcs
        u_parts += [vnodes, np.full(bidx.size, src), rest]
        v_parts += [act, bidx, np.full(rest.size, snk)]
        cap_parts += [np.full(act.size, gamma), np.full(bidx.size, gamma),
                      np.full(rest.size, gamma)]
        rev_parts += [np.full(act.size, gamma), np.zeros(bidx.size),
                      np.zeros(rest.size)]
    u_parts += [np.full(int(pos.sum()), src), vnodes[neg]]
    v_parts += [vnodes[pos], np.full(int(neg.sum()), snk)]
    cap_parts += [y[pos], -y[neg]]
    rev_parts += [np.zeros(int(pos.sum())), np.zeros(int(neg.sum()))]

    net = FlowNetwork.from_arrays(snk + 1, src, snk,
                                  np.concatenate(u_parts), np.concatenate(v_parts),
                                  np.concatenate(cap_parts), np.concatenate(rev_parts))
    res = net.max_flow()
    minimal = np.zeros(p, dtype=bool)
    for v in res.min_cut_minimal(RESIDUAL_TOL):
        if p <= v < src:
            minimal[act[v - p]] = True
    maximal = np.zeros(p, dtype=bool)
    for v in res.min_cut_maximal(RESIDUAL_TOL):
        if p <= v < src:
            maximal[act[v - p]] = True
    if f_base is None:
        f_base = F.value(base_mask) if base_mask.any() else 0.0
    value = float(res.value - y[pos].sum() - lam * f_base)
    return SfmResult(minimal, maximal, value)


def _side_mask(nodes, p):
    mask = np.zeros(p, dtype=bool)
    for v in nodes:
        if v < p:
            mask[v] = True
    return mask


class MnpConvergenceError(RuntimeError):
    def __init__(self, gap, s):
        super().__init__(f"minimum-norm-point did not converge; gap={gap:.3e}")
        self.gap = gap
        self.s = s


@dataclass
class MnpResult:
    s: np.ndarray
    gap: float
    majors: int
    converged: bool


def min_norm_point(F: SetFunction, target=None, tol=1e-9, max_major=None) -> MnpResult:
    """Project ``target`` onto the base polyhedron B(F) (Wolfe's algorithm).

    Alternates the greedy linear oracle with exact projections onto the
    affine hull of the current corral; terminates when the linear
    optimality gap max_{q in B(F)} (x - target)^T (x - q) drops below tol.
    """
    p = F.p
    if target is None:
        target = np.zeros(p)
    target = np.asarray(target, dtype=float)
    if target.shape != (p,):
        raise ValueError("target has wrong length")
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_major is None:
        max_major = 100 * p

    x = greedy(F, target).s
    corral = [x.copy()]
    coef = np.array([1.0])
    gap = np.inf

    for major in range(1, max_major + 1):
        grad = x - target
        q = greedy(F, -grad).s
        gap = float(grad @ x - grad @ q)
        if gap <= tol:
            return MnpResult(x, gap, major, True)
        if any(np.max(np.abs(q - v)) < 1e-13 for v in corral):
            # oracle returned a corral vertex: no progress possible
            return MnpResult(x, gap, major, gap <= tol)
        corral.append(q)
        coef = np.append(coef, 0.0)

        for _minor in range(3 * p + len(corral) + 10):
            y = _affine_minimizer(corral, target)
            if y is None:
                break
            alpha = y
            if alpha.min() >= -1e-12:
                coef = alpha
                break
            # step toward the affine minimizer until a coefficient dies
            neg = alpha < 1e-12
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(coef - alpha > 1e-15, coef / (coef - alpha), np.inf)
            theta = float(np.min(ratios[neg]))
            theta = min(max(theta, 0.0), 1.0)
            coef = theta * alpha + (1 - theta) * coef
            keep = coef > 1e-12
            if keep.all():
                coef[np.argmin(coef)] = 0.0
                keep = coef > 1e-12
            corral = [v for v, k in zip(corral, keep) if k]
            coef = coef[keep]
            coef = coef / coef.sum()
        x = np.einsum("i,ij->j", coef, np.asarray(corral))

    if gap <= tol:
        return MnpResult(x, gap, max_major, True)
    raise MnpConvergenceError(gap, x)


def _affine_minimizer(corral, target):
    """argmin ||sum_i a_i v_i - target|| subject to sum a_i = 1.

    Solved in the difference parametrization (exact constraint), with
    lstsq absorbing rank deficiency from near-duplicate vertices.
    """
    V = np.asarray(corral).T          # p x k
    k = V.shape[1]
    if k == 1:
        return np.array([1.0])
    base = V[:, 0]
    D = V[:, 1:] - base[:, None]
    beta, *_ = np.linalg.lstsq(D, target - base, rcond=None)
    alpha = np.empty(k)
    alpha[1:] = beta
    alpha[0] = 1.0 - beta.sum()
    return alpha
