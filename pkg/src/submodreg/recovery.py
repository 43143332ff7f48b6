"""Level-set recovery theory harness.

Given a piecewise-constant truth w* and noisy observations z = w* + sigma*eps,
quantifies when the prox solution reproduces the constant-set structure of
w*: the per-block separation constants, the value gap, the admissible
penalty range, the probability lower bound, and Monte-Carlo estimates.
Also holds the grid-graph pathology search and the concentration check
behind the probability bound.
"""

import warnings
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from ._bits import int_to_mask, submasks
from .lovasz import OrderedPartition
from .prox import default_engine, extract_lattice, prox_decomposition
from .setfn import CutFunction, SetFunction
from .solver import agglo_margin

ETA_GUARD = 20
LEMMA2_GUARD = 12


@dataclass
class NoiseModel:
    sigma: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")


class GroundTruth:
    """Ordered partition plus strictly order-consistent block values."""

    def __init__(self, partition: OrderedPartition, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (partition.m,):
            raise ValueError("one value per block required")
        for i, j in partition.comparable_pairs():
            if not values[i] > values[j]:
                raise ValueError("values must strictly decrease along the order")
        self.partition = partition
        self.values = values

    @property
    def p(self):
        return self.partition.p

    @property
    def w(self):
        out = np.empty(self.p)
        for v, blk in zip(self.values, self.partition.blocks):
            out[list(blk)] = v
        return out

    @classmethod
    def chain_blocks(cls, block_sizes, values):
        """Contiguous position-blocks on a chain, ordered by value."""
        block_sizes = list(block_sizes)
        values = np.asarray(values, dtype=float)
        if len(block_sizes) != values.size:
            raise ValueError("need one value per block")
        p = sum(block_sizes)
        pos_blocks = []
        start = 0
        for size in block_sizes:
            pos_blocks.append(tuple(range(start, start + size)))
            start += size
        order = np.argsort(-values, kind="stable")
        blocks = [pos_blocks[i] for i in order]
        return cls(OrderedPartition.total(p, blocks), values[order])


def compute_eta(F: SetFunction, truth: GroundTruth):
    """Tightest per-block separation constants of the recovery condition.

    eta_j = min over non-trivial C in A_j of the contraction margin
    divided by min(|C|/|A_j|, 1 - |C|/|A_j|); singleton blocks get +inf.
    May be non-positive, in which case recovery is not guaranteed.
    """
    part = truth.partition
    etas = np.empty(part.m)
    for j in range(part.m):
        blk = part.blocks[j]
        a = len(blk)
        if a == 1:
            etas[j] = np.inf
            continue
        if a > ETA_GUARD:
            raise ValueError(f"block too large for exhaustive search (|A|={a})")
        prev = part.prefix_mask(j - 1) if j > 0 else np.zeros(part.p, dtype=bool)
        fb = F.value(prev)
        gain = F.value(part.prefix_mask(j)) - fb
        blk_int = 0
        for k in blk:
            blk_int |= 1 << k
        best = np.inf
        for c_int in submasks(blk_int):
            frac = bin(c_int).count("1") / a
            num = F.value(prev | int_to_mask(c_int, part.p)) - fb - frac * gain
            best = min(best, num / min(frac, 1.0 - frac))
        etas[j] = best
    return etas


def compute_nu(truth: GroundTruth):
    """Smallest value gap over comparable block pairs."""
    pairs = truth.partition.comparable_pairs()
    if not pairs:
        warnings.warn("no comparable pairs; value gap is +inf")
        return np.inf
    return float(min(truth.values[i] - truth.values[j] for i, j in pairs))


def prefix_increments(F: SetFunction, part: OrderedPartition):
    t = np.empty(part.m)
    prev = 0.0
    for j in range(part.m):
        cur = F.value(part.prefix_mask(j))
        t[j] = cur - prev
        prev = cur
    return t


def lambda_bound(F: SetFunction, truth: GroundTruth, nu):
    """Largest penalty keeping the per-block bias below nu/4."""
    t = prefix_increments(F, truth.partition)
    sizes = truth.partition.block_sizes()
    rates = np.abs(t) / sizes
    active = rates > 0
    if not active.any():
        return np.inf
    return float(nu / 4.0 / rates[active].max())


def theorem_bound(truth: GroundTruth, eta, nu, lam, sigma):
    """Probability lower bound for exact lattice recovery, as stated.

    1 - sum_j exp(-nu^2 |A_j| / 32 sigma^2)
      - 2 sum_j |A_j| exp(-lam^2 eta_j^2 / 2 sigma^2 |A_j|^2).
    Non-positive eta terms are evaluated at eta=0 (the guarantee is
    vacuous there).  Can be very negative; callers clamp for reporting.
    """
    if sigma < 0:
        raise ValueError("sigma must be non-negative")
    if sigma == 0:
        return 1.0
    sizes = truth.partition.block_sizes().astype(float)
    eta = np.asarray(eta, dtype=float)
    eta_eff = np.where(np.isfinite(eta), np.maximum(eta, 0.0), np.inf)
    term1 = np.exp(-nu ** 2 * sizes / (32.0 * sigma ** 2)).sum()
    expo = np.where(np.isinf(eta_eff), np.inf,
                    lam ** 2 * eta_eff ** 2 / (2.0 * sigma ** 2 * sizes ** 2))
    term2 = 2.0 * (sizes * np.exp(-expo)).sum()
    return float(1.0 - term1 - term2)


@dataclass
class RecoveryReport:
    eta: np.ndarray
    nu: float
    lambda_max: float
    bound: float          # clamped to [0, 1]
    bound_raw: float
    bound_clamped: bool
    empirical: float
    trials: int


def lattice_matches(found: OrderedPartition, truth: OrderedPartition):
    """Same unordered partition and every order relation of the truth."""
    fb = sorted(found.blocks)
    tb = sorted(truth.blocks)
    if fb != tb:
        return False
    where = {blk: i for i, blk in enumerate(found.blocks)}
    closure = found.comparable_pairs()
    for i, j in truth.comparable_pairs():
        fi = where[truth.blocks[i]]
        fj = where[truth.blocks[j]]
        if (fi, fj) not in closure:
            return False
    return True


def _trial_rng(seed, trial):
    return np.random.Generator(
        np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(trial,))))


def monte_carlo_recovery(F: SetFunction, truth: GroundTruth, sigma, lam,
                         trials, prox=None, seed=0) -> RecoveryReport:
    """Empirical exact-recovery rate of z = w* + sigma*eps alongside the
    theoretical constants and probability bound.

    Each trial draws from its own counter-based stream derived from
    (seed, trial), so the estimate is reproducible regardless of
    execution order.
    """
    if trials < 1:
        raise ValueError("at least one trial required")
    if prox is None:
        engine = default_engine(F)
        prox = lambda z: prox_decomposition(F, z, lam, engine=engine).w
    w_star = truth.w
    hits = 0
    for trial in range(trials):
        rng = _trial_rng(seed, trial)
        z = w_star + sigma * rng.standard_normal(truth.p)
        w = prox(z)
        found = extract_lattice(w, 1e-7 * max(1.0, float(np.abs(z).max())))
        if lattice_matches(found, truth.partition):
            hits += 1
    eta = compute_eta(F, truth)
    nu = compute_nu(truth)
    lam_max = lambda_bound(F, truth, nu)
    raw = theorem_bound(truth, eta, nu, lam, sigma)
    bound = min(max(raw, 0.0), 1.0)
    return RecoveryReport(eta=eta, nu=nu, lambda_max=lam_max, bound=bound,
                          bound_raw=raw, bound_clamped=raw < 0.0,
                          empirical=hits / trials, trials=trials)


# ---------------------------------------------------------------------------
# grid-graph pathology

@dataclass
class GridPathology:
    found: bool
    rows: int
    cols: int
    graph: CutFunction | None = None
    A: tuple = ()
    B: tuple = ()
    C: tuple = ()
    margin: float = np.nan
    cut_b: float = np.nan
    cut_bc: float = np.nan
    matched_target: bool = False


def tv2d_counterexample(search_width, search_height, max_removed=3) -> GridPathology:
    """Search a grid for a negative merging margin.

    First looks for the known failing pattern: A the connected complement
    of a 2-edge-cost-5 set B with |A| = 13 and a 2-element C with
    cut(B u C) = 4, whose margin is -3/13.  On grids too small for that,
    falls back to exhaustive enumeration (p <= 12) of disjoint (A, B) with
    A connected and reports the most negative margin found.
    """
    rows, cols = int(search_height), int(search_width)
    if rows * cols > 36:
        raise ValueError("search limited to grids of at most 36 nodes")
    graph = CutFunction.grid(rows, cols)
    p = rows * cols

    n_removed = p - 13
    if 1 <= n_removed <= max_removed:
        hit = _targeted_grid_search(graph, n_removed)
        if hit is not None:
            a_idx, b_idx, c_idx, margin, cut_b, cut_bc = hit
            return GridPathology(True, rows, cols, graph, a_idx, b_idx, c_idx,
                                 margin, cut_b, cut_bc, matched_target=True)

    if p <= 12:
        best = _exhaustive_grid_search(graph)
        if best is not None:
            a_idx, b_idx, c_idx, margin = best
            return GridPathology(True, rows, cols, graph, a_idx, b_idx, c_idx,
                                 margin, graph(b_idx),
                                 graph(tuple(set(b_idx) | set(c_idx))))
    return GridPathology(False, rows, cols, graph)


def _targeted_grid_search(graph, n_removed):
    p = graph.p
    for b_combo in combinations(range(p), n_removed):
        b_mask = np.zeros(p, dtype=bool)
        b_mask[list(b_combo)] = True
        if graph.value(b_mask) != 5.0:
            continue
        a_mask = ~b_mask
        if not graph.is_connected(a_mask):
            continue
        a_idx = tuple(np.flatnonzero(a_mask))
        for c_combo in combinations(a_idx, 2):
            bc = b_mask.copy()
            bc[list(c_combo)] = True
            if graph.value(bc) == 4.0:
                margin = agglo_margin(graph, a_mask, b_mask,
                                      np.isin(np.arange(p), c_combo))
                return a_idx, tuple(b_combo), tuple(c_combo), margin, 5.0, 4.0
    return None


def _exhaustive_grid_search(graph):
    p = graph.p
    table = graph.value_table()
    best = None
    n = 1 << p
    for b_int in range(n):
        comp = (n - 1) ^ b_int
        fb = table[b_int]
        a_int = comp
        while a_int:
            a_mask = int_to_mask(a_int, p)
            size_a = int(a_mask.sum())
            if size_a >= 2 and graph.is_connected(a_mask):
                gain = table[b_int | a_int] - fb
                for c_int in submasks(a_int):
                    frac = bin(c_int).count("1") / size_a
                    margin = float(table[b_int | c_int] - fb - frac * gain)
                    if best is None or margin < best[3]:
                        best = (_idx(a_int, p), _idx(b_int, p),
                                _idx(c_int, p), margin)
            a_int = (a_int - 1) & comp
    return best


def _idx(m, p):
    return tuple(k for k in range(p) if (m >> k) & 1)


# ---------------------------------------------------------------------------
# concentration check

@dataclass
class Lemma2Report:
    empirical_tail: float
    bound: float
    trials: int


def lemma2_check(p, t, trials, seed=0) -> Lemma2Report:
    """Tail of max_A s(A)/F(A) for centered Gaussian s vs 2p exp(-t^2/2p^2).

    F(A) = min(|A|/p, 1-|A|/p); the max over subsets reduces to sorted
    prefix sums, evaluated per cardinality.
    """
    if p > LEMMA2_GUARD:
        raise ValueError(f"p={p} beyond the subset-maximum guard ({LEMMA2_GUARD})")
    if trials < 1:
        raise ValueError("at least one sample required")
    rng = _trial_rng(seed, 0)
    eps = rng.standard_normal((trials, p))
    s = eps - eps.mean(axis=1, keepdims=True)
    s_sorted = -np.sort(-s, axis=1)
    prefixes = np.cumsum(s_sorted, axis=1)[:, : p - 1]
    k = np.arange(1, p)
    f = np.minimum(k / p, 1.0 - k / p)
    ratios = prefixes / f
    max_ratio = ratios.max(axis=1)
    empirical = float((max_ratio >= t).mean())
    bound = 2.0 * p * np.exp(-t ** 2 / (2.0 * p ** 2))
    return Lemma2Report(empirical, float(bound), trials)


# ---------------------------------------------------------------------------
# change-point estimation with outliers

@dataclass
class RobustTvRow:
    sigma: float
    method: str
    lam: float
    error_mean: float
    error_std: float


def level_set_error(w, true_labels, tol=1e-6):
    """Misassignment rate after one-to-one cluster matching.

    Estimated clusters are the constant sets of w; each true cluster is
    matched to at most one estimated cluster (Hungarian assignment on
    overlaps), and every index outside the matching counts as an error.
    """
    from scipy.optimize import linear_sum_assignment
    w = np.asarray(w, dtype=float)
    part = extract_lattice(w, tol)
    p = w.size
    labels = np.unique(true_labels)
    overlap = np.zeros((labels.size, part.m))
    for li, lab in enumerate(labels):
        in_lab = np.asarray(true_labels) == lab
        for j, blk in enumerate(part.blocks):
            overlap[li, j] = in_lab[list(blk)].sum()
    rows, cols = linear_sum_assignment(-overlap)
    matched = overlap[rows, cols].sum()
    return 1.0 - matched / p


def robust_tv_experiment(chain_length, jump_position, outlier_fraction,
                         sigma_grid, penalty, lambdas=None, replications=20,
                         outlier_magnitude=5.0, seed=0):
    """Change-point estimation: plain vs noisy-cut (robust) 1-D TV.

    One jump of height 1 plus sign-symmetric additive spikes at random
    indices.  For each noise level and method, reports the best mean
    level-set error over the penalty grid.  The default grid spans
    0.05..1.6 (the level-set-recovery regime; far larger penalties smooth
    the outliers into the surrounding plateaus).  Returns RobustTvRow
    records.
    """
    from .prox import NoisyCutEngine, prox_tv1d
    from .setfn import NoisyCutFunction

    p = int(chain_length)
    if not (0 < jump_position < p):
        raise ValueError("jump must be interior")
    if lambdas is None:
        lambdas = [0.05 * 2 ** k for k in range(6)]
    lambdas = [float(l) for l in lambdas]
    w_star = np.zeros(p)
    w_star[:jump_position] = 1.0
    true_labels = (w_star > 0.5).astype(int)
    n_out = int(round(outlier_fraction * p))

    robust_f = NoisyCutFunction(CutFunction.chain(p), penalty)
    robust_engine = NoisyCutEngine(robust_f)

    rows = []
    for sigma in sigma_grid:
        errs = {("tv", lam): [] for lam in lambdas}
        errs.update({("robust_tv", lam): [] for lam in lambdas})
        for rep in range(replications):
            rng = _trial_rng(seed, rep)
            z = w_star + sigma * rng.standard_normal(p)
            if n_out:
                where = rng.choice(p, size=n_out, replace=False)
                z[where] += outlier_magnitude * rng.choice([-1.0, 1.0], size=n_out)
            for lam in lambdas:
                w_tv = prox_tv1d(z, lam).w
                errs[("tv", lam)].append(level_set_error(w_tv, true_labels))
                w_rb = prox_decomposition(robust_f, z, lam, engine=robust_engine).w
                errs[("robust_tv", lam)].append(level_set_error(w_rb, true_labels))
        for method in ("tv", "robust_tv"):
            means = {lam: float(np.mean(errs[(method, lam)])) for lam in lambdas}
            best_lam = min(lambdas, key=lambda l: means[l])
            rows.append(RobustTvRow(
                sigma=float(sigma), method=method, lam=best_lam,
                error_mean=means[best_lam],
                error_std=float(np.std(errs[(method, best_lam)]))))
    return rows
