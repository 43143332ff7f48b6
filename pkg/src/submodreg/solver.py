"""First-order solvers for min L(w) + lam*f(w) and the agglomerative
regularization path of the proximal problem.

ISTA/FISTA with backtracking drive any of the prox routes; subgradient
descent uses the greedy maximizer as a subgradient of f.  The path
tracker exploits that block values are affine in lam between merge
events, advancing event to event and certifying each breakpoint.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from ._bits import int_to_mask, submasks
from .lovasz import OrderedPartition, greedy, lovasz_extension
from .prox import certify_lattice, default_engine, prox_decomposition
from .setfn import CardinalityFunction, CutFunction, SetFunction

AGGLO_GUARD_P = 12


# ---------------------------------------------------------------------------
# losses

class QuadraticLoss:
    """0.5 * ||y - X w||^2 with explicit design matrix."""

    def __init__(self, X, y):
        self.X = np.asarray(X, dtype=float)
        self.y = np.asarray(y, dtype=float)
        if self.X.shape[0] != self.y.size:
            raise ValueError("X and y disagree on the number of rows")
        self.p = self.X.shape[1]
        self._lip = None

    def value_and_grad(self, w):
        r = self.X @ w - self.y
        return 0.5 * float(r @ r), self.X.T @ r

    def lipschitz_estimate(self, iters=20, seed=0):
        """Gradient Lipschitz constant ~ ||X||_2^2 by power iteration."""
        if self._lip is None:
            rng = np.random.default_rng(seed)
            v = rng.normal(size=self.p)
            v /= np.linalg.norm(v)
            lam = 1.0
            for _ in range(iters):
                u = self.X.T @ (self.X @ v)
                lam = float(np.linalg.norm(u))
                if lam == 0:
                    break
                v = u / lam
            # power iteration approaches from below; pad for safety
            self._lip = 1.1 * max(lam, 1e-12)
        return self._lip

    def signal_scale(self):
        return float(np.abs(self.X.T @ self.y).max()) / self.lipschitz_estimate()


class DenoisingLoss(QuadraticLoss):
    """0.5 * ||w - z||^2; the identity-design special case."""

    def __init__(self, z):
        z = np.asarray(z, dtype=float)
        super().__init__(np.eye(z.size), z)
        self.z = z
        self._lip = 1.0

    def value_and_grad(self, w):
        r = w - self.z
        return 0.5 * float(r @ r), r

    def signal_scale(self):
        return float(np.abs(self.z).max())


def extension_value(F: SetFunction, w):
    """f(w) through the family closed forms where available (fast path
    for objective tracking; agrees with the generic evaluation)."""
    w = np.asarray(w, dtype=float)
    if isinstance(F, CardinalityFunction):
        return float(np.diff(F.h) @ np.sort(w)[::-1])
    if isinstance(F, CutFunction):
        return float(F.ew @ np.abs(w[F.ei] - w[F.ej]))
    return lovasz_extension(F, w)


@dataclass
class SolverConfig:
    max_iters: int = 500
    step: str = "backtracking"        # or "fixed"
    tol: float = 1e-10                # relative objective-change stopping rule
    accelerated: bool = True          # FISTA vs ISTA
    time_budget: float | None = None  # wall seconds; None = unlimited

    def __post_init__(self):
        if self.max_iters <= 0 or self.tol < 0:
            raise ValueError("config parameters must be positive")
        if self.step not in ("backtracking", "fixed"):
            raise ValueError("step rule must be 'backtracking' or 'fixed'")


@dataclass
class Trace:
    iterations: list = field(default_factory=list)   # (iter, objective, change, ms)
    meta: dict = field(default_factory=dict)

    def objectives(self):
        return np.array([row[1] for row in self.iterations])

    def times_ms(self):
        return np.array([row[3] for row in self.iterations])

    def best_objectives(self):
        return np.minimum.accumulate(self.objectives())


def write_trace_csv(trace: Trace, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "objective", "gap", "wall_time_ms"])
        for it, obj, gap, ms in trace.iterations:
            writer.writerow([it, f"{obj:.12g}", f"{gap:.12g}", f"{ms:.3f}"])


class SolverDivergence(RuntimeError):
    pass


def proximal_gradient(loss, F: SetFunction, lam, config: SolverConfig = None,
                      prox_fn=None, w0=None):
    """ISTA / FISTA on L(w) + lam*f(w).

    ``prox_fn(v, tau)`` must return argmin 0.5||w-v||^2 + tau*f(w); the
    default runs the family's decomposition engine.  Backtracking doubles
    the local Lipschitz estimate whenever the quadratic model is violated.
    """
    config = config or SolverConfig()
    if prox_fn is None:
        engine = default_engine(F)
        prox_fn = lambda v, tau: prox_decomposition(F, v, tau, engine=engine).w
    p = loss.p
    w = np.zeros(p) if w0 is None else np.asarray(w0, dtype=float).copy()
    L = loss.lipschitz_estimate()
    L0 = L
    t_momentum = 1.0
    v = w.copy()
    trace = Trace(meta={"method": "fista" if config.accelerated else "ista", "L0": L})
    start = time.perf_counter()

    fw, _ = loss.value_and_grad(w)
    obj = fw + lam * extension_value(F, w)
    prev_obj = obj
    trace.iterations.append((0, obj, np.inf, 0.0))

    for it in range(1, config.max_iters + 1):
        y = v if config.accelerated else w
        fy, gy = loss.value_and_grad(y)
        while True:
            cand = prox_fn(y - gy / L, lam / L)
            diff = cand - y
            f_cand, _ = loss.value_and_grad(cand)
            model = fy + float(gy @ diff) + 0.5 * L * float(diff @ diff)
            if config.step == "fixed" or f_cand <= model + 1e-12 * max(1.0, abs(model)):
                break
            L *= 2.0
            if L > L0 * 2.0 ** 60:
                raise SolverDivergence("backtracking exhausted; objective diverges")

        w_new = cand
        if config.accelerated:
            t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t_momentum ** 2))
            v = w_new + ((t_momentum - 1.0) / t_next) * (w_new - w)
            t_momentum = t_next
        w = w_new

        obj = loss.value_and_grad(w)[0] + lam * extension_value(F, w)
        change = abs(prev_obj - obj)
        ms = (time.perf_counter() - start) * 1e3
        trace.iterations.append((it, obj, change, ms))
        if change <= config.tol * max(1.0, abs(obj)):
            break
        if config.time_budget is not None and ms / 1e3 > config.time_budget:
            break
        prev_obj = obj
    return w, trace


def subgradient_descent(loss, F: SetFunction, lam, schedule="1/sqrt",
                        iters=1000, c=None, w0=None, time_budget=None):
    """Projected-free subgradient descent with decaying steps.

    Steps are c/t or c/sqrt(t); the reported iterates track the best
    objective seen so far (the method is not monotone).
    """
    if schedule not in ("1/t", "1/sqrt"):
        raise ValueError("schedule must be '1/t' or '1/sqrt'")
    p = loss.p
    w = np.zeros(p) if w0 is None else np.asarray(w0, dtype=float).copy()
    _, g_loss = loss.value_and_grad(w)
    g0 = g_loss + lam * greedy(F, w).s
    if c is None:
        scale = loss.signal_scale() if hasattr(loss, "signal_scale") else 1.0
        c = max(scale, 1e-12) / max(float(np.abs(g0).max()), 1e-12)
    trace = Trace(meta={"method": f"subgradient[{schedule}]", "c": c})
    start = time.perf_counter()

    best_obj = loss.value_and_grad(w)[0] + lam * extension_value(F, w)
    best_w = w.copy()
    trace.iterations.append((0, best_obj, np.inf, 0.0))
    for t in range(1, iters + 1):
        _, g_loss = loss.value_and_grad(w)
        g = g_loss + lam * greedy(F, w).s
        step = c / t if schedule == "1/t" else c / np.sqrt(t)
        w = w - step * g
        obj = loss.value_and_grad(w)[0] + lam * extension_value(F, w)
        if obj < best_obj:
            best_obj = obj
            best_w = w.copy()
        ms = (time.perf_counter() - start) * 1e3
        trace.iterations.append((t, best_obj, step, ms))
        if time_budget is not None and ms / 1e3 > time_budget:
            break
    return best_w, trace


# ---------------------------------------------------------------------------
# agglomerative path

class AgglomerativityError(RuntimeError):
    """A breakpoint certificate failed: merging is not valid for this F."""


@dataclass
class MergeEvent:
    lam: float
    merged_ids: tuple
    new_id: int


@dataclass
class PathSegment:
    lam_lo: float
    lam_hi: float
    blocks: list          # tuples of element indices, value-descending
    means: np.ndarray
    slopes: np.ndarray    # v_i(lam) = means[i] - lam * slopes[i]

    def values_at(self, lam):
        return self.means - lam * self.slopes


@dataclass
class PathResult:
    p: int
    breakpoints: np.ndarray
    events: list
    segments: list

    def segment_at(self, lam):
        for seg in self.segments:
            if seg.lam_lo <= lam < seg.lam_hi:
                return seg
        return self.segments[-1]

    def evaluate(self, lam):
        """w(lam) from the piecewise-affine block values."""
        seg = self.segment_at(lam)
        w = np.empty(self.p)
        vals = seg.values_at(lam)
        for v, blk in zip(vals, seg.blocks):
            w[list(blk)] = v
        return w

    def n_blocks(self, lam):
        return len(self.segment_at(lam).blocks)


def prox_path_agglomerative(F: SetFunction, z, certify=True) -> PathResult:
    """Homotopy in lam for the prox: blocks only merge as lam grows.

    Starts from the constant sets of z and advances to the earliest
    collision of order-adjacent affine block values.  A colliding pair
    either merges or crosses: if exchanging the two blocks leaves F
    modular (their marginals do not interact), the blocks pass each other
    with unchanged trajectories; otherwise they fuse and the affine law
    is re-derived on the coarsened partition.  Every segment's lattice is
    certified optimal at an interior penalty; failure signals a function
    whose paths are not agglomerative.
    """
    z = np.asarray(z, dtype=float)
    p = F.p
    if z.shape != (p,):
        raise ValueError("signal has wrong length")
    scale = max(1.0, float(np.abs(z).max()))
    tie_tol = 1e-12 * scale

    order = np.argsort(-z, kind="stable")
    blocks = []          # list[list[int]] value-descending
    ids = []
    events = []
    next_id = p
    cur = [int(order[0])]
    for a, b in zip(order[:-1], order[1:]):
        if z[a] - z[b] <= tie_tol:
            cur.append(int(b))
        else:
            blocks.append(cur)
            cur = [int(b)]
    blocks.append(cur)
    breakpoints = []
    for blk in blocks:
        if len(blk) == 1:
            ids.append(blk[0])
        else:
            events.append(MergeEvent(0.0, tuple(sorted(blk)), next_id))
            ids.append(next_id)
            next_id += 1
    if any(len(b) > 1 for b in blocks):
        breakpoints.append(0.0)

    def prefix_values(blks):
        out = np.empty(len(blks))
        prefix = np.zeros(p, dtype=bool)
        prev = 0.0
        for j, blk in enumerate(blks):
            prefix[blk] = True
            cur_val = F.value(prefix)
            out[j] = cur_val - prev
            prev = cur_val
        return out

    def certify_segment(seg):
        if not certify:
            return
        hi = seg.lam_hi if np.isfinite(seg.lam_hi) else seg.lam_lo + 1.0
        mid = 0.5 * (seg.lam_lo + hi)
        if mid <= 0:
            return
        part = OrderedPartition.total(p, seg.blocks)
        cert = certify_lattice(F, z, mid, part, tol=1e-7)
        if not cert.ok():
            raise AgglomerativityError(
                f"certificate failed on segment [{seg.lam_lo:.6g}, "
                f"{seg.lam_hi:.6g}) at lam={mid:.6g} "
                f"(order_ok={cert.order_ok}, base_ok={cert.base_ok})")

    segments = []
    lam = 0.0
    guard = 0
    while True:
        guard += 1
        if guard > 4 * p * p + 16:
            raise AgglomerativityError("path tracker failed to terminate")
        means = np.array([z[list(b)].mean() for b in blocks])
        sizes = np.array([len(b) for b in blocks], dtype=float)
        t = prefix_values(blocks)
        slopes = t / sizes
        vals = means - lam * slopes

        lam_next = np.inf
        for i in range(len(blocks) - 1):
            approach = slopes[i] - slopes[i + 1]
            if approach > 1e-15:
                cand = lam + max(vals[i] - vals[i + 1], 0.0) / approach
                lam_next = min(lam_next, cand)

        seg = PathSegment(lam, lam_next, [tuple(b) for b in blocks],
                          means, slopes)
        if seg.lam_hi > seg.lam_lo:
            segments.append(seg)
            certify_segment(seg)
        if not np.isfinite(lam_next):
            break

        colliding = []
        for i in range(len(blocks) - 1):
            approach = slopes[i] - slopes[i + 1]
            if approach > 1e-15:
                cand = lam + max(vals[i] - vals[i + 1], 0.0) / approach
                if cand <= lam_next + 1e-12 * max(1.0, lam_next):
                    colliding.append(i)

        # classify each colliding pair: exchanging the blocks leaves F
        # modular  <=>  the pair crosses instead of merging
        merge_pairs = set()
        cross_pairs = []
        prev_union = [None] * len(blocks)
        acc = np.zeros(p, dtype=bool)
        for j, blk in enumerate(blocks):
            prev_union[j] = acc.copy()
            acc = acc.copy()
            acc[blk] = True
        for i in colliding:
            below = prev_union[i]
            a = below.copy(); a[blocks[i]] = True
            b = below.copy(); b[blocks[i + 1]] = True
            ab = a.copy(); ab[blocks[i + 1]] = True
            delta = F.value(a) + F.value(b) - F.value(below) - F.value(ab)
            if delta > 1e-9 * scale:
                merge_pairs.add(i)
            else:
                cross_pairs.append(i)

        if merge_pairs:
            new_blocks, new_ids = [], []
            i = 0
            while i < len(blocks):
                run = [i]
                while run[-1] in merge_pairs:
                    run.append(run[-1] + 1)
                if len(run) == 1:
                    new_blocks.append(blocks[i])
                    new_ids.append(ids[i])
                else:
                    merged = sorted(k for j in run for k in blocks[j])
                    events.append(MergeEvent(float(lam_next),
                                             tuple(ids[j] for j in run), next_id))
                    new_blocks.append(merged)
                    new_ids.append(next_id)
                    next_id += 1
                i = run[-1] + 1
            blocks, ids = new_blocks, new_ids
            breakpoints.append(float(lam_next))
        else:
            # pure crossings: swap non-overlapping pairs left to right
            done = set()
            for i in cross_pairs:
                if i in done or i - 1 in done:
                    continue
                blocks[i], blocks[i + 1] = blocks[i + 1], blocks[i]
                ids[i], ids[i + 1] = ids[i + 1], ids[i]
                done.add(i)
        lam = float(lam_next)

    return PathResult(p=p, breakpoints=np.asarray(breakpoints),
                      events=events, segments=segments)


# ---------------------------------------------------------------------------
# the merging condition

@dataclass
class AggloReport:
    holds: bool
    worst_margin: float
    witness: tuple | None


def agglo_margin(F: SetFunction, A, B, C):
    """F(B u C) - F(B) - (|C|/|A|) (F(B u A) - F(B)) for C inside A."""
    from ._bits import as_mask
    p = F.p
    A = as_mask(A, p)
    B = as_mask(B, p)
    C = as_mask(C, p)
    if (A & B).any() or (C & ~A).any():
        raise ValueError("need disjoint A, B and C inside A")
    fb = F.value(B)
    ratio = C.sum() / A.sum()
    return float(F.value(B | C) - fb - ratio * (F.value(B | A) - fb))


def check_agglo_condition(F: SetFunction, max_p=AGGLO_GUARD_P, tol=1e-9):
    """Exhaustive test of the merging inequality.

    Enumerates disjoint (A, B) with A inseparable for the contraction by
    B and every non-trivial C inside A; reports the worst margin and a
    witness triple when the inequality fails.
    """
    from .setfn import is_inseparable
    p = F.p
    if p > max_p:
        raise ValueError(f"p={p} beyond the exhaustive guard ({max_p})")
    table = F.value_table()
    worst = np.inf
    witness = None
    n = 1 << p
    for b_int in range(n):
        comp = (n - 1) ^ b_int
        fb = table[b_int]
        a_int = comp
        while a_int:
            a_mask = int_to_mask(a_int, p)
            size_a = int(a_mask.sum())
            if size_a >= 2 and is_inseparable(F, a_mask, base=int_to_mask(b_int, p)):
                gain_a = table[b_int | a_int] - fb
                for c_int in submasks(a_int):
                    size_c = bin(c_int).count("1")
                    margin = (table[b_int | c_int] - fb
                              - size_c / size_a * gain_a)
                    if margin < worst:
                        worst = float(margin)
                        witness = (_indices(a_int, p), _indices(b_int, p),
                                   _indices(c_int, p))
            a_int = (a_int - 1) & comp
    if not np.isfinite(worst):
        worst = 0.0
        witness = None
    return AggloReport(holds=worst >= -tol, worst_margin=worst, witness=witness)


def _indices(m, p):
    return tuple(k for k in range(p) if (m >> k) & 1)
