"""Command-line surface.

Subcommands: eval, prox, solve, path, recover, bench.  A JSON config file
may supply any flag value; explicit flags win.  Artifacts land in
<out>/<command>-<confighash>/ so identical configurations reuse the same
names.  All file I/O is 1-based at the boundary.
"""

import argparse
import hashlib
import json
import os
import shutil
import sys

import numpy as np

from . import recovery, solver
from .lovasz import greedy, lovasz_extension
from .prox import prox_cardinality, prox_decomposition, prox_via_mnp
from .setfn import (CallableFunction, CardinalityFunction, CutFunction,
                    NoisyCutFunction, TableFunction, read_graph, read_profile)
from .sfm import MnpConvergenceError
from .solver import (QuadraticLoss, DenoisingLoss, SolverConfig,
                     SolverDivergence, proximal_gradient, subgradient_descent)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# ---------------------------------------------------------------------------
# small readers/writers (deterministic formatting)

def read_signal(path):
    vals = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].strip()
            if line:
                vals.append(float(line.split(",")[0]))
    if not vals:
        raise UsageError(f"no values in signal file {path}")
    return np.asarray(vals)


def write_signal(path, w):
    with open(path, "w") as fh:
        for v in np.asarray(w, dtype=float):
            fh.write(f"{v:.12g}\n")


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def read_csv(path):
    with open(path) as fh:
        lines = [ln.rstrip("\n") for ln in fh if ln.strip()]
    header = lines[0].split(",")
    rows = [ln.split(",") for ln in lines[1:]]
    return header, rows


def _fmt(x):
    if isinstance(x, float):
        return f"{x:.12g}"
    if isinstance(x, (np.floating,)):
        return f"{float(x):.12g}"
    return str(x)


def write_svg(path, series, xlabel="", ylabel="", title="", logy=False,
              width=640, height=420):
    """Line plot with one polyline per named series; no plotting deps."""
    ml, mr, mt, mb = 60, 20, 30, 45
    iw, ih = width - ml - mr, height - mt - mb
    xs = np.concatenate([np.asarray(x, dtype=float) for x, _ in series.values()])
    ys = np.concatenate([np.asarray(y, dtype=float) for _, y in series.values()])
    if logy:
        ys = ys[ys > 0]
    if ys.size == 0 or xs.size == 0:
        raise ValueError("nothing to plot")
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if logy:
        y0, y1 = np.log10(y0), np.log10(y1)
    if x1 <= x0:
        x1 = x0 + 1.0
    if y1 <= y0:
        y1 = y0 + 1.0
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]

    def sx(x):
        return ml + (x - x0) / (x1 - x0) * iw

    def sy(y):
        if logy:
            y = np.log10(y)
        return mt + ih - (y - y0) / (y1 - y0) * ih

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}">',
             f'<rect width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.0f}" y="18" text-anchor="middle" font-size="13">{title}</text>']
    # axes
    parts.append(f'<line x1="{ml}" y1="{mt + ih}" x2="{ml + iw}" y2="{mt + ih}" stroke="black"/>')
    parts.append(f'<line x1="{ml}" y1="{mt}" x2="{ml}" y2="{mt + ih}" stroke="black"/>')
    for k in range(5):
        xv = x0 + k * (x1 - x0) / 4
        px = sx(xv)
        parts.append(f'<line x1="{px:.1f}" y1="{mt + ih}" x2="{px:.1f}" y2="{mt + ih + 4}" stroke="black"/>')
        parts.append(f'<text x="{px:.1f}" y="{mt + ih + 16}" text-anchor="middle" font-size="10">{xv:.3g}</text>')
        yv = y0 + k * (y1 - y0) / 4
        py = mt + ih - k * ih / 4
        label = 10 ** yv if logy else yv
        parts.append(f'<line x1="{ml - 4}" y1="{py:.1f}" x2="{ml}" y2="{py:.1f}" stroke="black"/>')
        parts.append(f'<text x="{ml - 6}" y="{py + 3:.1f}" text-anchor="end" font-size="10">{label:.3g}</text>')
    parts.append(f'<text x="{ml + iw / 2:.0f}" y="{height - 8}" text-anchor="middle" font-size="11">{xlabel}</text>')
    parts.append(f'<text x="14" y="{mt + ih / 2:.0f}" text-anchor="middle" font-size="11" '
                 f'transform="rotate(-90 14 {mt + ih / 2:.0f})">{ylabel}</text>')
    for idx, (name, (x, y)) in enumerate(series.items()):
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        keep = y > 0 if logy else np.ones_like(y, dtype=bool)
        pts = " ".join(f"{sx(a):.1f},{sy(b):.1f}" for a, b in zip(x[keep], y[keep]))
        color = colors[idx % len(colors)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        ly = mt + 14 + 14 * idx
        parts.append(f'<line x1="{ml + iw - 130}" y1="{ly - 4}" x2="{ml + iw - 110}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{ml + iw - 105}" y="{ly}" font-size="10">{name}</text>')
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")


# ---------------------------------------------------------------------------
# configuration and family loading

FAMILIES = ("chain-tv", "cut", "cardinality", "noisy-cut", "table")


def _load_config(args, parser_defaults):
    cfg = {}
    if args.config:
        with open(args.config) as fh:
            cfg = json.load(fh)
        if not isinstance(cfg, dict):
            raise UsageError("config must be a JSON object")
    merged = dict(cfg)
    for key, val in vars(args).items():
        if key in ("config",):
            continue
        if val is not None and val != parser_defaults.get(key):
            merged[key] = val
        elif key not in merged:
            merged[key] = val
    return merged


def _config_hash(cfg):
    clean = {k: v for k, v in sorted(cfg.items()) if k not in ("out", "plot")}
    blob = json.dumps(clean, sort_keys=True, default=str)
    return hashlib.sha1(blob.encode()).hexdigest()[:10]


def _build_function(cfg, p_hint=None):
    family = cfg.get("family")
    if family not in FAMILIES:
        raise UsageError(f"--family must be one of {FAMILIES}")
    if family == "chain-tv":
        p = cfg.get("p") or p_hint
        if not p:
            raise UsageError("chain-tv needs --p or a signal to infer it")
        return CutFunction.chain(int(p))
    if family == "cut":
        if not cfg.get("graph"):
            raise UsageError("cut family needs --graph")
        p, edges = read_graph(cfg["graph"])
        p = max(p, int(cfg.get("p") or 0), p_hint or 0)
        return CutFunction(p, edges)
    if family == "cardinality":
        if not cfg.get("profile"):
            raise UsageError("cardinality family needs --profile")
        h = read_profile(cfg["profile"])
        return CardinalityFunction(h.size - 1, h)
    if family == "noisy-cut":
        if not cfg.get("graph"):
            raise UsageError("noisy-cut family needs --graph (the hidden graph)")
        p, edges = read_graph(cfg["graph"])
        p = max(p, int(cfg.get("p") or 0), p_hint or 0)
        penalty = cfg.get("penalty")
        if penalty is None:
            raise UsageError("noisy-cut family needs --penalty")
        return NoisyCutFunction(CutFunction(p, edges), float(penalty))
    if not cfg.get("table"):
        raise UsageError("table family needs --table")
    vals = read_signal(cfg["table"])
    p = int(np.log2(vals.size))
    if (1 << p) != vals.size:
        raise UsageError("table file must hold 2^p values")
    return TableFunction(p, vals)


_created_dirs = []


def _outdir(cfg, command):
    base = cfg.get("out") or "out"
    path = os.path.join(base, f"{command}-{_config_hash(cfg)}")
    existed = os.path.isdir(path)
    os.makedirs(path, exist_ok=True)
    if not existed:
        _created_dirs.append(path)
    return path


# ---------------------------------------------------------------------------
# subcommands

def _cmd_eval(cfg):
    w = read_signal(_require(cfg, "w"))
    F = _build_function(cfg, p_hint=w.size)
    if F.p != w.size:
        raise UsageError(f"w has length {w.size}, function expects {F.p}")
    fval = lovasz_extension(F, w)
    s = greedy(F, w).s
    print(f"f(w) = {fval:.12g}")
    print("dual = " + ",".join(f"{v:.12g}" for v in s))
    return {}


def _cmd_prox(cfg):
    z = read_signal(_require(cfg, "signal"))
    F = _build_function(cfg, p_hint=z.size)
    lam = _require_lambda(cfg)
    sol = prox_decomposition(F, z, lam)
    out = _outdir(cfg, "prox")
    write_signal(os.path.join(out, "w.csv"), sol.w)
    rows = []
    for j, blk in enumerate(sol.lattice.blocks):
        members = " ".join(str(k + 1) for k in blk)
        rows.append((j + 1, float(np.asarray(sol.w)[blk[0]]), members))
    write_csv(os.path.join(out, "lattice.csv"), ["block", "value", "members"], rows)
    return {"w.csv": out}


def _cmd_path(cfg):
    z = read_signal(_require(cfg, "signal"))
    F = _build_function(cfg, p_hint=z.size)
    path = solver.prox_path_agglomerative(F, z)
    out = _outdir(cfg, "path")
    write_csv(os.path.join(out, "breakpoints.csv"), ["lambda"],
              [(float(b),) for b in path.breakpoints])
    write_csv(os.path.join(out, "merges.csv"), ["lambda", "new_id", "merged_ids"],
              [(ev.lam, ev.new_id + 1, " ".join(str(i + 1) for i in ev.merged_ids))
               for ev in path.events])
    if cfg.get("plot"):
        lams = np.linspace(0, float(path.breakpoints[-1]) * 1.2 + 1e-9, 120) \
            if len(path.breakpoints) else np.linspace(0, 1, 2)
        series = {}
        for k in range(min(F.p, 12)):
            series[f"w[{k + 1}]"] = (lams, [path.evaluate(l)[k] for l in lams])
        write_svg(os.path.join(out, "path.svg"), series, "lambda", "block value",
                  title="regularization path")
    return {"breakpoints.csv": out}


def _cmd_solve(cfg):
    lam = _require_lambda(cfg)
    if cfg.get("design"):
        X = np.loadtxt(cfg["design"], delimiter=",", ndmin=2)
        y = read_signal(cfg["response"])
        loss = QuadraticLoss(X, y)
        p_hint = X.shape[1]
    else:
        z = read_signal(_require(cfg, "signal"))
        loss = DenoisingLoss(z)
        p_hint = z.size
    F = _build_function(cfg, p_hint=p_hint)
    method = cfg.get("method") or "fista"
    iters = int(cfg.get("iters") or 500)
    out = _outdir(cfg, "solve")
    if method in ("fista", "ista"):
        config = SolverConfig(max_iters=iters, accelerated=(method == "fista"))
        w, trace = proximal_gradient(loss, F, lam, config)
    elif method in ("subgradient-t", "subgradient-sqrt"):
        schedule = "1/t" if method == "subgradient-t" else "1/sqrt"
        w, trace = subgradient_descent(loss, F, lam, schedule=schedule, iters=iters)
    else:
        raise UsageError(f"unknown method {method!r}")
    write_signal(os.path.join(out, "w.csv"), w)
    solver.write_trace_csv(trace, os.path.join(out, "trace.csv"))
    if cfg.get("plot"):
        objs = trace.best_objectives()
        write_svg(os.path.join(out, "trace.svg"),
                  {method: (trace.times_ms() / 1e3, objs - objs.min() + 1e-16)},
                  "seconds", "objective gap", logy=True, title="solver progress")
    return {"trace.csv": out}


def _cmd_recover(cfg):
    mode = cfg.get("mode") or "theorem"
    seed = int(cfg.get("seed") or 0)
    trials = int(cfg.get("trials") or 500)
    sigmas = _float_list(cfg.get("sigma") or "0.02,0.05,0.1")
    out = _outdir(cfg, "recover")
    rows = []
    if mode == "theorem":
        sizes = [int(s) for s in str(cfg.get("blocks") or "10,10,10,10").split(",")]
        values = _float_list(cfg.get("values") or "3,1,2,0")
        truth = recovery.GroundTruth.chain_blocks(sizes, values)
        F = CutFunction.chain(truth.p)
        lams = _float_list(cfg.get("lam_grid") or "") or \
            [0.5 * recovery.lambda_bound(F, truth, recovery.compute_nu(truth)),
             recovery.lambda_bound(F, truth, recovery.compute_nu(truth))]
        for sigma in sigmas:
            for lam in lams:
                rep = recovery.monte_carlo_recovery(F, truth, sigma, lam, trials,
                                                    seed=seed)
                rows.append((sigma, lam, "tv", "", "", rep.empirical, rep.bound))
    elif mode == "robust":
        p = int(cfg.get("p") or 100)
        jump = int(cfg.get("jump") or p // 2)
        frac = float(cfg.get("outliers") or 0.05)
        penalty = float(cfg.get("penalty") or 0.5)
        reps = int(cfg.get("replications") or 20)
        results = recovery.robust_tv_experiment(p, jump, frac, sigmas, penalty,
                                                replications=reps, seed=seed)
        for r in results:
            rows.append((r.sigma, r.lam, r.method, r.error_mean, r.error_std, "", ""))
    else:
        raise UsageError("--mode must be 'theorem' or 'robust'")
    write_csv(os.path.join(out, "recover.csv"),
              ["sigma", "lambda", "method", "error_mean", "error_std",
               "recovery_rate", "bound"], rows)
    if cfg.get("plot"):
        series = {}
        methods = sorted({r[2] for r in rows})
        for m in methods:
            pts = [(r[0], r[3] if r[3] != "" else r[5]) for r in rows if r[2] == m]
            series[m] = ([a for a, _ in pts], [b for _, b in pts])
        ylab = "error" if mode == "robust" else "recovery rate"
        write_svg(os.path.join(out, "recover.svg"), series, "sigma", ylab,
                  title=f"recover ({mode})")
    return {"recover.csv": out}


def run_bench(p=1000, n=1000, lam=None, budget=10.0, seed=0, grid_step=0.5,
              mnp_tol=1e-4, subgrad_iters=200000):
    """Least-squares benchmark: dedicated-prox FISTA vs projection-based
    FISTA vs both subgradient schedules, sampled on a shared time grid.

    Returns (grid_times, {method: best objective at each grid time}).
    """
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p)) / np.sqrt(n)
    groups = np.repeat(np.linspace(3, -3, 8), p // 8 + 1)[:p]
    w_true = groups + 0.01 * rng.normal(size=p)
    y = X @ w_true + 0.1 * rng.normal(size=n)
    k = np.arange(p + 1, dtype=float)
    F = CardinalityFunction(p, k * (p - k) / p)
    loss = QuadraticLoss(X, y)
    if lam is None:
        lam = 0.02
    traces = {}
    config = SolverConfig(max_iters=10 ** 9, tol=0.0, time_budget=budget)

    dedicated = lambda v, tau: prox_cardinality(F, v, tau).w
    _, traces["fista-dedicated"] = proximal_gradient(loss, F, lam, config,
                                                     prox_fn=dedicated)
    # the generic route sees F only through its evaluation oracle
    F_oracle = CallableFunction(p, F.value)
    generic = lambda v, tau: prox_via_mnp(F_oracle, v, tau, tol=mnp_tol,
                                          max_major=2000, strict=False).w
    _, traces["fista-mnp"] = proximal_gradient(loss, F, lam, config,
                                               prox_fn=generic)
    for name, schedule in (("subgradient-1/t", "1/t"),
                           ("subgradient-1/sqrt", "1/sqrt")):
        _, traces[name] = subgradient_descent(loss, F, lam, schedule=schedule,
                                              iters=subgrad_iters,
                                              time_budget=budget)
    grid = np.arange(grid_step, budget + 1e-9, grid_step)
    sampled = {}
    for name, trace in traces.items():
        times = trace.times_ms() / 1e3
        best = trace.best_objectives()
        vals = []
        for t in grid:
            idx = np.searchsorted(times, t, side="right") - 1
            vals.append(best[max(idx, 0)])
        sampled[name] = np.asarray(vals)
    return grid, sampled


def _cmd_bench(cfg):
    p = int(cfg.get("p") or 1000)
    n = int(cfg.get("n") or p)
    budget = float(cfg.get("budget") or 10.0)
    seed = int(cfg.get("seed") or 0)
    lam = cfg.get("lam")
    grid, sampled = run_bench(p=p, n=n, lam=float(lam) if lam else None,
                              budget=budget, seed=seed)
    out = _outdir(cfg, "bench")
    rows = []
    for name, vals in sorted(sampled.items()):
        for t, v in zip(grid, vals):
            rows.append((name, float(t), float(v)))
    write_csv(os.path.join(out, "bench.csv"), ["method", "time_s", "objective"], rows)
    if cfg.get("plot"):
        floor = min(v.min() for v in sampled.values())
        series = {name: (grid, vals - floor + 1e-12)
                  for name, vals in sorted(sampled.items())}
        write_svg(os.path.join(out, "bench.svg"), series, "seconds",
                  "objective gap", logy=True, title=f"solver comparison (p={p})")
    return {"bench.csv": out}


def _require(cfg, key):
    val = cfg.get(key)
    if not val:
        raise UsageError(f"--{key} is required")
    return val


def _require_lambda(cfg):
    lam = cfg.get("lam")
    if lam is None:
        raise UsageError("--lambda is required")
    lam = float(lam)
    if lam < 0:
        raise UsageError("--lambda must be non-negative")
    return lam


def _float_list(text):
    if text is None or text == "":
        return []
    if isinstance(text, (list, tuple)):
        return [float(x) for x in text]
    return [float(x) for x in str(text).split(",") if x.strip()]


# ---------------------------------------------------------------------------

def build_parser():
    parser = _Parser(prog="submodreg",
                     description="level-set regularization toolbox")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--config", help="JSON config; flags override its fields")
        sp.add_argument("--out", help="output directory (default ./out)")
        sp.add_argument("--seed", type=int, help="RNG seed")
        sp.add_argument("--plot", action="store_true", help="emit SVG plots")
        sp.add_argument("--family", choices=FAMILIES)
        sp.add_argument("--graph", help="edge-list file (1-based 'i j w' lines)")
        sp.add_argument("--profile", help="cardinality profile file")
        sp.add_argument("--table", help="explicit 2^p value table file")
        sp.add_argument("--penalty", type=float, help="noisy-cut mismatch penalty")
        sp.add_argument("--p", type=int, help="ground-set size override")

    sp = sub.add_parser("eval", help="evaluate f(w) and a greedy dual")
    add_common(sp)
    sp.add_argument("--w", help="input vector (single-column CSV)")

    sp = sub.add_parser("prox", help="proximal operator of lambda*f")
    add_common(sp)
    sp.add_argument("--signal")
    sp.add_argument("--lambda", dest="lam", type=float)

    sp = sub.add_parser("path", help="agglomerative regularization path")
    add_common(sp)
    sp.add_argument("--signal")

    sp = sub.add_parser("solve", help="FISTA/ISTA/subgradient solver")
    add_common(sp)
    sp.add_argument("--signal")
    sp.add_argument("--design", help="CSV design matrix (least squares)")
    sp.add_argument("--response", help="response vector for --design")
    sp.add_argument("--lambda", dest="lam", type=float)
    sp.add_argument("--method",
                    choices=["fista", "ista", "subgradient-t", "subgradient-sqrt"])
    sp.add_argument("--iters", type=int)

    sp = sub.add_parser("recover", help="level-set recovery experiments")
    add_common(sp)
    sp.add_argument("--mode", choices=["theorem", "robust"])
    sp.add_argument("--trials", type=int)
    sp.add_argument("--sigma", help="comma-separated noise grid")
    sp.add_argument("--lam-grid", dest="lam_grid", help="comma-separated penalties")
    sp.add_argument("--blocks", help="comma-separated block sizes (theorem mode)")
    sp.add_argument("--values", help="comma-separated block values (theorem mode)")
    sp.add_argument("--jump", type=int, help="jump position (robust mode)")
    sp.add_argument("--outliers", type=float, help="outlier fraction (robust mode)")
    sp.add_argument("--replications", type=int)

    sp = sub.add_parser("bench", help="objective-vs-time method comparison")
    add_common(sp)
    sp.add_argument("--n", type=int, help="number of least-squares rows")
    sp.add_argument("--budget", type=float, help="seconds per method")
    sp.add_argument("--lambda", dest="lam", type=float)

    return parser


COMMANDS = {
    "eval": _cmd_eval,
    "prox": _cmd_prox,
    "path": _cmd_path,
    "solve": _cmd_solve,
    "recover": _cmd_recover,
    "bench": _cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    _created_dirs.clear()
    try:
        args = parser.parse_args(argv)
        defaults = {k: parser.get_default(k) for k in vars(args)}
        cfg = _load_config(args, defaults)
        COMMANDS[args.command](cfg)
        return EXIT_OK
    except UsageError as err:
        _cleanup_partial()
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (FileNotFoundError, ValueError, OSError, json.JSONDecodeError) as err:
        _cleanup_partial()
        print(f"error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (SolverDivergence, MnpConvergenceError, RuntimeError) as err:
        _cleanup_partial()
        print(f"numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERICAL


def _cleanup_partial():
    for path in _created_dirs:
        shutil.rmtree(path, ignore_errors=True)
    _created_dirs.clear()


if __name__ == "__main__":
    sys.exit(main())
