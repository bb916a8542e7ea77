"""Command-line driver: ``puncture {theory,spectrum,sweep,cluster,masks}``.

Every command writes CSV tables (and, where useful, an SVG plot) into
``--out``. Randomized commands repeat over ``--reps`` realizations with
seeds ``seed ^ rep`` and report the mean and sample standard deviation.
Exit status: 0 on success, 2 on configuration or input errors, 3 on
numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import io as pio
from .eigen import SPECTRUM_LIMIT, alignment, dense_eigenvalues, top_eigen
from .errors import ConfigError, InputError, NumericalError, PuncturingError
from .kernel import build_kernel
from .masks import MaskConfig, gen_data_mask, gen_kernel_mask
from .svg import Plot
from .synth import GmmModel, classify_by_sign, draw_class_means, sample_gmm, two_class_means
from .theory import (
    TheoryParams,
    clustering_error,
    gamma_threshold,
    limiting_density,
    small_eps_summary,
    spike_prediction,
    support_edges,
)

__all__ = ["main", "build_parser", "render_spectrum"]


# ---------------------------------------------------------------------------
# argument parsing


def _floats(text):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _matrix(text):
    """``"10,5.5;5.5,15"`` -> 2x2 array."""
    try:
        rows = [[float(t) for t in r.split(",")] for r in text.split(";")]
        return np.array(rows)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected rows 'a,b;c,d', got {text!r}") from None


def _grid(text):
    """``lo:hi:num`` (linear) or ``lo:hi:num:log`` (geometric)."""
    parts = text.split(":")
    try:
        lo, hi, num = float(parts[0]), float(parts[1]), int(parts[2])
    except (IndexError, ValueError):
        raise argparse.ArgumentTypeError(f"expected lo:hi:num[:log], got {text!r}") from None
    if num < 1:
        raise argparse.ArgumentTypeError("grid needs at least one point")
    if len(parts) > 3 and parts[3] == "log":
        if lo <= 0 or hi <= 0:
            raise argparse.ArgumentTypeError("log grid needs positive bounds")
        return list(np.geomspace(lo, hi, num))
    return list(np.linspace(lo, hi, num))


def _common(sub, n, p, eps_s, eps_b, b, topk=1):
    sub.add_argument("--n", type=int, default=n, help="number of samples")
    sub.add_argument("--p", type=int, default=p, help="feature dimension")
    sub.add_argument("--eps-s", type=float, default=eps_s, help="data puncturing rate")
    sub.add_argument("--eps-b", type=float, default=eps_b, help="kernel puncturing rate")
    sub.add_argument("--b", type=int, default=b, choices=(0, 1), help="kernel diagonal")
    sub.add_argument("--seed", type=int, default=0)
    sub.add_argument("--out", type=Path, default=Path("."), help="output directory")
    sub.add_argument("--reps", type=int, default=1, help="Monte Carlo repetitions")
    sub.add_argument("--topk", type=int, default=topk, help="number of eigenpairs")
    sub.add_argument("--tol", type=float, default=1e-9, help="eigen residual tolerance")
    sub.add_argument("--max-iter", type=int, default=5000, help="eigensolver product budget")
    sub.add_argument("--workers", type=int, default=1, help="parallel repetitions")
    sub.add_argument("--save-masks", type=Path, help="write the first realization's masks (PNCM)")
    sub.add_argument("--load-masks", type=Path, help="read masks (PNCM) instead of drawing them")
    sub.add_argument("--dump-kernel", type=Path, help="write the first realization's kernel (PNCK)")
    sub.add_argument("--complex", action="store_true", help="complex Gaussian noise")


def build_parser():
    ap = argparse.ArgumentParser(prog="puncture", description="Two-way punctured kernel experiments.")
    subs = ap.add_subparsers(dest="command", required=True)

    sp = subs.add_parser("theory", help="thresholds, spikes, alignments and limiting density")
    _common(sp, 4000, 4000, 0.2, 0.4, 1)
    sp.add_argument("--c0", type=float, help="dimension ratio p/n (default: p/n)")
    sp.add_argument("--ell", type=_floats, default=[50.0], help="signal strengths")
    sp.add_argument("--grid", type=_grid, help="density grid lo:hi:num")
    sp.add_argument("--eta", type=float, default=1e-4, help="imaginary offset for the density (0: exact)")

    sp = subs.add_parser("spectrum", help="empirical spectrum against the limiting law")
    _common(sp, 4000, 200, 0.2, 0.4, 1)
    sp.add_argument("--cov", type=_matrix, default=_matrix("10,5.5;5.5,15"), help="class mean covariance")
    sp.add_argument("--proportions", type=_floats, default=[0.4, 0.6])
    sp.add_argument("--input", type=Path, help="data matrix (PNCX or CSV) instead of a mixture")
    sp.add_argument("--ell", type=_floats, help="spike strengths to mark for --input data")
    sp.add_argument("--bins", type=int, help="histogram bins (default Freedman-Diaconis)")
    sp.add_argument("--eta", type=float, default=1e-4)
    sp.add_argument("--grid-points", type=int, default=400)

    sp = subs.add_parser("sweep", help="alignment and clustering error along one parameter")
    _common(sp, 4000, 4000, 0.2, 0.4, 1)
    sp.add_argument("--axis", required=True, help="eps_b, eps_s or ell")
    sp.add_argument("--values", type=_floats, help="comma-separated grid")
    sp.add_argument("--grid", type=_grid, help="grid lo:hi:num[:log]")
    sp.add_argument("--ell", type=float, default=50.0)
    sp.add_argument("--c0", type=float)
    sp.add_argument("--constant-product", type=float, help="hold eps_s^2 eps_b at this value")
    sp.add_argument("--simulate", action="store_true", help="add Monte Carlo columns")

    sp = subs.add_parser("cluster", help="spectral clustering on the punctured kernel")
    _common(sp, 4000, 2000, 0.2, 1.0, 0, topk=2)
    sp.add_argument("--input", type=Path, help="data matrix p x n (PNCX or CSV)")
    sp.add_argument("--labels", type=Path, help="class labels (+-1 or 0/1), one per sample")
    sp.add_argument("--truth", type=Path, help="population eigenvectors, n x k (PNCX or CSV)")
    sp.add_argument("--cov", type=_matrix, default=_matrix("20,12;12,30"))
    sp.add_argument("--proportions", type=_floats, default=[0.4, 0.6])
    sp.add_argument("--ell", type=float, help="balanced +-mu mixture with ||mu||^2 = ell")

    sp = subs.add_parser("masks", help="draw masks, report densities and product counts")
    _common(sp, 500, 500, 0.2, 0.4, 1)
    return ap


# ---------------------------------------------------------------------------
# helpers


def _check(args):
    if args.n < 1 or args.p < 1:
        raise ConfigError("--n and --p must be >= 1")
    if args.reps < 1 or args.workers < 1:
        raise ConfigError("--reps and --workers must be >= 1")
    if args.topk < 1 or args.topk > args.n:
        raise ConfigError(f"--topk must lie in [1, n], got {args.topk}")
    if not args.tol > 0 or args.max_iter < 1:
        raise ConfigError("--tol must be positive and --max-iter >= 1")
    if not 0 <= args.seed < 2**64:
        raise ConfigError("--seed must be a 64-bit unsigned integer")
    MaskConfig(args.eps_s, args.eps_b, args.b, args.seed)
    args.out.mkdir(parents=True, exist_ok=True)


def _mean_std(values):
    values = np.asarray(values, dtype=float)
    std = float(values.std(axis=0, ddof=1)) if len(values) > 1 else 0.0
    return float(values.mean(axis=0)), std


def _run_reps(fn, args, payload):
    reps = range(args.reps)
    if args.workers > 1 and args.reps > 1:
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            return list(pool.map(fn, [payload] * args.reps, reps))
    return [fn(payload, r) for r in reps]


def _masks(cfg, p, n, load=None):
    if load is not None:
        recs = pio.read_masks(load)
        if len(recs) != 2:
            raise InputError(f"{load}: expected a data mask and a kernel mask")
        s, bm = recs
        if (s.rows, s.cols) != (p, n) or bm.n != n:
            raise InputError(f"{load}: mask dimensions do not match p={p}, n={n}")
        return s, bm
    return gen_data_mask(p, n, cfg), gen_kernel_mask(n, cfg)


def _realize(x, pl, rep):
    """Masks, kernel and side outputs for one repetition."""
    p, n = x.shape
    cfg = MaskConfig(pl["eps_s"], pl["eps_b"], pl["b"], pl["seed"] ^ rep)
    s, bm = _masks(cfg, p, n, pl.get("load_masks"))
    k = build_kernel(x, s, bm)
    if rep == 0:
        if pl.get("save_masks"):
            pio.write_masks(pl["save_masks"], s, bm)
        if pl.get("dump_kernel"):
            pio.write_kernel(pl["dump_kernel"], k)
    return s, bm, k


def _payload(args, **extra):
    pl = dict(
        n=args.n, p=args.p, eps_s=args.eps_s, eps_b=args.eps_b, b=args.b, seed=args.seed,
        topk=args.topk, tol=args.tol, max_iter=args.max_iter, complex=args.complex,
        save_masks=args.save_masks, load_masks=args.load_masks, dump_kernel=args.dump_kernel,
    )
    pl.update(extra)
    return pl


def _gmm(pl, seed):
    if pl.get("ell") is not None and pl.get("cov") is None:
        means, props = two_class_means(pl["p"], pl["ell"], seed), (0.5, 0.5)
    else:
        cov = np.asarray(pl["cov"])
        if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or cov.shape[0] != len(pl["proportions"]):
            raise ConfigError("--cov must be k x k with k = number of proportions")
        try:
            means = draw_class_means(pl["p"], cov, seed)
        except np.linalg.LinAlgError:
            raise ConfigError("--cov must be positive definite") from None
        props = tuple(pl["proportions"])
    model = GmmModel(pl["p"], means, props, seed, complex_data=pl["complex"])
    return sample_gmm(model, pl["n"])


# ---------------------------------------------------------------------------
# theory


def cmd_theory(args):
    c0 = args.c0 if args.c0 is not None else args.p / args.n
    params = TheoryParams(c0, args.eps_s, args.eps_b, args.b)
    gamma = gamma_threshold(params)
    rows, small = [], []
    for ell in args.ell:
        pr = spike_prediction(ell, params, gamma)
        rows.append((ell, gamma, pr.rho, pr.zeta, clustering_error(pr.zeta), int(pr.isolated)))
        se = small_eps_summary(params, ell)
        small.append((ell, se.center, se.radius, se.ell_prime, se.rho_prime, se.zeta_approx, se.gamma_approx))
    pio.write_csv(args.out / "theory.csv", ["ell", "gamma", "rho", "zeta", "pe", "isolated"], rows)
    pio.write_csv(
        args.out / "small_eps.csv",
        ["ell", "center", "radius", "ell_prime", "rho_prime", "zeta_approx", "gamma_approx"],
        small,
    )
    edges = support_edges(params)
    pio.write_csv(args.out / "edges.csv", ["i", "x"], [(i, e) for i, e in enumerate(edges)])
    grid = args.grid
    if grid is None:
        lo, hi = edges[0], edges[-1]
        pad = 0.05 * (hi - lo)
        grid = list(np.linspace(lo - pad, hi + pad, 400))
    dens = limiting_density(params, grid, eta=args.eta)
    pio.write_csv(args.out / "density.csv", ["x", "density"], zip(dens.grid, dens.density))
    print(f"c0={c0:g} gamma={gamma:.10g} edges={', '.join(f'{e:.6g}' for e in edges)}")
    for r in rows:
        print(f"ell={r[0]:g} rho={r[2]:.10g} zeta={r[3]:.10g} pe={r[4]:.6g}")


# ---------------------------------------------------------------------------
# spectrum


def _spectrum_rep(pl, rep):
    seed = pl["seed"] ^ rep
    if pl.get("input") is not None:
        x, ells = pio.read_matrix(pl["input"]), list(pl.get("ell") or [])
    else:
        x, truth = _gmm(pl, seed)
        ells = [v for v, m in zip(truth.spike_spectrum.values, truth.spike_spectrum.multiplicities) for _ in range(m)]
    _, _, k = _realize(x, pl, rep)
    if rep == 0:
        vals = dense_eigenvalues(k)
    else:
        vals = top_eigen(k, max(1, min(len(ells), k.n)), pl["tol"], pl["max_iter"], seed).values
    return vals, ells


def _fd_edges(vals, bins):
    if bins is not None:
        if bins < 1:
            raise ConfigError("--bins must be >= 1")
        return np.histogram_bin_edges(vals, bins=bins)
    return np.histogram_bin_edges(vals, bins="fd")


def cmd_spectrum(args):
    pl = _payload(args, cov=args.cov, proportions=args.proportions, input=args.input, ell=args.ell)
    if args.input is not None:
        x = pio.read_matrix(args.input)
        pl["p"], pl["n"] = x.shape
    if pl["n"] > SPECTRUM_LIMIT:
        raise ConfigError(f"spectrum needs the full eigendecomposition; n <= {SPECTRUM_LIMIT}")
    results = _run_reps(_spectrum_rep, args, pl)
    vals, ells = results[0]
    p, n = pl["p"], pl["n"]
    params = TheoryParams.from_dims(p, n, args.eps_s, args.eps_b, args.b)
    gamma = gamma_threshold(params)

    pio.write_csv(args.out / "spectrum.csv", ["lambda"], [(float(v),) for v in vals])
    edges = support_edges(params)
    lo, hi = min(edges[0], vals[-1]), max(edges[-1], vals[0])
    pad = 0.02 * (hi - lo)
    grid = np.linspace(lo - pad, hi + pad, args.grid_points)
    dens = limiting_density(params, grid, eta=args.eta)
    pio.write_csv(args.out / "density.csv", ["x", "nu"], zip(dens.grid, dens.density))

    spikes = []
    for i in range(len(ells)):
        rho = [spike_prediction(r[1][i], params, gamma).rho for r in results if i < len(r[1])]
        emp = [r[0][i] for r in results if i < len(r[0])]
        rm, _ = _mean_std(rho)
        em, es = _mean_std(emp)
        spikes.append((i + 1, rm, em))
        print(f"spike {i + 1}: rho_pred={rm:.6g} lambda_emp={em:.6g} +- {es:.2g}")
    pio.write_csv(args.out / "spikes.csv", ["i", "rho_pred", "lambda_emp"], spikes)

    render_spectrum(args.out, args.bins, title=f"spectrum p={p} n={n}")


def _read_table(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(c) for c in r] for r in rows[1:]]).reshape(len(rows) - 1, len(rows[0]))


def render_spectrum(out, bins=None, title="spectrum"):
    """Draw ``spectrum.svg`` from the CSV files in ``out`` alone."""
    out = Path(out)
    vals = _read_table(out / "spectrum.csv")[:, 0]
    dens = _read_table(out / "density.csv")
    spikes = _read_table(out / "spikes.csv")
    bin_edges = _fd_edges(vals, bins)
    counts, _ = np.histogram(vals, bins=bin_edges)
    heights = counts / (len(vals) * np.diff(bin_edges))
    plot = Plot(title=title, xlabel="eigenvalue", ylabel="density")
    plot.bars(bin_edges, heights).line(dens[:, 0], dens[:, 1])
    if len(spikes):
        zeros = np.zeros(len(spikes))
        plot.circles(spikes[:, 1], zeros, color="#d62728").circles(spikes[:, 2], zeros)
    plot.save(out / "spectrum.svg")


# ---------------------------------------------------------------------------
# sweep


def _sweep_point(axis, value, args, product):
    eps_s, eps_b, ell = args.eps_s, args.eps_b, args.ell
    if axis == "eps_b":
        eps_b = value
        if product is not None:
            eps_s = math.sqrt(product / eps_b)
    elif axis == "eps_s":
        eps_s = value
        if product is not None:
            eps_b = product / eps_s**2
    else:
        ell = value
    if not (0 < eps_s <= 1 and 0 < eps_b <= 1):
        raise ConfigError(f"grid point {axis}={value} gives rates ({eps_s:g}, {eps_b:g}) outside (0, 1]")
    if not ell > 0:
        raise ConfigError("ell must be positive")
    return eps_s, eps_b, ell


def _sweep_rep(pl, rep):
    seed = pl["seed"] ^ rep
    out, cache = [], {}
    for eps_s, eps_b, ell in pl["points"]:
        if ell not in cache:
            cache[ell] = _gmm(dict(pl, ell=ell, cov=None), seed)
        x, truth = cache[ell]
        labels = np.where(truth.labels == 0, 1, -1)
        _, _, k = _realize(x, dict(pl, eps_s=eps_s, eps_b=eps_b), rep)
        basis = top_eigen(k, 1, pl["tol"], pl["max_iter"], seed)
        v = basis.vectors[:, 0]
        out.append((classify_by_sign(v, labels), alignment(basis, truth.v[:, :1], range(1))))
    return out


def cmd_sweep(args):
    if args.axis not in ("eps_b", "eps_s", "ell"):
        raise ConfigError(f"--axis must be eps_b, eps_s or ell, got {args.axis!r}")
    values = args.values if args.values is not None else args.grid
    if not values:
        raise ConfigError("give the grid with --values or --grid")
    product = args.constant_product
    if product is not None and (args.axis == "ell" or not product > 0):
        raise ConfigError("--constant-product needs a positive value and an eps axis")
    points = [_sweep_point(args.axis, v, args, product) for v in values]
    c0 = args.c0 if args.c0 is not None else args.p / args.n

    theory = []
    for eps_s, eps_b, ell in points:
        params = TheoryParams(c0, eps_s, eps_b, args.b)
        pr = spike_prediction(ell, params)
        theory.append((pr.gamma, pr.rho, pr.zeta, clustering_error(pr.zeta)))

    header = ["param", "gamma", "rho", "zeta", "pe_theory"]
    rows = [[v, *t] for v, t in zip(values, theory)]
    if args.simulate:
        pl = _payload(args, points=points, cov=None)
        reps = _run_reps(_sweep_rep, args, pl)
        header += ["pe_empirical", "pe_empirical_std", "align_empirical", "align_empirical_std"]
        for i, row in enumerate(rows):
            pe = _mean_std([r[i][0] for r in reps])
            al = _mean_std([r[i][1] for r in reps])
            row += [pe[0], pe[1], al[0], al[1]]
    header += ["eps_s", "eps_b", "ell"]
    for row, pt in zip(rows, points):
        row += list(pt)
    pio.write_csv(args.out / "sweep.csv", header, rows)
    for row in rows:
        extra = f" pe_emp={row[5]:.4g}+-{row[6]:.2g} align_emp={row[7]:.4g}" if args.simulate else ""
        print(f"{args.axis}={row[0]:g} zeta={row[3]:.6g} pe={row[4]:.6g}{extra}")


# ---------------------------------------------------------------------------
# cluster


def _read_labels(path, n):
    lab = np.asarray(pio.read_matrix(path)).real.ravel()
    if lab.shape != (n,):
        raise InputError(f"{path}: expected {n} labels, got {lab.size}")
    uniq = set(np.unique(lab).tolist())
    if uniq <= {-1.0, 1.0}:
        return lab.astype(int)
    if uniq <= {0.0, 1.0}:
        return np.where(lab == 0, 1, -1)
    raise InputError(f"{path}: labels must be +-1 or 0/1")


def _cluster_rep(pl, rep):
    x = pl["x"]
    _, _, k = _realize(x, pl, rep)
    basis = top_eigen(k, pl["topk"], pl["tol"], pl["max_iter"], pl["seed"] ^ rep)
    vecs = basis.vectors
    out = {"eigenvalue": list(basis.values), "residual": [pr.residual for pr in basis.pairs]}
    if pl.get("truth") is not None:
        v = pl["truth"]
        kk = min(v.shape[1], vecs.shape[1])
        out["alignment"] = [alignment(vecs, v, range(i, i + 1)) for i in range(kk)]
    if pl.get("labels") is not None:
        out["error"] = [classify_by_sign(vecs[:, i], pl["labels"]) for i in range(vecs.shape[1])]
    out["flop_count"] = [k.flop_count]
    out["stored_entries"] = [k.stored_entries]
    out["flops_per_n2p"] = [k.flop_count / (k.n**2 * k.p)]
    return out, (vecs if rep == 0 else None)


def cmd_cluster(args):
    labels = truth = None
    if args.input is not None:
        x = pio.read_matrix(args.input)
        p, n = x.shape
        if args.labels is not None:
            labels = _read_labels(args.labels, n)
        if args.truth is not None:
            truth = np.asarray(pio.read_matrix(args.truth))
            if truth.shape[0] != n:
                raise InputError(f"{args.truth}: expected {n} rows, got {truth.shape[0]}")
            if not np.allclose(truth.conj().T @ truth, np.eye(truth.shape[1]), atol=1e-8):
                raise InputError(f"{args.truth}: columns are not orthonormal")
    else:
        p, n = args.p, args.n
        pl = _payload(args, cov=None if args.ell is not None else args.cov,
                      proportions=args.proportions, ell=args.ell)
        x, gt = _gmm(pl, args.seed)
        truth = gt.v
        if len(np.unique(gt.labels)) == 2:
            labels = np.where(gt.labels == 0, 1, -1)
    if args.topk > n:
        raise ConfigError(f"--topk must not exceed n={n}")
    pl = _payload(args, x=x, truth=truth, labels=labels, n=n, p=p)
    results = _run_reps(_cluster_rep, args, pl)
    vecs = results[0][1]

    rows = []
    for key in results[0][0]:
        for i in range(len(results[0][0][key])):
            m, s = _mean_std([r[0][key][i] for r in results])
            rows.append((key, i + 1, m, s))
    pio.write_csv(args.out / "result.csv", ["quantity", "index", "mean", "std"], rows)
    vec_rows = [[i] + [float(c) for c in np.real(vecs[i])] for i in range(n)]
    if np.iscomplexobj(vecs):
        vec_rows = [r + [float(c) for c in np.imag(vecs[i])] for i, r in enumerate(vec_rows)]
        header = ["i"] + [f"re_v{j + 1}" for j in range(vecs.shape[1])] + [f"im_v{j + 1}" for j in range(vecs.shape[1])]
    else:
        header = ["i"] + [f"v{j + 1}" for j in range(vecs.shape[1])]
    pio.write_csv(args.out / "eigenvectors.csv", header, vec_rows)
    for key, i, m, s in rows:
        print(f"{key}[{i}] = {m:.8g} +- {s:.2g}")


# ---------------------------------------------------------------------------
# masks


def _masks_rep(pl, rep):
    p, n = pl["p"], pl["n"]
    ones = np.ones((p, n))
    s, bm, k = _realize(ones, pl, rep)
    return (s.density(), bm.density(), bm.stored_entries, k.flop_count, k.flop_count / (n * n * p))


def cmd_masks(args):
    pl = _payload(args)
    results = np.array(_run_reps(_masks_rep, args, pl), dtype=float)
    n, p = args.n, args.p
    expected = (
        args.eps_s,
        args.eps_b,
        args.eps_b * n * (n - 1) / 2 + (n if args.b else 0),
        None,
        args.eps_s**2 * args.eps_b,
    )
    names = ["data_density", "kernel_density", "stored_entries", "flop_count", "flops_per_n2p"]
    rows = []
    for j, name in enumerate(names):
        m, s = _mean_std(results[:, j])
        rows.append((name, m, s, "" if expected[j] is None else float(expected[j])))
        print(f"{name} = {m:.8g} +- {s:.2g}" + ("" if expected[j] is None else f" (expected {expected[j]:.8g})"))
    pio.write_csv(args.out / "masks.csv", ["quantity", "mean", "std", "expected"], rows)


# ---------------------------------------------------------------------------

_COMMANDS = {
    "theory": cmd_theory,
    "spectrum": cmd_spectrum,
    "sweep": cmd_sweep,
    "cluster": cmd_cluster,
    "masks": cmd_masks,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        _check(args)
        _COMMANDS[args.command](args)
    except NumericalError as exc:
        print(f"puncture: numerical error: {exc}", file=sys.stderr)
        return 3
    except (PuncturingError, OSError) as exc:
        print(f"puncture: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
