"""Command-line front end.

Every run writes its outputs plus ``manifest.json`` (parameters, seed, version,
wall-clock, SHA-256 of each output) into ``--out-dir``. ``betaedge replay``
re-executes a manifest and compares digests.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import math
import sys
import tempfile
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .edge import density_histogram, laplace_average, sample_edge_measures
from .ensemble import EnsembleParams, Scaling, sample_matrix
from .oracle import EnumerationLimitError, oracle_table
from .rng import MASK64, RngStream, default_threads
from .spectral import BudgetExceeded, Method, asymptotic_trace_moment, estimate_trace_moment
from . import walks

EXIT_USAGE = 2
EXIT_BUDGET = 3


class UsageError(Exception):
    pass


def write_table(rows: list[dict], path: Path, fmt: str) -> Path:
    path = path.with_suffix("." + fmt)
    if fmt == "json":
        path.write_text(json.dumps(rows, indent=1) + "\n")
    else:
        with path.open("w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else [])
            w.writeheader()
            w.writerows(rows)
    return path


def write_json(obj, path: Path) -> Path:
    path.write_text(json.dumps(obj, indent=1, default=_jsonable) + "\n")
    return path


def _jsonable(x):
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating,)):
        return float(x)
    if isinstance(x, Fraction):
        return str(x)
    raise TypeError(f"not serializable: {type(x)}")


def _params(args, scaling=None) -> EnsembleParams:
    try:
        return EnsembleParams(args.n, args.beta, Scaling(scaling or args.scaling), args.seed)
    except ValueError as err:
        raise UsageError(str(err)) from None


def run_sample(args, out: Path) -> list[Path]:
    params = _params(args)
    m = sample_matrix(params, RngStream(args.seed, 0))
    if args.format == "json":
        return [write_json({"n": params.n, "beta": params.beta, "scaling": params.scaling.value,
                            "diag": m.diag.tolist(), "offdiag": m.offdiag.tolist()}, out / "matrix.json")]
    rows = [{"index": i, "diag": float(m.diag[i]), "offdiag": float(m.offdiag[i]) if i < m.n - 1 else ""}
            for i in range(m.n)]
    return [write_table(rows, out / "matrix", "csv")]


def run_moments(args, out: Path) -> list[Path]:
    params = _params(args)
    if args.p < 1 or args.samples < 2:
        raise UsageError("need p >= 1 and samples >= 2")
    est = estimate_trace_moment(params, args.p, args.samples, Method(args.method), threads=args.threads)
    result = {
        "n": params.n, "beta": params.beta, "power": est.power, "mean": est.mean, "stderr": est.stderr,
        "samples": est.samples, "scaling": est.scaling.value, "method": est.method.value,
        "asymptotic_value": None, "ratio": None, "zero_z_score": None,
    }
    if args.p % 2:
        result["zero_z_score"] = est.z_score(0.0)
    elif params.scaling is Scaling.EDGE_NORMALIZED:
        target = asymptotic_trace_moment(params.n, args.p)
        result["asymptotic_value"] = target
        result["ratio"] = est.mean / target
    return [write_json(result, out / "moments.json")]


def _rational(text: str) -> Fraction:
    try:
        value = Fraction(text)
    except (ValueError, ZeroDivisionError):
        raise UsageError(f"not a rational number: {text!r}") from None
    if value < 1:
        raise UsageError(f"beta must be >= 1, got {text}")
    return value


def run_oracle(args, out: Path) -> list[Path]:
    betas = [_rational(b) for b in args.beta]
    try:
        rows = oracle_table(args.n, args.k, betas, Scaling(args.scaling))
    except EnumerationLimitError as err:
        raise BudgetExceeded(str(err)) from None
    return [write_table(rows, out / "oracle", args.format)]


def _bijection_rows(kmax: int) -> list[dict]:
    rows = []
    for k in range(kmax + 1):
        paths = walks.enumerate_dyck(k)
        images = set()
        roundtrip = sandwich = True
        for d in paths:
            top = max(d.heights())
            for cut in range(1, k + 2):
                b = walks.dyck_to_bridge(d, cut)
                images.add(b.steps)
                roundtrip &= walks.bridge_to_dyck(b) == (d, cut)
                h = np.concatenate([[0], np.cumsum(b.steps)])
                span = int(h.max() - h.min())
                sandwich &= span - 1 <= top <= span + 1
        rows.append({"k": k, "dyck_paths": len(paths), "catalan": walks.catalan(k),
                     "pairs": (k + 1) * len(paths), "distinct_bridges": len(images),
                     "central_binomial": math.comb(2 * k, k), "roundtrip_ok": roundtrip,
                     "sandwich_ok": sandwich})
    return rows


def run_walks(args, out: Path) -> list[Path]:
    k = args.k
    stream = RngStream(args.seed, 0)
    if args.study == "bijection":
        if k > 7:
            raise UsageError("exhaustive bijection check is limited to k <= 7")
        return [write_table(_bijection_rows(k), out / "bijection", args.format)]
    if args.study == "ratio":
        rows = []
        for i, (name, ev) in enumerate(walks.EVENTS.items()):
            r = walks.bridge_vs_walk_ratio(k, ev, args.samples, stream.substream(i))
            rows.append({"event": name, "k": k, "p_bridge": r.p_bridge, "p_walk": r.p_walk, "ratio": r.ratio})
        return [write_table(rows, out / "ratio", args.format)]
    if args.samples < 1000:
        raise UsageError("tail studies need at least 1000 samples")
    if args.study == "max":
        table = walks.tail_study_max(k, args.lambdas, args.samples, stream, args.threads)
        name = "tail_max"
    else:
        thresholds = args.thresholds or [k**0.6]
        table = walks.tail_study_occupation(k, thresholds, args.samples, stream, args.threads)
        name = "tail_occupation"
    rows =[{"k": k, **{f: getattr(r, f) for f in r.__dataclass_fields__}} for r in table]
    return [write_table(rows, out / name, args.format)]


PLOT_SCRIPT = """# gnuplot script; run from the output directory
set datafile separator ','
set xlabel 'theta'
set ylabel 'density'
f(x) = x > 0 ? 2*sqrt(2)/pi*sqrt(x) : 0
plot 'histogram.csv' every ::1 using (($1+$2)/2):3:4 with yerrorbars title 'edge measure', \\
     f(x) title 'limit density'
"""


def run_edge_law(args, out: Path) -> list[Path]:
    params = _params(args, scaling="raw")
    if not 0 < args.gamma < 2.0 / 3.0:
        raise UsageError("gamma must lie in (0, 2/3)")
    if args.draws < 2:
        raise UsageError("need at least 2 draws")
    if any(c <= 0 for c in args.c):
        raise UsageError("Laplace parameters must be positive")
    r_n = params.n ** (-args.gamma)
    window = tuple(args.window)
    if not window[0] < window[1]:
        raise UsageError("window needs theta_min < theta_max")
    measures = sample_edge_measures(params, r_n, window, args.draws, RngStream(args.seed, 0), args.threads)
    paths = []
    hist = density_histogram(measures, args.bins, (max(window[0], 0.0), min(window[1], args.hist_max)),
                             min_measures=min(10, args.draws))
    rows = [{"theta_lo": b.lo, "theta_hi": b.hi, "density": b.density, "stderr": b.stderr,
             "target": b.target, "z": b.z} for b in hist]
    paths.append(write_table(rows, out / "histogram", "csv"))
    lap = {"n": params.n, "beta": params.beta, "gamma": args.gamma, "r_n": r_n, "draws": args.draws,
           "theta_window": list(window),
           "negative_theta_atoms": sum(m.negative_count for m in measures),
           "atoms_above_window": sum(m.above_window for m in measures),
           "laplace": [laplace_average(measures, c).as_dict() for c in args.c]}
    paths.append(write_json(lap, out / "laplace.json"))
    if args.atoms:
        atom_rows = [{"draw": i, "theta": float(t)} for i, m in enumerate(measures) for t in m.thetas]
        paths.append(write_table(atom_rows, out / "atoms", "csv"))
    if args.plot_script:
        p = out / "plot.gp"
        p.write_text(PLOT_SCRIPT)
        paths.append(p)
    return paths


HANDLERS = {
    "sample": run_sample,
    "moments": run_moments,
    "oracle": run_oracle,
    "walks": run_walks,
    "edge-law": run_edge_law,
}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v <= MASK64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=_u64, default=argparse.SUPPRESS)
    common.add_argument("--threads", type=int, default=argparse.SUPPRESS)
    common.add_argument("--out-dir", type=Path, default=argparse.SUPPRESS)
    common.add_argument("--format", choices=["csv", "json"], default=argparse.SUPPRESS)

    parser = argparse.ArgumentParser(prog="betaedge", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("--seed", type=_u64, default=0)
    parser.add_argument("--threads", type=int, default=default_threads())
    parser.add_argument("--out-dir", type=Path, default=Path("."))
    parser.add_argument("--format", choices=["csv", "json"], default="csv")
    sub = parser.add_subparsers(dest="command", required=True)

    scalings = [s.value for s in Scaling]
    p = sub.add_parser("sample", parents=[common], help="draw one tridiagonal matrix")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--scaling", choices=scalings, default="raw")

    p = sub.add_parser("moments", parents=[common], help="Monte Carlo E Tr A^p")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--p", type=int, required=True)
    p.add_argument("--samples", type=int, default=1000)
    p.add_argument("--method", choices=[m.value for m in Method], default="corner")
    p.add_argument("--scaling", choices=scalings, default="edge")

    p = sub.add_parser("oracle", parents=[common], help="exact small-case moments")
    p.add_argument("--n", type=int, nargs="+", required=True)
    p.add_argument("--k", type=int, nargs="+", required=True)
    p.add_argument("--beta", nargs="+", default=["1"], help="rationals such as 1, 3/2, 2")
    p.add_argument("--scaling", choices=["raw", "beta"], default="raw")

    p = sub.add_parser("walks", parents=[common], help="lattice-path studies")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--samples", type=int, default=10_000)
    p.add_argument("--study", choices=["max", "occupation", "ratio", "bijection"], required=True)
    p.add_argument("--lambdas", type=float, nargs="+", default=[0.5, 1.0, 1.5, 2.0, 2.5])
    p.add_argument("--thresholds", type=float, nargs="+")

    p = sub.add_parser("edge-law", parents=[common], help="rescaled edge measure study")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--gamma", type=float, default=0.55, help="window scale r_n = n^-gamma")
    p.add_argument("--c", type=float, nargs="+", default=[1.0, 2.0, 4.0])
    p.add_argument("--draws", type=int, default=20)
    p.add_argument("--window", type=float, nargs=2, default=[-3.0, 8.0], metavar=("THETA_MIN", "THETA_MAX"))
    p.add_argument("--bins", type=int, default=10)
    p.add_argument("--hist-max", type=float, default=5.0)
    p.add_argument("--atoms", action="store_true", help="also write per-draw atoms")
    p.add_argument("--plot-script", action="store_true")

    p = sub.add_parser("replay", parents=[common], help="re-run a manifest and compare digests")
    p.add_argument("manifest", type=Path)
    return parser


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def execute(command: str, args: argparse.Namespace) -> dict:
    out: Path = args.out_dir
    out.mkdir(parents=True, exist_ok=True)
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    paths = HANDLERS[command](args, out)
    params = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items()
              if k not in ("out_dir", "command")}
    manifest = {
        "subcommand": command,
        "params": params,
        "seed": args.seed,
        "version": __version__,
        "numpy_version": np.__version__,
        "started_at": started,
        "wall_clock_seconds": time.perf_counter() - t0,
        "outputs": {p.name: _digest(p) for p in paths},
    }
    write_json(manifest, out / "manifest.json")
    return manifest


def replay(manifest_path: Path, out_dir: Path | None = None, threads: int | None = None) -> tuple[bool, dict]:
    """Re-run a manifest; returns (all digests match, per-file comparison)."""
    manifest = json.loads(Path(manifest_path).read_text())
    params = dict(manifest["params"])
    if threads is not None:
        params["threads"] = threads
    out_dir = Path(out_dir) if out_dir else Path(tempfile.mkdtemp(prefix="betaedge-replay-"))
    ns = argparse.Namespace(**params, out_dir=out_dir)
    fresh = execute(manifest["subcommand"], ns)
    report = {name: {"recorded": d, "replayed": fresh["outputs"].get(name)} for name, d in manifest["outputs"].items()}
    ok = all(v["recorded"] == v["replayed"] for v in report.values())
    return ok, report


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.threads < 1:
        parser.error("--threads must be >= 1")
    try:
        if args.command == "replay":
            explicit_threads = "--threads" in (argv if argv is not None else sys.argv[1:])
            ok, report = replay(args.manifest, args.out_dir, args.threads if explicit_threads else None)
            json.dump({"identical": ok, "files": report}, sys.stdout, indent=1)
            sys.stdout.write("\n")
            return 0 if ok else 1
        execute(args.command, args)
    except UsageError as err:
        parser.error(str(err))
    except BudgetExceeded as err:
        print(f"betaedge: budget exceeded: {err}", file=sys.stderr)
        return EXIT_BUDGET
    return 0


if __name__ == "__main__":
    sys.exit(main())
