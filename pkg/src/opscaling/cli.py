"""Benchmark command line: generate instances, run solves, time them, plot.

Exit codes: 0 when the requested work completed (a diverged solve is
data, not an error), 2 on usage errors, 3 on I/O or file format errors.
"""

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from .errors import FormatError
from .instances import FrameSpec, frame_instance, hilbert_instance, load_problem, save_problem
from .solvers import Algorithm, SorConfig, TraceRow, solve

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_IO = 3

ALGO_NAMES = [a.value for a in Algorithm]

# experiment-family defaults; --max-iters / --omega auto:<p> override them
FAMILY_MAX_ITERS = {"hilbert": 100, "frame": 200, "frame-extreme": 200}
FAMILY_AUTO_P = {"hilbert": 5, "frame": 20, "frame-extreme": 20}
DEFAULT_TOL = 1e-13


def build_parser():
    parser = argparse.ArgumentParser(
        prog="opscaling",
        description="Benchmark harness for operator scaling solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a problem instance file")
    gen.add_argument("family", choices=["hilbert", "frame", "frame-extreme"])
    gen.add_argument("--n", type=int, required=True, help="matrix / vector dimension")
    gen.add_argument("--k", type=int, required=True, help="number of matrices / vectors")
    gen.add_argument("--kappa", type=float, default=1e7, help="frame conditioning parameter")
    gen.add_argument("--extreme", action="store_true",
                     help="replace the first frame matrix by e1 e1^T")
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output JSON path")
    gen.set_defaults(func=_cmd_gen)

    for name, help_text in [
        ("solve", "run solvers on an instance and write trace CSVs"),
        ("bench", "run repeated timed solves and write runtime statistics"),
    ]:
        cmd = sub.add_parser(name, help=help_text)
        src = cmd.add_mutually_exclusive_group(required=True)
        src.add_argument("--instance", help="problem JSON file")
        src.add_argument("--family", choices=["hilbert", "frame", "frame-extreme"],
                         help="generate the instance inline instead of loading a file")
        cmd.add_argument("--n", type=int, help="dimension for inline generation")
        cmd.add_argument("--k", type=int, help="count for inline generation")
        cmd.add_argument("--kappa", type=float, default=1e7)
        cmd.add_argument("--extreme", action="store_true")
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--algo", action="append", choices=ALGO_NAMES,
                         help="repeatable; default: all six")
        cmd.add_argument("--omega", default="auto",
                         help="off | fixed:<w> | auto:<p> | auto (per-family p)")
        cmd.add_argument("--max-iters", type=int, default=None,
                         help="default: 100 for hilbert, 200 for frame families")
        cmd.add_argument("--tol", type=float, default=DEFAULT_TOL)
        cmd.add_argument("--out", required=True, help="output directory")
        if name == "bench":
            cmd.add_argument("--repeats", type=int, default=10,
                             help="timed runs per algorithm (>= 2)")
        cmd.set_defaults(func=_cmd_solve if name == "solve" else _cmd_bench)

    plot = sub.add_parser("plot", help="emit a matplotlib script from trace CSVs")
    plot.add_argument("traces", nargs="+", help="trace or bench CSV files")
    plot.add_argument("--out", required=True, help="path of the generated .py script")
    plot.set_defaults(func=_cmd_plot)
    return parser


class _UsageError(Exception):
    pass


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


def _generate(family, n, k, kappa, extreme, seed):
    if family == "hilbert":
        return hilbert_instance(n, k, seed)
    extreme = extreme or family == "frame-extreme"
    problem, _ = frame_instance(FrameSpec(n=n, k=k, kappa=kappa, extreme=extreme), seed)
    return problem


def _cmd_gen(args):
    problem = _generate(args.family, args.n, args.k, args.kappa, args.extreme, args.seed)
    save_problem(problem, args.out)
    print(f"wrote {args.out}: k={problem.k}, m={problem.m}, n={problem.n}")
    print(f"grad norm at identity scaling: {problem.grad_norm():.17g}")
    return EXIT_OK


def _load_or_generate(args):
    if args.instance:
        return load_problem(args.instance)
    if args.n is None or args.k is None:
        raise _UsageError("--family requires --n and --k")
    return _generate(args.family, args.n, args.k, args.kappa, args.extreme, args.seed)


def _run_settings(args, problem):
    family = problem.meta.get("family", "")
    max_iters = args.max_iters
    if max_iters is None:
        max_iters = FAMILY_MAX_ITERS.get(family, 100)
    if args.omega == "auto":
        sor = SorConfig.auto(FAMILY_AUTO_P.get(family, 5))
    else:
        try:
            sor = SorConfig.parse(args.omega)
        except ValueError as exc:
            raise _UsageError(str(exc)) from exc
    algos = [Algorithm(a) for a in (args.algo or ALGO_NAMES)]
    return algos, sor, max_iters, args.tol


def write_trace_csv(path, trace):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "grad_norm", "elapsed_s", "omega"])
        for row in trace:
            writer.writerow([row.iteration, repr(row.grad_norm),
                             repr(row.elapsed_s), repr(row.omega)])


def read_trace_csv(path):
    """Parse a solve trace CSV back into TraceRow records."""
    rows = []
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != ["iter", "grad_norm", "elapsed_s", "omega"]:
            raise FormatError(f"{path}: unexpected header {header!r}")
        for lineno, rec in enumerate(reader, start=2):
            try:
                rows.append(TraceRow(int(rec[0]), float(rec[1]), float(rec[2]), float(rec[3])))
            except (ValueError, IndexError) as exc:
                raise FormatError(f"{path}: bad record on line {lineno}: {rec!r}") from exc
    return rows


def _cmd_solve(args):
    problem = _load_or_generate(args)
    algos, sor, max_iters, tol = _run_settings(args, problem)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    summary = {
        "instance": {"k": problem.k, "m": problem.m, "n": problem.n, "meta": problem.meta},
        "tol": tol,
        "max_iters": max_iters,
        "sor": {"mode": sor.mode, "omega": sor.omega, "p": sor.p},
        "results": {},
    }
    for algo in algos:
        report = solve(problem, algo, sor=sor, max_iters=max_iters, tol=tol)
        write_trace_csv(out_dir / f"trace_{algo.value}.csv", report.trace)
        summary["results"][algo.value] = {
            "status": report.status.value,
            "reason": report.reason,
            "iterations": report.iterations,
            "final_grad_norm": report.final_grad_norm,
            "omega_estimate": report.omega_estimate,
            "omega_clamped": report.omega_clamped,
        }
        print(f"{algo.value:14s} {report.status.value:9s} iters={report.iterations:4d} "
              f"final_grad_norm={report.final_grad_norm:.3e}")
    with open(out_dir / "summary.json", "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    return EXIT_OK


def _cmd_bench(args):
    if args.repeats < 2:
        raise _UsageError("--repeats must be >= 2")
    problem = _load_or_generate(args)
    algos, sor, max_iters, tol = _run_settings(args, problem)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "bench.csv"
    with open(out_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iter", "algorithm", "grad_norm", "mean_elapsed_s", "std_elapsed_s"])
        for algo in algos:
            if args.repeats >= 3:
                solve(problem, algo, sor=sor, max_iters=max_iters, tol=tol)  # warm-up, untimed
            runs = [solve(problem, algo, sor=sor, max_iters=max_iters, tol=tol)
                    for _ in range(args.repeats)]
            lengths = {len(r.trace) for r in runs}
            if len(lengths) != 1:
                raise RuntimeError(f"{algo.value}: repeats disagree on iteration count {lengths}")
            elapsed = np.array([[row.elapsed_s for row in r.trace] for r in runs])
            mean = elapsed.mean(axis=0)
            std = elapsed.std(axis=0)
            for i, row in enumerate(runs[0].trace):
                writer.writerow([row.iteration, algo.value, repr(row.grad_norm),
                                 repr(float(mean[i])), repr(float(std[i]))])
            total = mean[-1] if len(mean) else 0.0
            print(f"{algo.value:14s} repeats={args.repeats} iters={len(mean):4d} "
                  f"mean_total_s={total:.4f}")
    print(f"wrote {out_path}")
    return EXIT_OK


def _read_series(path):
    """Load one CSV (solve trace or bench format) as plot series."""
    with open(path, "r", newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        records = list(reader)
    name = Path(path).stem
    if name.startswith("trace_"):
        name = name[len("trace_"):]
    try:
        if header == ["iter", "grad_norm", "elapsed_s", "omega"]:
            rows = [(int(r[0]), float(r[1]), float(r[2])) for r in records]
            return [(name, rows)]
        if header == ["iter", "algorithm", "grad_norm", "mean_elapsed_s", "std_elapsed_s"]:
            by_algo = {}
            for r in records:
                by_algo.setdefault(r[1], []).append((int(r[0]), float(r[2]), float(r[3])))
            return sorted(by_algo.items())
    except (ValueError, IndexError) as exc:
        raise FormatError(f"{path}: bad record: {exc}") from exc
    raise FormatError(f"{path}: unrecognized CSV header {header!r}")


_PLOT_TEMPLATE = '''#!/usr/bin/env python3
"""Auto-generated convergence/runtime plot; requires matplotlib."""
import json
import pathlib

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

SERIES = json.loads(r"""{series_json}""")
OUT = pathlib.Path(__file__).with_suffix(".png")

fig, (ax_iter, ax_time) = plt.subplots(1, 2, figsize=(11.0, 4.5))
for s in SERIES:
    ax_iter.semilogy(s["iters"], s["grad"], s["style"], label=s["label"])
    ax_time.semilogy(s["time"], s["grad"], s["style"], label=s["label"])
ax_iter.set_xlabel("iteration")
ax_iter.set_ylabel("grad norm")
ax_time.set_xlabel("elapsed seconds")
ax_time.set_ylabel("grad norm")
for ax in (ax_iter, ax_time):
    ax.grid(True, which="both", alpha=0.3)
ax_iter.legend()
fig.tight_layout()
fig.savefig(OUT, dpi=150)
print(f"wrote {{OUT}}")
'''


def _cmd_plot(args):
    series = []
    for path in args.traces:
        for name, rows in _read_series(path):
            # absorbed-family curves dashed, fixed-point curves solid
            style = "--" if name.startswith("osi") else "-"
            series.append({
                "label": name,
                "style": style,
                "iters": [r[0] for r in rows],
                "grad": [r[1] for r in rows],
                "time": [r[2] for r in rows],
            })
    script = _PLOT_TEMPLATE.format(series_json=json.dumps(series))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(script, encoding="utf-8")
    print(f"wrote {out} ({len(series)} series)")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
