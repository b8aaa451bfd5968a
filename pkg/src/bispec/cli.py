"""Command line interface.

Exit status: 0 on success, 1 on usage errors, 2 on runtime errors
(unreadable or malformed files, invalid models, failed computations).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import io as bio
from .diagnostics import DiagnosticsReport, run_diagnostics
from .harness import ExperimentConfig, load_config, phase_sweep, summary_csv, to_csv, trials_csv
from .model import build_model, sample_graph
from .pipeline import ClusteringOptions, adaspec_pipeline, spec_pipeline
from .rounding import Partition, misclustering_rate
from .spectral import default_threshold


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _floats(s):
    return [float(x) for x in s.split(",")]


def _ints(s):
    return [int(x) for x in s.split(",")]


def _model_args(p):
    p.add_argument("--model", help="key-value model file (n1, n2, K, L, pi, balance_mode, seed)")
    p.add_argument("--n1", type=int)
    p.add_argument("--n2", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--pi", type=_floats, help="K*L comma-separated probabilities, row-major")
    p.add_argument("--balance-mode", default="exact-balanced",
                   choices=["exact-balanced", "dirichlet-random"])
    p.add_argument("--seed", type=int)


def _cluster_args(p):
    p.add_argument("-i", "--input", required=True, help="edge-list file")
    p.add_argument("--K", type=int, required=True)
    p.add_argument("--truth", help="label file with the true row communities")
    p.add_argument("-o", "--output", help="partition file (default: <input>.partition)")
    p.add_argument("--summary", help="write the JSON summary here instead of stdout")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=10)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bispec", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("sample", help="sample a BiSBM graph")
    _model_args(p)
    p.add_argument("-o", "--output", required=True, help="edge-list file")
    p.add_argument("--labels", help="row label file (default: labels.txt next to the output)")

    p = sub.add_parser("spec", help="spectral clustering with known rank")
    _cluster_args(p)
    p.add_argument("--r", type=int, required=True)

    p = sub.add_parser("adaspec", help="spectral clustering with eigengap rank selection")
    _cluster_args(p)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--T", type=float, help="explicit eigengap threshold")
    g.add_argument("--pmax", type=float, help="use the default threshold for this pmax")

    p = sub.add_parser("diagnose", help="measure concentration and perturbation diagnostics")
    _model_args(p)
    p.add_argument("--r", type=int)
    p.add_argument("-o", "--output", help="CSV file (default: stdout)")

    p = sub.add_parser("phase", help="Monte-Carlo phase sweep over Cs")
    p.add_argument("--config", help="key-value experiment config")
    p.add_argument("--n1", type=_ints)
    p.add_argument("--Cs", type=_floats)
    p.add_argument("--n2", type=int)
    p.add_argument("--K", type=int)
    p.add_argument("--L", type=int)
    p.add_argument("--family", choices=["assortative", "rank-one"])
    p.add_argument("--rho", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--trials", type=int)
    p.add_argument("--master-seed", type=int)
    p.add_argument("--method", choices=["spec", "adaspec"])
    p.add_argument("--T", help="'default' or a number")
    p.add_argument("--r", type=int)
    p.add_argument("--restarts", type=int)
    p.add_argument("--diagnostics", action="store_true", default=None)
    p.add_argument("--record-timings", dest="timings", action="store_true", default=None,
                   help="fill the t_*_ms columns (makes output run-dependent)")
    p.add_argument("-o", "--output", help="per-trial CSV (default: stdout)")
    p.add_argument("--summary", help="per-cell summary CSV")
    return parser


def _model_from_args(args):
    if args.model:
        model, seed = bio.read_model_file(args.model)
        return model, args.seed if args.seed is not None else seed
    missing = [k for k in ("n1", "n2", "K", "L", "pi") if getattr(args, k) is None]
    if missing:
        raise UsageError(f"missing --{', --'.join(missing)} (or give --model)")
    if len(args.pi) != args.K * args.L:
        raise UsageError(f"--pi needs K*L={args.K * args.L} values")
    model = build_model(args.n1, args.n2, args.K, args.L, np.reshape(args.pi, (args.K, args.L)),
                        args.balance_mode, seed=args.seed)
    return model, args.seed


def cmd_sample(args):
    model, seed = _model_from_args(args)
    if seed is None:
        raise UsageError("--seed is required")
    A = sample_graph(model, seed)
    out = Path(args.output)
    bio.write_edge_list(out, A)
    bio.write_labels(args.labels or out.parent / "labels.txt", model.z1)


def _emit_summary(args, summary):
    text = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if args.summary:
        Path(args.summary).write_text(text)
    else:
        sys.stdout.write(text)


def _cluster(args, method):
    A = bio.read_edge_list(args.input)
    opts = ClusteringOptions(restarts=args.restarts, seed=args.seed)
    summary = {"method": method, "n1": A.n1, "n2": A.n2, "nnz": A.nnz, "K": args.K}
    if method == "spec":
        res = spec_pipeline(A, args.K, args.r, opts)
        summary["r"] = args.r
    else:
        T = args.T if args.T is not None else default_threshold(A.n1, A.n2, args.pmax)
        res = adaspec_pipeline(A, args.K, T, opts)
        summary.update(T=T, rhat=res.rank, fallback=res.fallback)
    summary["degenerate"] = res.degenerate
    summary["eigenvalues"] = [float(v) for v in res.eigenspace.values]
    if args.truth:
        truth = Partition(bio.read_labels(args.truth), args.K)
        mis = misclustering_rate(res.partition, truth)
        summary.update(misclustering=mis, exact=mis == 0.0)
    out = args.output or f"{args.input}.partition"
    bio.write_partition(out, res.partition)
    summary["partition"] = str(out)
    _emit_summary(args, summary)


def cmd_diagnose(args):
    model, seed = _model_from_args(args)
    if seed is None:
        raise UsageError("--seed is required")
    rep = run_diagnostics(model, seed=seed, r=args.r)
    row = {"n1": model.n1, "n2": model.n2, "K": model.K, "L": model.L, "pmax": model.pmax,
           "seed": seed, **rep.as_dict()}
    cols = ["n1", "n2", "K", "L", "pmax", "seed"] + DiagnosticsReport.columns()
    _write(args.output, to_csv([row], cols))


def _write(path, text):
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


def cmd_phase(args):
    config = load_config(args.config) if args.config else ExperimentConfig()
    for key in ("n1", "Cs", "n2", "K", "L", "family", "rho", "c", "trials", "method", "r",
                "restarts", "diagnostics", "timings"):
        v = getattr(args, key)
        if v is not None:
            setattr(config, key, v)
    if args.master_seed is not None:
        config.master_seed = args.master_seed
    if args.T is not None:
        config.T = "default" if args.T == "default" else float(args.T)
    if args.output:
        config.output = args.output
    try:
        config.validate()
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    result = phase_sweep(config)
    _write(config.output, trials_csv(config, result.records))
    if args.summary:
        Path(args.summary).write_text(summary_csv(result.summary))
    for n1, lo, hi in result.monotone_violations:
        print(f"warning: recovery frequency drops from Cs={lo} to Cs={hi} at n1={n1} "
              "by more than 2 standard errors", file=sys.stderr)


COMMANDS = {
    "sample": cmd_sample,
    "spec": lambda a: _cluster(a, "spec"),
    "adaspec": lambda a: _cluster(a, "adaspec"),
    "diagnose": cmd_diagnose,
    "phase": cmd_phase,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"bispec: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
