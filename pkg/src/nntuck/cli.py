"""Command-line interface: ``nntuck {fit,cv,test,interpret,synth,power}``.

Errors are reported as one JSON object on stderr. Exit codes: 0 success,
1 usage error, 2 data error, 3 numerical failure.
"""

import argparse
import csv
import io
import json
import logging
import os
import sys
from dataclasses import asdict

import numpy as np

from . import experiments as ex
from .interpret import (SingularReferenceError, choose_reference_layers, layer_similarity,
                        reference_basis_transform, row_normalize_l1)
from .io import DataError, atomic_write, format_network, load_model, load_network, save_model
from .itests import InadmissibleTestError, TestKind, split_lrt, standard_lrt
from .masks import MaskSpec
from .model import ModelVariant
from .solver import FitConfig, NumericalError, fit_multistart

log = logging.getLogger("nntuck")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _ints(text):
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _variant(kind, K, C, symmetric):
    if kind == "independent":
        return ModelVariant.independent(K, symmetric=symmetric)
    if kind == "redundant":
        return ModelVariant.redundant(K, symmetric)
    if C is None:
        raise UsageError("--variant dependent needs -C")
    return ModelVariant.dependent(K, C, symmetric)


def parse_grid(text):
    """``independent:2,dependent:2:2,redundant:3`` -> list of ModelVariant."""
    grid = []
    for item in text.split(","):
        parts = item.strip().split(":")
        try:
            kind, K = parts[0], int(parts[1])
            C = int(parts[2]) if len(parts) > 2 else None
        except (IndexError, ValueError):
            raise UsageError(f"bad grid entry {item!r}; use kind:K[:C]")
        if kind not in ("independent", "dependent", "redundant"):
            raise UsageError(f"unknown model kind {kind!r}")
        grid.append(_variant(kind, K, C, False))
    return grid


def _config(args):
    return FitConfig(rel_tol=args.rel_tol, patience=args.patience,
                     max_iters=args.max_iters, seed=args.seed)


def _csv_matrix(matrix, row_labels=None, col_prefix="c"):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    matrix = np.atleast_2d(matrix)
    writer.writerow(["row"] + [f"{col_prefix}{k}" for k in range(matrix.shape[1])])
    for idx, row in enumerate(matrix):
        label = row_labels[idx] if row_labels else idx
        writer.writerow([label] + [repr(float(x)) for x in row])
    return buf.getvalue()


def _json(obj):
    return json.dumps(obj, indent=2) + "\n"


def _out(args, name):
    return os.path.join(args.out_dir, name)


def _load(args):
    return load_network(args.network, drop_diagonal=args.drop_diagonal, binarize=args.binarize)


def cmd_fit(args):
    net = _load(args)
    variant = _variant(args.variant, args.K, args.C, args.symmetric)
    config = _config(args)
    result = fit_multistart(net, variant, config, args.n_starts, n_jobs=args.jobs)
    meta = {"config": {**asdict(config), "n_starts": args.n_starts, "network": args.network,
                       "drop_diagonal": args.drop_diagonal, "binarize": args.binarize},
            "fit": {"seed": result.seed, "iterations": result.iterations,
                    "converged": result.converged, "kl": result.kl,
                    "log_likelihood": result.log_likelihood}}
    save_model(result.model, _out(args, "model.json"), extra=meta)
    trace = "iteration,kl\n" + "".join(f"{t},{float(kl)!r}\n" for t, kl in enumerate(result.kl_trace))
    atomic_write(_out(args, "kl_trace.csv"), trace)
    return meta["fit"]


def cmd_cv(args):
    net = _load(args)
    spec = MaskSpec(args.task, args.folds, args.seed, symmetric=not net.directed)
    report = ex.cross_validate(net, parse_grid(args.grid), spec, args.n_starts,
                               args.selection, _config(args), n_jobs=args.jobs)
    report.config["network"] = args.network
    columns = ex.CV_COLUMNS + (["runtime"] if args.timings else [])
    atomic_write(_out(args, "cv.csv"), ex.rows_to_csv(report.rows, columns))
    atomic_write(_out(args, "cv.json"), _json(report.to_dict(timings=args.timings)))
    return report.summary()


def cmd_test(args):
    net = _load(args)
    if args.kind == "independence":
        if args.C is None:
            raise UsageError("--kind independence needs -C")
        kind = TestKind.independence(args.K, args.C, args.symmetric)
    elif args.kind == "redundance":
        kind = TestKind.redundance(args.K, args.symmetric)
    else:
        if args.C is None or args.C_nested is None:
            raise UsageError("--kind nested needs -C and --C-nested")
        kind = TestKind.nested(args.K, args.C, args.C_nested, args.symmetric)
    config = _config(args)
    if args.method == "standard":
        report = standard_lrt(net, kind, args.alpha, args.n_starts, config,
                              "conservative" if args.allow_degenerate_df else "raise",
                              n_jobs=args.jobs)
    else:
        report = split_lrt(net, kind, args.alpha, args.split_seed, args.n_starts,
                           args.n_starts_nested, config, n_jobs=args.jobs)
    out = report.to_dict()
    out["config"] = {**asdict(config), "network": args.network}
    atomic_write(_out(args, "test.json"), _json(out))
    return {"verdict": report.verdict, "conclusion": report.conclusion,
            "p_value": report.p_value, "statistic": report.statistic}


def cmd_interpret(args):
    model = load_model(args.model)
    Y = model.Y
    if args.reference_layers:
        ref = tuple(args.reference_layers)
    else:
        ref = choose_reference_layers(Y, cap=args.cap, seed=args.seed)
    basis = reference_basis_transform(model, ref)
    atomic_write(_out(args, "Y.csv"), _csv_matrix(Y))
    atomic_write(_out(args, "Y_l1.csv"), _csv_matrix(row_normalize_l1(Y)))
    atomic_write(_out(args, "layer_similarity.csv"), _csv_matrix(layer_similarity(Y), col_prefix="layer"))
    atomic_write(_out(args, "Y_star.csv"), _csv_matrix(basis.Y_star, col_prefix="ref"))
    atomic_write(_out(args, "reference_layers.csv"),
                 "position,layer\n" + "".join(f"{p},{r}\n" for p, r in enumerate(ref)))
    return {"reference_layers": list(ref)}


def cmd_synth(args):
    net, truth = ex.synthetic_network(args.which, args.seed, args.N)
    atomic_write(_out(args, f"synthetic{args.which}.tsv"), format_network(net))
    save_model(truth, _out(args, f"synthetic{args.which}_truth.json"),
               extra={"config": {"which": args.which, "seed": args.seed, "N": args.N}})
    return {"nodes": net.N, "layers": net.L, "edges": float(net.adjacency.sum())}


def cmd_power(args):
    N_grid = args.N or (ex.FULL_N if args.full_grid else ex.DESK_N)
    L_grid = args.L or (ex.FULL_L if args.full_grid else ex.DESK_L)
    config = _config(args)
    rows = ex.lrt_power_study(N_grid, L_grid, args.K, args.replicates, args.alpha,
                              args.seed, args.n_starts, config, n_jobs=args.jobs)
    atomic_write(_out(args, "power.csv"), ex.rows_to_csv(rows, ex.POWER_COLUMNS))
    payload = {"config": {**asdict(config), "N_grid": list(N_grid), "L_grid": list(L_grid),
                          "K": args.K, "replicates": args.replicates, "alpha": args.alpha,
                          "n_starts": args.n_starts},
               "rejection_rate": ex.rejection_rate(rows), "rows": rows}
    atomic_write(_out(args, "power.json"), _json(payload))
    return {"cells": len(rows), "rejection_rate": payload["rejection_rate"]}


def build_parser():
    parser = _Parser(prog="nntuck", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)

    def common(p, network=True, fitting=True):
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--out-dir", default=".")
        if network:
            p.add_argument("network", help="network TSV file")
            p.add_argument("--drop-diagonal", action="store_true")
            p.add_argument("--binarize", action="store_true")
        if fitting:
            p.add_argument("--rel-tol", type=float, default=1e-5)
            p.add_argument("--patience", type=int, default=10)
            p.add_argument("--max-iters", type=int, default=5000)
            p.add_argument("--n-starts", type=int, default=20)
            p.add_argument("--jobs", type=int, default=1)

    p = sub.add_parser("fit", help="fit an NNTuck by multistart")
    common(p)
    p.add_argument("--variant", choices=["independent", "dependent", "redundant"], default="dependent")
    p.add_argument("-K", type=int, required=True)
    p.add_argument("-C", type=int)
    p.add_argument("--symmetric", action="store_true")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("cv", help="link-prediction cross-validation")
    common(p)
    p.add_argument("--grid", required=True, help="e.g. independent:2,dependent:2:2,redundant:2")
    p.add_argument("--task", choices=["independent", "tubular"], default="independent")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--selection", choices=["train", "test"], default="train")
    p.add_argument("--timings", action="store_true", help="include runtimes (not reproducible)")
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("test", help="layer interdependence likelihood-ratio test")
    common(p)
    p.add_argument("--kind", choices=["independence", "redundance", "nested"], required=True)
    p.add_argument("-K", type=int, default=2)
    p.add_argument("-C", type=int)
    p.add_argument("--C-nested", type=int)
    p.add_argument("--symmetric", action="store_true")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--method", choices=["standard", "split"], default="standard")
    p.add_argument("--split-seed", type=int, default=0)
    p.add_argument("--n-starts-nested", type=int, default=50)
    p.add_argument("--allow-degenerate-df", action="store_true",
                   help="report p = 1 instead of failing when df <= 0")
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("interpret", help="normalizations and reference basis of Y")
    common(p, network=False, fitting=False)
    p.add_argument("model", help="model JSON written by 'fit'")
    p.add_argument("--reference-layers", type=_ints)
    p.add_argument("--cap", type=int, default=10_000)
    p.set_defaults(func=cmd_interpret)

    p = sub.add_parser("synth", help="write a planted synthetic network")
    common(p, network=False, fitting=False)
    p.add_argument("--which", type=int, choices=[1, 2], required=True)
    p.add_argument("-N", type=int, default=200)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("power", help="size of the redundance LRT on redundant networks")
    common(p, network=False)
    p.add_argument("-N", type=_ints)
    p.add_argument("-L", type=_ints)
    p.add_argument("-K", type=int, default=2)
    p.add_argument("--replicates", type=int, default=1)
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--full-grid", action="store_true")
    p.set_defaults(func=cmd_power)
    return parser


def _fail(code, kind, message):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), "exit_code": code}) + "\n")
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
        summary = args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", exc)
    except (NumericalError, FloatingPointError, SingularReferenceError) as exc:
        return _fail(EXIT_NUMERICAL, "numerical", exc)
    except (DataError, InadmissibleTestError, OSError, ValueError) as exc:
        return _fail(EXIT_DATA, "data", exc)
    print(json.dumps(summary, default=float))
    return 0


if __name__ == "__main__":
    sys.exit(main())
