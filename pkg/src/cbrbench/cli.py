"""Command-line interface.

Subcommands: generate (dataset bundle), train (checkpoint from a bundle),
evaluate (MISE/factual-MSE report for a checkpoint), sweep (benchmark matrix
or lambda/k curves), dump-repr (representation CSV). Usage errors exit with
status 2 (argparse), runtime failures with 1.
"""

from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import os
import sys
import time

import numpy as np

from . import experiment
from ._kernels import backend_name
from .clustering import fit_kmeans
from .dgp import (DGPConfig, canonical_split_seed, generate, read_bundle,
                  split, write_bundle)
from .errors import CbrBenchError
from .evaluation import DEFAULT_GRID_SIZE, factual_mse, mise, write_report_csv
from .experiment import SweepConfig, resolve_table, version_string
from .ipm import IPMKind
from .models import (NetworkSpec, fit_linear, train_cbrnet, train_drnet,
                     train_mlp)
from .serialize import load_model, save_model
from .utils import derive_seed, fmt_float

logger = logging.getLogger(__name__)

DEFAULT_MASTER_SEED = 1


def _write_json(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _cmd_manifest(out_dir, resolved: dict, seeds: dict, elapsed: float):
    _write_json(os.path.join(out_dir, "manifest.json"), {
        "version": version_string(),
        "backend": backend_name(),
        "config": resolved,
        "seeds": seeds,
        "timing": {
            "started": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "elapsed_seconds": elapsed,
        },
    })


# ---------------------------------------------------------------------------
# generate


def _add_generate(sub):
    p = sub.add_parser("generate", help="generate one dataset bundle")
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--noise-std", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    p.add_argument("--n", type=int, default=experiment.DEFAULT_N,
                   help="rows when the synthetic table is used")
    p.add_argument("--dose-formula", choices=["as-printed", "mode-corrected"],
                   default="as-printed")
    p.add_argument("--data", default=None,
                   help="covariate CSV path, or 'synth' for the synthetic table "
                        "(default: CADR_DATA, else synth)")
    p.add_argument("--out", required=True, help="bundle output directory")
    p.set_defaults(func=_run_generate)


def _resolve_data_arg(data, n, seed):
    # CLI convenience: fall back to the synthetic table when no CSV is
    # available anywhere, mirroring the documented sandbox default.
    if data is None and not os.environ.get("CADR_DATA"):
        data = "synth"
    return resolve_table(data, n, seed)


def _run_generate(args):
    t0 = time.perf_counter()
    table = _resolve_data_arg(args.data, args.n, args.seed)
    cfg = DGPConfig(alpha=args.alpha, beta=args.beta, noise_std=args.noise_std,
                    seed=args.seed, dose_formula=args.dose_formula)
    dataset = generate(cfg, table)
    os.makedirs(args.out, exist_ok=True)
    write_bundle(dataset, args.out)
    _cmd_manifest(args.out, {"command": "generate", **cfg.to_dict(),
                             "n": int(table.n), "data": args.data or "synth"},
                  seeds={"dataset": args.seed,
                         "split": canonical_split_seed(cfg),
                         **dataset.seeds},
                  elapsed=time.perf_counter() - t0)
    print(f"bundle written to {args.out} ({table.n} rows)")
    return 0


# ---------------------------------------------------------------------------
# train


def _add_train(sub):
    p = sub.add_parser("train", help="train one estimator on a bundle")
    p.add_argument("--bundle", required=True, help="dataset bundle directory")
    p.add_argument("--estimator", required=True,
                   choices=list(experiment.ESTIMATORS))
    p.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    p.add_argument("--lambda", dest="lambda_", type=float, default=0.01,
                   help="balancing weight (cbrnet only)")
    p.add_argument("--k", type=int, default=experiment.DEFAULT_K,
                   help="cluster count for the frozen clustering (cbrnet only)")
    p.add_argument("--ridge", type=float, default=0.0, help="linear only")
    p.add_argument("--learning-rate", type=float, default=1e-3)
    p.add_argument("--batch-size", type=int, default=128)
    p.add_argument("--hidden", type=int, default=32)
    p.add_argument("--steps", type=int, default=5000)
    p.add_argument("--l2", type=float, default=0.0)
    p.add_argument("--out", required=True, help="checkpoint file path")
    p.set_defaults(func=_run_train)


def _train_splits(bundle_dir):
    dataset = read_bundle(bundle_dir)
    sp = split(dataset, canonical_split_seed(dataset.config))
    f = dataset.covariates
    return dataset, {
        "train": (f[sp.train], dataset.dose[sp.train], dataset.outcome[sp.train]),
        "validation": (f[sp.validation], dataset.dose[sp.validation],
                       dataset.outcome[sp.validation]),
        "test": (f[sp.test], dataset.dose[sp.test], dataset.outcome[sp.test]),
    }


def _run_train(args):
    t0 = time.perf_counter()
    dataset, splits = _train_splits(args.bundle)
    xtr, st, yt = splits["train"]
    spec = NetworkSpec(repr_hidden=args.hidden, repr_dim=args.hidden,
                       inference_hidden=args.hidden,
                       learning_rate=args.learning_rate,
                       batch_size=args.batch_size, training_steps=args.steps,
                       l2_penalty=args.l2, seed=derive_seed(args.seed, "train-cli"))
    seeds = {"cli": args.seed, "training": spec.seed,
             "split": canonical_split_seed(dataset.config)}
    if args.estimator == "linear":
        model = fit_linear(xtr, st, yt, ridge=args.ridge)
    elif args.estimator == "mlp":
        model = train_mlp(xtr, st, yt, spec)
    elif args.estimator == "drnet":
        model = train_drnet(xtr, st, yt, spec)
    else:
        delta_seed = derive_seed(args.seed, "delta", args.k)
        seeds["delta"] = delta_seed
        delta = fit_kmeans(xtr, st, k=args.k, seed=delta_seed)
        kind = IPMKind(args.estimator.removeprefix("cbrnet_"))
        model = train_cbrnet(xtr, st, yt, spec, lambda_=args.lambda_,
                             ipm=kind, delta=delta)
    save_model(args.out, model)
    out_dir = os.path.dirname(os.path.abspath(args.out)) or "."
    _cmd_manifest(out_dir, {
        "command": "train", "estimator": args.estimator,
        "bundle": os.path.abspath(args.bundle), "spec": spec.to_dict(),
        "lambda": args.lambda_ if args.estimator.startswith("cbrnet") else None,
        "k": args.k if args.estimator.startswith("cbrnet") else None,
        "ridge": args.ridge if args.estimator == "linear" else None,
    }, seeds=seeds, elapsed=time.perf_counter() - t0)
    xva, sv, yv = splits["validation"]
    print(f"checkpoint written to {args.out} "
          f"(validation MSE {factual_mse(model, xva, sv, yv):.4f})")
    return 0


# ---------------------------------------------------------------------------
# evaluate


def _add_evaluate(sub):
    p = sub.add_parser("evaluate", help="score a checkpoint on a bundle's test split")
    p.add_argument("--bundle", required=True)
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--grid-size", type=int, default=DEFAULT_GRID_SIZE)
    p.add_argument("--out", required=True, help="report output directory")
    p.set_defaults(func=_run_evaluate)


def _run_evaluate(args):
    t0 = time.perf_counter()
    dataset, splits = _train_splits(args.bundle)
    model = load_model(args.model)
    xte, ste, yte = splits["test"]
    m = mise(model, xte, dataset.oracle, args.grid_size)
    f = factual_mse(model, xte, ste, yte)
    os.makedirs(args.out, exist_ok=True)
    elapsed = time.perf_counter() - t0
    lam = getattr(model, "lambda_", None)
    kind = getattr(model, "ipm", None)
    delta = getattr(model, "delta", None)
    write_report_csv(os.path.join(args.out, "report.csv"), [{
        "model_id": type(model).__name__,
        "dataset_seed": str(dataset.config.seed),
        "alpha": fmt_float(dataset.config.alpha),
        "beta": fmt_float(dataset.config.beta),
        "lambda": "" if lam is None else fmt_float(lam),
        "ipm": kind.name if kind is not None else "",
        "k": str(delta.k) if delta is not None else "",
        "mise": m,
        "factual_mse": f,
        "grid_size": str(args.grid_size),
        "train_seconds": 0.0,
    }])
    _cmd_manifest(args.out, {"command": "evaluate",
                             "bundle": os.path.abspath(args.bundle),
                             "model": os.path.abspath(args.model),
                             "grid_size": args.grid_size},
                  seeds={"dataset": dataset.config.seed,
                         "split": canonical_split_seed(dataset.config)},
                  elapsed=elapsed)
    print(f"MISE {m:.4f}  factual MSE {f:.4f}  -> {args.out}/report.csv")
    return 0


# ---------------------------------------------------------------------------
# sweep


def _add_sweep(sub):
    p = sub.add_parser("sweep", help="benchmark matrix or robustness curves")
    p.add_argument("--kind", choices=["benchmark", "lambda", "clusters"],
                   default="benchmark")
    p.add_argument("--config", help="JSON config file mirroring SweepConfig")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--data", default=None)
    p.add_argument("--full", action="store_true",
                   help="published scale: 10 repetitions, full grids")
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_run_sweep)


def _run_sweep(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    if args.seed is not None:
        doc["master_seed"] = args.seed
    elif "master_seed" not in doc:
        doc["master_seed"] = DEFAULT_MASTER_SEED
    if args.out is not None:
        doc["output_dir"] = args.out
    if args.data is not None:
        doc["data"] = args.data
    if args.full:
        doc["full"] = True
    if args.workers is not None:
        doc["workers"] = args.workers
    if args.kind == "benchmark" and "cells" not in doc and \
            "alpha_values" not in doc and "beta_values" not in doc:
        doc["cells"] = [list(c) for c in experiment.DEFAULT_CELLS]
    config = SweepConfig.from_dict(doc)
    if args.kind == "benchmark":
        rows, failures = experiment.run_benchmark(config)
        print(f"{len(rows)} result rows -> {config.output_dir}")
        if failures:
            print(f"{len(failures)} cell failures (see results.json)",
                  file=sys.stderr)
            return 1
        return 0
    if args.kind == "lambda":
        points = experiment.sweep_lambda(config)
    else:
        points = experiment.sweep_clusters(config)
    print(f"{len(points)} curve points -> {config.output_dir}/curves.csv")
    return 0


# ---------------------------------------------------------------------------
# dump-repr


def _add_dump_repr(sub):
    p = sub.add_parser("dump-repr",
                       help="export a checkpoint's representations as CSV")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--bundle", required=True)
    p.add_argument("--split", choices=["train", "validation", "test", "all"],
                   default="test")
    p.add_argument("--out", required=True, help="CSV file path")
    p.set_defaults(func=_run_dump_repr)


def _run_dump_repr(args):
    model = load_model(args.model)
    if not hasattr(model, "representation"):
        raise CbrBenchError(
            f"{type(model).__name__} has no representation layer to dump")
    dataset, splits = _train_splits(args.bundle)
    if args.split == "all":
        x, s = dataset.covariates, dataset.dose
    else:
        x, s, _ = splits[args.split]
    experiment.dump_representations(model, x, s, args.out)
    print(f"{x.shape[0]} representations -> {args.out}")
    return 0


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cbrbench",
        description="Clustered dose-response benchmark: generation, training, "
                    "evaluation, and sweeps.")
    parser.add_argument("--version", action="version", version=version_string())
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_generate(sub)
    _add_train(sub)
    _add_evaluate(sub)
    _add_sweep(sub)
    _add_dump_repr(sub)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except CbrBenchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
