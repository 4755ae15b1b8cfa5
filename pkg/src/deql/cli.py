"""Command-line entry point: ``deql {ingest,split,train,evaluate,grid,verify,bench}``."""

from __future__ import annotations

import argparse
import contextlib
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .coefficients import Hyperparameters
from .config import SPEC_VERSION, ConfigError, RunConfig, read_config_file
from .data import (SplitSpec, Split, check_no_zero_columns, load_interactions, load_split,
                   save_interactions, save_split, split)
from .errors import DEQLError
from .metrics import diag_histogram, evaluate
from .pipeline import (DEFAULT_B_GRID, DEFAULT_LAMBDA_GRID, DEFAULT_P_GRID, bench, fit,
                       grid_search)
from .verify import run_checks
from .weights import load_weights, save_weights

log = logging.getLogger("deql")


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value config file; flags override it")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", help="output directory")
    p.add_argument("--drop-zero-items", action="store_true", default=None,
                   help="drop items without training interactions instead of failing")
    p.add_argument("--solver", choices=("direct", "fast", "auto"))
    p.add_argument("--k", help="comma-separated cutoffs, e.g. 5,10,20")


def _model_flags(p):
    p.add_argument("--variant", choices=("plain", "l2", "zero_diag_l2", "b_zero", "ease", "low_rank"))
    p.add_argument("--a", type=float)
    p.add_argument("--b", type=float)
    p.add_argument("--p", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--rank-k", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="deql", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="read a user<TAB>item file and write id maps")
    _common(p)
    p.add_argument("--input")

    p = sub.add_parser("split", help="strong/weak train-test split")
    _common(p)
    p.add_argument("--input")
    p.add_argument("--mode", choices=("strong", "weak"))
    p.add_argument("--test-fraction", type=float)
    p.add_argument("--holdout-fraction", type=float)

    p = sub.add_parser("train", help="fit one hyperparameter point")
    _common(p)
    _model_flags(p)
    p.add_argument("--data", help="split directory (uses train.tsv)")
    p.add_argument("--input", help="pair_tsv file used entirely for training")

    p = sub.add_parser("evaluate", help="Recall/NDCG (+ MSE, diagonal histogram) of a model")
    _common(p)
    p.add_argument("--data")
    p.add_argument("--model")
    p.add_argument("--with-mse", action="store_true", default=None)
    p.add_argument("--hist-bins", type=int)
    p.add_argument("--hist-range", help="lo,hi")

    p = sub.add_parser("grid", help="grid search over b, lambda, p with a fixed")
    _common(p)
    _model_flags(p)
    p.add_argument("--data")
    p.add_argument("--b-grid")
    p.add_argument("--lambda-grid")
    p.add_argument("--p-grid")
    p.add_argument("--validation-fraction", type=float)

    p = sub.add_parser("verify", help="randomized property checks of every solver")
    _common(p)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=int)
    p.add_argument("--density", type=float)
    p.add_argument("--mc-samples", type=int)
    p.add_argument("--inject-fault", action="store_true", default=None,
                   help="corrupt the fast solver's update denominator (negative control)")

    p = sub.add_parser("bench", help="direct vs fast solver timings")
    _common(p)
    _model_flags(p)
    p.add_argument("--n-list")
    p.add_argument("--density", type=float)
    p.add_argument("--m-factor", type=float)
    p.add_argument("--repeats", type=int)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    values = {}
    if args.config:
        values.update(read_config_file(args.config))
    for key, value in vars(args).items():
        if key in ("config", "command", "verbose") or value is None:
            continue
        values[key] = value
    return RunConfig.from_mapping(values)


def _write_json(path: Path, payload: dict):
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"spec_version": SPEC_VERSION, **payload}, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _need(value, flag):
    if value is None:
        raise ConfigError(f"{flag} is required")
    return value


def _hp(cfg: RunConfig) -> Hyperparameters:
    return Hyperparameters(cfg.a, cfg.b, cfg.p, cfg.lam, cfg.variant, cfg.rank_k)


def cmd_ingest(cfg: RunConfig) -> int:
    ds = load_interactions(_need(cfg.input, "--input"))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds.user_ids.save(out / "users.tsv")
    ds.item_ids.save(out / "items.tsv")
    save_interactions(out / "interactions.tsv", ds.matrix, ds.user_ids, ds.item_ids)
    summary = {"num_users": ds.matrix.num_users, "num_items": ds.matrix.num_items,
               "num_interactions": ds.matrix.nnz}
    _write_json(out / "ingest.json", summary)
    print(json.dumps(summary))
    return 0


def cmd_split(cfg: RunConfig) -> int:
    ds = load_interactions(_need(cfg.input, "--input"))
    spec = SplitSpec(cfg.mode, cfg.test_fraction, cfg.holdout_fraction, cfg.seed)
    result = split(ds.matrix, spec)
    item_ids = ds.item_ids
    zeros = check_no_zero_columns(result.train)
    if zeros and cfg.drop_zero_items:
        keep = np.setdiff1d(np.arange(ds.matrix.num_items), zeros)
        result = Split(result.train.select_items(keep), result.test_input.select_items(keep),
                       result.test_target.select_items(keep), spec, result.skipped_users)
        kept = type(item_ids)()
        for i in keep.tolist():
            kept.add(item_ids.ids[i])
        item_ids = kept
    elif zeros:
        log.warning("%d item(s) have no training interactions; pass --drop-zero-items to remove "
                    "them", len(zeros))
    save_split(cfg.out, result, ds.user_ids, item_ids)
    meta = result.metadata()
    meta.update(train=result.train.nnz, test_input=result.test_input.nnz,
                test_target=result.test_target.nnz,
                dropped_items=len(zeros) if cfg.drop_zero_items else 0)
    print(json.dumps(meta, sort_keys=True))
    return 0


def _training_matrix(cfg: RunConfig):
    if cfg.data:
        return load_split(cfg.data)[0].train
    return load_interactions(_need(cfg.input, "--data or --input")).matrix


def cmd_train(cfg: RunConfig) -> int:
    result = fit(_training_matrix(cfg), _hp(cfg), cfg.solver, cfg.drop_zero_items)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    save_weights(out / "model.deqlw", result.model)
    record = result.record()
    _write_json(out / "train.json", record)
    print(json.dumps(record, sort_keys=True))
    return 0


def cmd_evaluate(cfg: RunConfig) -> int:
    data, _, _ = load_split(_need(cfg.data, "--data"))
    model = load_weights(_need(cfg.model, "--model"))
    if model.n != data.train.num_items:
        raise DEQLError(f"model has n={model.n} but the data has {data.train.num_items} items")
    report = evaluate(model, data.test_input, data.test_target, cfg.k, with_mse=cfg.with_mse)
    prov = model.provenance.to_json()
    hyper = {k: v for k, v in prov.items() if k in ("a", "b", "p", "lambda", "rank_k")}
    payload = {"variant": prov["variant"], "hyperparameters": hyper, **report.to_json()}
    out = Path(cfg.out)
    _write_json(out / "eval.json", payload)
    hist = diag_histogram(model, cfg.hist_bins, tuple(cfg.hist_range))
    with open(out / "diag_hist.tsv", "w", encoding="utf-8") as fh:
        for lower, count in hist:
            fh.write(f"{lower:.6g}\t{count}\n")
    print(json.dumps(payload, sort_keys=True))
    return 0


def cmd_grid(cfg: RunConfig) -> int:
    data, _, _ = load_split(_need(cfg.data, "--data"))
    b_grid = cfg.b_grid or ((0.0,) if cfg.variant == "b_zero" else DEFAULT_B_GRID)
    lam_grid = cfg.lambda_grid or ((0.0,) if cfg.variant in ("plain", "b_zero", "low_rank")
                                   else DEFAULT_LAMBDA_GRID)
    p_grid = cfg.p_grid or DEFAULT_P_GRID
    ks = sorted(set(cfg.k) | {20})
    rows = grid_search(data, cfg.a, b_grid, lam_grid, p_grid, cfg.variant, ks, cfg.solver,
                       cfg.drop_zero_items, cfg.validation_fraction, cfg.rank_k)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    header = ["rank", "b", "lambda", "p", "status"] + \
        [f"ndcg@{k}" for k in ks] + [f"recall@{k}" for k in ks] + ["error"]
    with open(out / "leaderboard.tsv", "w", encoding="utf-8") as fh:
        fh.write("\t".join(header) + "\n")
        for rank, r in enumerate(rows, 1):
            metrics = [f"{r.metric('ndcg', k):.6f}" for k in ks] + \
                      [f"{r.metric('recall', k):.6f}" for k in ks]
            fh.write("\t".join([str(rank), f"{r.b:g}", f"{r.lam:g}", f"{r.p:g}", r.status]
                               + metrics + [r.error.replace("\t", " ").replace("\n", " ")]) + "\n")
    ok = [r for r in rows if r.status == "ok"]
    summary = {"points": len(rows), "failed": len(rows) - len(ok)}
    if ok:
        best = ok[0]
        hp = Hyperparameters(cfg.a, best.b, best.p, best.lam, cfg.variant, cfg.rank_k)
        result = fit(data.train, hp, cfg.solver, cfg.drop_zero_items)
        save_weights(out / "best_model.deqlw", result.model)
        summary["best"] = {"b": best.b, "lambda": best.lam, "p": best.p,
                           "validation_ndcg@20": best.metric("ndcg"),
                           "validation_recall@20": best.metric("recall")}
    _write_json(out / "grid.json", summary)
    print(json.dumps(summary, sort_keys=True))
    return 0 if ok else 1


def cmd_verify(cfg: RunConfig) -> int:
    checks = run_checks(cfg.n, cfg.m, cfg.density or 0.2, cfg.seed,
                        cfg.mc_samples, cfg.inject_fault)
    passed = all(c.passed for c in checks)
    payload = {"seed": cfg.seed, "n": cfg.n, "m": cfg.m, "passed": passed,
               "checks": [c.to_json() for c in checks]}
    _write_json(Path(cfg.out) / "verify.json", payload)
    print(json.dumps({"spec_version": SPEC_VERSION, **payload}, indent=2, sort_keys=True))
    failing = [c.name for c in checks if not c.passed]
    if failing:
        print("failed checks: " + ", ".join(failing), file=sys.stderr)
    return 0 if passed else 1


def cmd_bench(cfg: RunConfig) -> int:
    hp = _hp(cfg)
    rows = bench(cfg.n_list, cfg.density or 0.05, hp, cfg.seed, cfg.repeats, cfg.m_factor)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["n\tt_direct\tt_fast\tratio"] + [f"{n}\t{td:.6f}\t{tf:.6f}\t{r:.3f}"
                                               for n, td, tf, r in rows]
    (out / "bench.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    print("\n".join(lines))
    return 0


COMMANDS = {"ingest": cmd_ingest, "split": cmd_split, "train": cmd_train,
            "evaluate": cmd_evaluate, "grid": cmd_grid, "verify": cmd_verify, "bench": cmd_bench}


def _thread_limit():
    threads = os.environ.get("DEQL_THREADS")
    if not threads:
        return contextlib.nullcontext()
    from threadpoolctl import threadpool_limits
    return threadpool_limits(limits=int(threads))


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = resolve_config(args)
        with _thread_limit():
            return COMMANDS[args.command](cfg)
    except DEQLError as exc:
        print(f"deql {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"deql {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
