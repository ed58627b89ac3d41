"""Command-line entry point: ``flowshield <subcommand> [options]``.

Subcommands follow the pipeline order::

    ingest -> clean -> resample -> select -> train -> evaluate -> explain -> simulate / sweep

plus ``synth``, which writes the planted synthetic corpus for demos and tests.

Exit codes: 0 success, 1 usage error, 2 data error (bad input, unwritable
path, schema problems), 3 numerical failure (non-convergence, unlearnable
data).

Every file is written atomically. Reports are JSON envelopes (see
``flowshield.envelope``); tables and models embed a provenance block
holding the producing configuration, its digest and the seed. Wall-clock
measurements never enter those artifacts: they go to an optional
``--timings`` sidecar, so the artifacts themselves are reproducible.
Report timestamps honour ``SOURCE_DATE_EPOCH``.

Environment variables may supply default paths: ``FLOWSHIELD_INPUT`` for
``--in`` and ``FLOWSHIELD_MODEL`` for ``--model``.
"""
from __future__ import annotations

import argparse
import hashlib
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import (CleaningPolicy, FlowTable, clean, load_flow_csv, load_flow_dir, merge_tables, read_table,
                      write_flow_csv, write_table)
from .envelope import ReportEnvelope, atomic_write_text, emit_report, provenance_block
from .errors import DataError, FlowshieldError, NotCompilableError, NumericalError
from .evaluation import SplitConfig, confusion, metrics, report_cells, run_benchmark, stratified_split
from .explain import describe_tree, ice, surrogate_tree
from .featsel import (FeatureSubset, anova_f_scores, eliminate_by_pvalue, format_wald_table, importance_config,
                      intersect_subsets, logit_wald, pearson_matrix, rank_order, redundancy_filter, select_top_k,
                      target_correlations, tree_importances, union_subsets)
from .firewall import (COMPILABLE, DEFAULT_BATCH, DEFAULT_WARMUP, FIREWALL_FEATURES, FIREWALL_MAX_DEPTH, POLICIES,
                       compile_model, feature_count_sweep, open_stream, render_sweep, replay, stream_from_table, write_stream)
from .learners import LEARNERS, CartConfig, ForestConfig, GbtConfig, LogRegConfig, TrainConfig, load_model, train
from .learners.io import save_model
from .resample import RAW, STANDARDIZED, SmoteConfig, random_undersample, smote

log = logging.getLogger("flowshield")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3

SCOPE_TRAIN = "train-only"
SCOPE_ALL = "all"
_SCOPE_ALIASES = {"全": SCOPE_ALL}


class _Parser(argparse.ArgumentParser):
    """Argument parser whose usage errors exit with code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# ---------------------------------------------------------------- argument types

def _positive_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {v}")
    return v


def _nonneg_int(text: str) -> int:
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}")
    if v < 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative integer, got {v}")
    return v


def _float_in(lo: float, hi: float, closed_hi: bool = False):
    def parse(text: str) -> float:
        try:
            v = float(text)
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
        if not (lo < v < hi or (closed_hi and v == hi)):
            bracket = "]" if closed_hi else ")"
            raise argparse.ArgumentTypeError(f"expected a value in ({lo}, {hi}{bracket}, got {v}")
        return v
    return parse


def _positive_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v > 0:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {v}")
    return v


def _nonneg_float(text: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a number, got {text!r}")
    if not v >= 0:
        raise argparse.ArgumentTypeError(f"expected a nonnegative number, got {v}")
    return v


def _int_list(text: str) -> list[int]:
    try:
        values = [_positive_int(t.strip()) for t in text.split(",") if t.strip()]
    except argparse.ArgumentTypeError as exc:
        raise argparse.ArgumentTypeError(f"bad count list {text!r}: {exc}")
    if not values:
        raise argparse.ArgumentTypeError("expected a comma-separated list of positive integers")
    return values


def _name_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _learner_list(text: str) -> list[str]:
    names = _name_list(text)
    bad = [n for n in names if n not in LEARNERS]
    if bad or not names:
        raise argparse.ArgumentTypeError(f"unknown learner(s) {bad}; choose from {','.join(LEARNERS)}")
    return names


def _float_list(text: str) -> list[float]:
    try:
        return [float(t) for t in _name_list(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _scope(text: str) -> str:
    text = _SCOPE_ALIASES.get(text, text)
    if text not in (SCOPE_TRAIN, SCOPE_ALL):
        raise argparse.ArgumentTypeError(f"scope must be {SCOPE_TRAIN} or {SCOPE_ALL}")
    return text


# ---------------------------------------------------------------- path and artifact helpers

def _require_inputs(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        if not Path(p).exists():
            raise DataError(f"input not found: {p}")


def _require_outputs(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        parent = Path(p).resolve().parent
        if not parent.is_dir():
            raise DataError(f"output directory does not exist: {parent}")
        if not os.access(parent, os.W_OK):
            raise DataError(f"output directory is not writable: {parent}")
        if Path(p).is_dir():
            raise DataError(f"output path is a directory: {p}")


def _file_digest(path) -> str:
    path = Path(path)
    h = hashlib.sha256()
    if path.is_dir():
        for f in sorted(q for q in path.iterdir() if q.suffix.lower() == ".csv"):
            h.update(f.name.encode())
            h.update(_file_digest(f).encode())
        return h.hexdigest()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _inputs_config(**paths) -> dict:
    """Content digests of the input files; paths themselves are not recorded."""
    return {k: (None if v is None else _file_digest(v)) for k, v in paths.items()}


def _emit(args, kind: str, payload: dict, config: dict, path) -> None:
    if path is None:
        return
    emit_report(ReportEnvelope(kind=kind, payload=payload, config=config, seed=args.seed), path)
    log.info("wrote %s report to %s", kind, path)


def _emit_timings(args, kind: str, payload, path) -> None:
    if path is None:
        return
    emit_report(ReportEnvelope(kind=f"{kind}_timings", payload={"timings": payload, "threads": args.threads},
                               seed=args.seed), path)


def _write_table(table: FlowTable, path, kind: str, config: dict, seed) -> None:
    write_table(table, path, provenance_block(kind, config, seed))
    log.info("wrote %d x %d table to %s", table.row_count, table.col_count, path)


def _read_subset(path) -> FeatureSubset:
    """Feature subset from an envelope, a ``{"names": [...]}`` object or a bare JSON list."""
    import json

    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if isinstance(doc, list):
        return FeatureSubset(tuple(doc), {"method": "file"})
    if "payload" in doc:
        doc = ReportEnvelope.from_dict(doc).payload
    if "names" not in doc:
        raise DataError(f"{path}: not a feature subset document")
    return FeatureSubset.from_dict(doc)


def _load_input_table(path) -> FlowTable:
    return read_table(path)


def _print(text: str) -> None:
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


# ---------------------------------------------------------------- subcommands

def cmd_ingest(args) -> int:
    _require_inputs(*args.inputs)
    _require_outputs(args.out, args.report)
    opts = {"schema_policy": args.schema_policy, "benign_token": args.benign_token,
            "label_column": args.label_column}
    tables, files = [], []
    for p in args.inputs:
        p = Path(p)
        if p.is_dir():
            found = sorted(q for q in p.iterdir() if q.suffix.lower() == ".csv")
            files += [q.name for q in found]
            tables.append(load_flow_dir(p, **opts))
        else:
            files.append(p.name)
            tables.append(load_flow_csv(p, **opts))
    table = merge_tables(tables)
    config = {"command": "ingest", **opts, "inputs": [_file_digest(p) for p in args.inputs]}
    _write_table(table, args.out, "table", config, None)
    n0, n1 = table.class_counts()
    payload = {"files": files, "rows": table.row_count, "columns": table.col_count,
               "feature_names": list(table.feature_names), "benign": n0, "attack": n1,
               "label_vocabulary": sorted({str(v) for v in table.label_strings()}),
               "categorical_columns": sorted(table.categorical)}
    _emit(args, "ingest", payload, config, args.report)
    _print(f"ingested {len(files)} file(s): {table.row_count} rows, {table.col_count} features "
           f"(benign {n0}, attack {n1})")
    return EXIT_OK


def cmd_clean(args) -> int:
    _require_inputs(args.inp)
    _require_outputs(args.out, args.report)
    table = _load_input_table(args.inp)
    policy = CleaningPolicy(args.near_zero_threshold, tuple(args.drop_columns or ()))
    cleaned, report = clean(table, policy)
    config = {"command": "clean", "near_zero_threshold": policy.near_zero_threshold,
              "drop_columns": list(policy.drop_columns), "inputs": _inputs_config(table=args.inp)}
    _write_table(cleaned, args.out, "table", config, None)
    _emit(args, "cleaning_report", report.to_dict(), config, args.report)
    _print(f"cleaned: {report.rows_before} -> {report.rows_after} rows, "
           f"{table.col_count} -> {cleaned.col_count} features")
    return EXIT_OK


def cmd_resample(args) -> int:
    _require_inputs(args.inp)
    _require_outputs(args.out, args.test_out, args.report, args.provenance_log)
    table = _load_input_table(args.inp)
    config = {"command": "resample", "method": args.method, "scope": args.resample_scope,
              "inputs": _inputs_config(table=args.inp)}
    test = None
    if args.resample_scope == SCOPE_TRAIN:
        split = SplitConfig(args.test_fraction, args.seed)
        config["split"] = split.to_dict()
        table, test = stratified_split(table, split.test_fraction, split.seed)
    if args.method == "smote":
        cfg = SmoteConfig(args.k_neighbors, args.target_fraction, args.seed, args.space)
        config["smote"] = cfg.to_dict()
        out, report = smote(table, cfg, n_jobs=args.threads)
    else:
        config["undersample"] = {"majority_keep_fraction": args.keep_fraction, "seed": args.seed}
        out, report = random_undersample(table, args.keep_fraction, args.seed)
    _write_table(out, args.out, "table", config, args.seed)
    if test is not None and args.test_out is not None:
        _write_table(test, args.test_out, "table", {**config, "partition": "test"}, args.seed)
    _emit(args, "resample_report", report.to_dict(include_provenance=False), config, args.report)
    if args.provenance_log is not None:
        lines = ["source,neighbor,u"]
        if getattr(report, "provenance", None) is not None:
            p = report.provenance
            lines += [f"{int(s)},{int(n)},{float(u)!r}" for s, n, u in zip(p.source, p.neighbor, p.u)]
        atomic_write_text(args.provenance_log, "\n".join(lines) + "\n")
    _print(f"resampled ({args.method}, scope {args.resample_scope}): {out.row_count} rows, "
           f"minority fraction {report.resulting_fraction:.4f}, synthetic {report.synthetic_added}, "
           f"removed {report.rows_removed}")
    return EXIT_OK


def _k_or_all(k, m: int) -> int:
    return m if k is None else k


def cmd_select(args) -> int:
    _require_outputs(args.out, args.report)
    if args.method in ("intersect", "union"):
        if not args.subsets or len(args.subsets) < 2:
            raise DataError(f"--method {args.method} needs at least two --subsets files")
        _require_inputs(*args.subsets)
        subsets = [_read_subset(p) for p in args.subsets]
        subset = intersect_subsets(*subsets) if args.method == "intersect" else union_subsets(*subsets)
        config = {"command": "select", "method": args.method,
                  "inputs": [_file_digest(p) for p in args.subsets]}
        _emit(args, "feature_subset", subset.to_dict(), config, args.out)
        _print(", ".join(subset.names))
        return EXIT_OK

    if args.inp is None:
        raise DataError("--in is required for this selection method")
    _require_inputs(args.inp)
    table = _load_input_table(args.inp)
    config = {"command": "select", "method": args.method, "k": args.k, "inputs": _inputs_config(table=args.inp)}
    if args.method == "importance":
        fcfg = importance_config(args.seed, args.threads)
        fcfg = ForestConfig(**{**fcfg.__dict__, "n_trees": args.trees, "max_depth": args.max_depth})
        config["forest"] = fcfg.to_dict()
        ranking = tree_importances(table, fcfg)
        subset = select_top_k(ranking, _k_or_all(args.k, table.col_count))
        report = ranking.to_dict()
        _print("\n".join(f"{i + 1:3d}  {ranking.score(n):.6f}  {n}" for i, n in enumerate(ranking.order)))
    elif args.method == "anova":
        scores = anova_f_scores(table)
        key = np.where(scores.infinite, np.inf, scores.f)
        order = rank_order(key)
        k = _k_or_all(args.k, table.col_count)
        if k > table.col_count:
            raise DataError(f"k={k} exceeds the {table.col_count} available features")
        subset = FeatureSubset(tuple(scores.feature_names[i] for i in order[:k]), {"method": "anova", "k": k})
        report = scores.to_dict()
        _print("\n".join(f"{'inf' if scores.infinite[i] else format(scores.f[i], '.6g'):>12}  "
                         f"{scores.feature_names[i]}" for i in order))
    elif args.method == "filter":
        config["pair_threshold"] = args.pair_threshold
        corr = pearson_matrix(table)
        tc = target_correlations(table)
        kept = redundancy_filter(corr, tc, args.pair_threshold)
        names = kept.names[: args.k] if args.k is not None else kept.names
        subset = FeatureSubset(names, {**kept.provenance, "k": args.k})
        report = {"correlation": corr.to_dict(), "target_correlation": dict(zip(table.feature_names, tc.tolist()))}
        _print(", ".join(subset.names))
    else:  # wald
        config.update(alpha=args.alpha, include_intercept=True)
        features = _read_subset(args.features) if args.features else None
        stats = logit_wald(table, features, include_intercept=True)
        subset = eliminate_by_pvalue(stats, args.alpha)
        if args.k is not None:
            subset = FeatureSubset(subset.names[: args.k], {**subset.provenance, "k": args.k})
        report = {"coefficients": [s.to_dict() for s in stats]}
        _print(format_wald_table(stats).rstrip("\n"))
    _emit(args, "feature_subset", subset.to_dict(), config, args.out)
    _emit(args, f"selection_{args.method}", report, config, args.report)
    log.info("selected %d features", len(subset))
    return EXIT_OK


def _train_config(args) -> TrainConfig:
    depth = args.max_depth
    return TrainConfig(
        knn_k=args.knn_k,
        ada_rounds=args.rounds if args.rounds is not None else 50,
        cart=CartConfig(max_depth=depth, min_samples_leaf=args.min_samples_leaf),
        forest=ForestConfig(n_trees=args.trees, max_depth=depth, min_samples_leaf=args.min_samples_leaf,
                            seed=args.seed, n_jobs=args.threads),
        gbt=GbtConfig(rounds=args.rounds if args.rounds is not None else 100,
                      max_depth=depth if depth is not None else 6, eta=args.eta, l2=args.l2),
        logreg=LogRegConfig(l2=args.l2),
        seed=args.seed,
        n_jobs=args.threads,
    )


def _train_config_dict(cfg: TrainConfig) -> dict:
    d = cfg.to_dict()
    d.pop("n_jobs", None)
    d["forest"].pop("n_jobs", None)
    return d


def cmd_train(args) -> int:
    _require_inputs(args.inp, args.features)
    out = args.out or f"{args.learner}.model.json"
    _require_outputs(out)
    table = _load_input_table(args.inp)
    subset = _read_subset(args.features) if args.features else FeatureSubset(table.feature_names, {"method": "all"})
    missing = [n for n in subset.names if n not in table.feature_names]
    if missing:
        raise DataError(f"feature subset names not in the table: {missing}")
    cfg = _train_config(args)
    model = train(args.learner, table.select(subset.names), cfg)
    config = {"command": "train", "learner": args.learner, "features": list(subset.names),
              "train_config": _train_config_dict(cfg), "inputs": _inputs_config(table=args.inp)}
    save_model(model, out, provenance_block("model", config, args.seed))
    _print(f"trained {args.learner} on {table.row_count} rows x {len(subset)} features -> {out}")
    return EXIT_OK


def _ranked_subsets(table: FlowTable, counts, split: SplitConfig, threads: int) -> list[FeatureSubset]:
    train_t, _ = stratified_split(table, split.test_fraction, split.seed)
    ranking = tree_importances(train_t, importance_config(split.seed, threads))
    return [select_top_k(ranking, k) for k in counts]


def cmd_evaluate(args) -> int:
    _require_inputs(args.inp, args.model, *(args.subsets or ()))
    _require_outputs(args.out, args.timings)
    table = _load_input_table(args.inp)
    if args.model is not None:
        model = load_model(args.model)
        cm = confusion(table.labels, model.predict(table))
        rep = metrics(cm)
        config = {"command": "evaluate", "mode": "model", "inputs": _inputs_config(model=args.model, table=args.inp)}
        _emit(args, "metrics_report", rep.to_dict(), config, args.out)
        cells = report_cells(rep)
        _print("  ".join(f"{k} {v}" for k, v in cells.items()))
        return EXIT_OK

    learners = args.grid or list(LEARNERS)
    split = SplitConfig(args.test_fraction, args.seed)
    if args.subsets:
        subsets = [_read_subset(p) for p in args.subsets]
    else:
        counts = args.k or [table.col_count]
        subsets = _ranked_subsets(table, counts, split, args.threads)
    smote_cfg = SmoteConfig(args.k_neighbors, args.target_fraction, args.seed) if args.smote else None
    train_cfg = TrainConfig(seed=args.seed, n_jobs=args.threads)
    bench = run_benchmark(table, learners, subsets, split, smote_cfg, train_cfg, args.timing_repeats, args.threads)
    config = {"command": "evaluate", "mode": "grid", "learners": learners, "subsets": [list(s.names) for s in subsets],
              "split": split.to_dict(), "smote": None if smote_cfg is None else smote_cfg.to_dict(),
              "train_config": _train_config_dict(train_cfg), "inputs": _inputs_config(table=args.inp)}
    _emit(args, "benchmark", bench.to_dict(include_timings=False), config, args.out)
    _emit_timings(args, "benchmark", bench.timings(), args.timings)
    _print(bench.render(timings=True).rstrip("\n"))
    failed = [r for r in bench.rows if r.error]
    if failed and len(failed) == len(bench.rows):
        raise DataError("every benchmark cell failed")
    return EXIT_OK


def cmd_explain(args) -> int:
    _require_inputs(args.inp, args.model)
    _require_outputs(args.out, getattr(args, "report", None), getattr(args, "tree_out", None))
    model = load_model(args.model)
    table = _load_input_table(args.inp)
    base = {"command": "explain", "inputs": _inputs_config(model=args.model, table=args.inp)}
    if args.explain_cmd == "ice":
        curves = ice(model, table, args.feature, grid=args.grid, n_quantiles=args.quantiles,
                     max_rows=args.max_rows, seed=args.seed)
        config = {**base, "mode": "ice", "feature": args.feature, "grid": args.grid, "quantiles": args.quantiles,
                  "max_rows": args.max_rows}
        if args.out is not None:
            atomic_write_text(args.out, curves.to_text())
        _emit(args, "ice", curves.to_dict(), config, args.report)
        _print("\n".join(f"{g!r:>14}  pdp {p:.6f}" for g, p in zip(curves.grid.tolist(), curves.pdp.tolist())))
        return EXIT_OK
    res = surrogate_tree(model, table, depth_cap=args.depth, soft=args.soft)
    config = {**base, "mode": "surrogate", "depth_cap": args.depth, "soft": args.soft}
    _emit(args, "surrogate", {**res.to_dict(), "tree": describe_tree(res.tree)}, config, args.out)
    if args.tree_out is not None:
        save_model(res.tree, args.tree_out, provenance_block("model", config, args.seed))
    _print(f"fidelity {res.fidelity:.6f}\n" + describe_tree(res.tree).rstrip("\n"))
    return EXIT_OK


def cmd_simulate(args) -> int:
    if (args.stream is None) == (args.inp is None):
        raise DataError("give exactly one of --stream or --in")
    _require_inputs(args.model, args.stream, args.inp, args.features)
    _require_outputs(args.out, args.timings)
    model = load_model(args.model)
    names = _read_subset(args.features).names if args.features else model.feature_names
    compiled = compile_model(model, names)
    if args.stream is not None:
        stream = open_stream(args.stream, compiled.feature_names)
        source = {"stream": _file_digest(args.stream)}
    else:
        table = _load_input_table(args.inp)
        stream = stream_from_table(table, compiled.feature_names, labeled=True, tile=args.tile)
        source = {"table": _file_digest(args.inp), "tile": args.tile}
    rep = replay(compiled, stream, args.policy, args.batch_size, args.warmup, args.shards)
    config = {"command": "simulate", "policy": args.policy, "features": list(compiled.feature_names),
              "inputs": {"model": _file_digest(args.model), **source}}
    _emit(args, "simulation", {"compiled": compiled.summary(), **rep.to_dict(include_timing=False)}, config,
          args.out)
    timing = {k: v for k, v in rep.to_dict(include_timing=True).items()
              if k in ("throughput_flows_per_s", "latency_p50_ns", "latency_p99_ns", "timed_flows")}
    _emit_timings(args, "simulation", timing, args.timings)
    _print(rep.render().rstrip("\n"))
    return EXIT_OK


def cmd_sweep(args) -> int:
    _require_inputs(args.inp)
    _require_outputs(args.out)
    table = _load_input_table(args.inp)
    split = SplitConfig(args.test_fraction, args.seed)
    depth = args.max_depth
    train_cfg = TrainConfig(seed=args.seed, n_jobs=args.threads, cart=CartConfig(max_depth=depth),
                            forest=ForestConfig(max_depth=depth, seed=args.seed, n_jobs=args.threads))
    rows = feature_count_sweep(args.family, table, args.counts, split_cfg=split, train_cfg=train_cfg,
                               min_stream_flows=args.min_flows, batch_size=args.batch_size,
                               warmup_flows=args.warmup, n_jobs=args.threads)
    config = {"command": "sweep", "family": args.family, "counts": args.counts, "split": split.to_dict(),
              "train_config": _train_config_dict(train_cfg),
              "min_flows": args.min_flows, "inputs": _inputs_config(table=args.inp)}
    _emit(args, "sweep", {"rows": [r.to_dict(include_timing=True) for r in rows]}, config, args.out)
    _print(render_sweep(rows).rstrip("\n"))
    return EXIT_OK


def cmd_synth(args) -> int:
    from .synthetic import planted_corpus

    _require_outputs(args.out, args.stream_out)
    if args.csv_dir is not None and not Path(args.csv_dir).is_dir():
        raise DataError(f"--csv-dir must be an existing directory: {args.csv_dir}")
    table = planted_corpus(args.rows, seed=args.seed)
    config = {"command": "synth", "rows": args.rows}
    if args.out is not None:
        _write_table(table, args.out, "table", config, args.seed)
    if args.csv_dir is not None:
        parts = np.array_split(np.arange(table.row_count), args.files)
        for i, rows in enumerate(parts):
            write_flow_csv(table.take(rows), Path(args.csv_dir) / f"part_{i:02d}.csv")
    if args.stream_out is not None:
        sub = table.select(FIREWALL_FEATURES)
        write_stream(args.stream_out, sub.features, sub.labels)
    n0, n1 = table.class_counts()
    _print(f"planted corpus: {table.row_count} rows, {table.col_count} features (benign {n0}, attack {n1})")
    return EXIT_OK


# ---------------------------------------------------------------- parser

def _env_default(var: str):
    return os.environ.get(var)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=42, help="random seed recorded in every artifact (default 42)")
    common.add_argument("--threads", type=_positive_int, default=os.cpu_count() or 1,
                        help="worker cap; results do not depend on it (default: logical cores)")
    common.add_argument("-v", "--verbose", action="count", default=0, help="log progress to standard error")

    parser = _Parser(prog="flowshield", description="Flow-record DDoS detection toolkit.")
    parser.add_argument("--version", action="version", version=f"flowshield {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)
    sub.required = True

    def add(name, func, help_text):
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(func=func)
        return p

    def input_flag(p, required=True):
        default = _env_default("FLOWSHIELD_INPUT")
        p.add_argument("--in", dest="inp", default=default, required=required and default is None,
                       help="input table artifact or flow CSV (env FLOWSHIELD_INPUT)")

    p = add("ingest", cmd_ingest, "Load and merge flow CSV files into one table artifact.")
    p.add_argument("--in", dest="inputs", nargs="+", required=True, help="CSV files and/or directories of CSVs")
    p.add_argument("--out", required=True, help="table artifact (.csv for CSV, anything else binary)")
    p.add_argument("--schema-policy", choices=("infer", "strict"), default="infer")
    p.add_argument("--benign-token", default="BENIGN")
    p.add_argument("--label-column", default="Label")
    p.add_argument("--report", help="ingest report path")

    p = add("clean", cmd_clean, "Drop defective rows, encode categoricals, remove mostly-zero columns.")
    input_flag(p)
    p.add_argument("--out", required=True)
    p.add_argument("--near-zero-threshold", type=_float_in(0.0, 1.0, closed_hi=True), default=0.95)
    p.add_argument("--drop-columns", type=_name_list, help="comma-separated columns to drop")
    p.add_argument("--report", help="cleaning report path")

    p = add("resample", cmd_resample, "Rebalance classes with SMOTE or random undersampling.")
    input_flag(p)
    p.add_argument("--out", required=True, help="resampled table (the training partition under train-only)")
    p.add_argument("--method", choices=("smote", "undersample"), default="smote")
    p.add_argument("--k-neighbors", type=_positive_int, default=5)
    p.add_argument("--target-fraction", type=_float_in(0.0, 0.5, closed_hi=True), default=0.5)
    p.add_argument("--space", choices=(RAW, STANDARDIZED), default=RAW, help="neighbour search space")
    p.add_argument("--keep-fraction", type=_float_in(0.0, 1.0, closed_hi=True), default=1.0,
                   help="majority keep fraction for undersample")
    p.add_argument("--resample-scope", type=_scope, default=SCOPE_TRAIN,
                   help="train-only (default): split first and resample the training part; all: whole table")
    p.add_argument("--test-fraction", type=_float_in(0.0, 1.0), default=0.2)
    p.add_argument("--test-out", help="held-out partition under train-only scope")
    p.add_argument("--report")
    p.add_argument("--provenance-log", help="CSV of (source, neighbor, u) per synthetic row")

    p = add("select", cmd_select, "Rank features and write a feature subset.")
    input_flag(p, required=False)
    p.add_argument("--method", choices=("importance", "anova", "filter", "wald", "intersect", "union"),
                   default="importance")
    p.add_argument("--k", type=_positive_int, help="subset size (default: all ranked features)")
    p.add_argument("--out", required=True, help="feature subset document")
    p.add_argument("--report", help="full ranking / statistics report")
    p.add_argument("--alpha", type=_float_in(0.0, 1.0), default=0.05)
    p.add_argument("--pair-threshold", type=_float_in(0.0, 1.0, closed_hi=True), default=0.9)
    p.add_argument("--trees", type=_positive_int, default=100)
    p.add_argument("--max-depth", type=_positive_int, default=12)
    p.add_argument("--features", help="restrict wald to this subset")
    p.add_argument("--subsets", nargs="+", help="subset files for intersect/union")

    p = add("train", cmd_train, "Train one learner and write a model file.")
    input_flag(p)
    p.add_argument("--learner", choices=LEARNERS, required=True)
    p.add_argument("--features", help="feature subset document (default: all features)")
    p.add_argument("--out", help="model file (default <learner>.model.json)")
    p.add_argument("--knn-k", type=_positive_int, default=5)
    p.add_argument("--trees", type=_positive_int, default=100)
    p.add_argument("--rounds", type=_nonneg_int, help="boosting rounds (ada 50, gbt 100)")
    p.add_argument("--max-depth", type=_positive_int, help="depth cap (gbt default 6, trees unbounded)")
    p.add_argument("--min-samples-leaf", type=_positive_int, default=1)
    p.add_argument("--eta", type=_positive_float, default=0.3)
    p.add_argument("--l2", type=_nonneg_float, default=1.0)

    p = add("evaluate", cmd_evaluate, "Score a model, or run the learner x feature-count benchmark grid.")
    input_flag(p)
    p.add_argument("--model", default=_env_default("FLOWSHIELD_MODEL"), help="score this model on --in")
    p.add_argument("--grid", type=_learner_list, help="comma-separated learners (default: all)")
    p.add_argument("--k", type=_int_list, help="feature counts, e.g. 30,20,10,5")
    p.add_argument("--subsets", nargs="+", help="explicit feature subset files instead of --k")
    p.add_argument("--test-fraction", type=_float_in(0.0, 1.0), default=0.2)
    p.add_argument("--smote", action="store_true", help="SMOTE the training partition")
    p.add_argument("--k-neighbors", type=_positive_int, default=5)
    p.add_argument("--target-fraction", type=_float_in(0.0, 0.5, closed_hi=True), default=0.5)
    p.add_argument("--timing-repeats", type=_positive_int, default=3)
    p.add_argument("--out", help="report path")
    p.add_argument("--timings", help="wall-clock sidecar path")

    p = add("explain", cmd_explain, "ICE / partial dependence curves and surrogate trees.")
    esub = p.add_subparsers(dest="explain_cmd", metavar="MODE", parser_class=_Parser)
    esub.required = True
    for name, text in (("ice", "ICE curves and partial dependence of one feature."),
                       ("surrogate", "Shallow decision tree distilled from a model.")):
        e = esub.add_parser(name, parents=[common], help=text, description=text)
        e.set_defaults(func=cmd_explain)
        input_flag(e)
        e.add_argument("--model", default=_env_default("FLOWSHIELD_MODEL"),
                       required=_env_default("FLOWSHIELD_MODEL") is None)
        if name == "ice":
            e.add_argument("--feature", required=True)
            e.add_argument("--grid", type=_float_list, help="explicit ascending grid values")
            e.add_argument("--quantiles", type=_positive_int, default=20)
            e.add_argument("--max-rows", type=_positive_int, default=10_000)
            e.add_argument("--out", help="plain-text curve columns")
            e.add_argument("--report", help="JSON report")
        else:
            e.add_argument("--depth", type=_positive_int, default=3)
            e.add_argument("--soft", action="store_true", help="distill probabilities instead of labels")
            e.add_argument("--out", help="JSON report")
            e.add_argument("--tree-out", help="surrogate model file")

    p = add("simulate", cmd_simulate, "Replay flows through a compiled model under a firewall policy.")
    input_flag(p, required=False)
    p.add_argument("--model", default=_env_default("FLOWSHIELD_MODEL"),
                   required=_env_default("FLOWSHIELD_MODEL") is None)
    p.add_argument("--stream", help="binary or CSV flow stream")
    p.add_argument("--tile", type=_positive_int, default=1, help="repeat the --in table this many times")
    p.add_argument("--features", help="subset to compile on (default: the model's features)")
    p.add_argument("--policy", choices=POLICIES, default="block")
    p.add_argument("--batch-size", type=_positive_int, default=DEFAULT_BATCH)
    p.add_argument("--warmup", type=_nonneg_int, default=DEFAULT_WARMUP)
    p.add_argument("--shards", type=_positive_int, default=1)
    p.add_argument("--out", help="report path")
    p.add_argument("--timings", help="throughput / latency sidecar path")

    p = add("sweep", cmd_sweep, "Recall and throughput as the feature count shrinks.")
    input_flag(p)
    p.add_argument("--family", choices=COMPILABLE, default="cart")
    p.add_argument("--counts", type=_int_list, default=[30, 20, 10, 5])
    p.add_argument("--test-fraction", type=_float_in(0.0, 1.0), default=0.2)
    p.add_argument("--min-flows", type=_positive_int, default=200_000)
    p.add_argument("--max-depth", type=_positive_int, default=FIREWALL_MAX_DEPTH, help="tree depth cap (default 6)")
    p.add_argument("--batch-size", type=_positive_int, default=DEFAULT_BATCH)
    p.add_argument("--warmup", type=_nonneg_int, default=DEFAULT_WARMUP)
    p.add_argument("--out", help="report path")

    p = add("synth", cmd_synth, "Write the planted synthetic flow corpus.")
    p.add_argument("--rows", type=_positive_int, default=50_000)
    p.add_argument("--out", help="table artifact")
    p.add_argument("--csv-dir", help="also write the corpus as CSV parts into this directory")
    p.add_argument("--files", type=_positive_int, default=11, help="number of CSV parts")
    p.add_argument("--stream-out", help="labeled binary stream over the default firewall features")
    return parser


def run(argv=None) -> int:
    """Parse ``argv`` and run one subcommand; returns the exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2), stream=sys.stderr,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except NumericalError as exc:
        print(f"flowshield {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, NotCompilableError, FlowshieldError) as exc:
        print(f"flowshield {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (OSError, ValueError, KeyError) as exc:
        print(f"flowshield {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
