"""``motifrank`` command line entry point."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from contextlib import contextmanager
from pathlib import Path

from . import analysis, report
from .dataset import DatasetError, assemble, make_folds, write_dataset_csv
from .encode import EncodeError, encode_population, vectorize, build_vocabulary, write_motif_csv
from .graph import NetworkHistory, write_pagerank_csv
from .ingest import (DEFAULT_HORIZON, IngestError, build_store, dump_store, read_joins,
                     read_messages, write_joins, write_messages)
from .learn import ForestLearner, LogisticLearner, MajorityLearner, cross_validate, train_forest
from .synth import SynthConfig, generate

log = logging.getLogger("motifrank")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 2, 3, 4

COMMANDS = ("ingest", "activity", "pagerank", "encode", "train", "forecast-curve", "sweep-k",
            "importance", "correlate", "newmsg", "synth", "reproduce")


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser, events: bool = True) -> None:
    p.add_argument("--out", type=Path, default=Path("results"), help="output directory (default: results)")
    p.add_argument("--config", type=Path, help="JSON file of flag defaults; explicit flags win")
    p.add_argument("--seed", type=int, default=0, help="master seed (default: 0)")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for tree fitting (default: 1)")
    p.add_argument("--log-level", default="WARNING")
    if events:
        p.add_argument("--events", type=Path, help="messages file: 'sender receiver timestamp' per line")
        p.add_argument("--joins", type=Path, help="optional joins file: 'user timestamp' per line")
        p.add_argument("--horizon", type=int, default=DEFAULT_HORIZON,
                       help=f"study window in weeks (default: {DEFAULT_HORIZON})")
        p.add_argument("--damping", type=float, default=0.85, help="PageRank damping (default: 0.85)")


def _model_flags(p: argparse.ArgumentParser, k: bool = True) -> None:
    if k:
        p.add_argument("--k", type=int, default=3, help="motif length (default: 3)")
    p.add_argument("--bins", type=int, default=7, help="number of PageRank bins M (default: 7)")
    p.add_argument("--label-week", type=int, help="PageRank week to predict (default: horizon)")
    p.add_argument("--folds", type=int, default=8, help="cross-validation folds (default: 8)")
    p.add_argument("--trees", type=int, default=500, help="random forest size (default: 500)")
    p.add_argument("--max-features", type=int, help="features tried per split (default: floor(sqrt(F)))")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="motifrank", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="parse logs and write the event store")
    _common(p)

    p = sub.add_parser("activity", help="weekly message counts")
    _common(p)

    p = sub.add_parser("pagerank", help="weekly PageRank and ranks")
    _common(p)

    p = sub.add_parser("encode", help="k-gram motif matrix at a cutoff week")
    _common(p)
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--cutoff", type=int, help="last week of behaviour (default: horizon)")

    p = sub.add_parser("train", help="cross-validated MAE for one configuration")
    _common(p)
    _model_flags(p)
    p.add_argument("--cutoff", type=int, help="last week of behaviour (default: label week)")
    p.add_argument("--model", choices=("forest", "logistic", "majority"), default="forest")
    p.add_argument("--ablate-totals", action="store_true", help="use total motif count only")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--step", type=float, default=0.5)
    p.add_argument("--save-model", action="store_true", help="also fit on all rows and save model.json")
    p.add_argument("--export-dataset", action="store_true", help="write features.csv and labels.csv")

    p = sub.add_parser("forecast-curve", help="MAE by behaviour cutoff week")
    _common(p)
    _model_flags(p)

    p = sub.add_parser("sweep-k", help="MAE by motif length")
    _common(p)
    _model_flags(p, k=False)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=6)

    p = sub.add_parser("importance", help="permutation feature importance")
    _common(p)
    _model_flags(p)
    p.add_argument("--splits", type=int, default=25, help="random train/test splits (default: 25)")
    p.add_argument("--holdout", type=float, default=0.25, help="test fraction (default: 0.25)")

    p = sub.add_parser("correlate", help="join-date and weekly rank correlations")
    _common(p)

    p = sub.add_parser("newmsg", help="new incoming messages by receiver rank")
    _common(p)

    p = sub.add_parser("synth", help="generate a synthetic message log")
    _common(p, events=False)
    p.add_argument("--users", type=int, default=200)
    p.add_argument("--weeks", type=int, default=20)
    p.add_argument("--join-spread", type=float, default=0.5)
    p.add_argument("--base-rate", type=float, default=3.0)
    p.add_argument("--pref-strength", type=float, default=0.8)
    p.add_argument("--reply-prob", type=float, default=0.6)

    p = sub.add_parser("reproduce", help="run every experiment and write all reports")
    _common(p)
    _model_flags(p)
    p.add_argument("--splits", type=int, default=25)
    p.add_argument("--holdout", type=float, default=0.25)
    p.add_argument("--k-min", type=int, default=1)
    p.add_argument("--k-max", type=int, default=6)
    p.add_argument("--coarse-bins", type=int, default=3, help="bin count for the coarse run (default: 3)")
    p.add_argument("--l2", type=float, default=1e-3)
    p.add_argument("--epochs", type=int, default=2000)
    p.add_argument("--step", type=float, default=0.5)
    return parser


def parse_args(argv=None) -> argparse.Namespace:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.config is None:
        return args
    try:
        overrides = json.loads(Path(args.config).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        parser.error(f"cannot read --config {args.config}: {exc}")
    known = vars(args)
    defaults = {}
    for key, value in overrides.items():
        key = key.replace("-", "_")
        if key not in known or key in ("command", "config"):
            parser.error(f"unknown key {key!r} in --config")
        defaults[key] = Path(value) if key in ("out", "events", "joins") else value
    sub = parser._subparsers._group_actions[0].choices[args.command]
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


class Run:
    def __init__(self, args: argparse.Namespace):
        self.args = args
        self.out: Path = args.out
        self.timings: dict[str, float] = {}
        self.inputs: list[Path] = []
        self.outputs: list[Path] = []
        self._history: NetworkHistory | None = None

    @contextmanager
    def stage(self, name: str):
        t = time.perf_counter()
        yield
        self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t

    def emit(self, *paths: Path) -> None:
        self.outputs.extend(paths)

    @property
    def history(self) -> NetworkHistory:
        if self._history is None:
            a = self.args
            if a.events is None:
                raise UsageError("--events is required")
            for p in (a.events, a.joins):
                if p is not None and not p.exists():
                    raise UsageError(f"input file not found: {p}")
            with self.stage("ingest"):
                messages = read_messages(a.events)
                joins = read_joins(a.joins) if a.joins else None
                store = build_store(messages, joins, a.horizon)
            self.inputs.append(a.events)
            if a.joins:
                self.inputs.append(a.joins)
            with self.stage("pagerank"):
                history = NetworkHistory(store, a.damping)
                history.rank_tables
            self._history = history
        return self._history

    @property
    def label_week(self) -> int:
        return self.args.label_week or self.history.last_week

    def forest(self) -> ForestLearner:
        a = self.args
        return ForestLearner(a.trees, a.seed, a.max_features, True, a.jobs)

    def logistic(self) -> LogisticLearner:
        a = self.args
        return LogisticLearner(a.l2, a.epochs, a.step)

    def config(self) -> dict:
        cfg = {}
        for k, v in vars(self.args).items():
            if k in ("log_level",):
                continue
            cfg[k] = str(v) if isinstance(v, Path) else v
        return cfg


def cmd_ingest(run: Run) -> None:
    h = run.history
    store = h.store
    path = run.out / "store.ndjson"
    with open(path, "w", encoding="utf-8") as fp:
        dump_store(store, fp)
    summary = {
        "n_messages": len(store.messages),
        "n_users": len(store.all_users),
        "n_messages_in_horizon": len(store.active_messages),
        "n_users_in_horizon": len(store.users),
        "n_self_messages": sum(m.is_self for m in store.messages),
        "t0": store.t0,
        "horizon_weeks": store.horizon_weeks,
    }
    run.emit(path, report.write_json(run.out / "ingest_summary.json", summary))


def cmd_activity(run: Run) -> None:
    run.emit(report.activity(run.out, analysis.activity_series(run.history.store)))


def cmd_pagerank(run: Run) -> None:
    path = run.out / "pagerank.csv"
    with open(path, "w", newline="", encoding="utf-8") as fp:
        write_pagerank_csv(fp, run.history)
    run.emit(path)


def cmd_encode(run: Run) -> None:
    store = run.history.store
    cutoff = run.args.cutoff or store.horizon_weeks
    end = store.week_end(cutoff)
    users = [u for u in store.users if store.join_times[u] < end]
    with run.stage("encode"):
        vectors = encode_population(store, users, cutoff, run.args.k)
        vocab = build_vocabulary(vectors)
        users, X = vectorize(vectors, vocab)
    path = run.out / f"motifs_k{run.args.k}_week{cutoff}.csv"
    with open(path, "w", newline="", encoding="utf-8") as fp:
        write_motif_csv(fp, users, X, vocab)
    run.emit(path)


def cmd_train(run: Run) -> None:
    a = run.args
    label = run.label_week
    ds = assemble(run.history, a.cutoff or label, label, a.k, a.bins, a.ablate_totals)
    learner = {"forest": run.forest, "logistic": run.logistic, "majority": MajorityLearner}[a.model]()
    with run.stage("cross_validate"):
        rep = cross_validate(ds, make_folds(ds, a.folds, a.seed), learner)
    with open(run.out / "eval_report.json", "w", encoding="utf-8") as fp:
        rep.write_json(fp)
    with open(run.out / "eval_report.csv", "w", newline="", encoding="utf-8") as fp:
        rep.write_csv(fp)
    run.emit(run.out / "eval_report.json", run.out / "eval_report.csv")
    if a.export_dataset:
        with open(run.out / "features.csv", "w", newline="") as ff, \
                open(run.out / "labels.csv", "w", newline="") as lf:
            write_dataset_csv(ff, lf, ds)
        run.emit(run.out / "features.csv", run.out / "labels.csv")
    if a.save_model:
        if a.model != "forest":
            raise UsageError("--save-model supports --model forest only")
        with run.stage("fit_full"):
            model = train_forest(ds.features, ds.labels, a.trees, a.seed, a.max_features,
                                 n_classes=a.bins, jobs=a.jobs)
        with open(run.out / "model.json", "w", encoding="utf-8") as fp:
            model.save(fp)
        run.emit(run.out / "model.json")


def cmd_forecast_curve(run: Run) -> None:
    a = run.args
    run.history
    with run.stage("forecast_curve"):
        fc = analysis.forecast_curve(run.history, a.k, a.bins, run.label_week, a.folds, a.seed,
                                     run.forest())
    run.emit(report.curve(run.out, fc))


def cmd_sweep_k(run: Run) -> None:
    a = run.args
    run.history
    with run.stage("sweep_k"):
        reps = analysis.sweep_k(run.history, range(a.k_min, a.k_max + 1), a.bins, run.label_week,
                                a.folds, a.seed, run.forest())
    run.emit(report.ksweep(run.out, reps))


def cmd_importance(run: Run) -> None:
    a = run.args
    label = run.label_week
    ds = assemble(run.history, label, label, a.k, a.bins)
    with run.stage("importance"):
        rep = analysis.permutation_importance(ds, run.forest(), a.splits, a.holdout, a.seed)
    run.emit(report.importance(run.out, rep))


def cmd_correlate(run: Run) -> None:
    h = run.history
    with run.stage("correlate"):
        jc = analysis.join_vs_final(h)
        weekly = analysis.weekly_rank_correlation(h)
    run.emit(*report.join_scatter(run.out, jc), report.weekly_rho(run.out, weekly))


def cmd_newmsg(run: Run) -> None:
    run.emit(report.rank_counts(run.out, analysis.newmsg_by_rank(run.history)))


def cmd_synth(run: Run) -> None:
    a = run.args
    cfg = SynthConfig(a.users, a.weeks, a.join_spread, a.base_rate, a.pref_strength,
                      a.reply_prob, a.seed)
    with run.stage("generate"):
        messages, joins = generate(cfg)
    with open(run.out / "messages.txt", "w", encoding="utf-8") as fp:
        write_messages(messages, fp)
    with open(run.out / "joins.txt", "w", encoding="utf-8") as fp:
        write_joins(joins, fp)
    run.emit(run.out / "messages.txt", run.out / "joins.txt")


def cmd_reproduce(run: Run) -> None:
    a = run.args
    h = run.history
    label = run.label_week
    forest = run.forest()
    cmd_activity(run)
    cmd_pagerank(run)
    cmd_correlate(run)
    cmd_newmsg(run)

    rows = []
    with run.stage("table1"):
        ds = assemble(h, label, label, a.k, a.bins)
        plan = make_folds(ds, a.folds, a.seed)
        rf = cross_validate(ds, plan, forest)
        lr = cross_validate(ds, plan, run.logistic())
        coarse = assemble(h, label, label, a.k, a.coarse_bins)
        rf3 = cross_validate(coarse, make_folds(coarse, a.folds, a.seed), forest)
    rows = [("logistic_regression", a.bins, lr.mae), ("mlp", a.bins, None),
            ("random_forest", a.bins, rf.mae), ("random_forest", a.coarse_bins, rf3.mae)]
    run.emit(report.table1(run.out, rows))

    cmd_forecast_curve(run)
    cmd_sweep_k(run)
    with run.stage("importance"):
        imp = analysis.permutation_importance(ds, forest, a.splits, a.holdout, a.seed)
    run.emit(report.importance(run.out, imp))


HANDLERS = {
    "ingest": cmd_ingest,
    "activity": cmd_activity,
    "pagerank": cmd_pagerank,
    "encode": cmd_encode,
    "train": cmd_train,
    "forecast-curve": cmd_forecast_curve,
    "sweep-k": cmd_sweep_k,
    "importance": cmd_importance,
    "correlate": cmd_correlate,
    "newmsg": cmd_newmsg,
    "synth": cmd_synth,
    "reproduce": cmd_reproduce,
}


def main(argv=None) -> int:
    try:
        args = parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=getattr(logging, str(args.log_level).upper(), logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s")
    run = Run(args)
    try:
        run.out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        print(f"motifrank {args.command}: cannot create output directory {run.out}: {exc}",
              file=sys.stderr)
        return EXIT_USAGE
    try:
        with run.stage("total"):
            HANDLERS[args.command](run)
        report.write_manifest(run.out, args.command, run.config(), run.inputs, run.timings,
                              run.outputs)
    except UsageError as exc:
        print(f"motifrank {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IngestError, EncodeError, DatasetError, analysis.AnalysisError) as exc:
        print(f"motifrank {args.command}: invalid data: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001 - reported as a one-line diagnostic
        print(f"motifrank {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
