"""CSV/JSON emitters for the figure and table analogues, plus run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import platform
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from . import __version__

PUBLISHED_MAE = {"logistic_regression": 0.63, "mlp": 0.51, "random_forest": 0.49}


def _num(x: float) -> str:
    return repr(float(x))


def write_rows(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", newline="", encoding="utf-8") as fp:
        w = csv.writer(fp, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_num(v) if isinstance(v, float) else v for v in row])
    return path


def write_json(path: Path, payload: Mapping) -> Path:
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(payload, fp, indent=2, sort_keys=True)
        fp.write("\n")
    return path


def activity(out: Path, series) -> Path:
    return write_rows(out / "fig1_activity.csv", ["week", "messages"], series)


def join_scatter(out: Path, join_corr) -> list[Path]:
    rep = join_corr.report
    return [
        write_rows(out / "fig3_scatter.csv", ["user", "join_timestamp", "pagerank"], join_corr.rows),
        write_json(out / "fig3_correlation.json",
                   {"rho": rep.rho, "p_value": rep.p_value, "n": rep.n, "context": rep.context}),
    ]


def rank_counts(out: Path, counts: Mapping[int, int]) -> Path:
    return write_rows(out / "fig4_rankcounts.csv", ["rank", "new_messages"], counts.items())


def weekly_rho(out: Path, reports) -> Path:
    return write_rows(out / "fig5_weekly_rho.csv", ["week", "rho", "p_value", "n"],
                      [(w, r.rho, r.p_value, r.n) for w, r in reports])


def curve(out: Path, fc) -> Path:
    return write_rows(out / "fig6_curve.csv",
                      ["cutoff_week", "mae_motifs", "mae_totals", "n_users"],
                      [(p.cutoff_week, p.mae_motifs, p.mae_totals, p.n_users) for p in fc.points])


def ksweep(out: Path, reports) -> Path:
    return write_rows(out / "fig7_ksweep.csv", ["k", "mae", "pooled_se"],
                      [(k, r.mae, r.pooled_se) for k, r in reports.items()])


def importance(out: Path, rep) -> Path:
    return write_rows(out / "fig8_importance.csv", ["kgram", "mean_increase_pct"], rep.ranked())


def table1(out: Path, rows: Sequence[tuple[str, int, float | None]]) -> Path:
    body = []
    for model, bins, value in rows:
        ref = PUBLISHED_MAE.get(model, "") if bins == 7 else ""
        body.append((model, bins, "" if value is None else float(value), ref))
    return write_rows(out / "table1.csv", ["model", "bins", "mae", "published_mae"], body)


def sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(out: Path, command: str, config: Mapping, inputs: Iterable[Path],
                   timings: Mapping[str, float], outputs: Iterable[Path]) -> Path:
    payload = {
        "artifact": "motifrank",
        "version": __version__,
        "command": command,
        "config": dict(config),
        "seed": config.get("seed"),
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": sorted(Path(p).name for p in outputs),
        "timings_seconds": {k: round(v, 4) for k, v in timings.items()},
        "python": platform.python_version(),
    }
    return write_json(out / "manifest.json", payload)
