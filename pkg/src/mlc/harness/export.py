"""Plot-ready files for one run or one sweep. Every write is temp-file then rename."""

from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import asdict
from pathlib import Path

from .runner import RunReport


class ExportError(OSError):
    pass


def _num(v) -> str:
    if isinstance(v, bool):
        return str(v)
    if isinstance(v, float):
        return repr(float(v))
    return str(v)


def _atomic_write(path: Path, text: str) -> Path:
    tmp = path.with_name(f".{path.name}.tmp")
    try:
        tmp.write_text(text, encoding="utf-8")
        os.replace(tmp, path)
    except OSError as exc:
        raise ExportError(f"cannot write {path}: {exc}") from exc
    return path


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_num(v) for v in row])
    return buf.getvalue()


def export_report(report: RunReport, directory) -> list[Path]:
    """Write history.csv, heatmap.csv, correction_stats.csv, config.json and summary.json.

    The two LCN files are written only for runs that trained an LCN.
    """
    d = Path(directory)
    try:
        d.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ExportError(f"cannot create {d}: {exc}") from exc
    out = []
    cols = ["epoch", "noisy_loss", "clean_loss", "test_acc"]
    out.append(_atomic_write(d / "history.csv", _csv_text(cols, ([h[c] for c in cols] for h in report.history))))
    if report.heatmap is not None:
        c = len(report.heatmap)
        out.append(
            _atomic_write(
                d / "heatmap.csv",
                _csv_text(["true_label", *[f"p{j}" for j in range(c)]], ([i, *row] for i, row in enumerate(report.heatmap))),
            )
        )
    if report.correction_stats is not None:
        keys = list(report.correction_stats[0])
        out.append(
            _atomic_write(d / "correction_stats.csv", _csv_text(keys, ([s[k] for k in keys] for s in report.correction_stats)))
        )
    out.append(_atomic_write(d / "config.json", json.dumps(report.config, indent=2, sort_keys=True) + "\n"))
    summary = {k: v for k, v in asdict(report).items() if k != "history"}
    out.append(_atomic_write(d / "summary.json", json.dumps(summary, indent=2, sort_keys=True, allow_nan=True) + "\n"))
    return out


def export_sweep(rows: list[dict], path) -> Path:
    cols = ["method", "rho", "mean_acc", "std_acc", "n_ok", "n_failed"]
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    return _atomic_write(path, _csv_text(cols, ([r[c] for c in cols] for r in rows)))


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]
