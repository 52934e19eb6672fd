"""Command line entry point: ``mlc run|sweep|validate-config|gradcheck``.

Failures exit nonzero and print one JSON object ``{"error": ..., "message": ...}``
on stderr. ``MLC_LOG_LEVEL`` (DEBUG, INFO, WARNING, ...) controls log verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .config import load_config
from .export import export_report, export_sweep
from .runner import accuracy_auc, run_experiment, run_sweep


def _parse_rhos(text: str) -> list[float]:
    """Accepts ``0,0.2,0.4`` or a range shorthand ``0:1:0.1`` (start:stop:step, inclusive)."""
    if ":" in text:
        start, stop, step = (float(t) for t in text.split(":"))
        n = int(round((stop - start) / step))
        return [round(start + i * step, 10) for i in range(n + 1)]
    return [float(t) for t in text.split(",") if t.strip()]


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    out = Path(args.out or cfg.output_dir) / cfg.run_id
    repeats = args.repeats or cfg.repeats
    accs = []
    for r in range(repeats):
        report = run_experiment(cfg, r)
        export_report(report, out / f"repeat_{r}")
        accs.append(report.final_test_acc if report.status == "ok" else float("nan"))
        print(f"{cfg.run_id} repeat {r}: {report.status} test_acc={report.final_test_acc:.4f} ({report.wall_clock_s:.1f}s)")
    ok = np.array([a for a in accs if np.isfinite(a)])
    summary = {"run_id": cfg.run_id, "method": cfg.method, "repeats": repeats, "accuracies": accs,
               "mean_acc": float(ok.mean()) if ok.size else None, "std_acc": float(ok.std()) if ok.size else None}
    (out / "aggregate.json").write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
    print(json.dumps({k: summary[k] for k in ("run_id", "method", "mean_acc", "std_acc")}))
    return 0 if ok.size == repeats else 1


def cmd_sweep(args) -> int:
    cfg = load_config(args.config)
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    rows = run_sweep(cfg, _parse_rhos(args.rho), args.repeats or cfg.repeats, methods, args.workers)
    path = export_sweep(rows, Path(args.out or cfg.output_dir) / cfg.run_id / "sweep.csv")
    for r in rows:
        print(f"{r['method']:>16} rho={r['rho']:.2f} acc={r['mean_acc']:.4f} +/- {r['std_acc']:.4f}")
    for m in methods:
        print(f"{m} AUC={accuracy_auc(rows, m):.4f}")
    print(f"wrote {path}")
    return 0


def cmd_validate(args) -> int:
    cfg = load_config(args.config)
    print(json.dumps(cfg.to_dict(), indent=2, sort_keys=True))
    return 0


def cmd_gradcheck(args) -> int:
    from .. import oracles

    ok = True

    def line(name, passed, detail):
        nonlocal ok
        ok &= passed
        print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")

    worst = max(max(oracles.classifier_gradcheck(s).worst, oracles.lcn_gradcheck(s).worst) for s in range(args.draws))
    line("backward vs central differences", worst <= 1e-4, f"{args.draws} draws, worst rel err {worst:.2e} (tol 1e-4)")
    anchors = [oracles.meta_gradient_anchor(s) for s in range(args.meta_seeds)]
    cos = min(a.cosine for a in anchors)
    rel = max(a.rel_norm_error for a in anchors)
    line("meta-gradient vs unrolled FD", cos >= 0.99 and rel <= 5e-2, f"min cosine {cos:.5f}, max rel norm err {rel:.2e}")
    hv = max(oracles.mixed_hvp_check(s).rel_error for s in range(args.meta_seeds))
    line("mixed HVP vs double FD", hv <= 1e-2, f"max rel err {hv:.2e} (tol 1e-2)")
    return 0 if ok else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mlc", description="Meta label correction experiments")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="train one configuration, export reports")
    r.add_argument("--config", required=True)
    r.add_argument("--repeats", type=int)
    r.add_argument("--out")
    r.set_defaults(fn=cmd_run)

    s = sub.add_parser("sweep", help="accuracy vs noise level for several methods")
    s.add_argument("--config", required=True)
    s.add_argument("--rho", default="0:1:0.1", help="comma list or start:stop:step")
    s.add_argument("--methods", default="mlc,noisy_only")
    s.add_argument("--repeats", type=int)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_sweep)

    v = sub.add_parser("validate-config", help="check a config file and print it fully defaulted")
    v.add_argument("config")
    v.set_defaults(fn=cmd_validate)

    g = sub.add_parser("gradcheck", help="run the gradient and meta-gradient oracle checks")
    g.add_argument("--draws", type=int, default=100)
    g.add_argument("--meta-seeds", type=int, default=20)
    g.set_defaults(fn=cmd_gradcheck)
    return p


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("MLC_LOG_LEVEL", "WARNING").upper(),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except Exception as exc:  # noqa: BLE001 - reported as machine-readable JSON
        json.dump({"error": type(exc).__name__, "message": str(exc), "command": args.command}, sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
