from __future__ import annotations

import dataclasses
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from ..bilevel import NonFiniteStepError, TrainingDiverged, lcn_corrections, train
from ..data import DatasetBundle, CsvSchema, gen_blobs, load_csv, make_bundle
from ..metrics import evaluate
from ..models import ClassifierConfig, LcnConfig
from .config import ExperimentConfig

log = logging.getLogger(__name__)


@dataclass
class RunReport:
    run_id: str
    method: str
    repeat: int
    seed: int
    status: str  # "ok" or "failed"
    final_test_acc: float
    per_class_acc: list[float]
    confusion: list[list[int]]
    history: list[dict]  # one row per epoch: epoch, noisy_loss, clean_loss, test_acc
    heatmap: list[list[float]] | None  # rows: true class; columns: mean corrected distribution
    correction_stats: list[dict] | None
    config: dict
    wall_clock_s: float
    main_steps: int = 0
    meta_updates: int = 0
    error: str | None = None
    extra: dict = field(default_factory=dict)


def build_bundle(config: ExperimentConfig, seed: int) -> DatasetBundle:
    ds = config.dataset
    if ds.kind == "blobs":
        x, y = gen_blobs(ds.num_classes, ds.dim, ds.per_class, ds.spread, seed, ds.center_radius)
        num_classes = ds.num_classes
    else:
        x, y, mapping = load_csv(ds.path, CsvSchema(ds.label_column, ds.feature_columns))
        num_classes = len(mapping)
    sp = config.split
    return make_bundle(
        x, y, config.noise.spec(num_classes, seed),
        clean_count=sp.clean_count, clean_fraction=sp.clean_fraction,
        test_count=sp.test_count, test_fraction=sp.test_fraction, seed=seed,
    )


def correction_analysis(corrected: np.ndarray, noisy_labels, true_labels, num_classes: int):
    """Heatmap grouped by true label, plus given-label probability for
    uncorrupted versus corrupted noisy examples."""
    noisy_labels = np.asarray(noisy_labels)
    true_labels = np.asarray(true_labels)
    heat = np.full((num_classes, num_classes), np.nan)
    for c in range(num_classes):
        rows = corrected[true_labels == c]
        if rows.size:
            heat[c] = rows.mean(axis=0)
    n = np.arange(noisy_labels.size)
    p_given = corrected[n, noisy_labels]
    p_true = corrected[n, true_labels]
    p_max = corrected.max(axis=1)
    stats = []
    for group, mask in (("uncorrupted", noisy_labels == true_labels), ("corrupted", noisy_labels != true_labels)):
        cnt = int(mask.sum())
        mean = (lambda a: float(a[mask].mean()) if cnt else float("nan"))
        stats.append(
            {
                "group": group,
                "count": cnt,
                "mean_prob_given_label": mean(p_given),
                "mean_prob_true_label": mean(p_true),
                "mean_max_prob": mean(p_max),
            }
        )
    return heat, stats


def run_experiment(config: ExperimentConfig, repeat: int = 0) -> RunReport:
    """Build data, train the configured method, evaluate, and analyse the LCN."""
    t0 = time.perf_counter()
    seed = config.seed + repeat
    bundle = build_bundle(config, seed)
    c = bundle.num_classes
    ccfg = ClassifierConfig(bundle.clean.x.shape[1], config.classifier.hidden_dims, c, config.classifier.feature_source)
    lcfg = LcnConfig(c, ccfg.feature_dim, config.lcn.hidden_dim, config.lcn.label_embed_dim)
    tcfg = dataclasses.replace(config.train, seed=seed)
    report = RunReport(
        run_id=config.run_id, method=config.method, repeat=repeat, seed=seed, status="ok",
        final_test_acc=float("nan"), per_class_acc=[], confusion=[], history=[], heatmap=None,
        correction_stats=None, config=config.to_dict(), wall_clock_s=0.0,
    )
    try:
        result = train(bundle.training_view(), ccfg, tcfg, config.method, lcfg if config.method == "mlc" else None)
    except (TrainingDiverged, NonFiniteStepError) as exc:
        history = getattr(exc, "history", None)
        if history is not None:
            report.history = _history_rows(history)
        report.status, report.error = "failed", str(exc)
        report.wall_clock_s = time.perf_counter() - t0
        log.warning("run %s repeat %d failed: %s", config.run_id, repeat, exc)
        return report
    ev = evaluate(result.model.classifier, result.w, bundle.test)
    report.final_test_acc = ev.accuracy
    report.per_class_acc = [float(a) for a in ev.per_class_accuracy]
    report.confusion = ev.confusion.tolist()
    report.history = _history_rows(result.history)
    report.main_steps = result.history.main_steps
    report.meta_updates = result.history.meta_updates
    if result.alpha is not None:
        corrected = lcn_corrections(result, bundle.noisy.x, bundle.noisy.y)
        heat, stats = correction_analysis(corrected, bundle.noisy.y, bundle.hidden_true_of_noisy(), c)
        report.heatmap = heat.tolist()
        report.correction_stats = stats
    report.wall_clock_s = time.perf_counter() - t0
    return report


def _history_rows(history) -> list[dict]:
    return [
        {"epoch": i, "noisy_loss": nl, "clean_loss": cl, "test_acc": acc}
        for i, (nl, cl, acc) in enumerate(
            zip(history.epoch_noisy_loss, history.epoch_clean_loss, history.epoch_test_acc)
        )
    ]


def run_repeats(config: ExperimentConfig, repeats: int | None = None) -> list[RunReport]:
    return [run_experiment(config, r) for r in range(repeats or config.repeats)]


def _cell(args):
    config, method, rho, repeat = args
    cfg = config.with_overrides(method=method).with_noise(rho=rho)
    return method, rho, repeat, run_experiment(cfg, repeat)


def run_sweep(base_config: ExperimentConfig, rho_list, repeats: int = 1, methods=("mlc", "noisy_only"), workers: int = 1):
    """Accuracy of each method at each noise level, averaged over repeats.

    Returns one dict per (method, rho) cell with mean/std accuracy over the
    successful repeats; failed repeats are counted, not fatal.
    """
    rho_list = [float(r) for r in rho_list]
    bad = [r for r in rho_list if not 0.0 <= r <= 1.0]
    if bad:
        raise ValueError(f"noise levels must lie in [0, 1]: {bad}")
    jobs = [(base_config, m, r, k) for m in methods for r in rho_list for k in range(repeats)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as pool:
            results = list(pool.map(_cell, jobs))
    else:
        results = [_cell(j) for j in jobs]
    rows = []
    for m in methods:
        for r in rho_list:
            reps = [rep for mm, rr, _, rep in results if mm == m and rr == r]
            accs = np.array([rep.final_test_acc for rep in reps if rep.status == "ok"])
            rows.append(
                {
                    "method": m,
                    "rho": r,
                    "mean_acc": float(accs.mean()) if accs.size else float("nan"),
                    "std_acc": float(accs.std()) if accs.size else float("nan"),
                    "n_ok": int(accs.size),
                    "n_failed": len(reps) - int(accs.size),
                }
            )
    return rows


def accuracy_auc(rows, method: str, rho_min: float = 0.0, rho_max: float = 1.0) -> float:
    """Trapezoid area under the mean-accuracy-vs-rho curve of ``method``."""
    pts = sorted((r["rho"], r["mean_acc"]) for r in rows if r["method"] == method and rho_min <= r["rho"] <= rho_max)
    if len(pts) < 2:
        return float("nan")
    xs, ys = zip(*pts)
    return float(np.trapezoid(ys, xs)) if hasattr(np, "trapezoid") else float(np.trapz(ys, xs))
