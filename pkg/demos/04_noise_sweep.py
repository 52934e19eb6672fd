"""
Accuracy against noise level
============================

Sweep FLIP noise from 0 to 1 for MLC and the noisy-only baseline. The
baseline holds up while the given label is still the most likely one
(rho < 0.75 for four classes) and collapses beyond; MLC stays flat because
the trusted set pins down what the labels mean.

Runs in well under a minute on one core.
"""

from mlc.harness import ExperimentConfig, accuracy_auc, run_sweep

config = ExperimentConfig.from_dict(
    {
        "run_id": "sweep",
        "dataset": {"kind": "blobs", "num_classes": 4, "per_class": 1100, "spread": 1.3},
        "split": {"clean_count": 400, "test_count": 1000},
        "train": {"epochs": 5},
    }
)

rhos = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
rows = run_sweep(config, rhos, repeats=1, methods=("mlc", "noisy_only"))

print(f"{'rho':>5} {'mlc':>8} {'noisy_only':>11}")
for rho in rhos:
    acc = {r["method"]: r["mean_acc"] for r in rows if r["rho"] == rho}
    print(f"{rho:5.1f} {acc['mlc']:8.3f} {acc['noisy_only']:11.3f}")

for method in ("mlc", "noisy_only"):
    print(f"area under accuracy curve, {method}: {accuracy_auc(rows, method):.3f}")
