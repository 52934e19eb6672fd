"""
Training MLC on noisy blobs and looking at the corrections
==========================================================

Four Gaussian blobs, 400 trusted labels, a few thousand labels corrupted by
FLIP noise at rho = 0.8 -- enough that most given labels are wrong and a
classifier trained on them alone learns a permuted labelling.
"""

import numpy as np

from mlc.harness import ExperimentConfig, run_experiment

np.set_printoptions(precision=2, suppress=True)

config = ExperimentConfig.from_dict(
    {
        "run_id": "demo",
        "dataset": {"kind": "blobs", "num_classes": 4, "per_class": 1600, "spread": 1.3},
        "split": {"clean_count": 400, "test_count": 1000},
        "noise": {"kind": "FLIP", "rho": 0.8},
        "train": {"k": 5, "epochs": 8},
    }
)

# Baseline: train on the noisy labels only.
base = run_experiment(config.with_overrides(method="noisy_only"))
print(f"noisy_only test accuracy: {base.final_test_acc:.3f}")

# MLC: the label correction network rewrites each noisy label, and is itself
# trained so that the classifier does well on held-out trusted data.
rep = run_experiment(config)
print(f"MLC test accuracy:        {rep.final_test_acc:.3f}")
for row in rep.history:
    print(f"  epoch {row['epoch']}: noisy loss {row['noisy_loss']:.3f}  clean loss {row['clean_loss']:.3f}  "
          f"test acc {row['test_acc']:.3f}")

# Rows: true class of a noisy-set example; columns: average corrected
# distribution. A strong diagonal means the corrections recover the truth.
print("corrected-label heatmap (rows = true class):")
print(np.array(rep.heatmap))

for s in rep.correction_stats:
    print(f"{s['group']:>12}: n={s['count']:5d}  P(given label)={s['mean_prob_given_label']:.3f}  "
          f"P(true label)={s['mean_prob_true_label']:.3f}")
