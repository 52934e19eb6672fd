"""
Corrupting labels with UNIF and FLIP noise
==========================================

Both injectors corrupt each example independently with probability rho.
UNIF redraws the label from all C classes (so it may land on the original
one); FLIP always moves to one of the other C-1 classes.
"""

import numpy as np

from mlc.noise import NoiseSpec, analytic_corruption_matrix, empirical_corruption_matrix, inject

np.set_printoptions(precision=3, suppress=True)

# A balanced label vector with four classes.
C, N = 4, 100_000
y = np.arange(N) % C

# Corrupt it both ways at rho = 0.6 and compare the observed transition
# frequencies with the closed-form matrices. Column j holds P(noisy | true=j).
for kind in ("UNIF", "FLIP"):
    spec = NoiseSpec(kind, rho=0.6, num_classes=C, seed=0)
    noisy = inject(y, spec)
    emp = empirical_corruption_matrix(y, noisy, C)
    print(f"--- {kind}, rho=0.6: fraction of labels changed = {np.mean(noisy != y):.3f}")
    print("empirical\n", emp)
    print("analytic\n", analytic_corruption_matrix(spec))
    print("max |difference| =", np.abs(emp - analytic_corruption_matrix(spec)).max())

# At rho = 1, FLIP never keeps a label, UNIF keeps about 1/C of them.
for kind in ("UNIF", "FLIP"):
    kept = np.mean(inject(y, NoiseSpec(kind, 1.0, C, seed=1)) == y)
    print(f"{kind} rho=1.0: kept {kept:.3f} of labels")

# Corruption is keyed by example index, so a prefix is corrupted the same way
# no matter how many rows follow it.
spec = NoiseSpec("FLIP", 0.5, C, seed=7)
print("prefix stable:", np.array_equal(inject(y[:100], spec), inject(y, spec)[:100]))
