import numpy as np
import pytest
from scipy.stats import chi2_contingency

from mlc.noise import (
    FLIP,
    UNIF,
    NoiseError,
    NoiseSpec,
    analytic_corruption_matrix,
    empirical_corruption_matrix,
    example_uniforms,
    inject,
)

C = 4


def balanced_labels(n, c=C):
    return np.arange(n) % c


@pytest.mark.parametrize("kind", [UNIF, FLIP])
def test_rho_zero_is_identity(kind):
    y = balanced_labels(1000)
    assert np.array_equal(inject(y, NoiseSpec(kind, 0.0, C, seed=3)), y)


def test_flip_rho_one_always_changes_label():
    y = balanced_labels(20000)
    noisy = inject(y, NoiseSpec(FLIP, 1.0, C, seed=1))
    assert np.all(noisy != y)
    assert np.all((noisy >= 0) & (noisy < C))


def test_unif_rho_one_keeps_label_at_rate_one_over_c():
    n = 40000
    y = balanced_labels(n)
    keep = float(np.mean(inject(y, NoiseSpec(UNIF, 1.0, C, seed=2)) == y))
    sigma = np.sqrt((1 / C) * (1 - 1 / C) / n)
    assert abs(keep - 1 / C) <= 3 * sigma


@pytest.mark.parametrize("kind", [UNIF, FLIP])
def test_empirical_matches_analytic_at_moderate_noise(kind):
    spec = NoiseSpec(kind, 0.6, C, seed=11)
    y = balanced_labels(100000)
    emp = empirical_corruption_matrix(y, inject(y, spec), C)
    assert np.max(np.abs(emp - analytic_corruption_matrix(spec))) <= 0.01


@pytest.mark.parametrize("kind", [UNIF, FLIP])
def test_analytic_matrix_is_column_stochastic(kind):
    m = analytic_corruption_matrix(NoiseSpec(kind, 0.37, 5))
    np.testing.assert_allclose(m.sum(axis=0), 1.0, atol=1e-15)
    assert np.all(m >= 0)


def test_empirical_matrix_identity_and_zero_diagonal():
    y = balanced_labels(400)
    assert np.array_equal(empirical_corruption_matrix(y, y, C), np.eye(C))
    flipped = inject(y, NoiseSpec(FLIP, 1.0, C, seed=0))
    assert np.all(np.diag(empirical_corruption_matrix(y, flipped, C)) == 0.0)


def test_empirical_matrix_empty_class_raises():
    y = np.array([0, 1, 1, 0])
    with pytest.raises(NoiseError, match="class 2"):
        empirical_corruption_matrix(y, y, 3)


def test_same_seed_same_labels_different_seed_differs():
    y = balanced_labels(5000)
    a = inject(y, NoiseSpec(FLIP, 0.5, C, seed=9))
    b = inject(y, NoiseSpec(FLIP, 0.5, C, seed=9))
    c = inject(y, NoiseSpec(FLIP, 0.5, C, seed=10))
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_corruption_of_a_prefix_is_independent_of_what_follows():
    """Draws are keyed by example index, so growing the set leaves earlier rows untouched."""
    y = balanced_labels(3000)
    spec = NoiseSpec(UNIF, 0.5, C, seed=4)
    assert np.array_equal(inject(y[:1000], spec), inject(y, spec)[:1000])


def test_uniform_stream_in_range_and_distinct_streams():
    u0 = example_uniforms(5, 10000, 0)
    u1 = example_uniforms(5, 10000, 1)
    assert np.all((u0 >= 0) & (u0 < 1))
    assert abs(u0.mean() - 0.5) < 0.02
    assert abs(np.corrcoef(u0, u1)[0, 1]) < 0.05


@pytest.mark.parametrize("kind", [UNIF, FLIP])
def test_noise_is_independent_of_example_position(kind):
    """Within one true class, the noisy label distribution should not depend on
    which block of indices the example sits in."""
    n = 40000
    y = np.zeros(n, dtype=np.int64)
    noisy = inject(y, NoiseSpec(kind, 0.6, C, seed=21))
    blocks = np.arange(n) // (n // 4)
    table = np.zeros((4, C))
    np.add.at(table, (blocks, noisy), 1)
    table = table[:, table.sum(axis=0) > 0]
    assert chi2_contingency(table).pvalue > 0.001


def test_spec_validation():
    with pytest.raises(NoiseError):
        NoiseSpec("GAUSS", 0.1, 3)
    with pytest.raises(NoiseError):
        NoiseSpec(FLIP, 1.5, 3)
    with pytest.raises(NoiseError):
        NoiseSpec(FLIP, 0.1, 1)
    assert NoiseSpec("flip", 0.1, 3).kind == FLIP


def test_out_of_range_label_rejected():
    with pytest.raises(NoiseError, match="index 1"):
        inject([0, 7], NoiseSpec(UNIF, 0.2, 3))
