from pathlib import Path

import numpy as np
import pytest

from mlc.data import (
    CsvSchema,
    CyclingBatches,
    DataError,
    LabeledSet,
    batch_iter,
    circle_centers,
    export_csv,
    gen_blobs,
    load_csv,
    make_bundle,
    nearest_centroid_predict,
)
from mlc.noise import FLIP, NoiseSpec

IRIS = Path(__file__).parent / "data" / "iris.csv"


def test_blob_counts_respected():
    x, y = gen_blobs(3, 2, [5, 7, 11], 0.5, seed=0)
    assert x.shape == (23, 2)
    assert np.bincount(y).tolist() == [5, 7, 11]


def test_tiny_spread_is_perfectly_separable():
    x, y = gen_blobs(4, 2, 200, 1e-3, seed=1)
    assert np.all(nearest_centroid_predict(x, circle_centers(4, 2, 3.0)) == y)


def test_blobs_deterministic():
    a = gen_blobs(4, 3, 10, 1.0, seed=5)
    b = gen_blobs(4, 3, 10, 1.0, seed=5)
    assert np.array_equal(a[0], b[0]) and np.array_equal(a[1], b[1])


def test_blob_validation():
    with pytest.raises(DataError):
        gen_blobs(1, 2, 10, 1.0, 0)
    with pytest.raises(DataError):
        gen_blobs(3, 2, 10, 0.0, 0)


def test_header_only_csv_gives_empty_arrays(tmp_path):
    p = tmp_path / "h.csv"
    p.write_text("a,b,label\n")
    x, y, mapping = load_csv(p, CsvSchema("label"))
    assert x.shape == (0, 2) and y.shape == (0,) and mapping == {}


def test_csv_roundtrip(tmp_path):
    rng = np.random.default_rng(0)
    x = rng.normal(size=(20, 3))
    y = rng.integers(0, 3, 20)
    p = tmp_path / "d.csv"
    export_csv(p, x, y)
    bx, by, _ = load_csv(p, CsvSchema("label"), label_map={"0": 0, "1": 1, "2": 2})
    assert np.array_equal(bx, x) and np.array_equal(by, y)


def test_iris_fixture():
    x, y, mapping = load_csv(IRIS, CsvSchema("species"))
    assert x.shape == (150, 4)
    assert mapping == {"setosa": 0, "versicolor": 1, "virginica": 2}
    assert np.bincount(y).tolist() == [50, 50, 50]


def test_iris_feature_subset():
    x, _, _ = load_csv(IRIS, CsvSchema("species", ["petal_width", "sepal_length"]))
    assert x.shape == (150, 2)
    np.testing.assert_array_equal(x[0], [0.2, 5.1])


def test_csv_parse_error_reports_line(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,label\n1.0,x\noops,y\n")
    with pytest.raises(DataError, match=":3:"):
        load_csv(p, CsvSchema("label"))


def test_csv_ragged_row(tmp_path):
    p = tmp_path / "bad.csv"
    p.write_text("a,b,label\n1,2,x\n1,x\n")
    with pytest.raises(DataError, match="expected 3 fields"):
        load_csv(p, CsvSchema("label"))


def test_csv_unknown_label_with_map(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,label\n1,cat\n2,emu\n")
    with pytest.raises(DataError, match="emu"):
        load_csv(p, CsvSchema("label"), label_map={"cat": 0, "dog": 1})


def test_csv_missing_label_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(DataError, match="label column"):
        load_csv(p, CsvSchema("label"))


def _blob_bundle(rho=0.6, clean=400, seed=0, standardize=True):
    x, y = gen_blobs(4, 2, 800, 1.0, seed=seed)
    return x, y, make_bundle(x, y, NoiseSpec(FLIP, rho, 4, seed=seed), clean_count=clean,
                             test_count=600, seed=seed, standardize=standardize)


def test_bundle_partitions_rows():
    x, _, b = _blob_bundle(standardize=False)
    assert len(b.clean) + len(b.noisy) + len(b.test) == x.shape[0]
    assert len(b.clean) == 400 and len(b.test) == 600
    rows = np.vstack([b.clean.x, b.noisy.x, b.test.x])
    assert np.unique(rows, axis=0).shape[0] == x.shape[0]


def test_bundle_clean_split_is_stratified():
    _, _, b = _blob_bundle()
    assert np.bincount(b.clean.y, minlength=4).tolist() == [100, 100, 100, 100]
    _, _, odd = _blob_bundle(clean=402)
    counts = np.bincount(odd.clean.y, minlength=4)
    assert counts.sum() == 402 and counts.max() - counts.min() <= 1


def test_bundle_rho_zero_keeps_labels():
    _, _, b = _blob_bundle(rho=0.0)
    assert np.array_equal(b.noisy.y, b.hidden_true_of_noisy())


def test_bundle_noise_rate_close_to_rho():
    _, _, b = _blob_bundle(rho=0.6)
    rate = np.mean(b.noisy.y != b.hidden_true_of_noisy())
    assert abs(rate - 0.6) < 0.03


def test_training_view_hides_truth():
    _, _, b = _blob_bundle()
    view = b.training_view()
    assert not any("hidden" in f or "true" in f for f in vars(view))


def test_standardization_uses_training_rows():
    _, _, b = _blob_bundle()
    train = np.vstack([b.clean.x, b.noisy.x])
    np.testing.assert_allclose(train.mean(axis=0), 0.0, atol=1e-12)
    np.testing.assert_allclose(train.std(axis=0), 1.0, atol=1e-12)


def test_bundle_missing_class_raises():
    x, y = gen_blobs(4, 2, [100, 100, 100, 2], 1.0, seed=0)
    with pytest.raises(DataError, match="class 3"):
        make_bundle(x, y, NoiseSpec(FLIP, 0.2, 4), clean_count=40, test_count=0)


def test_bundle_deterministic():
    _, _, a = _blob_bundle(seed=3)
    _, _, b = _blob_bundle(seed=3)
    assert np.array_equal(a.noisy.x, b.noisy.x) and np.array_equal(a.noisy.y, b.noisy.y)


def test_batch_iter_is_a_permutation():
    s = LabeledSet(np.arange(23.0)[:, None], np.arange(23))
    batches = list(batch_iter(s, 5, seed=1, epoch=0))
    assert [len(b) for b in batches] == [5, 5, 5, 5, 3]
    assert sorted(np.concatenate([b.y for b in batches]).tolist()) == list(range(23))


def test_batch_iter_deterministic_and_epoch_dependent():
    s = LabeledSet(np.zeros((30, 1)), np.arange(30))
    a = [b.y.tolist() for b in batch_iter(s, 7, 2, 0)]
    assert a == [b.y.tolist() for b in batch_iter(s, 7, 2, 0)]
    assert a != [b.y.tolist() for b in batch_iter(s, 7, 2, 1)]


def test_batch_larger_than_split_is_single_batch():
    s = LabeledSet(np.zeros((4, 1)), np.arange(4))
    batches = list(batch_iter(s, 100, 0, 0))
    assert len(batches) == 1 and len(batches[0]) == 4


def test_cycling_batches_are_full_size():
    s = LabeledSet(np.zeros((10, 1)), np.arange(10))
    cyc = CyclingBatches(s, 4, seed=0)
    assert all(len(cyc.next()) == 4 for _ in range(10))
