"""Synthetic generation, SCAR splitting, loaders, and batch iteration."""

import struct

import numpy as np
import pytest

from distpu.data import (
    BatchPlan,
    LabeledDataset,
    PUDataset,
    batch_iter,
    binarize,
    empirical_prior,
    load_csv,
    load_dataset,
    load_idx_images,
    make_gaussian_mixture,
    normalize,
    scar_split,
)
from distpu.errors import ConfigError, ContractError, DataFormatError


class TestGaussianMixture:
    def test_degenerate_prior_all_positive(self):
        ds = make_gaussian_mixture(4, 1.0, [0.0], [5.0], 1.0, seed=0)
        assert np.all(ds.labels == 1)

    def test_label_mean_interval(self):
        # Binomial 3-sigma style interval for p=0.5, n=10000.
        ds = make_gaussian_mixture(10_000, 0.5, [1.0, 1.0], [-1.0, -1.0], 1.0, seed=42)
        assert 0.47 <= ds.labels.mean() <= 0.53

    def test_deterministic(self):
        kwargs = dict(n=100, prior=0.3, mean_pos=[1.0], mean_neg=[-1.0], stddev=2.0, seed=9)
        a = make_gaussian_mixture(**kwargs)
        b = make_gaussian_mixture(**kwargs)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_class_conditional_means(self):
        ds = make_gaussian_mixture(20_000, 0.5, [3.0, 3.0], [-3.0, -3.0], 1.0, seed=1)
        pos = ds.features[ds.labels == 1]
        assert pos.mean(axis=0) == pytest.approx([3.0, 3.0], abs=0.05)

    def test_invalid_args(self):
        with pytest.raises(ConfigError):
            make_gaussian_mixture(10, 1.5, [0.0], [1.0], 1.0, seed=0)
        with pytest.raises(ConfigError):
            make_gaussian_mixture(10, 0.5, [0.0], [1.0], 0.0, seed=0)
        with pytest.raises(ConfigError):
            make_gaussian_mixture(10, 0.5, [0.0, 1.0], [1.0], 1.0, seed=0)


class TestScarSplit:
    def _full(self, seed=0):
        return make_gaussian_mixture(50, 0.4, [1.0], [-1.0], 1.0, seed=seed)

    def test_empty_selection(self):
        full = self._full()
        pu = scar_split(full, 0, seed=1)
        assert pu.n_labeled == 0
        assert np.array_equal(pu.x_unlabeled, full.features)
        assert pu.class_prior == empirical_prior(full)

    def test_exhaustive_selection(self):
        full = self._full()
        n_pos = int((full.labels == 1).sum())
        pu = scar_split(full, n_pos, seed=2)
        got = {tuple(row) for row in pu.x_labeled}
        want = {tuple(row) for row in full.features[full.labels == 1]}
        assert got == want

    def test_unlabeled_pool_is_full_sample(self):
        full = self._full()
        pu = scar_split(full, 5, seed=3)
        assert np.array_equal(pu.x_unlabeled, full.features)
        assert np.array_equal(pu.y_unlabeled, full.labels)

    def test_labeled_are_true_positives(self):
        full = self._full()
        pu = scar_split(full, 8, seed=4)
        pos_rows = {tuple(row) for row in full.features[full.labels == 1]}
        assert all(tuple(row) in pos_rows for row in pu.x_labeled)

    def test_too_many_labeled(self):
        full = self._full()
        with pytest.raises(ConfigError):
            scar_split(full, 51, seed=0)

    def test_prior_override(self):
        pu = scar_split(self._full(), 3, prior_override=0.25, seed=5)
        assert pu.class_prior == 0.25

    def test_scar_uniformity(self):
        # 10 positives, pick 4; over many fresh seeds each positive's selection
        # frequency sits in a 5-sigma band around 0.4.
        features = np.arange(10, dtype=float).reshape(-1, 1)
        full = LabeledDataset(features, np.ones(10, dtype=np.int64))
        counts = np.zeros(10)
        n_draws = 10_000
        for seed in range(n_draws):
            pu = scar_split(full, 4, prior_override=0.5, seed=seed)
            counts[pu.x_labeled[:, 0].astype(int)] += 1
        freq = counts / n_draws
        assert np.all(freq >= 0.36) and np.all(freq <= 0.44)


class TestBinarize:
    def test_positive_fraction(self):
        labels = np.repeat(np.arange(10), 10)
        ds = LabeledDataset(np.zeros((100, 1)), labels)
        assert empirical_prior(binarize(ds, {0, 2, 4, 6})) == pytest.approx(0.4)

    def test_universal_set(self):
        ds = LabeledDataset(np.zeros((6, 1)), np.array([0, 1, 2, 0, 1, 2]))
        assert np.all(binarize(ds, {0, 1, 2}).labels == 1)

    def test_unknown_class_rejected(self):
        ds = LabeledDataset(np.zeros((3, 1)), np.array([0, 1, 2]))
        with pytest.raises(ConfigError):
            binarize(ds, {7})

    def test_features_unchanged(self):
        feats = np.arange(6, dtype=float).reshape(3, 2)
        ds = LabeledDataset(feats, np.array([0, 1, 2]))
        assert np.array_equal(binarize(ds, {1}).features, feats)


class TestNormalize:
    def test_identity(self):
        ds = LabeledDataset(np.array([[1.0, 2.0]]), np.array([1]))
        out = normalize(ds, 0.0, 1.0)
        assert np.array_equal(out.features, ds.features)

    def test_centering(self):
        ds = LabeledDataset(np.array([[0.485]]), np.array([0]))
        out = normalize(ds, 0.485, 0.229)
        assert out.features[0, 0] == 0.0

    def test_round_trip(self):
        rng = np.random.default_rng(0)
        feats = rng.standard_normal((20, 3))
        ds = LabeledDataset(feats, np.zeros(20, dtype=np.int64))
        mean, stddev = np.array([0.1, -0.2, 0.3]), np.array([0.5, 1.5, 2.0])
        out = normalize(ds, mean, stddev)
        back = out.features * stddev + mean
        assert back == pytest.approx(feats, abs=1e-12)

    def test_zero_stddev_rejected(self):
        ds = LabeledDataset(np.zeros((2, 2)), np.zeros(2, dtype=np.int64))
        with pytest.raises(ConfigError):
            normalize(ds, 0.0, [1.0, 0.0])


class TestEmpiricalPrior:
    def test_direct_count(self):
        ds = LabeledDataset(np.zeros((5, 1)), np.array([1, 1, 0, 0, 0]))
        assert empirical_prior(ds) == pytest.approx(0.4)

    def test_degenerate(self):
        ds = LabeledDataset(np.zeros((3, 1)), np.ones(3, dtype=np.int64))
        assert empirical_prior(ds) == 1.0

    def test_empty_rejected(self):
        ds = LabeledDataset(np.zeros((0, 0)), np.zeros(0, dtype=np.int64))
        with pytest.raises(ConfigError):
            empirical_prior(ds)


def _write_idx_pair(tmp_path, images: np.ndarray, labels: np.ndarray):
    n, rows, cols = images.shape
    img_path = tmp_path / "images.idx"
    with open(img_path, "wb") as fh:
        fh.write(struct.pack(">IIII", 0x00000803, n, rows, cols))
        fh.write(images.astype(np.uint8).tobytes())
    lbl_path = tmp_path / "labels.idx"
    with open(lbl_path, "wb") as fh:
        fh.write(struct.pack(">II", 0x00000801, n))
        fh.write(labels.astype(np.uint8).tobytes())
    return img_path, lbl_path


class TestIdxLoader:
    def test_round_trip(self, tmp_path):
        rng = np.random.default_rng(5)
        images = rng.integers(0, 256, size=(7, 4, 3), dtype=np.uint8)
        labels = rng.integers(0, 10, size=7, dtype=np.uint8)
        img_path, lbl_path = _write_idx_pair(tmp_path, images, labels)
        ds = load_dataset(img_path, "idx", labels_path=lbl_path)
        assert ds.features.shape == (7, 12)
        assert np.array_equal(ds.labels, labels)
        assert ds.features == pytest.approx(images.reshape(7, 12) / 255.0)
        assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0

    def test_wrong_magic(self, tmp_path):
        path = tmp_path / "bad.idx"
        path.write_bytes(struct.pack(">IIII", 0xDEADBEEF, 1, 2, 2) + b"\x00" * 4)
        with pytest.raises(DataFormatError, match="offset 0"):
            load_idx_images(path)

    def test_truncated(self, tmp_path):
        path = tmp_path / "short.idx"
        path.write_bytes(struct.pack(">IIII", 0x00000803, 2, 2, 2) + b"\x00" * 3)
        with pytest.raises(DataFormatError, match="truncated"):
            load_idx_images(path)

    def test_count_mismatch(self, tmp_path):
        rng = np.random.default_rng(6)
        images = rng.integers(0, 256, size=(3, 2, 2), dtype=np.uint8)
        labels = rng.integers(0, 10, size=3, dtype=np.uint8)
        img_path, lbl_path = _write_idx_pair(tmp_path, images, labels)
        # Rewrite the label header to claim a different count.
        blob = lbl_path.read_bytes()
        lbl_path.write_bytes(struct.pack(">II", 0x00000801, 2) + blob[8:10])
        with pytest.raises(DataFormatError, match="labels"):
            load_dataset(img_path, "idx", labels_path=lbl_path)


class TestCsvLoader:
    def test_empty_file(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("")
        ds = load_csv(path)
        assert len(ds) == 0

    def test_basic(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1.5,-2.0,1\n0.25,3.5,0\n")
        ds = load_csv(path)
        assert np.array_equal(ds.features, [[1.5, -2.0], [0.25, 3.5]])
        assert np.array_equal(ds.labels, [1, 0])

    def test_header_flag(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("x1,x2,y\n1.0,2.0,1\n")
        ds = load_csv(path, has_header=True)
        assert len(ds) == 1

    def test_non_numeric_cell_names_line(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1.0,2.0,1\n1.0,oops,0\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_csv(path)

    def test_rejects_nan(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("nan,2.0,1\n")
        with pytest.raises(DataFormatError, match="non-finite"):
            load_csv(path)

    def test_ragged_rows(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text("1.0,2.0,1\n3.0,0\n")
        with pytest.raises(DataFormatError, match="line 2"):
            load_csv(path)

    def test_unknown_format(self, tmp_path):
        with pytest.raises(ConfigError):
            load_dataset(tmp_path / "x", "parquet")


def _pu(n_labeled=3, n_unlabeled=10, dim=2, prior=0.4):
    rng = np.random.default_rng(1)
    return PUDataset(
        x_labeled=rng.standard_normal((n_labeled, dim)),
        x_unlabeled=rng.standard_normal((n_unlabeled, dim)),
        class_prior=prior,
    )


class TestBatchIter:
    def test_partition_sizes(self):
        pu = _pu(n_labeled=0, n_unlabeled=10)
        batches = list(batch_iter(pu, BatchPlan(4, seed=0)))
        assert [len(b.unlabeled_indices) for b in batches] == [4, 4, 2]
        seen = np.concatenate([b.unlabeled_indices for b in batches])
        assert sorted(seen.tolist()) == list(range(10))

    def test_deterministic(self):
        pu = _pu()
        plan = BatchPlan(4, seed=7, epoch_index=2)
        a = list(batch_iter(pu, plan))
        b = list(batch_iter(pu, plan))
        for x, y in zip(a, b):
            assert np.array_equal(x.unlabeled_indices, y.unlabeled_indices)
            assert np.array_equal(x.labeled_indices, y.labeled_indices)

    def test_epochs_differ(self):
        pu = _pu(n_unlabeled=64)
        a = list(batch_iter(pu, BatchPlan(32, seed=7, epoch_index=0)))
        b = list(batch_iter(pu, BatchPlan(32, seed=7, epoch_index=1)))
        assert not np.array_equal(a[0].unlabeled_indices, b[0].unlabeled_indices)

    def test_empty_labeled_side(self):
        pu = _pu(n_labeled=0)
        for batch in batch_iter(pu, BatchPlan(4, seed=0)):
            assert batch.x_labeled.shape[0] == 0

    def test_epoch_coverage_is_permutation(self):
        pu = _pu(n_labeled=5, n_unlabeled=23)
        for epoch in range(3):
            batches = list(batch_iter(pu, BatchPlan(7, seed=3, epoch_index=epoch)))
            seen = np.concatenate([b.unlabeled_indices for b in batches])
            assert sorted(seen.tolist()) == list(range(23))

    def test_proportional_labeled_draw(self):
        pu = _pu(n_labeled=5, n_unlabeled=10)
        batches = list(batch_iter(pu, BatchPlan(4, seed=0)))
        # round(4 * 5/10) = 2 per full batch, round(2 * 0.5) = 1 for the tail.
        assert [len(b.labeled_indices) for b in batches] == [2, 2, 1]

    def test_labeled_clamped_to_one(self):
        pu = _pu(n_labeled=1, n_unlabeled=100)
        batches = list(batch_iter(pu, BatchPlan(10, seed=0)))
        assert all(len(b.labeled_indices) == 1 for b in batches)

    def test_invalid_plan(self):
        with pytest.raises(ConfigError):
            BatchPlan(0, seed=0)


class TestValidation:
    def test_nonfinite_features_rejected(self):
        with pytest.raises(ContractError):
            LabeledDataset(np.array([[np.inf]]), np.array([1]))
        with pytest.raises(ContractError):
            PUDataset(np.zeros((1, 1)), np.array([[np.nan]]), 0.5)

    def test_prior_range(self):
        with pytest.raises(ConfigError):
            PUDataset(np.zeros((0, 1)), np.zeros((2, 1)), 1.0)

    def test_dim_mismatch(self):
        with pytest.raises(ContractError):
            PUDataset(np.zeros((1, 2)), np.zeros((2, 3)), 0.5)
