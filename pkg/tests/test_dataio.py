import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

from mrfl.dataio import (
    Dataset,
    ParseError,
    load_mnist,
    parse_idx,
    partition_agents,
)

DATA_DIR = Path(__file__).resolve().parent.parent / "data" / "mnist"

needs_mnist = pytest.mark.skipif(
    not DATA_DIR.exists(), reason="MNIST files missing; run scripts/fetch_mnist.py"
)


def image_file(images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    return struct.pack(">IIII", 0x803, n, rows, cols) + images.tobytes()


def label_file(labels):
    labels = np.asarray(labels, dtype=np.uint8)
    return struct.pack(">II", 0x801, labels.size) + labels.tobytes()


class TestParseIdx:
    def test_minimal_image_file(self):
        data = image_file([[[0, 255], [128, 64]]])
        parsed = parse_idx(data)
        np.testing.assert_allclose(parsed, [[0.0, 1.0, 128 / 255, 64 / 255]])

    def test_label_file(self):
        np.testing.assert_array_equal(parse_idx(label_file([3, 1, 4])), [3, 1, 4])

    def test_gzip_detected_by_magic(self):
        data = gzip.compress(label_file([7]))
        np.testing.assert_array_equal(parse_idx(data), [7])

    def test_truncated_payload(self):
        data = image_file([[[1, 2], [3, 4]]])[:-1]
        with pytest.raises(ParseError):
            parse_idx(data)

    def test_bad_magic(self):
        with pytest.raises(ParseError) as err:
            parse_idx(struct.pack(">II", 0xDEAD, 1))
        assert err.value.offset == 0

    def test_truncated_header(self):
        with pytest.raises(ParseError):
            parse_idx(struct.pack(">II", 0x803, 5))

    def test_too_short_for_magic(self):
        with pytest.raises(ParseError):
            parse_idx(b"\x00")


def synthetic_dataset(rng, n):
    return Dataset(
        images=rng.uniform(0, 1, (n, 784)),
        labels=rng.integers(0, 10, n),
    )


class TestPartition:
    def test_disjoint_exact_sizes(self):
        rng = np.random.default_rng(0)
        train = synthetic_dataset(rng, 12_000)
        test = synthetic_dataset(rng, 10_000)
        parts = partition_agents(train, test, seed=3)
        assert len(parts) == 4
        # disjointness: 4 x 2500 distinct rows, so the union has full size
        all_train = np.concatenate([p.train_images for p in parts])
        assert np.unique(all_train, axis=0).shape[0] == 10_000
        for p in parts:
            assert p.train_images.shape == (2500, 784)
            assert p.test_labels.shape == (2500,)

    def test_deterministic_per_seed(self):
        rng = np.random.default_rng(1)
        train = synthetic_dataset(rng, 11_000)
        test = synthetic_dataset(rng, 10_000)
        a = partition_agents(train, test, seed=9)
        b = partition_agents(train, test, seed=9)
        for pa, pb in zip(a, b):
            np.testing.assert_array_equal(pa.train_images, pb.train_images)
        c = partition_agents(train, test, seed=10)
        assert not np.array_equal(a[0].train_labels, c[0].train_labels)

    def test_insufficient_samples(self):
        rng = np.random.default_rng(2)
        small = synthetic_dataset(rng, 100)
        with pytest.raises(ValueError):
            partition_agents(small, small)


@pytest.fixture(scope="module")
def mnist():
    if not DATA_DIR.exists():
        pytest.skip("MNIST files missing")
    return load_mnist(DATA_DIR)


@needs_mnist
class TestRealMnist:
    def test_shapes(self, mnist):
        train, test = mnist
        assert train.images.shape == (60_000, 784)
        assert train.labels.shape == (60_000,)
        assert test.images.shape == (10_000, 784)
        assert test.labels.shape == (10_000,)

    def test_value_ranges(self, mnist):
        train, test = mnist
        for ds in (train, test):
            assert ds.images.min() >= 0.0 and ds.images.max() <= 1.0
            assert set(np.unique(ds.labels)) == set(range(10))

    def test_partitions_exhaust_test_set(self, mnist):
        train, test = mnist
        parts = partition_agents(train, test, seed=0)
        pooled = np.concatenate([p.test_labels for p in parts])
        assert pooled.size == 10_000
        np.testing.assert_array_equal(
            np.sort(np.bincount(pooled)), np.sort(np.bincount(test.labels))
        )

    def test_label_histograms_near_global(self, mnist):
        # IID sanity: per-agent class proportions, averaged over the 10
        # experiment seeds, stay within 5 points of the global proportions
        train, test = mnist
        global_prop = np.bincount(train.labels, minlength=10) / train.count
        sums = np.zeros((4, 10))
        for seed in range(10):
            parts = partition_agents(train, test, seed=seed)
            for i, p in enumerate(parts):
                sums[i] += np.bincount(p.train_labels, minlength=10) / 2500
        assert np.all(np.abs(sums / 10 - global_prop) < 0.05)
