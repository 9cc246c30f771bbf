"""MNIST IDX parsing and per-agent data partitioning.

The IDX container: big-endian u32 magic (0x00000803 for images,
0x00000801 for labels), one u32 per dimension, then the raw payload.
Images are flattened row-major to 784 values and scaled by 1/255 into
[0, 1].  Gzip-compressed files are detected by their magic bytes.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801

TRAIN_IMAGES = "train-images-idx3-ubyte"
TRAIN_LABELS = "train-labels-idx1-ubyte"
TEST_IMAGES = "t10k-images-idx3-ubyte"
TEST_LABELS = "t10k-labels-idx1-ubyte"


class ParseError(ValueError):
    """Malformed IDX content; carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


@dataclass(frozen=True)
class Dataset:
    images: np.ndarray  # (n, 784) float64 in [0, 1]
    labels: np.ndarray  # (n,) int64 in 0..9

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise ValueError("images and labels must have equal counts")

    @property
    def count(self) -> int:
        return self.images.shape[0]


@dataclass(frozen=True)
class AgentPartition:
    agent_id: int
    train_images: np.ndarray
    train_labels: np.ndarray
    test_images: np.ndarray
    test_labels: np.ndarray


def _maybe_gunzip(data: bytes) -> bytes:
    if data[:2] == b"\x1f\x8b":
        return gzip.decompress(data)
    return data


def parse_idx(data: bytes) -> np.ndarray:
    """Parse one IDX payload: images -> (n, 784) floats, labels -> (n,) ints."""
    data = _maybe_gunzip(data)
    if len(data) < 4:
        raise ParseError("file shorter than the magic number", 0)
    (magic,) = struct.unpack(">I", data[:4])
    if magic == IMAGE_MAGIC:
        n_dims = 3
    elif magic == LABEL_MAGIC:
        n_dims = 1
    else:
        raise ParseError(f"bad magic 0x{magic:08x}", 0)
    header_len = 4 + 4 * n_dims
    if len(data) < header_len:
        raise ParseError("truncated dimension header", len(data))
    dims = struct.unpack(f">{n_dims}I", data[4:header_len])
    expected = header_len + int(np.prod(dims))
    if len(data) != expected:
        raise ParseError(
            f"payload is {len(data) - header_len} bytes, dims {dims} require "
            f"{expected - header_len}",
            min(len(data), expected),
        )
    raw = np.frombuffer(data, dtype=np.uint8, offset=header_len)
    if magic == LABEL_MAGIC:
        return raw.astype(np.int64)
    rows, cols = dims[1], dims[2]
    return raw.reshape(dims[0], rows * cols).astype(np.float64) / 255.0


def _read(path: Path) -> bytes:
    if path.exists():
        return path.read_bytes()
    gz = path.with_name(path.name + ".gz")
    if gz.exists():
        return gz.read_bytes()
    raise FileNotFoundError(f"neither {path} nor {gz} exists")


def load_mnist(data_dir) -> tuple[Dataset, Dataset]:
    """Load the four standard MNIST files (plain or .gz) from a directory."""
    data_dir = Path(data_dir)
    train = Dataset(
        images=parse_idx(_read(data_dir / TRAIN_IMAGES)),
        labels=parse_idx(_read(data_dir / TRAIN_LABELS)),
    )
    test = Dataset(
        images=parse_idx(_read(data_dir / TEST_IMAGES)),
        labels=parse_idx(_read(data_dir / TEST_LABELS)),
    )
    return train, test


def partition_agents(
    train: Dataset, test: Dataset, k: int = 4, per_agent: int = 2500, seed: int = 0
) -> list:
    """IID split: seeded shuffle, first k*per_agent indices assigned contiguously.

    Train and test partitions are pairwise disjoint by construction; with the
    defaults the 10,000 MNIST test samples are exactly exhausted.
    """
    need = k * per_agent
    if train.count < need or test.count < need:
        raise ValueError(
            f"need {need} train and test samples, have {train.count}/{test.count}"
        )
    rng = np.random.default_rng(seed)
    train_idx = rng.permutation(train.count)[:need]
    test_idx = rng.permutation(test.count)[:need]
    partitions = []
    for agent_id in range(k):
        sl = slice(agent_id * per_agent, (agent_id + 1) * per_agent)
        partitions.append(
            AgentPartition(
                agent_id=agent_id,
                train_images=train.images[train_idx[sl]],
                train_labels=train.labels[train_idx[sl]],
                test_images=test.images[test_idx[sl]],
                test_labels=test.labels[test_idx[sl]],
            )
        )
    return partitions
