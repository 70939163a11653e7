"""Branching-diffusion synthetic data, MNIST IDX loading and binarization."""
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .errors import ContractError, FormatError

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801
BDP_MAGIC = b"BDP1"


@dataclass(frozen=True)
class BdpConfig:
    depth: int = 6
    branching: int = 2
    dim: int = 50
    diffusion: float = 1.0
    noise: float = 0.1
    copies: int = 5
    seed: int = 0
    eval_fraction: float = 0.2

    def __post_init__(self):
        if self.depth < 0 or self.branching < 1 or self.dim < 1 or self.copies < 1:
            raise ContractError("BDP needs depth >= 0, branching >= 1, dim >= 1, copies >= 1")
        if not (self.diffusion > 0 and self.noise > 0):
            raise ContractError("BDP diffusion and noise scales must be positive")
        if not 0.0 <= self.eval_fraction < 1.0:
            raise ContractError("eval_fraction must be in [0, 1)")

    @property
    def n_nodes(self):
        b, d = self.branching, self.depth
        return d + 1 if b == 1 else (b ** (d + 1) - 1) // (b - 1)


@dataclass
class DatasetHandle:
    """Train/eval matrices (float64 tensors) and the observation model they imply."""

    train: torch.Tensor
    eval: torch.Tensor
    observation: str
    name: str = ""
    train_labels: np.ndarray = None
    eval_labels: np.ndarray = None
    extra: dict = field(default_factory=dict)
    _eval_binary: torch.Tensor = None

    def __post_init__(self):
        if self.train.dim() != 2 or self.eval.dim() != 2 or self.train.shape[1] != self.eval.shape[1]:
            raise ContractError("train and eval must be matrices with the same width")

    @property
    def dim(self):
        return self.train.shape[1]

    def eval_binary(self):
        """Fixed binarization of the eval split, computed once."""
        if self._eval_binary is None:
            self._eval_binary = fixed_binarize(self.eval)
        return self._eval_binary


# -- BDP -----------------------------------------------------------------------------


def bdp_tree(config):
    """Node positions ``(n_nodes, D)`` and parent indices (-1 for the root), breadth first."""
    rng = np.random.default_rng(config.seed)
    nodes = [rng.standard_normal(config.dim)]
    parents = [-1]
    level = [0]
    for _ in range(config.depth):
        nxt = []
        for p in level:
            for _ in range(config.branching):
                nodes.append(nodes[p] + config.diffusion * rng.standard_normal(config.dim))
                parents.append(p)
                nxt.append(len(nodes) - 1)
        level = nxt
    return np.array(nodes), np.array(parents)


def bdp_observations(config):
    """All noisy observations, ``copies`` consecutive rows per node."""
    nodes, _ = bdp_tree(config)
    rng = np.random.default_rng([config.seed, 1])
    obs = np.repeat(nodes, config.copies, axis=0)
    return obs + config.noise * rng.standard_normal(obs.shape)


def split_matrix(matrix, eval_fraction=0.2, seed=0, observation="gaussian", name="bdp", labels=None):
    """Deterministic train/eval row split (row order preserved inside each split)."""
    m = np.asarray(matrix, dtype=np.float64)
    rng = np.random.default_rng([seed, 2])
    n_eval = int(round(eval_fraction * len(m)))
    perm = rng.permutation(len(m))
    ev, tr = np.sort(perm[:n_eval]), np.sort(perm[n_eval:])
    labels = np.arange(len(m)) if labels is None else np.asarray(labels)
    return DatasetHandle(
        train=torch.from_numpy(m[tr].copy()),
        eval=torch.from_numpy(m[ev].copy()),
        observation=observation,
        name=name,
        train_labels=labels[tr],
        eval_labels=labels[ev],
    )


def generate_bdp(config):
    obs = bdp_observations(config)
    node_of = np.repeat(np.arange(config.n_nodes), config.copies)
    return split_matrix(obs, config.eval_fraction, config.seed, labels=node_of)


def write_bdp(path, matrix):
    m = np.ascontiguousarray(np.asarray(matrix, dtype="<f8"))
    if m.ndim != 2:
        raise ContractError("BDP files hold a matrix")
    with open(path, "wb") as fh:
        fh.write(BDP_MAGIC)
        fh.write(struct.pack("<II", *m.shape))
        fh.write(m.tobytes())


def read_bdp(path):
    raw = Path(path).read_bytes()
    if raw[:4] != BDP_MAGIC:
        raise FormatError(f"{path}: bad magic at offset 0 (expected {BDP_MAGIC!r})")
    if len(raw) < 12:
        raise FormatError(f"{path}: truncated header at offset 4")
    rows, cols = struct.unpack_from("<II", raw, 4)
    need = 12 + 8 * rows * cols
    if len(raw) != need:
        raise FormatError(f"{path}: expected {need} bytes for {rows}x{cols}, found {len(raw)} (data at offset 12)")
    return np.frombuffer(raw, dtype="<f8", offset=12).reshape(rows, cols).astype(np.float64)


# -- MNIST -----------------------------------------------------------------------------


def read_idx(path, magic):
    raw = Path(path).read_bytes()
    if len(raw) < 4:
        raise FormatError(f"{path}: truncated file at offset 0")
    (found,) = struct.unpack_from(">I", raw, 0)
    if found != magic:
        raise FormatError(f"{path}: bad magic 0x{found:08x} at offset 0 (expected 0x{magic:08x})")
    ndim = magic & 0xFF
    if len(raw) < 4 + 4 * ndim:
        raise FormatError(f"{path}: truncated dimensions at offset 4")
    dims = struct.unpack_from(f">{ndim}I", raw, 4)
    start = 4 + 4 * ndim
    count = int(np.prod(dims))
    if len(raw) < start + count:
        raise FormatError(f"{path}: truncated data at offset {len(raw)} (need {start + count} bytes)")
    return np.frombuffer(raw, dtype=np.uint8, count=count, offset=start).reshape(dims)


def load_mnist_idx(images_path, labels_path, eval_images=None, eval_labels=None):
    """Load IDX files; pixels are scaled to [0, 1].

    The first pair is the train split. Without an eval pair the eval split is
    empty.
    """
    imgs = read_idx(images_path, IDX_IMAGES)
    labs = read_idx(labels_path, IDX_LABELS)
    if len(imgs) != len(labs):
        raise FormatError(f"{images_path}: {len(imgs)} images but {len(labs)} labels")
    train = torch.from_numpy(imgs.reshape(len(imgs), -1).astype(np.float64) / 255.0)
    if eval_images is None:
        ev, evl = train[:0], labs[:0]
    else:
        eimgs = read_idx(eval_images, IDX_IMAGES)
        evl = read_idx(eval_labels, IDX_LABELS)
        if len(eimgs) != len(evl):
            raise FormatError(f"{eval_images}: {len(eimgs)} images but {len(evl)} labels")
        ev = torch.from_numpy(eimgs.reshape(len(eimgs), -1).astype(np.float64) / 255.0)
    return DatasetHandle(train, ev, "bernoulli", "mnist", np.asarray(labs), np.asarray(evl))


def load_mnist_dir(directory):
    """Standard file names: ``train-images-idx3-ubyte`` and friends."""
    d = Path(directory)
    return load_mnist_idx(
        d / "train-images-idx3-ubyte",
        d / "train-labels-idx1-ubyte",
        d / "t10k-images-idx3-ubyte",
        d / "t10k-labels-idx1-ubyte",
    )


# -- binarization -------------------------------------------------------------------------


def _check_unit(batch):
    if bool(((batch < 0) | (batch > 1)).any()):
        raise ContractError("binarization expects values in [0, 1]")


def dynamic_binarize(batch, generator=None):
    """``x > u`` with one threshold ``u ~ U[0, 1)`` per example."""
    _check_unit(batch)
    u = torch.rand((*batch.shape[:-1], 1), generator=generator, dtype=batch.dtype)
    return (batch > u).to(batch.dtype)


def fixed_binarize(batch):
    _check_unit(batch)
    return (batch > 0.5).to(batch.dtype)
