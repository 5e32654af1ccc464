"""Datasets: LIBSVM parsing, [-1, 1] normalization, splits, drift streams.

Instances are sparse: 1-based feature indices with float values, implicit
zeros elsewhere.  Labels are remapped deterministically at parse time
(binary files to -1/+1 with the numerically smaller original label going
to -1, multi-class files to 0..m-1 in sorted original order).
"""

from __future__ import annotations

import io
import math
import os
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DataFormatError",
    "Instance",
    "Dataset",
    "Normalizer",
    "DriftStreamConfig",
    "parse_libsvm",
    "write_libsvm",
    "fit_normalizer",
    "apply_normalizer",
    "split",
    "generate_drift_stream",
    "to_csr",
]


class DataFormatError(ValueError):
    """Malformed input data; carries the 1-based line number when known."""

    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)


@dataclass
class Instance:
    """One labelled sparse example.

    ``indices`` are 1-based, strictly increasing; ``values`` are finite;
    ``label`` is the internal label (-1/+1 binary, 0-based class index
    otherwise).
    """

    indices: np.ndarray
    values: np.ndarray
    label: int

    def __post_init__(self) -> None:
        self.indices = np.ascontiguousarray(self.indices, dtype=np.int64)
        self.values = np.ascontiguousarray(self.values, dtype=np.float64)
        if self.indices.shape != self.values.shape or self.indices.ndim != 1:
            raise ValueError("indices and values must be 1-d arrays of equal length")
        if self.indices.size:
            if self.indices[0] < 1:
                raise ValueError("feature indices are 1-based")
            if not np.all(np.diff(self.indices) > 0):
                raise ValueError("feature indices must be strictly increasing")
        if not np.isfinite(self.values).all():
            raise ValueError("feature values must be finite")

    def as_dict(self) -> dict[int, float]:
        return {int(i): float(v) for i, v in zip(self.indices, self.values)}

    def to_dense(self, dim: int) -> np.ndarray:
        out = np.zeros(dim)
        if self.indices.size:
            out[self.indices - 1] = self.values
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.label == other.label
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.values, other.values)
        )


@dataclass
class Dataset:
    """Ordered collection of instances with label bookkeeping.

    ``label_map`` maps original file labels to internal labels and is
    bijective.  ``class_count`` is the number of distinct original labels.
    """

    instances: list[Instance]
    dim: int
    class_count: int
    label_map: dict[int, int] = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.instances)

    @property
    def binary(self) -> bool:
        return self.class_count <= 2

    def labels(self) -> np.ndarray:
        return np.array([inst.label for inst in self.instances], dtype=np.int64)

    def inverse_label_map(self) -> dict[int, int]:
        return {v: k for k, v in self.label_map.items()}

    def subset(self, order) -> "Dataset":
        """New dataset holding the instances at the given positions (shared)."""
        return Dataset(
            instances=[self.instances[i] for i in order],
            dim=self.dim,
            class_count=self.class_count,
            label_map=dict(self.label_map),
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.dim == other.dim
            and self.class_count == other.class_count
            and self.label_map == other.label_map
            and self.instances == other.instances
        )


def _parse_label_token(tok: str, line_no: int) -> int:
    try:
        raw = float(tok)
    except ValueError:
        raise DataFormatError(f"non-numeric label {tok!r}", line_no) from None
    if not math.isfinite(raw) or raw != int(raw):
        raise DataFormatError(f"label {tok!r} is not an integer", line_no)
    return int(raw)


def _iter_lines(source):
    """Yield lines from a path, file object, or iterable of strings."""
    if isinstance(source, (str, os.PathLike)):
        with open(source, "r", encoding="ascii") as fh:
            yield from fh
        return
    yield from source


def parse_libsvm(source, dim: int | None = None) -> Dataset:
    """Parse LIBSVM text (``label idx:val idx:val ...`` per line).

    Parameters
    ----------
    source : path, file object, or iterable of lines
    dim : int, optional
        Explicit feature dimension; must be >= the largest index seen.
        Defaults to the largest index in the file.

    Raises
    ------
    DataFormatError
        On malformed tokens, non-numeric values, duplicate or decreasing
        indices within a line; the message carries the line number.
    """
    raw: list[tuple[np.ndarray, np.ndarray, int]] = []
    labels_seen: set[int] = set()
    max_index = 0
    for line_no, line in enumerate(_iter_lines(source), start=1):
        tokens = line.split()
        if not tokens:
            continue
        label = _parse_label_token(tokens[0], line_no)
        idx_list: list[int] = []
        val_list: list[float] = []
        prev = 0
        for tok in tokens[1:]:
            head, sep, tail = tok.partition(":")
            if not sep or not head or not tail:
                raise DataFormatError(f"malformed feature token {tok!r}", line_no)
            try:
                idx = int(head)
            except ValueError:
                raise DataFormatError(f"non-integer feature index in {tok!r}", line_no) from None
            try:
                val = float(tail)
            except ValueError:
                raise DataFormatError(f"non-numeric feature value in {tok!r}", line_no) from None
            if idx < 1:
                raise DataFormatError(f"feature index {idx} must be >= 1", line_no)
            if idx == prev:
                raise DataFormatError(f"duplicate feature index {idx}", line_no)
            if idx < prev:
                raise DataFormatError(
                    f"feature index {idx} not increasing (previous {prev})", line_no
                )
            if not math.isfinite(val):
                raise DataFormatError(f"non-finite feature value in {tok!r}", line_no)
            idx_list.append(idx)
            val_list.append(val)
            prev = idx
        if prev > max_index:
            max_index = prev
        labels_seen.add(label)
        raw.append(
            (np.array(idx_list, dtype=np.int64), np.array(val_list, dtype=np.float64), label)
        )

    if dim is not None:
        if dim < max_index:
            raise DataFormatError(f"explicit dim {dim} < largest feature index {max_index}")
        max_index = int(dim)

    label_map = _build_label_map(sorted(labels_seen))
    instances = [
        Instance(indices=idx, values=vals, label=label_map[lab]) for idx, vals, lab in raw
    ]
    return Dataset(
        instances=instances,
        dim=max_index,
        class_count=len(labels_seen),
        label_map=label_map,
    )


def _build_label_map(sorted_labels: list[int]) -> dict[int, int]:
    if len(sorted_labels) == 2:
        return {sorted_labels[0]: -1, sorted_labels[1]: +1}
    if len(sorted_labels) == 1:
        return {sorted_labels[0]: +1}
    return {lab: i for i, lab in enumerate(sorted_labels)}


def write_libsvm(dataset: Dataset, target) -> None:
    """Serialize back to LIBSVM text (floats via repr, so reparse is exact)."""
    inverse = dataset.inverse_label_map()

    def _emit(fh) -> None:
        for inst in dataset.instances:
            feats = " ".join(
                f"{int(i)}:{repr(float(v))}" for i, v in zip(inst.indices, inst.values)
            )
            label = inverse.get(inst.label, inst.label)
            fh.write(f"{label} {feats}".rstrip() + "\n")

    if isinstance(target, (str, os.PathLike)):
        with open(target, "w", encoding="ascii") as fh:
            _emit(fh)
    else:
        _emit(target)


def libsvm_text(dataset: Dataset) -> str:
    buf = io.StringIO()
    write_libsvm(dataset, buf)
    return buf.getvalue()


@dataclass
class Normalizer:
    """Per-feature (min, max) over the explicitly present entries of a fit set.

    Sparse convention: only stored entries are rescaled, implicit zeros stay
    zero, so sparsity is preserved.  Features never seen during fitting have
    ``mins`` entry +inf and pass values through (clamped).
    """

    mins: np.ndarray  # slot i-1 for feature index i; +inf marks unseen
    maxs: np.ndarray
    dim: int


def fit_normalizer(dataset: Dataset) -> Normalizer:
    """Collect per-feature (min, max) from the stored entries of ``dataset``."""
    if dataset.n == 0:
        raise ValueError("cannot fit a normalizer on an empty dataset")
    mins = np.full(dataset.dim, np.inf)
    maxs = np.full(dataset.dim, -np.inf)
    for inst in dataset.instances:
        if inst.indices.size:
            np.minimum.at(mins, inst.indices - 1, inst.values)
            np.maximum.at(maxs, inst.indices - 1, inst.values)
    return Normalizer(mins=mins, maxs=maxs, dim=dataset.dim)


def apply_normalizer(norm: Normalizer, dataset: Dataset) -> Dataset:
    """Rescale stored entries into [-1, 1].

    Feature j with fitted (min, max): v -> 2*(v - min)/(max - min) - 1;
    constant features map to 0; unseen features pass through.  All outputs
    are clamped to [-1, 1] (held-out data may fall outside the fit range).
    """
    out = []
    for inst in dataset.instances:
        if not inst.indices.size:
            out.append(Instance(inst.indices.copy(), inst.values.copy(), inst.label))
            continue
        pos = inst.indices - 1
        vals = inst.values.copy()
        inside = pos < norm.dim
        p = pos[inside]
        lo = norm.mins[p]
        hi = norm.maxs[p]
        seen = np.isfinite(lo)
        spread = hi - lo
        constant = seen & (spread == 0)
        scaled = seen & (spread > 0)
        v = vals[inside]
        res = v.copy()
        res[scaled] = 2.0 * (v[scaled] - lo[scaled]) / spread[scaled] - 1.0
        res[constant] = 0.0
        vals[inside] = res
        np.clip(vals, -1.0, 1.0, out=vals)
        out.append(Instance(inst.indices.copy(), vals, inst.label))
    return Dataset(
        instances=out,
        dim=dataset.dim,
        class_count=dataset.class_count,
        label_map=dict(dataset.label_map),
    )


def split(
    dataset: Dataset,
    ratios: tuple[float, float, float] = (0.6, 0.2, 0.2),
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Random permutation by seed, then a contiguous three-way cut.

    Sizes are floor(r1*n), floor(r2*n) and the remainder; the three parts
    are disjoint and their union is the input.
    """
    if dataset.n == 0:
        raise ValueError("cannot split an empty dataset")
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ValueError("need three positive ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError("ratios must sum to 1")
    n = dataset.n
    perm = np.random.default_rng(int(seed)).permutation(n)
    n1 = int(math.floor(round(ratios[0] * n, 9)))
    n2 = int(math.floor(round(ratios[1] * n, 9)))
    return (
        dataset.subset(perm[:n1]),
        dataset.subset(perm[n1 : n1 + n2]),
        dataset.subset(perm[n1 + n2 :]),
    )


@dataclass
class DriftStreamConfig:
    """Synthetic linear-boundary stream with abrupt rotation drift.

    ``rotation_angles`` holds one angle (radians) per segment boundary,
    so its length is ``len(segment_lengths) - 1``.  The label noise model
    adds N(0, noise_std^2) to the decision score before thresholding, which
    flips each label with probability Phi(-|score| / noise_std).
    """

    dim: int
    segment_lengths: list[int]
    rotation_angles: list[float]
    noise_std: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.dim < 2:
            raise ValueError("drift streams need dim >= 2")
        if len(self.segment_lengths) < 2:
            raise ValueError("need at least 2 segments")
        if any(int(s) != s or s < 1 for s in self.segment_lengths):
            raise ValueError("segment lengths must be positive integers")
        if len(self.rotation_angles) != len(self.segment_lengths) - 1:
            raise ValueError("need one rotation angle per segment boundary")
        if not all(math.isfinite(a) for a in self.rotation_angles):
            raise ValueError("rotation angles must be finite")
        if not (math.isfinite(self.noise_std) and self.noise_std >= 0):
            raise ValueError("noise_std must be a non-negative finite real")


def generate_drift_stream(config: DriftStreamConfig) -> Dataset:
    """Generate the stream described by ``config``; deterministic per seed.

    Segment 1 labels points x ~ U[-1,1]^d by sign(w*.x) for a random unit
    direction w*; at each boundary w* is rotated by the configured angle
    inside a fixed random 2-plane containing the initial w*.
    """
    rng = np.random.default_rng(int(config.seed))
    d = config.dim
    e1 = rng.normal(size=d)
    e1 /= np.linalg.norm(e1)
    e2 = rng.normal(size=d)
    e2 -= (e2 @ e1) * e1
    e2 /= np.linalg.norm(e2)
    coords = np.array([1.0, 0.0])  # w* in the (e1, e2) basis

    instances: list[Instance] = []
    all_idx = np.arange(1, d + 1, dtype=np.int64)
    for seg, length in enumerate(config.segment_lengths):
        if seg > 0:
            theta = config.rotation_angles[seg - 1]
            rot = np.array(
                [[math.cos(theta), -math.sin(theta)], [math.sin(theta), math.cos(theta)]]
            )
            coords = rot @ coords
        w = coords[0] * e1 + coords[1] * e2
        points = rng.uniform(-1.0, 1.0, size=(int(length), d))
        scores = points @ w
        if config.noise_std > 0:
            scores = scores + rng.normal(0.0, config.noise_std, size=int(length))
        labels = np.where(scores >= 0, 1, -1)
        for row, lab in zip(points, labels):
            instances.append(Instance(indices=all_idx, values=row, label=int(lab)))
    return Dataset(
        instances=instances,
        dim=d,
        class_count=2,
        label_map={-1: -1, 1: +1},
    )


def to_csr(dataset: Dataset) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Flatten to CSR-style arrays: (indptr, 0-based indices, values, labels)."""
    counts = np.fromiter(
        (inst.indices.size for inst in dataset.instances), dtype=np.int64, count=dataset.n
    )
    indptr = np.zeros(dataset.n + 1, dtype=np.int64)
    np.cumsum(counts, out=indptr[1:])
    total = int(indptr[-1])
    indices = np.empty(total, dtype=np.int64)
    values = np.empty(total, dtype=np.float64)
    for k, inst in enumerate(dataset.instances):
        lo, hi = indptr[k], indptr[k + 1]
        indices[lo:hi] = inst.indices - 1
        values[lo:hi] = inst.values
    return indptr, indices, values, dataset.labels()
