"""Embedding records, dataset container, scaling, splits, and shuffles.

A dataset is an ordered list of labelled embedding vectors with language
tags. Two on-disk formats are supported:

* canonical JSON lines, one object per line:
  ``{"id": str, "lang": str, "label": 0|1|2, "vec": [float, ...]}``.
  An optional leading metadata line (an object carrying the key
  ``"_meta"``) is tolerated and ignored, so extraction tools can record
  provenance in-band.
* a packed binary form: magic ``MAGE``, version u16, dimension u32,
  record count u64; per record a u16-length-prefixed UTF-8 id, a 3-byte
  language tag, a u8 label, and the vector as little-endian float32.

Vectors are stored single precision on disk and widened to float64 in
memory, where all training happens.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import ParseError, UsageError, ValidationError
from .rng import Rng

__all__ = [
    "CLASS_NAMES",
    "EmbeddingRecord",
    "Dataset",
    "encode_label",
    "read_records",
    "write_records",
    "MinMaxScaler",
    "stratified_indices",
    "stratified_split",
    "ShufflePlan",
    "RunSpec",
    "make_shuffle_plan",
    "generate_synthetic",
]

CLASS_NAMES = ("negative", "neutral", "positive")

_LABELS = {"negative": 0, "neutral": 1, "positive": 2}

BINARY_MAGIC = b"MAGE"
BINARY_VERSION = 1


def encode_label(text: str) -> int:
    """Map a sentiment word to its class index (case-insensitive)."""
    try:
        return _LABELS[text.strip().lower()]
    except KeyError:
        raise ValidationError(f"unknown label {text!r}; expected one of {sorted(_LABELS)}") from None


@dataclass(frozen=True)
class EmbeddingRecord:
    id: str
    lang: str
    label: int
    vector: np.ndarray

    def __post_init__(self):
        if self.label not in (0, 1, 2):
            raise ValidationError(f"record {self.id!r}: label {self.label} outside {{0,1,2}}")
        vec = np.asarray(self.vector, dtype=np.float64)
        if vec.ndim != 1:
            raise ValidationError(f"record {self.id!r}: vector must be 1-d")
        if not np.all(np.isfinite(vec)):
            raise ValidationError(f"record {self.id!r}: vector has non-finite components")
        object.__setattr__(self, "vector", vec)


@dataclass(frozen=True)
class Dataset:
    """Ordered record collection with a single enforced dimension."""

    dimension: int | None
    records: tuple[EmbeddingRecord, ...]
    class_names: tuple[str, ...] = CLASS_NAMES

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for rec in self.records:
            if self.dimension is not None and rec.vector.shape[0] != self.dimension:
                raise ValidationError(
                    f"record {rec.id!r}: dimension {rec.vector.shape[0]} != dataset dimension {self.dimension}"
                )

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def from_records(cls, records) -> "Dataset":
        records = tuple(records)
        dim = records[0].vector.shape[0] if records else None
        return cls(dimension=dim, records=records)

    def vectors(self) -> np.ndarray:
        if not self.records:
            return np.zeros((0, self.dimension or 0))
        return np.stack([r.vector for r in self.records])

    def labels(self) -> np.ndarray:
        return np.array([r.label for r in self.records], dtype=np.int64)

    def subset(self, indices) -> "Dataset":
        return Dataset(self.dimension, tuple(self.records[i] for i in indices), self.class_names)

    def reordered(self, order) -> "Dataset":
        return self.subset(order)


def read_records(path) -> Dataset:
    """Load a record file; the extension ``.bin`` selects the binary form."""
    if str(path).endswith(".bin"):
        return _read_binary(path)
    records = []
    dim = None
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"{path}: line {lineno}: invalid JSON ({exc.msg})") from None
            if isinstance(obj, dict) and "_meta" in obj:
                continue
            try:
                rec = EmbeddingRecord(
                    id=str(obj["id"]), lang=str(obj["lang"]), label=obj["label"], vector=obj["vec"]
                )
            except KeyError as exc:
                raise ParseError(f"{path}: line {lineno}: missing field {exc.args[0]!r}") from None
            if dim is None:
                dim = rec.vector.shape[0]
            elif rec.vector.shape[0] != dim:
                raise ValidationError(
                    f"{path}: line {lineno}: record {rec.id!r} has dimension "
                    f"{rec.vector.shape[0]}, expected {dim}"
                )
            records.append(rec)
    return Dataset(dimension=dim, records=tuple(records))


def write_records(dataset: Dataset, path) -> None:
    """Write a dataset; vectors are rounded to float32 on the way out."""
    if str(path).endswith(".bin"):
        _write_binary(dataset, path)
        return
    with open(path, "w", encoding="utf-8") as fh:
        for rec in dataset.records:
            vec = [float(v) for v in np.asarray(rec.vector, dtype=np.float32)]
            fh.write(json.dumps({"id": rec.id, "lang": rec.lang, "label": int(rec.label), "vec": vec}))
            fh.write("\n")


def _write_binary(dataset: Dataset, path) -> None:
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<HIQ", BINARY_VERSION, dataset.dimension or 0, len(dataset.records)))
        for rec in dataset.records:
            id_bytes = rec.id.encode("utf-8")
            lang_bytes = rec.lang.encode("utf-8")
            if len(lang_bytes) != 3:
                raise ValidationError(
                    f"record {rec.id!r}: binary format requires a 3-byte language tag, got {rec.lang!r}"
                )
            fh.write(struct.pack("<H", len(id_bytes)))
            fh.write(id_bytes)
            fh.write(lang_bytes)
            fh.write(struct.pack("<B", rec.label))
            fh.write(np.asarray(rec.vector, dtype="<f4").tobytes())


def _read_binary(path) -> Dataset:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != BINARY_MAGIC:
            raise ParseError(f"{path}: bad magic {magic!r}")
        version, dim, count = struct.unpack("<HIQ", fh.read(14))
        if version != BINARY_VERSION:
            raise ParseError(f"{path}: unsupported version {version}")
        records = []
        for _ in range(count):
            (id_len,) = struct.unpack("<H", fh.read(2))
            rec_id = fh.read(id_len).decode("utf-8")
            lang = fh.read(3).decode("utf-8")
            (label,) = struct.unpack("<B", fh.read(1))
            vec = np.frombuffer(fh.read(4 * dim), dtype="<f4").astype(np.float64)
            records.append(EmbeddingRecord(rec_id, lang, int(label), vec))
    return Dataset(dimension=dim if count else None, records=tuple(records))


@dataclass(frozen=True)
class MinMaxScaler:
    """Per-dimension affine map of the fitted range onto [0, 1].

    Degenerate dimensions (max == min within epsilon) map to 0 and invert
    back to their minimum. Out-of-range inputs clamp to [0, 1].
    """

    minimum: np.ndarray
    maximum: np.ndarray
    epsilon: float = 1e-12

    @classmethod
    def fit(cls, vectors: np.ndarray, epsilon: float = 1e-12) -> "MinMaxScaler":
        vectors = np.asarray(vectors, dtype=np.float64)
        if vectors.size == 0:
            raise UsageError("cannot fit a scaler on an empty dataset")
        return cls(minimum=vectors.min(axis=0), maximum=vectors.max(axis=0), epsilon=epsilon)

    def _span(self) -> np.ndarray:
        return self.maximum - self.minimum

    def apply(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.float64)
        span = self._span()
        degenerate = span <= self.epsilon
        safe_span = np.where(degenerate, 1.0, span)
        scaled = (vectors - self.minimum) / safe_span
        scaled = np.where(degenerate, 0.0, scaled)
        return np.clip(scaled, 0.0, 1.0)

    def invert(self, vectors: np.ndarray) -> np.ndarray:
        vectors = np.asarray(vectors, dtype=np.float64)
        span = self._span()
        degenerate = span <= self.epsilon
        return np.where(degenerate, self.minimum, self.minimum + vectors * span)


def fit_minmax(train: Dataset, epsilon: float = 1e-12) -> MinMaxScaler:
    return MinMaxScaler.fit(train.vectors(), epsilon=epsilon)


def stratified_indices(labels: np.ndarray, fraction: float, rng: Rng):
    """Index-level stratified partition: part_a gets round(fraction * count)
    members of each class, chosen by seeded permutation. Both index arrays
    preserve the original ordering."""
    if not 0.0 < fraction < 1.0:
        raise UsageError(f"fraction must lie in (0, 1), got {fraction}")
    labels = np.asarray(labels)
    take_a: list[int] = []
    for cls in np.unique(labels):
        idx = np.flatnonzero(labels == cls)
        if idx.size < 2:
            raise ValidationError(f"class {cls} has {idx.size} member(s); need at least 2 to stratify")
        perm = idx[rng.permutation(idx.size)]
        n_a = int(round(fraction * idx.size))
        take_a.extend(perm[:n_a].tolist())
    mask = np.zeros(labels.size, dtype=bool)
    mask[take_a] = True
    return np.flatnonzero(mask), np.flatnonzero(~mask)


def stratified_split(dataset: Dataset, fraction: float, rng: Rng):
    """Partition into (part_a, part_b) datasets; see stratified_indices."""
    idx_a, idx_b = stratified_indices(dataset.labels(), fraction, rng)
    return dataset.subset(idx_a), dataset.subset(idx_b)


@dataclass(frozen=True)
class ShufflePlan:
    """The benchmark protocol: reshuffle the data n_shuffles times and run
    n_iterations independently-seeded trainings per shuffle."""

    n_shuffles: int = 4
    n_iterations: int = 5
    base_seed: int = 0

    def __post_init__(self):
        if self.n_shuffles < 1 or self.n_iterations < 1:
            raise UsageError("shuffle plan needs n_shuffles, n_iterations >= 1")


@dataclass(frozen=True)
class RunSpec:
    shuffle_index: int
    iteration_index: int
    order: np.ndarray  # permutation of the dataset
    seed: int  # training seed for this run


def make_shuffle_plan(plan: ShufflePlan, dataset: Dataset) -> list[RunSpec]:
    """Expand a plan into n_shuffles * n_iterations seeded runs.

    All iterations within a shuffle share the same data order but carry
    different training seeds; everything is a pure function of base_seed.
    """
    root = Rng(plan.base_seed)
    runs = []
    for s in range(plan.n_shuffles):
        order = root.child("shuffle", s).permutation(len(dataset))
        for i in range(plan.n_iterations):
            runs.append(
                RunSpec(
                    shuffle_index=s,
                    iteration_index=i,
                    order=order,
                    seed=root.seed_for("run", s, i),
                )
            )
    return runs


def generate_synthetic(
    n_classes: int,
    dimension: int,
    per_class: int,
    separation: float,
    rng: Rng,
    lang: str = "syn",
) -> Dataset:
    """Isotropic Gaussian blobs at mutually orthogonal centers.

    Class ``c`` is drawn from N(separation * e_c, I) with ``e_c`` the
    standard basis vectors, so any two class means sit separation*sqrt(2)
    apart. ``separation = 0`` collapses every class onto the same
    distribution.
    """
    if not 2 <= n_classes <= 3:
        raise UsageError(f"records carry labels in {{0,1,2}}, so n_classes must be 2 or 3, got {n_classes}")
    if per_class < 1:
        raise UsageError(f"per_class must be >= 1, got {per_class}")
    if separation < 0:
        raise UsageError(f"separation must be >= 0, got {separation}")
    if dimension < n_classes:
        raise UsageError(
            f"dimension {dimension} < n_classes {n_classes}: orthogonal centers impossible"
        )
    per_class_draws = []
    for cls in range(n_classes):
        center = np.zeros(dimension)
        center[cls] = separation
        per_class_draws.append(rng.normal((per_class, dimension)) + center)
    records = []
    # interleave classes so contiguous slices stay roughly stratified
    for j in range(per_class):
        for cls in range(n_classes):
            records.append(
                EmbeddingRecord(
                    id=f"{lang}-{cls}-{j:05d}", lang=lang, label=cls, vector=per_class_draws[cls][j]
                )
            )
    return Dataset(dimension=dimension, records=tuple(records))
