"""Feature schema and labelled feature matrices."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple, Sequence

import numpy as np


class Segment(NamedTuple):
    name: str
    offset: int
    length: int


@dataclass(frozen=True)
class FeatureSchema:
    """Named, contiguous segments of a feature vector."""

    segments: tuple[Segment, ...]

    @classmethod
    def from_lengths(cls, pairs: Sequence[tuple[str, int]]) -> "FeatureSchema":
        segs, off = [], 0
        for name, length in pairs:
            segs.append(Segment(name, off, int(length)))
            off += int(length)
        return cls(tuple(segs))

    @property
    def dim(self) -> int:
        return sum(s.length for s in self.segments)

    @property
    def names(self) -> list[str]:
        return [s.name for s in self.segments]

    def __iter__(self) -> Iterator[Segment]:
        return iter(self.segments)

    def __getitem__(self, name: str) -> Segment:
        for s in self.segments:
            if s.name == name:
                return s
        raise KeyError(name)

    def slice(self, name: str) -> slice:
        s = self[name]
        return slice(s.offset, s.offset + s.length)

    def to_json(self) -> list:
        return [[s.name, s.offset, s.length] for s in self.segments]

    @classmethod
    def from_json(cls, obj) -> "FeatureSchema":
        return cls(tuple(Segment(str(n), int(o), int(l)) for n, o, l in obj))

    @property
    def fingerprint(self) -> str:
        blob = json.dumps(self.to_json(), separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Feature matrix ``X`` (n x m) with string labels.

    ``classes`` is the sorted label list; ``y`` indexes into it.
    """

    X: np.ndarray
    labels: tuple[str, ...]
    schema: FeatureSchema
    k: int
    feature_set: str = "simple"
    skipped: int = 0
    classes: tuple[str, ...] = field(init=False)
    y: np.ndarray = field(init=False)

    def __post_init__(self):
        X = np.asarray(self.X, dtype=np.float64)
        if X.ndim != 2:
            raise ValueError(f"X must be 2-D, got shape {X.shape}")
        if X.shape[0] != len(self.labels):
            raise ValueError(f"{X.shape[0]} rows but {len(self.labels)} labels")
        if X.shape[1] != self.schema.dim:
            raise ValueError(f"X has {X.shape[1]} columns, schema says {self.schema.dim}")
        if self.k < 1:
            raise ValueError(f"k must be >= 1, got {self.k}")
        X = X.copy()
        X.flags.writeable = False
        labels = tuple(str(l) for l in self.labels)
        classes = tuple(sorted(set(labels)))
        index = {c: i for i, c in enumerate(classes)}
        y = np.array([index[l] for l in labels], dtype=np.int64)
        y.flags.writeable = False
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "classes", classes)
        object.__setattr__(self, "y", y)

    def __len__(self) -> int:
        return self.X.shape[0]

    @property
    def n_classes(self) -> int:
        return len(self.classes)

    def subset(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(self.X[idx], tuple(self.labels[i] for i in idx.tolist()),
                       self.schema, self.k, self.feature_set)


def write_matrix(ds: Dataset, path) -> None:
    """Columnar text export: ``name:offset:length`` header cells, label last."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        head = [f"{s.name}:{s.offset}:{s.length}" for s in ds.schema] + ["label"]
        fh.write(",".join(head) + "\n")
        for row, label in zip(ds.X, ds.labels):
            fh.write(",".join(repr(float(v)) for v in row) + "," + label + "\n")


def read_matrix(path, k: int, feature_set: str = "simple") -> Dataset:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split(",")
        if not header or header[-1] != "label":
            raise ValueError(f"{path}: line 1: last header cell must be 'label'")
        segs = []
        for cell in header[:-1]:
            name, off, length = cell.rsplit(":", 2)
            segs.append(Segment(name, int(off), int(length)))
        schema = FeatureSchema(tuple(segs))
        rows, labels = [], []
        for lineno, line in enumerate(fh, start=2):
            cells = line.rstrip("\n").split(",")
            if len(cells) != schema.dim + 1:
                raise ValueError(f"{path}: line {lineno}: expected {schema.dim + 1} cells, "
                                 f"got {len(cells)}")
            rows.append([float(c) for c in cells[:-1]])
            labels.append(cells[-1])
    X = np.array(rows, dtype=np.float64).reshape(len(rows), schema.dim)
    return Dataset(X, tuple(labels), schema, k, feature_set)
