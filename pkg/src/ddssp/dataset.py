"""Discrete tabular datasets over a declared attribute domain."""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

KINDS = ("categorical", "numeric")


class DatasetError(ValueError):
    """Raised when a dataset or schema does not conform to its domain."""


@dataclass(frozen=True)
class Attribute:
    name: str
    size: int
    labels: tuple[str, ...] | None = None
    kind: str = "categorical"

    def __post_init__(self):
        if int(self.size) < 1:
            raise DatasetError(f"attribute {self.name!r}: size must be >= 1, got {self.size}")
        object.__setattr__(self, "size", int(self.size))
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != self.size:
                raise DatasetError(f"attribute {self.name!r}: {len(labels)} labels for size {self.size}")
            if len(set(labels)) != len(labels):
                raise DatasetError(f"attribute {self.name!r}: duplicate labels")
            object.__setattr__(self, "labels", labels)
        if self.kind not in KINDS:
            raise DatasetError(f"attribute {self.name!r}: kind must be one of {KINDS}")


@dataclass(frozen=True)
class Domain:
    """Ordered attribute schema. Level indices for attribute j run over 0..m_j-1."""

    attributes: tuple[Attribute, ...]

    def __post_init__(self):
        attrs = tuple(self.attributes)
        object.__setattr__(self, "attributes", attrs)
        names = [a.name for a in attrs]
        if len(set(names)) != len(names):
            raise DatasetError("attribute names must be unique")

    @classmethod
    def from_sizes(cls, sizes: Sequence[int], names: Sequence[str] | None = None, kind: str = "categorical") -> Domain:
        names = names or [f"a{j}" for j in range(len(sizes))]
        return cls(tuple(Attribute(nm, int(m), kind=kind) for nm, m in zip(names, sizes)))

    @property
    def names(self) -> list[str]:
        return [a.name for a in self.attributes]

    @property
    def sizes(self) -> np.ndarray:
        return np.array([a.size for a in self.attributes], dtype=np.int64)

    def __len__(self) -> int:
        return len(self.attributes)

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise DatasetError(f"unknown attribute {name!r}") from None

    def size(self, attrs: Sequence[int] | None = None) -> int:
        """Number of cells in the sub-domain over ``attrs`` (all attributes by default).

        Python ints are arbitrary precision, so the product never overflows.
        """
        idx = range(len(self)) if attrs is None else attrs
        return math.prod(self.attributes[j].size for j in idx)

    def to_json(self) -> list[dict]:
        out = []
        for a in self.attributes:
            obj = {"name": a.name, "size": a.size, "kind": a.kind}
            if a.labels is not None:
                obj["labels"] = list(a.labels)
            out.append(obj)
        return out

    @classmethod
    def from_json(cls, obj: list[dict]) -> Domain:
        try:
            return cls(
                tuple(
                    Attribute(o["name"], o["size"], o.get("labels"), o.get("kind", "categorical"))
                    for o in obj
                )
            )
        except (KeyError, TypeError) as exc:
            raise DatasetError(f"malformed domain schema: {exc}") from exc

    @classmethod
    def load(cls, path: str | Path) -> Domain:
        with open(path) as fh:
            return cls.from_json(json.load(fh))

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


@dataclass(frozen=True)
class DiscreteDataset:
    domain: Domain
    records: np.ndarray = field(repr=False)

    def __post_init__(self):
        rec = np.asarray(self.records, dtype=np.int64)
        if rec.ndim == 1 and rec.size == 0:
            rec = rec.reshape(0, len(self.domain))
        if rec.ndim != 2 or rec.shape[1] != len(self.domain):
            raise DatasetError(f"records must be n x {len(self.domain)}, got shape {rec.shape}")
        if rec.size and ((rec < 0).any() or (rec >= self.domain.sizes).any()):
            bad = np.argwhere((rec < 0) | (rec >= self.domain.sizes))[0]
            raise DatasetError(
                f"record {bad[0]}: level {rec[bad[0], bad[1]]} out of range for "
                f"attribute {self.domain.names[bad[1]]!r} (size {self.domain.sizes[bad[1]]})"
            )
        rec = rec.copy()
        rec.setflags(write=False)
        object.__setattr__(self, "records", rec)

    @property
    def n(self) -> int:
        return self.records.shape[0]

    def take(self, idx: np.ndarray) -> DiscreteDataset:
        return DiscreteDataset(self.domain, self.records[idx])


def _resolve(attr: Attribute, cell: str) -> int:
    cell = cell.strip()
    if cell == "":
        raise DatasetError(f"missing value for attribute {attr.name!r}")
    # declared labels take precedence over integer parsing
    if attr.labels is not None and cell in attr.labels:
        return attr.labels.index(cell)
    try:
        level = int(cell)
    except ValueError:
        raise DatasetError(f"unresolvable value {cell!r} for attribute {attr.name!r}") from None
    if not 0 <= level < attr.size:
        raise DatasetError(f"level {level} out of range for attribute {attr.name!r} (size {attr.size})")
    return level


def load_csv(path: str | Path, domain: Domain, strict: bool = True) -> DiscreteDataset:
    """Read a CSV with header into a dataset ordered like ``domain``.

    Extra CSV columns are ignored. In strict mode any bad cell raises
    :class:`DatasetError`; otherwise offending rows are dropped and a warning
    reports how many.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DatasetError(f"{path}: missing header row") from None
        missing = [nm for nm in domain.names if nm not in header]
        if missing:
            raise DatasetError(f"{path}: columns not found in header: {missing}")
        cols = [header.index(nm) for nm in domain.names]
        rows, dropped = [], 0
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                if len(row) < len(header):
                    raise DatasetError(f"expected {len(header)} fields, got {len(row)}")
                rows.append([_resolve(a, row[c]) for a, c in zip(domain.attributes, cols)])
            except DatasetError as exc:
                if strict:
                    raise DatasetError(f"{path}:{lineno}: {exc}") from None
                dropped += 1
    if dropped:
        warnings.warn(f"{path}: dropped {dropped} row(s) with invalid values", stacklevel=2)
    records = np.array(rows, dtype=np.int64).reshape(len(rows), len(domain))
    return DiscreteDataset(domain, records)


def write_csv(dataset: DiscreteDataset, path: str | Path, use_labels: bool = True) -> None:
    attrs = dataset.domain.attributes
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.domain.names)
        for rec in dataset.records:
            w.writerow(
                [a.labels[v] if (use_labels and a.labels is not None) else int(v) for a, v in zip(attrs, rec)]
            )


def discretize_numeric(values, bins: int, strategy: str = "equal-width") -> tuple[np.ndarray, np.ndarray]:
    """Bin real values into ``bins`` ordinal levels.

    Returns ``(levels, edges)`` with ``len(edges) == bins + 1``. Bins are
    half-open on the right except the last, which includes the maximum.
    Constant input maps every value to level 0.
    """
    values = np.asarray(values, dtype=float)
    if bins < 1:
        raise ValueError("bins must be >= 1")
    if values.size == 0:
        raise ValueError("values must be nonempty")
    lo, hi = values.min(), values.max()
    if strategy == "equal-width":
        edges = np.linspace(lo, hi, bins + 1)
    elif strategy == "equal-frequency":
        edges = np.quantile(values, np.linspace(0.0, 1.0, bins + 1))
        edges = np.maximum.accumulate(edges)
    else:
        raise ValueError(f"unknown strategy {strategy!r}")
    if lo == hi:
        return np.zeros(values.shape, dtype=np.int64), edges
    levels = np.searchsorted(edges[1:-1], values, side="right")
    return np.clip(levels, 0, bins - 1).astype(np.int64), edges


def split_indices(n: int, test_size: int, train_cap: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if test_size > n:
        raise DatasetError(f"test_size {test_size} exceeds dataset size {n}")
    if test_size < 0 or train_cap < 0:
        raise DatasetError("test_size and train_cap must be nonnegative")
    perm = np.random.default_rng(seed).permutation(n)
    test = perm[:test_size]
    train = perm[test_size : test_size + train_cap]
    return train, test


def split(dataset: DiscreteDataset, test_size: int = 1000, train_cap: int = 50_000, seed: int = 0):
    """Shuffle and split into ``(train, test)``; train is capped at ``train_cap`` rows."""
    train, test = split_indices(dataset.n, test_size, train_cap, seed)
    return dataset.take(train), dataset.take(test)
