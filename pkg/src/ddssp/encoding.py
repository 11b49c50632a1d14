"""Numerical encodings of discrete attributes.

Every attribute j is encoded as ``A_j @ onehot(level)`` for a fixed matrix
``A_j`` of shape (p_j, m_j). Concatenating the blocks gives the full record
encoding ``z``; one entry of ``z`` is the regression target and the rest form
the feature vector.

Column order of ``Z = [X, y]`` used throughout the package: feature columns in
attribute order with the target component removed from its block, then the
target last. An intercept is never encoded; see :mod:`ddssp.ssp`.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np

from .dataset import DiscreteDataset, Domain

SCALAR = "scalar"
ONEHOT = "onehot"
REDUCED_ONEHOT = "reduced_onehot"
ENCODING_KINDS = (SCALAR, ONEHOT, REDUCED_ONEHOT)
TASKS = ("linear", "logistic")


class EncodingError(ValueError):
    pass


def rescale_values(values) -> np.ndarray:
    """Affinely map ``values`` so that min -> -1 and max -> +1 (constant -> 0)."""
    v = np.asarray(values, dtype=float)
    lo, hi = v.min(), v.max()
    if hi == lo:
        return np.zeros_like(v)
    return 2.0 * (v - lo) / (hi - lo) - 1.0


@dataclass(frozen=True)
class AttributeEncoding:
    kind: str
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.kind not in ENCODING_KINDS:
            raise EncodingError(f"unknown encoding kind {self.kind!r}")
        if self.kind == SCALAR:
            if self.values is None:
                raise EncodingError("scalar encoding needs values")
            object.__setattr__(self, "values", tuple(float(x) for x in self.values))
        elif self.values is not None:
            raise EncodingError(f"{self.kind} encoding takes no values")

    def width(self, m: int) -> int:
        return {SCALAR: 1, ONEHOT: m, REDUCED_ONEHOT: m - 1}[self.kind]

    def matrix(self, m: int, rescale: bool = False) -> np.ndarray:
        if self.kind == SCALAR:
            if len(self.values) != m:
                raise EncodingError(f"scalar encoding has {len(self.values)} values for {m} levels")
            v = np.array(self.values)
            return (rescale_values(v) if rescale else v)[None, :]
        eye = np.eye(m)
        return eye if self.kind == ONEHOT else eye[1:]

    def to_json(self) -> dict:
        obj = {"kind": self.kind}
        if self.values is not None:
            obj["values"] = list(self.values)
        return obj


@dataclass(frozen=True)
class EncodingSpec:
    """Per-attribute encodings bound to a domain, plus the target choice.

    ``target`` is ``(attribute index, component index within that attribute's
    encoding block)``.
    """

    domain: Domain
    encodings: tuple[AttributeEncoding, ...]
    target: tuple[int, int]
    rescale: bool = True
    task: str = "linear"

    def __post_init__(self):
        object.__setattr__(self, "encodings", tuple(self.encodings))
        object.__setattr__(self, "target", (int(self.target[0]), int(self.target[1])))
        if len(self.encodings) != len(self.domain):
            raise EncodingError(f"{len(self.encodings)} encodings for {len(self.domain)} attributes")
        if self.task not in TASKS:
            raise EncodingError(f"task must be one of {TASKS}")
        j, c = self.target
        if not 0 <= j < len(self.domain):
            raise EncodingError(f"target attribute {j} out of range")
        if not 0 <= c < self.widths[j]:
            raise EncodingError(f"target component {c} out of range for attribute {j}")
        if self.task == "logistic":
            enc, m = self.encodings[j], self.domain.attributes[j].size
            vals = enc.matrix(m, self.rescale)[0] if enc.kind == SCALAR else None
            if m != 2 or vals is None or sorted(vals.tolist()) != [-1.0, 1.0]:
                raise EncodingError("logistic target must be a 2-level attribute scalar-encoded as {-1, +1}")

    @cached_property
    def transforms(self) -> list[np.ndarray]:
        """The matrices A_j, with rescaling already applied to scalar values."""
        return [e.matrix(a.size, self.rescale) for e, a in zip(self.encodings, self.domain.attributes)]

    @cached_property
    def widths(self) -> list[int]:
        return [e.width(a.size) for e, a in zip(self.encodings, self.domain.attributes)]

    @property
    def p(self) -> int:
        return sum(self.widths) - 1

    @cached_property
    def column_order(self) -> np.ndarray:
        """Permutation taking concatenated-z columns to ``[X, y]`` columns."""
        offsets = np.concatenate([[0], np.cumsum(self.widths)])
        tcol = offsets[self.target[0]] + self.target[1]
        cols = np.arange(offsets[-1])
        return np.concatenate([cols[cols != tcol], [tcol]])

    @cached_property
    def block_map(self) -> list[np.ndarray]:
        """For each attribute, its column indices within ``Z = [X, y]``."""
        offsets = np.concatenate([[0], np.cumsum(self.widths)])
        pos = np.empty_like(self.column_order)
        pos[self.column_order] = np.arange(len(self.column_order))
        return [pos[offsets[j] : offsets[j + 1]] for j in range(len(self.widths))]

    def to_json(self) -> dict:
        names = self.domain.names
        return {
            "attributes": {nm: e.to_json() for nm, e in zip(names, self.encodings)},
            "target": [names[self.target[0]], self.target[1]],
            "rescale": self.rescale,
            "task": self.task,
        }

    @classmethod
    def from_json(cls, obj: dict, domain: Domain) -> EncodingSpec:
        reserved = {"target", "rescale", "task"}
        attrs = obj.get("attributes") or {k: v for k, v in obj.items() if k not in reserved}
        unknown = set(attrs) - set(domain.names)
        if unknown:
            raise EncodingError(f"encoding for unknown attributes: {sorted(unknown)}")
        default = default_spec(domain, _target_name(obj["target"]), obj.get("task", "linear"))
        encs = [
            AttributeEncoding(attrs[nm]["kind"], attrs[nm].get("values")) if nm in attrs else default.encodings[j]
            for j, nm in enumerate(domain.names)
        ]
        t = obj["target"]
        target = (domain.index(t), 0) if isinstance(t, str) else (domain.index(t[0]), int(t[1]))
        return cls(domain, tuple(encs), target, bool(obj.get("rescale", True)), obj.get("task", "linear"))

    @classmethod
    def load(cls, path: str | Path, domain: Domain) -> EncodingSpec:
        with open(path) as fh:
            return cls.from_json(json.load(fh), domain)

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)


def _target_name(t) -> str:
    return t if isinstance(t, str) else t[0]


def default_spec(domain: Domain, target: str | int, task: str = "linear", rescale: bool = True) -> EncodingSpec:
    """Numeric attributes scalar-encoded as 1..m_j, categorical ones reduced one-hot.

    The target is always scalar-encoded; with rescaling a 2-level target becomes
    {-1, +1}, as logistic regression requires.
    """
    tj = domain.index(target) if isinstance(target, str) else int(target)
    encs = []
    for j, a in enumerate(domain.attributes):
        if a.kind == "numeric" or j == tj:
            encs.append(AttributeEncoding(SCALAR, tuple(range(1, a.size + 1))))
        else:
            encs.append(AttributeEncoding(REDUCED_ONEHOT))
    return EncodingSpec(domain, tuple(encs), (tj, 0), rescale, task)


@dataclass(frozen=True)
class EncodedData:
    X: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    x_bound: float
    y_bound: float
    block_map: list[np.ndarray] = field(repr=False)

    @property
    def Z(self) -> np.ndarray:
        return np.column_stack([self.X, self.y])


def encode_records(records: np.ndarray, spec: EncodingSpec) -> np.ndarray:
    """Concatenated z rows (attribute order, target not yet moved)."""
    records = np.asarray(records, dtype=np.int64).reshape(-1, len(spec.domain))
    blocks = [A[:, records[:, j]].T for j, A in enumerate(spec.transforms)]
    return np.concatenate(blocks, axis=1) if blocks else np.zeros((len(records), 0))


def encode(dataset: DiscreteDataset, spec: EncodingSpec) -> EncodedData:
    if dataset.domain != spec.domain:
        raise EncodingError("dataset domain does not match encoding spec domain")
    Z = encode_records(dataset.records, spec)[:, spec.column_order]
    return EncodedData(
        X=Z[:, :-1],
        y=Z[:, -1].copy(),
        x_bound=feature_bound(spec),
        y_bound=target_bound(spec),
        block_map=spec.block_map,
    )


def _feature_parts(spec: EncodingSpec) -> tuple[float, int, int]:
    """Returns (squared scalar bound, one-hot attribute count c, one-hot width b)."""
    tj, tc = spec.target
    u2, c, b = 0.0, 0, 0
    for j, (enc, A) in enumerate(zip(spec.encodings, spec.transforms)):
        if enc.kind == SCALAR:
            if j != tj:
                u2 += float(np.max(np.abs(A))) ** 2
            continue
        width = A.shape[0] - (1 if j == tj else 0)
        if width > 0:
            # a one-hot target leaves the remaining components in x, still with at most one 1
            c += 1
            b += width
    return u2, c, b


def feature_bound(spec: EncodingSpec) -> float:
    """Upper bound on ||x|| over every record the domain admits.

    Scalar features contribute their largest squared magnitude; each one-hot
    (or reduced one-hot) attribute contributes at most 1 in total.
    """
    u2, c, _ = _feature_parts(spec)
    return math.sqrt(u2 + c)


def naive_feature_bound(spec: EncodingSpec) -> float:
    """Entry-by-entry bound that counts every one-hot column separately."""
    u2, _, b = _feature_parts(spec)
    return math.sqrt(u2 + b)


def target_bound(spec: EncodingSpec) -> float:
    j, c = spec.target
    return float(np.max(np.abs(spec.transforms[j][c])))
