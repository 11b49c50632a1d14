"""Marginal queries, tables and workloads.

A marginal on attributes ``r`` (sorted ascending) is a vector of counts indexed
by value tuples in row-major order: the last attribute in ``r`` varies fastest.
Reconstruction of sufficient statistics relies on exactly this layout.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels
from .dataset import DiscreteDataset, Domain


@dataclass(frozen=True, order=True)
class MarginalQuery:
    attrs: tuple[int, ...]

    def __post_init__(self):
        attrs = tuple(int(a) for a in self.attrs)
        if not attrs:
            raise ValueError("marginal query needs at least one attribute")
        if list(attrs) != sorted(set(attrs)):
            raise ValueError(f"query attributes must be sorted and distinct, got {attrs}")
        object.__setattr__(self, "attrs", attrs)

    @classmethod
    def of(cls, *attrs: int) -> MarginalQuery:
        return cls(tuple(sorted(attrs)))

    def shape(self, domain: Domain) -> tuple[int, ...]:
        return tuple(domain.attributes[a].size for a in self.attrs)

    def size(self, domain: Domain) -> int:
        return math.prod(self.shape(domain))

    def __len__(self) -> int:
        return len(self.attrs)


@dataclass(frozen=True)
class MarginalTable:
    query: MarginalQuery
    shape: tuple[int, ...]
    values: np.ndarray = field(repr=False)
    exact: bool = False

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float).ravel().copy()
        if len(self.shape) != len(self.query) or vals.size != math.prod(self.shape):
            raise ValueError(f"table of {vals.size} values does not fit shape {self.shape}")
        vals.setflags(write=False)
        object.__setattr__(self, "shape", tuple(int(s) for s in self.shape))
        object.__setattr__(self, "values", vals)

    @property
    def attrs(self) -> tuple[int, ...]:
        return self.query.attrs

    def total(self) -> float:
        return float(self.values.sum())

    def to_json(self) -> dict:
        return {"attrs": list(self.attrs), "shape": list(self.shape), "values": self.values.tolist(), "exact": self.exact}

    @classmethod
    def from_json(cls, obj: dict) -> MarginalTable:
        return cls(MarginalQuery(tuple(obj["attrs"])), tuple(obj["shape"]), np.array(obj["values"]), obj.get("exact", False))


@dataclass(frozen=True)
class Workload:
    queries: tuple[MarginalQuery, ...]

    def __post_init__(self):
        qs = tuple(self.queries)
        if len(set(qs)) != len(qs):
            raise ValueError("workload queries must be distinct")
        object.__setattr__(self, "queries", qs)

    def __len__(self) -> int:
        return len(self.queries)

    def __iter__(self):
        return iter(self.queries)

    def is_all_pairs(self, d: int) -> bool:
        return set(self.queries) == set(all_pairs_workload_d(d).queries)


def all_pairs_workload_d(d: int) -> Workload:
    if d < 2:
        raise ValueError(f"an all-pairs workload needs at least 2 attributes, got {d}")
    return Workload(tuple(MarginalQuery(p) for p in itertools.combinations(range(d), 2)))


def all_pairs_workload(domain: Domain) -> Workload:
    return all_pairs_workload_d(len(domain))


def compute_marginal(dataset: DiscreteDataset, q: MarginalQuery) -> MarginalTable:
    shape = q.shape(dataset.domain)
    counts = _kernels.joint_counts(dataset.records[:, list(q.attrs)], np.array(shape))
    return MarginalTable(q, shape, counts.astype(float), exact=True)


def compute_pair_marginals(dataset: DiscreteDataset) -> dict[tuple[int, int], MarginalTable]:
    """Exact tables for every attribute pair, counted in one pass."""
    sizes = dataset.domain.sizes
    counts = _kernels.pair_counts(dataset.records, sizes)
    return {
        (j, k): MarginalTable(MarginalQuery((j, k)), (int(sizes[j]), int(sizes[k])), c.astype(float), exact=True)
        for (j, k), c in counts.items()
    }


def compute_workload(dataset: DiscreteDataset, workload: Iterable[MarginalQuery]) -> dict[MarginalQuery, MarginalTable]:
    return {q: compute_marginal(dataset, q) for q in workload}


def marginal_sensitivity(q: MarginalQuery) -> float:
    """L2 sensitivity under add/remove-one neighbours: a record touches exactly one cell."""
    return 1.0


def as_matrix(table: MarginalTable, transpose: bool = False) -> np.ndarray:
    """Shape a two-way table over (j, k), j < k, as an m_j x m_k matrix.

    A one-way table over j is returned as ``diag(mu_j)``, the (j, j) case.
    """
    if len(table.query) == 1:
        return np.diag(table.values)
    if len(table.query) != 2:
        raise ValueError(f"as_matrix needs a one- or two-way table, got arity {len(table.query)}")
    M = table.values.reshape(table.shape)
    return M.T.copy() if transpose else M.copy()


def derive_one_way(table: MarginalTable, target: int) -> MarginalTable:
    """Sum a two-way table down to the one-way marginal of ``target``."""
    if len(table.query) != 2:
        raise ValueError("derive_one_way needs a two-way table")
    if target not in table.attrs:
        raise ValueError(f"attribute {target} not in query {table.attrs}")
    axis = 1 if table.attrs[0] == target else 0
    vals = table.values.reshape(table.shape).sum(axis=axis)
    return MarginalTable(MarginalQuery((target,)), (table.shape[1 - axis],), vals, exact=table.exact)

