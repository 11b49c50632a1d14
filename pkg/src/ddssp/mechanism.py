"""Private release of every pairwise marginal.

Three mechanisms share one output type:

* :func:`exact_oracle` -- true tables, no privacy; a reference for tests.
* :func:`gaussian_all_pairs` -- data-independent: every pair measured once
  with the budget split evenly.
* :func:`aim_lite` -- data-dependent select-measure loop in the spirit of AIM:
  noisy one-way initialisation, an independence model for unmeasured pairs,
  exponential-mechanism selection by estimated error improvement, and
  budget annealing when measurements stop moving the model.

Everything downstream of :class:`MechanismOutput` is post-processing; the
output can be written to JSON and the regression fitted from the file alone.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .dataset import DiscreteDataset, Domain
from .marginals import (
    MarginalQuery,
    MarginalTable,
    Workload,
    all_pairs_workload,
    compute_pair_marginals,
    derive_one_way,
)
from .privacy import (
    PrivacyBudget,
    ZcdpLedger,
    eps_delta_to_rho,
    exponential_epsilon,
    sigma_for_rho,
)

Pair = tuple[int, int]


@dataclass
class MechanismOutput:
    domain: Domain
    tables: dict[Pair, MarginalTable]
    n_hat: float
    ledger: ZcdpLedger
    mechanism: str
    private: bool = True
    trace: list[dict] = field(default_factory=list)

    def __post_init__(self):
        d = len(self.domain)
        missing = [(j, k) for j in range(d) for k in range(j + 1, d) if (j, k) not in self.tables]
        if missing:
            raise ValueError(f"mechanism output is missing pairs {missing}")

    def to_json(self) -> dict:
        return {
            "mechanism": self.mechanism,
            "private": self.private,
            "domain": self.domain.to_json(),
            "n_hat": self.n_hat,
            "tables": [self.tables[key].to_json() for key in sorted(self.tables)],
            "ledger": self.ledger.to_json(),
            "trace": self.trace,
        }

    @classmethod
    def from_json(cls, obj: dict) -> MechanismOutput:
        tables = {}
        for t in obj["tables"]:
            tab = MarginalTable.from_json(t)
            tables[tab.attrs] = tab
        return cls(
            domain=Domain.from_json(obj["domain"]),
            tables=tables,
            n_hat=float(obj["n_hat"]),
            ledger=ZcdpLedger.from_json(obj["ledger"]),
            mechanism=obj["mechanism"],
            private=obj["private"],
            trace=obj.get("trace", []),
        )

    def save(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh)

    @classmethod
    def load(cls, path: str | Path) -> MechanismOutput:
        with open(path) as fh:
            return cls.from_json(json.load(fh))


@dataclass(frozen=True)
class AimLiteConfig:
    """Budget shares and schedule for :func:`aim_lite`.

    ``init_budget_fraction`` of the total rho goes to the one-way
    initialisation. Each later round spends ``selection_budget_fraction`` of
    its budget on choosing a pair and the rest on measuring it.
    ``max_rounds=None`` means ``16 * d``.
    """

    init_budget_fraction: float = 0.1
    max_rounds: int | None = None
    anneal_factor: float = 2.0
    selection_budget_fraction: float = 0.1

    def __post_init__(self):
        for name in ("init_budget_fraction", "selection_budget_fraction"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.max_rounds is not None and self.max_rounds < 1:
            raise ValueError("max_rounds must be a positive integer")
        if not self.anneal_factor > 1:
            raise ValueError("anneal_factor must exceed 1")


def _check_workload(dataset: DiscreteDataset, workload: Workload | None) -> Workload:
    if workload is None:
        return all_pairs_workload(dataset.domain)
    if not workload.is_all_pairs(len(dataset.domain)):
        raise ValueError("mechanisms here release all pairwise marginals; pass the all-pairs workload")
    return workload


def _n_hat(totals) -> float:
    # floor at one record so downstream rescaling stays well defined
    return max(float(np.mean(totals)), 1.0)


def postprocess_tables(tables: dict[Pair, MarginalTable], n_hat: float) -> dict[Pair, MarginalTable]:
    """Clip every table at zero and rescale it to total ``n_hat``.

    A table that is entirely zero after clipping stays zero.
    """
    out = {}
    for key, tab in tables.items():
        v = np.clip(tab.values, 0.0, None)
        s = v.sum()
        if s > 0:
            v = v * (n_hat / s)
        out[key] = MarginalTable(tab.query, tab.shape, v, exact=tab.exact and s == n_hat)
    return out


def _consistency_report(tables: dict[Pair, MarginalTable], d: int) -> dict:
    """Largest L1 disagreement between one-way marginals implied by different pairs."""
    worst = 0.0
    for j in range(d):
        implied = [derive_one_way(t, j).values for key, t in tables.items() if j in key]
        for a in range(1, len(implied)):
            worst = max(worst, float(np.abs(implied[a] - implied[0]).sum()))
    return {"event": "consistency", "max_one_way_l1_disagreement": worst}


def _finish(domain, tables, n_hat, ledger, name, trace) -> MechanismOutput:
    degenerate = [list(k) for k, t in tables.items() if t.total() == 0.0]
    if degenerate:
        trace.append({"event": "degenerate", "pairs": degenerate})
    trace.append(_consistency_report(tables, len(domain)))
    return MechanismOutput(domain, tables, n_hat, ledger, name, True, trace)


def exact_oracle(dataset: DiscreteDataset, workload: Workload | None = None) -> MechanismOutput:
    """True pairwise tables. Not private; for testing and reference fits only."""
    _check_workload(dataset, workload)
    return MechanismOutput(
        domain=dataset.domain,
        tables=compute_pair_marginals(dataset),
        n_hat=float(dataset.n),
        ledger=ZcdpLedger(0.0),
        mechanism="exact",
        private=False,
    )


def gaussian_all_pairs(
    dataset: DiscreteDataset,
    workload: Workload | None,
    budget: PrivacyBudget,
    rng: np.random.Generator,
) -> MechanismOutput:
    workload = _check_workload(dataset, workload)
    rho_total = eps_delta_to_rho(budget)
    ledger = ZcdpLedger(rho_total)
    K = len(workload)
    rho_each = rho_total / K
    sigma = sigma_for_rho(rho_each)
    exact = compute_pair_marginals(dataset)
    raw = {}
    for q in workload:
        tab = exact[q.attrs]
        noisy = tab.values + rng.normal(0.0, sigma, size=tab.values.shape)
        raw[q.attrs] = MarginalTable(q, tab.shape, noisy)
        ledger.charge(f"measure:{q.attrs}", rho_each, sigma, 1.0)
    n_hat = _n_hat([t.total() for t in raw.values()])
    return _finish(dataset.domain, postprocess_tables(raw, n_hat), n_hat, ledger, "gaussian", [])


class _PairModel:
    """Model state for aim_lite: measured pairs plus an independence fallback."""

    def __init__(self, sizes, n_hat, init_one_way, init_var):
        self.sizes = sizes
        self.n_hat = n_hat
        self.init_one_way = init_one_way
        self.init_var = init_var
        d = len(sizes)
        self.pairs = [(j, k) for j in range(d) for k in range(j + 1, d)]
        # inverse-variance accumulators per measured pair: (sum w*y, sum w)
        self.acc: dict[Pair, tuple[np.ndarray, float]] = {}
        self.tables: dict[Pair, np.ndarray] = {}
        self.refresh()

    def measured_mean(self, key):
        s, w = self.acc[key]
        return s / w

    def one_way(self, j) -> np.ndarray:
        est = self.init_one_way[j] / self.init_var
        prec = np.full(self.sizes[j], 1.0 / self.init_var)
        for key in self.acc:
            if j not in key:
                continue
            other = key[1] if key[0] == j else key[0]
            M = self.measured_mean(key)
            implied = M.sum(axis=1) if key[0] == j else M.sum(axis=0)
            # summing m_other cells of variance 1/w each
            p = self.acc[key][1] / self.sizes[other]
            est = est + implied * p
            prec = prec + p
        mu = np.clip(est / prec, 0.0, None)
        s = mu.sum()
        return mu * (self.n_hat / s) if s > 0 else np.full(self.sizes[j], self.n_hat / self.sizes[j])

    def refresh(self):
        ones = [self.one_way(j) for j in range(len(self.sizes))]
        for key in self.pairs:
            if key in self.acc:
                self.tables[key] = self.measured_mean(key)
            else:
                j, k = key
                self.tables[key] = np.outer(ones[j], ones[k]) / self.n_hat

    def add(self, key, y, sigma):
        w = 1.0 / sigma**2
        s0, w0 = self.acc.get(key, (0.0, 0.0))
        self.acc[key] = (s0 + w * y, w0 + w)
        self.refresh()


def aim_lite(
    dataset: DiscreteDataset,
    workload: Workload | None,
    budget: PrivacyBudget,
    config: AimLiteConfig | None,
    rng: np.random.Generator,
) -> MechanismOutput:
    workload = _check_workload(dataset, workload)
    config = config or AimLiteConfig()
    domain = dataset.domain
    d = len(domain)
    sizes = [int(m) for m in domain.sizes]
    max_rounds = config.max_rounds or 16 * d
    ledger = ZcdpLedger(eps_delta_to_rho(budget))
    exact = {key: t.values.reshape(t.shape) for key, t in compute_pair_marginals(dataset).items()}
    trace: list[dict] = []

    # initialisation: every one-way marginal, equal shares of the init budget
    rho_init = config.init_budget_fraction * ledger.rho_total / d
    sigma0 = sigma_for_rho(rho_init)
    noisy_one = []
    for j in range(d):
        key = (0, 1) if j == 0 else (0, j)
        true_j = exact[key].sum(axis=1) if j == 0 else exact[key].sum(axis=0)
        noisy_one.append(true_j + rng.normal(0.0, sigma0, size=sizes[j]))
        ledger.charge(f"init:{j}", rho_init, sigma0, 1.0)
    n_hat = _n_hat([v.sum() for v in noisy_one])
    model = _PairModel(sizes, n_hat, [np.clip(v, 0.0, None) for v in noisy_one], sigma0**2)
    trace.append({"event": "init", "sigma": sigma0, "n_hat": n_hat})

    pairs = [q.attrs for q in workload]
    cells = np.array([sizes[j] * sizes[k] for j, k in pairs], dtype=float)
    round_rho = ledger.remaining / max_rounds
    for t in range(max_rounds):
        remaining = ledger.remaining
        if remaining <= 0.0:
            break
        final = t == max_rounds - 1 or remaining < 2 * round_rho
        rho_t = remaining if final else round_rho
        rho_sel = config.selection_budget_fraction * rho_t
        rho_meas = rho_t - rho_sel
        sigma = sigma_for_rho(rho_meas)

        # quality: current L1 error minus the expected L1 error of a fresh measurement
        errors = np.array([np.abs(exact[key] - model.tables[key]).sum() for key in pairs])
        scores = errors - math.sqrt(2.0 / math.pi) * sigma * cells
        logits = 0.5 * exponential_epsilon(rho_sel) * scores
        prob = np.exp(logits - logits.max())
        idx = int(rng.choice(len(pairs), p=prob / prob.sum()))
        key = pairs[idx]
        ledger.charge(f"select:{t}", rho_sel)

        y = exact[key] + rng.normal(0.0, sigma, size=exact[key].shape)
        ledger.charge(f"measure:{t}:{key}", rho_meas, sigma, 1.0)
        before = model.tables[key].copy()
        model.add(key, y, sigma)
        change = float(np.linalg.norm(model.tables[key] - before))
        annealed = change < sigma * math.sqrt(cells[idx])
        trace.append({"round": t, "query": list(key), "sigma": sigma, "annealed": annealed})
        if final:
            break
        if annealed:
            round_rho *= config.anneal_factor

    raw = {key: MarginalTable(MarginalQuery(key), (sizes[key[0]], sizes[key[1]]), model.tables[key]) for key in pairs}
    return _finish(domain, postprocess_tables(raw, n_hat), n_hat, ledger, "aim-lite", trace)


MECHANISMS = {
    "exact": lambda data, budget, rng, config=None: exact_oracle(data),
    "gaussian": lambda data, budget, rng, config=None: gaussian_all_pairs(data, None, budget, rng),
    "aimlite": lambda data, budget, rng, config=None: aim_lite(data, None, budget, config, rng),
}


def release(name: str, dataset: DiscreteDataset, budget: PrivacyBudget | None, rng, config=None) -> MechanismOutput:
    try:
        fn = MECHANISMS[name]
    except KeyError:
        raise ValueError(f"unknown mechanism {name!r}; choose from {sorted(MECHANISMS)}") from None
    return fn(dataset, budget, rng, config)
