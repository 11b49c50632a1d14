"""Gaussian mechanism calibration and zCDP bookkeeping."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# absolute slack for budget comparisons; guards against summation-order rounding
BUDGET_SLACK = 1e-12


class BudgetExceeded(RuntimeError):
    pass


@dataclass(frozen=True)
class PrivacyBudget:
    epsilon: float
    delta: float

    def __post_init__(self):
        if not (self.epsilon > 0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive and finite, got {self.epsilon}")
        if not 0 < self.delta < 1:
            raise ValueError(f"delta must lie in (0, 1), got {self.delta}")


def gaussian_sigma(sensitivity: float, budget: PrivacyBudget) -> float:
    """Noise scale of the classical (epsilon, delta) Gaussian mechanism."""
    if sensitivity <= 0:
        raise ValueError("sensitivity must be positive")
    return math.sqrt(2.0 * math.log(1.25 / budget.delta)) * sensitivity / budget.epsilon


def gaussian_mechanism(values, sigma: float, rng: np.random.Generator) -> np.ndarray:
    v = np.asarray(values, dtype=float)
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return v + rng.normal(0.0, sigma, size=v.shape)


def zcdp_of_gaussian(sigma: float, sensitivity: float = 1.0) -> float:
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    return sensitivity**2 / (2.0 * sigma**2)


def sigma_for_rho(rho: float, sensitivity: float = 1.0) -> float:
    """Smallest Gaussian scale whose zCDP cost is at most ``rho``."""
    if rho <= 0:
        raise ValueError("rho must be positive")
    return sensitivity / math.sqrt(2.0 * rho)


def eps_delta_to_rho(budget: PrivacyBudget) -> float:
    """Largest rho with rho + 2 sqrt(rho log(1/delta)) <= epsilon.

    Solving the quadratic in sqrt(rho) gives
    sqrt(rho) = sqrt(L + eps) - sqrt(L) with L = log(1/delta); the rationalised
    form below avoids cancellation when eps is small relative to L.
    """
    L = math.log(1.0 / budget.delta)
    root = budget.epsilon / (math.sqrt(L + budget.epsilon) + math.sqrt(L))
    return root * root


def rho_to_epsilon(rho: float, delta: float) -> float:
    return rho + 2.0 * math.sqrt(rho * math.log(1.0 / delta))


def exponential_epsilon(rho: float) -> float:
    """Epsilon of an exponential mechanism that costs ``rho`` in zCDP (rho = eps^2 / 8)."""
    return math.sqrt(8.0 * rho)


@dataclass
class LedgerEntry:
    label: str
    rho: float
    sigma: float | None = None
    sensitivity: float | None = None


@dataclass
class ZcdpLedger:
    """Additive zCDP composition ledger. One ledger per mechanism run."""

    rho_total: float
    entries: list[LedgerEntry] = field(default_factory=list)
    rho_spent: float = 0.0

    @property
    def remaining(self) -> float:
        return max(self.rho_total - self.rho_spent, 0.0)

    def charge(self, label: str, rho: float, sigma: float | None = None, sensitivity: float | None = None) -> ZcdpLedger:
        if rho < 0 or not math.isfinite(rho):
            raise ValueError(f"{label}: rho must be a nonnegative finite number, got {rho}")
        if self.rho_spent + rho > self.rho_total + BUDGET_SLACK:
            raise BudgetExceeded(
                f"{label}: charging rho={rho:.6g} would exceed budget "
                f"(spent {self.rho_spent:.6g} of {self.rho_total:.6g})"
            )
        self.entries.append(LedgerEntry(label, float(rho), sigma, sensitivity))
        self.rho_spent = min(self.rho_spent + rho, self.rho_total)
        return self

    def to_json(self) -> dict:
        return {
            "rho_total": self.rho_total,
            "rho_spent": self.rho_spent,
            "entries": [vars(e) for e in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> ZcdpLedger:
        led = cls(obj["rho_total"])
        for e in obj["entries"]:
            led.entries.append(LedgerEntry(**e))
        led.rho_spent = obj.get("rho_spent", sum(e.rho for e in led.entries))
        return led

    def dump(self, path: str | Path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=2)
