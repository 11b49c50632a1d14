"""Canned synthetic benchmark.

Six discrete attributes: five features with 4..8 levels drawn from a
correlated Gaussian copula (two of them categorical), plus a target planted
through the scalar encodings of the features. The linear variant discretises
a noisy linear signal into 8 ordered levels; the logistic variant draws a
binary label from a logistic model of the same signal.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from ..dataset import Attribute, DiscreteDataset, Domain, discretize_numeric, write_csv
from ..encoding import EncodingSpec, default_spec, rescale_values

CATEGORICAL = (1, 3)
N_FEATURES = 5
TARGET_LEVELS = 8


def _random_correlation(d: int, rng: np.random.Generator) -> np.ndarray:
    W = rng.normal(size=(d, d // 2 + 1))
    C = W @ W.T + 0.5 * np.diag(rng.uniform(0.5, 1.5, size=d))
    s = np.sqrt(np.diag(C))
    return C / np.outer(s, s)


def make_synthetic(n: int = 20_000, task: str = "linear", seed: int = 0) -> tuple[DiscreteDataset, EncodingSpec]:
    rng = np.random.default_rng(seed)
    sizes = rng.integers(4, 9, size=N_FEATURES)
    latent = rng.multivariate_normal(np.zeros(N_FEATURES), _random_correlation(N_FEATURES, rng), size=n)
    cols, signal = [], np.zeros(n)
    for j in range(N_FEATURES):
        levels, _ = discretize_numeric(latent[:, j], int(sizes[j]), "equal-frequency")
        cols.append(levels)
        if j in CATEGORICAL:
            effect = rng.normal(0.0, 0.7, size=sizes[j])
            signal += effect[levels]
        else:
            signal += rng.normal(0.0, 1.0) * rescale_values(np.arange(1, sizes[j] + 1))[levels]

    z = (signal - signal.mean()) / signal.std()
    attrs = [
        Attribute(
            f"x{j}",
            int(sizes[j]),
            labels=[f"c{s}" for s in range(sizes[j])] if j in CATEGORICAL else None,
            kind="categorical" if j in CATEGORICAL else "numeric",
        )
        for j in range(N_FEATURES)
    ]
    if task == "linear":
        target, _ = discretize_numeric(z + rng.normal(0.0, 0.5, size=n), TARGET_LEVELS, "equal-width")
        attrs.append(Attribute("y", TARGET_LEVELS, kind="numeric"))
    elif task == "logistic":
        target = (rng.uniform(size=n) < 1.0 / (1.0 + np.exp(-2.0 * z))).astype(np.int64)
        attrs.append(Attribute("y", 2, labels=["neg", "pos"], kind="categorical"))
    else:
        raise ValueError(f"unknown task {task!r}")
    cols.append(target)
    domain = Domain(tuple(attrs))
    return DiscreteDataset(domain, np.column_stack(cols)), default_spec(domain, "y", task)


def write_synthetic(out_dir: str | Path, n: int = 20_000, task: str = "linear", seed: int = 0) -> dict[str, Path]:
    """Write ``data.csv``, ``domain.json`` and ``encoding.json`` into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    data, spec = make_synthetic(n, task, seed)
    paths = {"data": out / "data.csv", "domain": out / "domain.json", "encoding": out / "encoding.json"}
    write_csv(data, paths["data"])
    data.domain.save(paths["domain"])
    spec.save(paths["encoding"])
    return paths
