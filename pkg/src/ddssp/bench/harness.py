"""Epsilon-sweep experiments: split, fit every method, score on held-out data."""

from __future__ import annotations

import csv
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from ..baselines import AdaSSPParams, adassp, nonprivate_logistic, nonprivate_ols, objpert_logistic
from ..dataset import DiscreteDataset, Domain, load_csv, split
from ..encoding import EncodingSpec, default_spec, encode
from ..mechanism import AimLiteConfig, release
from ..privacy import PrivacyBudget
from ..ssp import fit_from_marginals, predict
from .metrics import auc, mse

log = logging.getLogger(__name__)

DDSSP_METHODS = {"ddssp-aimlite": "aimlite", "ddssp-gaussian": "gaussian", "ddssp-exact": "exact"}
METHODS = (*DDSSP_METHODS, "adassp", "objpert", "nonprivate")
TASK_ONLY = {"adassp": "linear", "objpert": "logistic"}
DEFAULT_EPSILONS = (0.05, 0.1, 0.5, 1.0, 2.0)


class TrialError(RuntimeError):
    pass


@dataclass
class ExperimentConfig:
    data: str | None = None
    domain: str | None = None
    encoding: str | None = None
    target: str | None = None
    task: str = "linear"
    methods: list[str] = field(default_factory=lambda: ["ddssp-aimlite", "adassp", "nonprivate"])
    epsilons: list[float] = field(default_factory=lambda: list(DEFAULT_EPSILONS))
    delta: float = 1e-5
    trials: int = 5
    test_size: int = 1000
    train_cap: int = 50_000
    seed: int = 0
    workers: int = 1
    intercept: bool = True
    strict: bool = True
    aim_lite: dict | None = None

    def __post_init__(self):
        if not self.methods or not self.epsilons:
            raise ValueError("methods and epsilons must be nonempty")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ValueError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        for m in self.methods:
            if TASK_ONLY.get(m, self.task) != self.task:
                raise ValueError(f"method {m!r} only supports the {TASK_ONLY[m]} task")
        if any(e <= 0 for e in self.epsilons):
            raise ValueError("epsilons must be positive")

    @classmethod
    def from_json(cls, obj: dict, base_dir: str | Path | None = None) -> ExperimentConfig:
        known = {f.name for f in fields(cls)}
        extra = set(obj) - known
        if extra:
            raise ValueError(f"unknown config keys {sorted(extra)}")
        cfg = cls(**obj)
        if base_dir is not None:
            # paths in a config file are relative to that file
            for key in ("data", "domain", "encoding"):
                val = getattr(cfg, key)
                if val is not None and not Path(val).is_absolute():
                    setattr(cfg, key, str(Path(base_dir) / val))
        return cfg

    @classmethod
    def load(cls, path: str | Path) -> ExperimentConfig:
        with open(path) as fh:
            return cls.from_json(json.load(fh), Path(path).parent)


@dataclass
class ResultRow:
    method: str
    epsilon: float
    trial: int
    metric: str
    value: float
    wall_time: float = 0.0
    ridge: float = 0.0
    rho_spent: float | None = None


def derive_seed(seed: int, *keys) -> np.random.SeedSequence:
    """Seed stream keyed by stable hashes, so adding a method leaves other draws alone."""
    ints = [zlib.crc32(str(k).encode()) for k in keys]
    return np.random.SeedSequence([int(seed), *ints])


def fit_method(method: str, train: DiscreteDataset, spec: EncodingSpec, budget: PrivacyBudget, rng, intercept: bool = True, aim_config: AimLiteConfig | None = None):
    """Returns ``(model, rho_spent)``."""
    if method in DDSSP_METHODS:
        out = release(DDSSP_METHODS[method], train, budget, rng, aim_config)
        # regression sees the released tables only
        return fit_from_marginals(out, spec, intercept), out.ledger.rho_spent
    enc = encode(train, spec)
    if method == "adassp":
        params = AdaSSPParams(budget, enc.x_bound, enc.y_bound)
        return adassp(enc.X, enc.y, params, rng, intercept), None
    if method == "objpert":
        return objpert_logistic(enc.X, enc.y, budget, enc.x_bound, rng, intercept=intercept), None
    if method == "nonprivate":
        fit = nonprivate_logistic if spec.task == "logistic" else nonprivate_ols
        return fit(enc.X, enc.y, intercept), None
    raise ValueError(f"unknown method {method!r}")


def run_trial(dataset, spec, cfg: ExperimentConfig, method: str, eps_idx: int, trial: int) -> ResultRow:
    epsilon = cfg.epsilons[eps_idx]
    try:
        # every method and epsilon sees the same split within a trial
        split_seed = derive_seed(cfg.seed, "split", trial).generate_state(1)[0]
        train, test = split(dataset, cfg.test_size, cfg.train_cap, int(split_seed))
        rng = np.random.default_rng(derive_seed(cfg.seed, method, eps_idx, trial))
        budget = PrivacyBudget(epsilon, cfg.delta)
        t0 = time.perf_counter()
        aim_cfg = AimLiteConfig(**cfg.aim_lite) if cfg.aim_lite else None
        model, rho = fit_method(method, train, spec, budget, rng, cfg.intercept, aim_cfg)
        wall = time.perf_counter() - t0
        te = encode(test, spec)
        scores = predict(model, te.X)
        if spec.task == "logistic":
            name, value = "auc", auc(te.y, scores)
        else:
            name, value = "mse", mse(te.y, scores)
    except Exception as exc:
        raise TrialError(f"method={method} epsilon={epsilon} trial={trial}: {exc}") from exc
    return ResultRow(method, epsilon, trial, name, value, wall, float(model.diagnostics.get("ridge", 0.0)), rho)


def _run_job(args):
    return run_trial(*args)


def run_trials(dataset: DiscreteDataset, spec: EncodingSpec, cfg: ExperimentConfig) -> list[ResultRow]:
    if spec.task != cfg.task:
        raise ValueError(f"encoding task {spec.task!r} does not match config task {cfg.task!r}")
    jobs = [
        (dataset, spec, cfg, m, e, t)
        for m in cfg.methods
        for e in range(len(cfg.epsilons))
        for t in range(cfg.trials)
    ]
    if cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            rows = list(pool.map(_run_job, jobs))
    else:
        rows = [_run_job(j) for j in jobs]
    return sorted(rows, key=lambda r: (r.method, r.epsilon, r.trial))


def load_inputs(cfg: ExperimentConfig) -> tuple[DiscreteDataset, EncodingSpec]:
    if not (cfg.data and cfg.domain):
        raise ValueError("config needs data and domain paths")
    domain = Domain.load(cfg.domain)
    data = load_csv(cfg.data, domain, strict=cfg.strict)
    if cfg.encoding:
        with open(cfg.encoding) as fh:
            obj = json.load(fh)
        obj.setdefault("task", cfg.task)
        spec = EncodingSpec.from_json(obj, domain)
    elif cfg.target:
        spec = default_spec(domain, cfg.target, cfg.task)
    else:
        raise ValueError("config needs an encoding file or a target attribute")
    return data, spec


def run_experiment(config: ExperimentConfig) -> list[ResultRow]:
    data, spec = load_inputs(config)
    log.info("loaded %d records over %d attributes", data.n, len(data.domain))
    return run_trials(data, spec, config)


def aggregate(rows: list[ResultRow]) -> list[dict]:
    """Per (method, epsilon): mean, median and standard error (sample std / sqrt(trials))."""
    groups: dict[tuple, list[float]] = {}
    for r in rows:
        groups.setdefault((r.method, r.epsilon, r.metric), []).append(r.value)
    out = []
    for (method, eps, metric), vals in sorted(groups.items()):
        v = np.asarray(vals)
        se = float(v.std(ddof=1) / math.sqrt(len(v))) if len(v) > 1 else 0.0
        out.append(
            {"method": method, "epsilon": eps, "metric": metric, "mean": float(v.mean()),
             "median": float(np.median(v)), "stderr": se, "n_trials": len(v)}
        )
    return out


CSV_FIELDS = ["row_type", "method", "epsilon", "trial", "metric", "value", "wall_time", "ridge", "rho_spent",
              "median", "stderr", "n_trials"]


def _cell(v):
    if v is None:
        return ""
    return repr(v) if isinstance(v, float) else v


def emit(rows: list[ResultRow], fmt: str, path: str | Path) -> None:
    """Write trial rows plus per-(method, epsilon) aggregates as CSV or JSON."""
    rows = sorted(rows, key=lambda r: (r.method, r.epsilon, r.trial))
    aggs = aggregate(rows)
    if fmt == "json":
        with open(path, "w") as fh:
            json.dump({"rows": [asdict(r) for r in rows], "aggregates": aggs}, fh, indent=2)
        return
    if fmt != "csv":
        raise ValueError(f"unknown format {fmt!r}")
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_FIELDS, restval="")
        w.writeheader()
        for r in rows:
            w.writerow({"row_type": "trial", **{k: _cell(v) for k, v in asdict(r).items()}})
        for a in aggs:
            w.writerow({"row_type": "aggregate", "method": a["method"], "epsilon": repr(a["epsilon"]),
                        "metric": a["metric"], "value": repr(a["mean"]), "median": repr(a["median"]),
                        "stderr": repr(a["stderr"]), "n_trials": a["n_trials"]})


def load_results(path: str | Path) -> tuple[list[ResultRow], list[dict]]:
    path = Path(path)
    if path.suffix == ".json":
        with open(path) as fh:
            obj = json.load(fh)
        return [ResultRow(**r) for r in obj["rows"]], obj["aggregates"]
    rows, aggs = [], []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            if rec["row_type"] == "trial":
                rows.append(ResultRow(rec["method"], float(rec["epsilon"]), int(rec["trial"]), rec["metric"],
                                      float(rec["value"]), float(rec["wall_time"]), float(rec["ridge"]),
                                      float(rec["rho_spent"]) if rec["rho_spent"] else None))
            else:
                aggs.append({"method": rec["method"], "epsilon": float(rec["epsilon"]), "metric": rec["metric"],
                             "mean": float(rec["value"]), "median": float(rec["median"]),
                             "stderr": float(rec["stderr"]), "n_trials": int(rec["n_trials"])})
    return rows, aggs
