"""Monte-Carlo sensitivity study: contaminated beta-regression data, refit, bias/MSE."""

from __future__ import annotations

import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .em import em_fit
from .exceptions import DomainError
from .mixing import FAMILY_LABELS, as_kind
from .regression import Dataset, FitOptions, fit_mle, link_inverse

logger = logging.getLogger(__name__)

__all__ = ["ScenarioConfig", "SimReport", "generate_scenario", "run_sensitivity", "PARAMETERS"]

PARAMETERS = ("beta0", "beta1", "phi")
ALL_FAMILIES = ("beta", "tpb", "gb", "lnb", "igb")


@dataclass(frozen=True)
class ScenarioConfig:
    replicates: int = 500
    n: int = 500
    beta0: float = 0.5
    beta1: float = 1.0
    phi_true: float = 0.25
    contamination_rate: float = 0.01
    families_to_fit: tuple = ALL_FAMILIES
    seed: int = 0
    tpb_method: str = "mle"
    nodes: int = 64
    workers: int = 1

    def __post_init__(self):
        if not (0.0 <= self.contamination_rate < 1.0):
            raise DomainError(f"contamination rate must lie in [0, 1), got {self.contamination_rate!r}")
        if self.replicates < 1 or self.n < 3:
            raise DomainError("need at least one replicate and n >= 3")
        if not self.phi_true > 0.0:
            raise DomainError("phi_true must be positive")
        if self.tpb_method not in ("em", "mle"):
            raise DomainError("tpb_method must be 'em' or 'mle'")
        fams = tuple(FAMILY_LABELS[as_kind(f)] for f in self.families_to_fit)
        if len(set(fams)) != len(fams):
            raise DomainError("families_to_fit contains duplicates")
        object.__setattr__(self, "families_to_fit", fams)

    @property
    def n_replaced(self) -> int:
        # round half away from zero
        return int(math.floor(self.contamination_rate * self.n + 0.5))

    @property
    def truth(self) -> dict:
        return {"beta0": self.beta0, "beta1": self.beta1, "phi": self.phi_true}


def _replicate_rng(seed: int, replicate_index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(replicate_index)]))


def generate_scenario(config: ScenarioConfig, replicate_index: int):
    """Simulate one contaminated dataset.

    Returns ``(dataset, mask)`` where ``mask`` holds the sorted indices whose
    responses were replaced by uniform(0, 1) draws. Output depends only on
    ``(config.seed, replicate_index)``.
    """
    rng = _replicate_rng(config.seed, replicate_index)
    n = config.n
    x = rng.standard_normal(n)
    mu = link_inverse(config.beta0 + config.beta1 * x)
    phi = config.phi_true
    y = rng.beta(mu / phi, (1.0 - mu) / phi)
    mask = np.sort(rng.choice(n, size=config.n_replaced, replace=False))
    if mask.size:
        y[mask] = rng.uniform(0.0, 1.0, size=mask.size)
    # keep draws strictly inside (0, 1)
    y = np.clip(y, np.finfo(float).tiny, 1.0 - np.finfo(float).epsneg)
    return Dataset.from_arrays(y, x, ["x"]), mask


def _fit_family(family: str, data: Dataset, config: ScenarioConfig):
    if family == "tpb" and config.tpb_method == "em":
        fit, _ = em_fit(data, compute_se=False, nodes=config.nodes)
    else:
        fit = fit_mle(data, family, FitOptions(nodes=config.nodes, compute_se=False))
    return fit


def _run_replicate(args):
    config, r = args
    data, _ = generate_scenario(config, r)
    out = {}
    for fam in config.families_to_fit:
        try:
            fit = _fit_family(fam, data, config)
        except Exception as exc:  # a failed replicate is counted, not fatal
            logger.warning("replicate %d, family %s failed: %s", r, fam, exc)
            out[fam] = None
            continue
        est = fit.natural_estimates
        out[fam] = {p: est[p] for p in PARAMETERS} if fit.converged else None
    return out


@dataclass
class SimReport:
    config: ScenarioConfig
    bias: dict = field(default_factory=dict)
    mse: dict = field(default_factory=dict)
    n_converged: dict = field(default_factory=dict)
    n_failed: dict = field(default_factory=dict)
    failed_families: list = field(default_factory=list)
    estimates: dict = field(default_factory=dict, repr=False)
    elapsed: float = 0.0

    def cell(self, family: str, parameter: str):
        return self.bias[family][parameter], self.mse[family][parameter]

    def to_dict(self, include_estimates=False) -> dict:
        out = {
            "config": asdict(self.config),
            "bias": self.bias,
            "mse": self.mse,
            "n_converged": self.n_converged,
            "n_failed": self.n_failed,
            "failed_families": self.failed_families,
            "elapsed": self.elapsed,
        }
        out["config"]["families_to_fit"] = list(self.config.families_to_fit)
        if include_estimates:
            out["estimates"] = {f: {p: list(v) for p, v in d.items()} for f, d in self.estimates.items()}
        return out


def run_sensitivity(config: ScenarioConfig, progress=None) -> SimReport:
    """Run every replicate, fit each family and aggregate bias and MSE.

    Non-converged fits are dropped from the aggregates and counted in
    ``n_failed``. ``config.workers > 1`` spreads replicates over processes;
    results are reduced in replicate order, so the report is identical.
    """
    t0 = time.perf_counter()
    jobs = [(config, r) for r in range(config.replicates)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_run_replicate, jobs, chunksize=1))
    else:
        results = []
        for job in jobs:
            results.append(_run_replicate(job))
            if progress is not None:
                progress(job[1])

    report = SimReport(config=config)
    truth = config.truth
    for fam in config.families_to_fit:
        rows = [res[fam] for res in results if res[fam] is not None]
        report.n_converged[fam] = len(rows)
        report.n_failed[fam] = len(results) - len(rows)
        if not rows:
            report.failed_families.append(fam)
            report.bias[fam] = {p: math.nan for p in PARAMETERS}
            report.mse[fam] = {p: math.nan for p in PARAMETERS}
            report.estimates[fam] = {p: np.empty(0) for p in PARAMETERS}
            continue
        report.bias[fam], report.mse[fam], report.estimates[fam] = {}, {}, {}
        for p in PARAMETERS:
            est = np.array([row[p] for row in rows])
            err = est - truth[p]
            report.estimates[fam][p] = est
            report.bias[fam][p] = math.fsum(err) / err.size
            report.mse[fam][p] = math.fsum(err * err) / err.size
    report.elapsed = time.perf_counter() - t0
    return report
