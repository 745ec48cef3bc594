"""Monte Carlo engine for post-selection coverage studies.

Each replication draws a fresh dataset, fits the oracle model (the true
subset), runs criterion-based selection, and builds the mean-response
confidence interval at an independently drawn query point under both models.
Replications are indexed substreams of one master seed, so results are
bit-identical for any worker count.
"""

from __future__ import annotations

import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Union

import numpy as np

from .distributions import RNG_ALGORITHM, Ar1Spec, RngStream, sample_ar1_rows
from .errors import DegenerateReplication, InvalidAlpha, PostselectError
from .inference import QueryPoint, covers, mean_response_ci, true_mean_response
from .linalg import Dataset, Subset, centered_dataset, ols_fit
from .selection import Criterion, select, theorem_report


@dataclass(frozen=True)
class ExperimentConfig:
    """Configuration of one coverage experiment.

    Defaults reproduce the reference study: n=50 observations on p=10
    AR(1)-correlated predictors with one-step correlation 0.5, true
    coefficients (1, 2, 3, 0, ..., 0), unit noise variance, AIC selection,
    95% intervals, 1000 replications.

    ``beta_star`` must be nonzero exactly on ``s_star``; leave ``s_star``
    unset to derive it from the support of ``beta_star``.
    """

    n: int = 50
    p: int = 10
    sigma: float = 1.0
    beta_star: tuple[float, ...] = (1.0, 2.0, 3.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0)
    s_star: Optional[Subset] = None
    rho: float = 0.5
    reps: int = 1000
    alpha: float = 0.05
    criterion: Criterion = field(default_factory=Criterion.aic)
    seed: int = 0
    workers: Union[int, str] = "auto"

    def __post_init__(self) -> None:
        if self.p < 1 or self.n <= self.p:
            raise ValueError(f"need 1 <= p < n, got n={self.n}, p={self.p}")
        if self.sigma < 0:
            raise ValueError(f"sigma must be nonnegative, got {self.sigma}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"need |rho| < 1, got rho={self.rho}")
        if self.reps < 1:
            raise ValueError(f"reps must be at least 1, got {self.reps}")
        if not 0.0 < self.alpha < 1.0:
            raise InvalidAlpha(f"alpha must lie in (0, 1), got {self.alpha}")
        beta = tuple(float(b) for b in self.beta_star)
        if len(beta) != self.p:
            raise ValueError(
                f"beta_star has length {len(beta)} but p={self.p}"
            )
        object.__setattr__(self, "beta_star", beta)
        support = Subset(tuple(i + 1 for i, b in enumerate(beta) if b != 0.0))
        if support.size == 0:
            raise ValueError("beta_star must have at least one nonzero coefficient")
        if self.s_star is None:
            object.__setattr__(self, "s_star", support)
        elif self.s_star != support:
            raise ValueError(
                f"s_star {self.s_star} does not match the support {support} "
                f"of beta_star"
            )
        if self.workers != "auto" and (
            not isinstance(self.workers, int) or self.workers < 1
        ):
            raise ValueError(f"workers must be 'auto' or a positive int, got {self.workers!r}")
        RngStream(self.seed)  # validates the seed range

    def resolved_workers(self) -> int:
        if self.workers == "auto":
            return os.cpu_count() or 1
        return int(self.workers)


class GeneratedData(NamedTuple):
    data: Dataset
    raw_column_means: np.ndarray
    raw_y_mean: float
    query_x_raw: np.ndarray


def generate_dataset(cfg: ExperimentConfig, rng: RngStream) -> GeneratedData:
    """Draw one dataset and query point from the configured model.

    Stream consumption order is fixed: n design rows, then n noise values,
    then the query row.  The design and response are returned centered, with
    the removed raw means recorded for query-point handling.
    """
    spec = Ar1Spec(p=cfg.p, rho=cfg.rho)
    x_raw = sample_ar1_rows(rng, spec, cfg.n)
    beta = np.asarray(cfg.beta_star)
    y_raw = x_raw @ beta + cfg.sigma * rng.standard_normal(cfg.n)
    data, y_mean, col_means = centered_dataset(y_raw, x_raw)
    query_x_raw = sample_ar1_rows(rng, spec, 1)[0]
    return GeneratedData(data, col_means, y_mean, query_x_raw)


@dataclass(frozen=True)
class ReplicationRecord:
    """Per-replication outcomes feeding the scatter, histogram and rates."""

    rep_index: int
    s_hat: Subset
    sigma_hat_selected: float
    sigma_hat_oracle: float
    ratio: float
    contains_star: bool
    strict_overfit: bool
    exact: bool
    covered_selected: bool
    covered_oracle: bool
    ci_width_selected: float
    ci_width_oracle: float
    condition_holds: bool


def run_replication(cfg: ExperimentConfig, rep_index: int) -> ReplicationRecord:
    """Run one replication on the substream (cfg.seed, rep_index)."""
    try:
        return _run_replication(cfg, rep_index)
    except PostselectError as exc:
        raise type(exc)(f"replication {rep_index}: {exc}") from exc


def _run_replication(cfg: ExperimentConfig, rep_index: int) -> ReplicationRecord:
    if cfg.sigma == 0.0:
        raise DegenerateReplication(
            "sigma = 0 gives a noiseless model whose variance estimates are "
            "all zero; coverage summaries are undefined"
        )
    rng = RngStream(cfg.seed, substream=rep_index)
    gen = generate_dataset(cfg, rng)
    data = gen.data

    oracle_fit = ols_fit(data, cfg.s_star)
    result = select(data, cfg.criterion)
    if result.truncated_sse_count:
        raise DegenerateReplication(
            f"{result.truncated_sse_count} subsets hit the SSE floor; "
            "variance comparisons would be meaningless"
        )
    s_hat = result.chosen
    selected_fit = ols_fit(data, s_hat)

    query = QueryPoint(x=gen.query_x_raw - gen.raw_column_means, centered=True)
    truth = true_mean_response(query, np.asarray(cfg.beta_star))
    ci_oracle = mean_response_ci(data, oracle_fit, query, cfg.alpha)
    ci_selected = mean_response_ci(data, selected_fit, query, cfg.alpha)

    contains = cfg.s_star.issubset(s_hat)
    strict = cfg.s_star.is_strict_subset(s_hat)
    condition = False
    if strict:
        condition = theorem_report(data, cfg.s_star, s_hat, cfg.criterion).condition_holds

    return ReplicationRecord(
        rep_index=rep_index,
        s_hat=s_hat,
        sigma_hat_selected=selected_fit.sigma_hat,
        sigma_hat_oracle=oracle_fit.sigma_hat,
        ratio=oracle_fit.sigma_hat / selected_fit.sigma_hat,
        contains_star=contains,
        strict_overfit=strict,
        exact=s_hat == cfg.s_star,
        covered_selected=covers(ci_selected, truth),
        covered_oracle=covers(ci_oracle, truth),
        ci_width_selected=ci_selected.width,
        ci_width_oracle=ci_oracle.width,
        condition_holds=condition,
    )


@dataclass(frozen=True)
class ExperimentSummary:
    """Aggregates over one experiment's replications.

    ``mean_ratio_overfit`` averages ``sigma_hat_oracle / sigma_hat_selected``
    over the strict-overfit replications only, and is None when none overfit.
    ``standard_errors`` holds the Monte Carlo standard error
    ``sqrt(r (1 - r) / reps)`` for each reported rate.
    """

    reps: int
    coverage_selected: float
    coverage_oracle: float
    mean_ratio_overfit: Optional[float]
    containment_rate: float
    exact_rate: float
    strict_overfit_rate: float
    condition_rate: float
    standard_errors: dict[str, float]
    runtime_seconds: float
    rng_algorithm: str
    seed: int


_RATE_FIELDS = (
    "coverage_selected",
    "coverage_oracle",
    "containment_rate",
    "exact_rate",
    "strict_overfit_rate",
    "condition_rate",
)


def summarize(
    records: list[ReplicationRecord], runtime_seconds: float, seed: int
) -> ExperimentSummary:
    """Fold an ordered record list into an ExperimentSummary."""
    reps = len(records)
    rates = {
        "coverage_selected": sum(r.covered_selected for r in records) / reps,
        "coverage_oracle": sum(r.covered_oracle for r in records) / reps,
        "containment_rate": sum(r.contains_star for r in records) / reps,
        "exact_rate": sum(r.exact for r in records) / reps,
        "strict_overfit_rate": sum(r.strict_overfit for r in records) / reps,
        "condition_rate": sum(r.condition_holds for r in records) / reps,
    }
    overfit_ratios = [r.ratio for r in records if r.strict_overfit]
    mean_ratio = (
        sum(overfit_ratios) / len(overfit_ratios) if overfit_ratios else None
    )
    ses = {
        name: math.sqrt(rate * (1.0 - rate) / reps) for name, rate in rates.items()
    }
    return ExperimentSummary(
        reps=reps,
        mean_ratio_overfit=mean_ratio,
        standard_errors=ses,
        runtime_seconds=runtime_seconds,
        rng_algorithm=RNG_ALGORITHM,
        seed=seed,
        **rates,
    )


def _replication_block(
    cfg: ExperimentConfig, start: int, stop: int
) -> list[ReplicationRecord]:
    return [run_replication(cfg, i) for i in range(start, stop)]


def run_experiment(
    cfg: ExperimentConfig,
) -> tuple[ExperimentSummary, list[ReplicationRecord]]:
    """Run all replications, in parallel when configured, and summarize.

    Records are returned ordered by replication index and are identical for
    any worker count at a fixed seed.
    """
    t0 = time.perf_counter()
    workers = min(cfg.resolved_workers(), cfg.reps)
    if workers <= 1:
        records = _replication_block(cfg, 0, cfg.reps)
    else:
        block = max(1, -(-cfg.reps // (workers * 4)))
        bounds = [
            (start, min(start + block, cfg.reps))
            for start in range(0, cfg.reps, block)
        ]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            blocks = pool.map(
                _replication_block,
                (cfg for _ in bounds),
                (b[0] for b in bounds),
                (b[1] for b in bounds),
            )
            records = [rec for blk in blocks for rec in blk]
    runtime = time.perf_counter() - t0
    return summarize(records, runtime, cfg.seed), records
