"""
Replication harness for the two-group Gaussian studies: data generation, the
FASI / FCC / RCC / oracle methods, sweeps over pi_{2|F} and the R vs R+ stability study.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union
import logging

import numpy as np
import pandas as pd

from .classifier import AbstractScorer, LogisticScorer, OracleScorer
from .config import ScenarioConfig
from .constants import ALL_GROUPS, DEFAULT_SEED, SCENARIO_CLASSES, SCENARIO_GROUPS
from .core.records import ClassSet, ScoreFrame, split_indices
from .metrics import MetricsReport, aggregate, evaluate
from .oracle import (
    MixtureSpec,
    QCurve,
    analytic_q_curve,
    default_grid,
    oracle_rule,
    oracle_rvalues,
    posterior_score,
    q_curve,
    scenario_one,
    scenario_two,
    stability_mixture,
    supports_analytic,
)
from .rvalue import FrameLike, RValueTable, RValueVariant, as_frame, compute_rvalues, q_hat, run_fasi, select

logger = logging.getLogger(__name__)

CurveCache = Dict[Tuple[str, str], QCurve]


@dataclass(frozen=True, eq=False)
class SimulatedData:
    ids: np.ndarray
    x: np.ndarray
    groups: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def take(self, idx: np.ndarray) -> "SimulatedData":
        return SimulatedData(self.ids[idx], self.x[idx], self.groups[idx], self.labels[idx])

    def scored(self, scorer: AbstractScorer) -> ScoreFrame:
        return scorer.score_frame(self.ids, self.x, self.groups, self.labels)


@dataclass(frozen=True, eq=False)
class Replicate:
    spec: MixtureSpec
    train: SimulatedData
    cal: SimulatedData
    test: SimulatedData
    index: int


def scenario_mixture(scenario: int, pi2f: float) -> MixtureSpec:
    return scenario_one(pi2f) if scenario == 1 else scenario_two(pi2f)


def replication_seed(seed: int, index: int, pi2f: float) -> np.random.SeedSequence:
    return np.random.SeedSequence([int(seed), int(index), int(round(pi2f * 1_000_000))])


def _draw(spec: MixtureSpec, n: int, rng: np.random.Generator, prefix: str) -> SimulatedData:
    x, groups, labels = spec.draw(n, rng)
    ids = np.empty(n, dtype=object)
    ids[:] = [f"{prefix}{i}" for i in range(n)]
    return SimulatedData(ids, x, groups, labels)


def generate(config: ScenarioConfig, index: int, pi2f: Optional[float] = None) -> Replicate:
    """
    Draw the labeled data set, split it into train / calibration, and draw a fresh
    test set. Reproducible from (seed, index, pi2f).
    """
    pi2f = config.pi2f_grid[0] if pi2f is None else pi2f
    spec = scenario_mixture(config.scenario, pi2f)
    rng = np.random.default_rng(replication_seed(config.effective_seed, index, pi2f))
    data = _draw(spec, config.n_data, rng, "d")
    train_idx, cal_idx, _ = split_indices(data.ids, config.n_train, config.n_cal, rng)
    test = _draw(spec, config.n_test, rng, "t")
    return Replicate(spec=spec, train=data.take(train_idx), cal=data.take(cal_idx), test=test, index=index)


def fcc_rvalues(
    cal: FrameLike,
    test: FrameLike,
    c: str,
    variant: Union[str, RValueVariant] = RValueVariant.PLUS,
) -> RValueTable:
    """R-values with every group-restricted count replaced by its pooled count; groups kept for reporting."""
    cal, test = as_frame(cal), as_frame(test)
    variant = RValueVariant.parse(variant)
    pooled_variant = RValueVariant.from_flags(True, variant.is_conservative)
    table = compute_rvalues(cal.pooled(), test.pooled(), c, pooled_variant)
    return replace(table, groups=test.groups)


def oracle_curves(spec: MixtureSpec, grid: np.ndarray, seed: int = DEFAULT_SEED) -> CurveCache:
    curves: CurveCache = {}
    for a in spec.groups:
        for c in spec.classes:
            if supports_analytic(spec, a):
                curves[(a, c)] = analytic_q_curve(spec, a, c, grid)
            else:
                curves[(a, c)] = q_curve(spec, a, c, grid, seed=seed)
    return curves


def _scorers(config: ScenarioConfig, spec: MixtureSpec, rep: Replicate) -> Tuple[AbstractScorer, AbstractScorer]:
    if config.scores == "oracle":
        return OracleScorer(spec), OracleScorer(spec, reduced=True)
    full = LogisticScorer(use_group=True).fit(rep.train.x, rep.train.groups, rep.train.labels, SCENARIO_CLASSES)
    reduced = LogisticScorer(use_group=False).fit(rep.train.x, rep.train.groups, rep.train.labels, SCENARIO_CLASSES)
    return full, reduced


def run_replication(
    config: ScenarioConfig,
    index: int,
    pi2f: Optional[float] = None,
    curves: Optional[CurveCache] = None,
) -> Dict[str, MetricsReport]:
    """One replication: split, score, R-values, selection and metrics for every configured method."""
    rep = generate(config, index, pi2f)
    spec = rep.spec
    classes = ClassSet(SCENARIO_CLASSES)
    alphas = dict(config.alphas)
    full, reduced = _scorers(config, spec, rep)

    cal = rep.cal.scored(full)
    test = rep.test.scored(full)
    truths = rep.test.labels
    reports: Dict[str, MetricsReport] = {}

    def report(decisions: np.ndarray, n_overlap: int) -> MetricsReport:
        return evaluate(
            decisions, truths, rep.test.groups, classes, SCENARIO_GROUPS,
            ids=rep.test.ids, cal=cal, test=test, n_overlap=n_overlap,
        )

    for method in config.methods:
        if method == "fasi":
            outcome, _ = run_fasi(cal, test, alphas, config.variant, classes)
        elif method == "fcc":
            outcome = select([fcc_rvalues(cal, test, c, config.variant) for c in classes], alphas, classes)
        elif method == "rcc":
            rcal, rtest = rep.cal.scored(reduced), rep.test.scored(reduced)
            outcome = select([fcc_rvalues(rcal, rtest, c, config.variant) for c in classes], alphas, classes)
        else:
            if curves is None:
                curves = oracle_curves(spec, default_grid(config.grid_step), config.effective_seed)
            r = [oracle_rvalues(spec, rep.test.x, rep.test.groups, c, curves=curves) for c in classes]
            decided = oracle_rule(r[0], r[1], alphas[classes.labels[0]], alphas[classes.labels[1]], classes.labels)
            reports[method] = report(decided.decisions, decided.n_overlap)
            continue
        reports[method] = report(outcome.decisions, outcome.n_overlap)
    return reports


def _quantile_column(q: float) -> str:
    return f"q{int(round(q * 100)):02d}"


@dataclass
class SweepResult:
    config: ScenarioConfig
    reports: Dict[Tuple[float, str], MetricsReport] = field(default_factory=dict)

    def rows(self) -> List[Dict[str, object]]:
        out = []
        for (pi2f, method), report in self.reports.items():
            for (metric, c, a), stats in sorted(report.stats.items()):
                row: Dict[str, object] = {
                    "scenario": self.config.scenario,
                    "method": method,
                    "pi2f": pi2f,
                    "class": c,
                    "group": a,
                    "metric": metric,
                    "mean": stats.mean,
                    "sd": stats.sd,
                }
                for q in self.config.quantiles:
                    row[_quantile_column(q)] = stats.quantiles[float(q)]
                out.append(row)
        return out

    def to_frame(self) -> pd.DataFrame:
        columns = ["scenario", "method", "pi2f", "class", "group", "metric", "mean", "sd"]
        columns += [_quantile_column(q) for q in self.config.quantiles]
        return pd.DataFrame(self.rows(), columns=columns)

    def value(self, pi2f: float, method: str, metric: str, c: str = ALL_GROUPS, a: str = ALL_GROUPS) -> float:
        return self.reports[(pi2f, method)].stats[(metric, c, a)].mean


def sweep(config: ScenarioConfig) -> SweepResult:
    """Aggregate every method over config.reps replications at each pi_{2|F} grid point."""
    config.validate()
    result = SweepResult(config=config)
    grid = default_grid(config.grid_step)
    for pi2f in config.pi2f_grid:
        curves = None
        if "oracle" in config.methods:
            curves = oracle_curves(scenario_mixture(config.scenario, pi2f), grid, config.effective_seed)
        indices = range(config.reps)
        if config.threads > 1:
            with ThreadPoolExecutor(max_workers=config.threads) as pool:
                per_rep = list(pool.map(lambda i: run_replication(config, i, pi2f, curves), indices))
        else:
            per_rep = [run_replication(config, i, pi2f, curves) for i in indices]
        for method in config.methods:
            result.reports[(pi2f, method)] = aggregate([r[method] for r in per_rep], config.quantiles)
        logger.info("scenario %d: pi2f=%.3g done (%d replications)", config.scenario, pi2f, config.reps)
    return result


@dataclass(frozen=True)
class StabilityRow:
    test_size: int
    draws: int
    mean_standard: float
    var_standard: float
    mean_plus: float
    var_plus: float


def rvalue_stability(
    test_sizes: Sequence[int] = (5, 50, 200),
    n_cal: int = 1000,
    base_score: float = 0.9,
    draws: int = 1000,
    seed: int = DEFAULT_SEED,
    spec: Optional[MixtureSpec] = None,
    group: str = "F",
    cls: str = "2",
) -> List[StabilityRow]:
    """
    Spread of the standard and plus R-values of one fixed test point (score base_score,
    group `group`) over random calibration sets and the m - 1 other test points.
    """
    spec = spec or stability_mixture()
    rows = []
    for m in test_sizes:
        standard = np.empty(draws)
        plus = np.empty(draws)
        for k in range(draws):
            rng = np.random.default_rng([int(seed), int(m), k])
            x, groups, labels = spec.draw(n_cal, rng)
            cal = ScoreFrame.from_arrays(
                [f"c{i}" for i in range(n_cal)], groups, labels, {cls: posterior_score(x, groups, cls, spec)}
            )
            tx, tgroups, tlabels = spec.draw(m - 1, rng)
            test = ScoreFrame.from_arrays(
                [f"t{i}" for i in range(m)],
                list(tgroups) + [group],
                list(tlabels) + [None],
                {cls: np.append(posterior_score(tx, tgroups, cls, spec) if m > 1 else [], base_score)},
            )
            standard[k] = min(q_hat(cal, test, group, cls, base_score, RValueVariant.STANDARD)[0], 1.0)
            plus[k] = min(q_hat(cal, test, group, cls, base_score, RValueVariant.PLUS)[0], 1.0)
        rows.append(
            StabilityRow(
                test_size=int(m),
                draws=draws,
                mean_standard=float(np.mean(standard)),
                var_standard=float(np.var(standard, ddof=1)) if draws > 1 else 0.0,
                mean_plus=float(np.mean(plus)),
                var_plus=float(np.var(plus, ddof=1)) if draws > 1 else 0.0,
            )
        )
        logger.info("stability: m=%d var(R)=%.4g var(R+)=%.4g", m, rows[-1].var_standard, rows[-1].var_plus)
    return rows
