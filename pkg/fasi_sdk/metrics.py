"""
Evaluation of selective classifications: false selection proportions per class and
group, indecision rate, power, the group null-proportion ratio gamma, and the
aggregation of replication reports.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple
import logging
import math

import numpy as np

from .constants import ALL_GROUPS, DEFAULT_QUANTILES, INDECISION
from .core.errors import MissingTruthError, ValidationError
from .core.records import ClassSet, ScoreFrame

logger = logging.getLogger(__name__)

# (class, group); either side may be ALL_GROUPS
CellKey = Tuple[str, str]
# (metric, class, group)
MetricKey = Tuple[str, str, str]


def _as_objects(values: Iterable) -> np.ndarray:
    values = list(values)
    arr = np.empty(len(values), dtype=object)
    arr[:] = values
    return arr


def _selection_counts(
    decisions: Sequence[str],
    truths: Sequence[Optional[str]],
    cls: Optional[str] = None,
    group: Optional[str] = None,
    groups: Optional[Sequence[str]] = None,
    ids: Optional[Sequence[str]] = None,
) -> Tuple[int, int]:
    decisions = _as_objects(decisions)
    truths = _as_objects(truths)
    selected = decisions != INDECISION
    if cls is not None and cls != ALL_GROUPS:
        selected &= decisions == str(cls)
    if group is not None and group != ALL_GROUPS:
        if groups is None:
            raise ValidationError("group restriction needs the group of every record")
        selected &= _as_objects(groups) == str(group)

    unknown = selected & np.array([y is None for y in truths], dtype=bool)
    if unknown.any():
        labels = ids if ids is not None else [str(i) for i in range(len(decisions))]
        raise MissingTruthError(np.asarray(labels, dtype=object)[unknown])

    n_selected = int(np.count_nonzero(selected))
    n_false = int(np.count_nonzero(selected & (truths != decisions)))
    return n_selected, n_false


def fsp(
    decisions: Sequence[str],
    truths: Sequence[Optional[str]],
    cls: Optional[str] = None,
    group: Optional[str] = None,
    groups: Optional[Sequence[str]] = None,
    ids: Optional[Sequence[str]] = None,
) -> float:
    """Share of wrong selections among selections, optionally restricted to a class and/or group. 0 when nothing is selected."""
    n_selected, n_false = _selection_counts(decisions, truths, cls, group, groups, ids)
    return n_false / n_selected if n_selected else 0.0


def fsp_star(
    decisions: Sequence[str],
    truths: Sequence[Optional[str]],
    cls: Optional[str] = None,
    group: Optional[str] = None,
    groups: Optional[Sequence[str]] = None,
    ids: Optional[Sequence[str]] = None,
) -> float:
    """Like fsp with a +1 in the denominator."""
    n_selected, n_false = _selection_counts(decisions, truths, cls, group, groups, ids)
    return n_false / (n_selected + 1)


def epi(decisions: Sequence[str]) -> float:
    decisions = _as_objects(decisions)
    if len(decisions) == 0:
        raise ValidationError("no decisions to evaluate")
    return int(np.count_nonzero(decisions == INDECISION)) / len(decisions)


def power_per_class(decisions: Sequence[str], truths: Sequence[Optional[str]], cls: str) -> float:
    """#{decided c and truly c} / #{truly c}; 0 when no record is truly c."""
    decisions = _as_objects(decisions)
    truths = _as_objects(truths)
    in_class = truths == str(cls)
    n_class = int(np.count_nonzero(in_class))
    if n_class == 0:
        return 0.0
    return int(np.count_nonzero(in_class & (decisions == str(cls)))) / n_class


def gamma_estimate(cal: ScoreFrame, test: ScoreFrame, cls: str, group: str) -> float:
    """
    Null proportion of class cls among group-a test records divided by the same
    proportion in calibration. NaN when either is undefined or the calibration side is 0.
    """
    cal_in = cal.group_mask(group)
    test_in = test.group_mask(group)
    if not cal_in.any() or not test_in.any():
        return math.nan
    cal_prop = float(np.mean(cal.null_mask(cls)[cal_in]))
    test_prop = float(np.mean(test.null_mask(cls)[test_in]))
    if cal_prop == 0.0:
        return math.nan
    return test_prop / cal_prop


@dataclass(frozen=True)
class SummaryStats:
    """Replication summary of one metric: mean, sample sd and nearest-rank quantiles."""

    mean: float
    sd: float
    quantiles: Dict[float, float]
    n: int

    def to_dict(self) -> Dict[str, Any]:
        return {
            "mean": self.mean,
            "sd": self.sd,
            "n": self.n,
            "quantiles": {repr(float(k)): v for k, v in self.quantiles.items()},
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SummaryStats":
        return cls(
            mean=float(data["mean"]),
            sd=float(data["sd"]),
            n=int(data["n"]),
            quantiles={float(k): float(v) for k, v in data.get("quantiles", {}).items()},
        )


def summarize(values: Sequence[float], levels: Sequence[float] = DEFAULT_QUANTILES) -> SummaryStats:
    """NaN entries are dropped. Sums are exact so the result ignores replication order."""
    arr = np.asarray(values, dtype=float)
    arr = arr[~np.isnan(arr)]
    n = len(arr)
    if n == 0:
        return SummaryStats(math.nan, math.nan, {float(q): math.nan for q in levels}, 0)
    mean = math.fsum(arr) / n
    sd = math.sqrt(math.fsum((arr - mean) ** 2) / (n - 1)) if n > 1 else 0.0
    quantiles = {float(q): float(np.quantile(arr, q, method="inverted_cdf")) for q in levels}
    return SummaryStats(mean=mean, sd=sd, quantiles=quantiles, n=n)


@dataclass
class MetricsReport:
    """
    Cells are keyed by (class, group) where either side may be ALL. For a single
    replication the values are observed rates and counts; after ``aggregate`` they
    are replication means and ``stats`` carries the full summaries.
    """

    classes: Tuple[str, ...]
    groups: Tuple[str, ...]
    m: float
    epi: float
    fsp: Dict[CellKey, float] = field(default_factory=dict)
    fsp_star: Dict[CellKey, float] = field(default_factory=dict)
    n_selected: Dict[CellKey, float] = field(default_factory=dict)
    n_false: Dict[CellKey, float] = field(default_factory=dict)
    power: Dict[str, float] = field(default_factory=dict)
    gamma: Dict[CellKey, float] = field(default_factory=dict)
    n_overlap: float = 0
    replications: int = 1
    stats: Dict[MetricKey, SummaryStats] = field(default_factory=dict)

    def flatten(self) -> Dict[MetricKey, float]:
        out: Dict[MetricKey, float] = {
            ("epi", ALL_GROUPS, ALL_GROUPS): self.epi,
            ("n_overlap", ALL_GROUPS, ALL_GROUPS): float(self.n_overlap),
        }
        for name in ("fsp", "fsp_star", "n_selected", "n_false", "gamma"):
            for (c, a), v in getattr(self, name).items():
                out[(name, c, a)] = float(v)
        for c, v in self.power.items():
            out[("power", c, ALL_GROUPS)] = v
        return out

    def to_dict(self) -> Dict[str, Any]:
        cells = [
            {
                "class": c,
                "group": a,
                "fsp": self.fsp[(c, a)],
                "fsp_star": self.fsp_star[(c, a)],
                "n_selected": self.n_selected[(c, a)],
                "n_false": self.n_false[(c, a)],
            }
            for (c, a) in self.fsp
        ]
        return {
            "classes": list(self.classes),
            "groups": list(self.groups),
            "m": self.m,
            "epi": self.epi,
            "n_overlap": self.n_overlap,
            "replications": self.replications,
            "cells": cells,
            "power": dict(self.power),
            "gamma": [{"class": c, "group": a, "value": v} for (c, a), v in self.gamma.items()],
            "stats": [
                {"metric": k[0], "class": k[1], "group": k[2], **s.to_dict()} for k, s in self.stats.items()
            ],
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "MetricsReport":
        report = cls(
            classes=tuple(data["classes"]),
            groups=tuple(data["groups"]),
            m=data["m"],
            epi=float(data["epi"]),
            n_overlap=data.get("n_overlap", 0),
            replications=int(data.get("replications", 1)),
            power={str(k): float(v) for k, v in data.get("power", {}).items()},
        )
        for cell in data.get("cells", []):
            key = (str(cell["class"]), str(cell["group"]))
            report.fsp[key] = float(cell["fsp"])
            report.fsp_star[key] = float(cell["fsp_star"])
            report.n_selected[key] = cell["n_selected"]
            report.n_false[key] = cell["n_false"]
        for g in data.get("gamma", []):
            value = g["value"]
            report.gamma[(str(g["class"]), str(g["group"]))] = math.nan if value is None else float(value)
        for s in data.get("stats", []):
            report.stats[(s["metric"], s["class"], s["group"])] = SummaryStats.from_dict(s)
        return report


def evaluate(
    decisions: Sequence[str],
    truths: Sequence[Optional[str]],
    groups: Sequence[str],
    classes: Sequence[str],
    group_set: Optional[Sequence[str]] = None,
    ids: Optional[Sequence[str]] = None,
    cal: Optional[ScoreFrame] = None,
    test: Optional[ScoreFrame] = None,
    n_overlap: int = 0,
) -> MetricsReport:
    """Full report for one set of decisions. gamma is filled only when both frames are given."""
    classes = ClassSet(tuple(str(c) for c in classes)).labels
    group_list = tuple(sorted(set(map(str, groups)))) if group_set is None else tuple(map(str, group_set))
    report = MetricsReport(
        classes=classes,
        groups=group_list,
        m=len(decisions),
        epi=epi(decisions) if len(decisions) else 1.0,
        n_overlap=n_overlap,
    )
    for c in (ALL_GROUPS,) + classes:
        for a in (ALL_GROUPS,) + group_list:
            n_sel, n_false = _selection_counts(decisions, truths, c, a, groups, ids)
            key = (c, a)
            report.n_selected[key] = n_sel
            report.n_false[key] = n_false
            report.fsp[key] = n_false / n_sel if n_sel else 0.0
            report.fsp_star[key] = n_false / (n_sel + 1)
    for c in classes:
        report.power[c] = power_per_class(decisions, truths, c)
        if cal is not None and test is not None:
            for a in group_list:
                report.gamma[(c, a)] = gamma_estimate(cal, test, c, a)
    return report


def aggregate(reports: Sequence[MetricsReport], levels: Sequence[float] = DEFAULT_QUANTILES) -> MetricsReport:
    """Fold replication reports into one report of means, with per-metric summaries in ``stats``."""
    if not reports:
        raise ValidationError("cannot aggregate an empty list of replication reports")
    first = reports[0]
    series: Dict[MetricKey, List[float]] = {}
    for report in reports:
        for key, value in report.flatten().items():
            series.setdefault(key, []).append(value)
    m_stats = summarize([r.m for r in reports], levels)
    stats = {key: summarize(values, levels) for key, values in series.items()}

    out = MetricsReport(
        classes=first.classes,
        groups=first.groups,
        m=m_stats.mean,
        epi=stats[("epi", ALL_GROUPS, ALL_GROUPS)].mean,
        n_overlap=stats[("n_overlap", ALL_GROUPS, ALL_GROUPS)].mean,
        replications=len(reports),
        stats=stats,
    )
    for (metric, c, a), s in stats.items():
        if metric in ("fsp", "fsp_star", "n_selected", "n_false", "gamma"):
            getattr(out, metric)[(c, a)] = s.mean
        elif metric == "power":
            out.power[c] = s.mean
    logger.debug("aggregated %d replication reports", len(reports))
    return out
