"""
Fairness-adjusted R-values and the selection rule built on them.

For a target class c and a protected group a, the estimated false selection
proportion at threshold t compares the calibration "mirror" count of wrong
selections with the number of test selections, both restricted to group a:

    Q(t) = [(#{cal in a: S >= t, Y != c} + 1) / (n_a + 1)]
           / [#{test in a: S >= t} / m_a]                        (standard)

The plus variant replaces the denominator with the pooled test+calibration
frequency (#{test or cal in a: S >= t} + 1) / (m_a + n_a + 1). Conservative
variants multiply by (n_a + 1) / (n_a_null + 1). R-values evaluate Q at each
test score (capped at 1), then take a running minimum over lower scores.
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np

from .constants import DEFAULT_VARIANT, INDECISION
from .core.errors import InvariantViolation, ValidationError
from .core.records import ClassSet, ScoreFrame, ScoreRecord

logger = logging.getLogger(__name__)

FrameLike = Union[ScoreFrame, Iterable[ScoreRecord]]


class RValueVariant(Enum):
    STANDARD = "standard"
    PLUS = "plus"
    CONSERVATIVE_STANDARD = "conservative"
    CONSERVATIVE_PLUS = "conservative_plus"

    @property
    def is_plus(self) -> bool:
        return self in (RValueVariant.PLUS, RValueVariant.CONSERVATIVE_PLUS)

    @property
    def is_conservative(self) -> bool:
        return self in (RValueVariant.CONSERVATIVE_STANDARD, RValueVariant.CONSERVATIVE_PLUS)

    @classmethod
    def parse(cls, value: Union[str, "RValueVariant"]) -> "RValueVariant":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        for variant in cls:
            if key in (variant.value, variant.name.lower()):
                return variant
        raise ValidationError(f"unknown R-value variant '{value}'")

    @classmethod
    def from_flags(cls, plus: bool, conservative: bool) -> "RValueVariant":
        if conservative:
            return cls.CONSERVATIVE_PLUS if plus else cls.CONSERVATIVE_STANDARD
        return cls.PLUS if plus else cls.STANDARD


@dataclass(frozen=True, eq=False)
class RValueTable:
    """R-values of one class for every test record, aligned with the test frame."""

    cls: str
    variant: RValueVariant
    ids: np.ndarray
    groups: np.ndarray
    scores: np.ndarray
    raw_r: np.ndarray
    mono_r: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    def as_dict(self, column: str = "mono_r") -> Dict[str, float]:
        return {i: float(v) for i, v in zip(self.ids, getattr(self, column))}

    def selected(self, alpha: float) -> np.ndarray:
        return self.mono_r <= alpha


@dataclass(frozen=True, eq=False)
class SelectionOutcome:
    """Per test record: a class label or INDECISION, and the R-value that decided it."""

    ids: np.ndarray
    groups: np.ndarray
    decisions: np.ndarray
    winning_r: np.ndarray
    overlap: np.ndarray

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def decided(self) -> np.ndarray:
        return self.decisions != INDECISION

    @property
    def n_overlap(self) -> int:
        return int(np.count_nonzero(self.overlap))

    def as_dict(self) -> Dict[str, str]:
        return dict(zip(self.ids, self.decisions))


def as_frame(data: FrameLike) -> ScoreFrame:
    if isinstance(data, ScoreFrame):
        return data
    return ScoreFrame.from_records(list(data))


def _count_ge(sorted_values: np.ndarray, t: np.ndarray) -> np.ndarray:
    return len(sorted_values) - np.searchsorted(sorted_values, t, side="left")


def conservative_factor(cal: FrameLike, a: str, c: str) -> float:
    """(n_a + 1) / (n_a_null + 1) for calibration group a and class c. Always >= 1."""
    cal = as_frame(cal)
    in_group = cal.group_mask(a)
    n_a = int(np.count_nonzero(in_group))
    n_null = int(np.count_nonzero(cal.null_mask(c)[in_group])) if n_a else 0
    return (n_a + 1) / (n_null + 1)


def q_hat(
    cal: FrameLike,
    test: FrameLike,
    a: str,
    c: str,
    t: Union[float, Sequence[float], np.ndarray],
    variant: Union[str, RValueVariant] = RValueVariant.STANDARD,
) -> np.ndarray:
    """Uncapped group-wise estimated FSP process, evaluated at thresholds t."""
    cal, test = as_frame(cal), as_frame(test)
    variant = RValueVariant.parse(variant)
    t = np.atleast_1d(np.asarray(t, dtype=float))

    in_cal = cal.group_mask(a)
    n_a = int(np.count_nonzero(in_cal))
    cal_scores = cal.score(c)[in_cal]
    cal_null = cal.null_mask(c)[in_cal] if n_a else np.zeros(0, dtype=bool)
    null_sorted = np.sort(cal_scores[cal_null])
    test_sorted = np.sort(test.score(c)[test.group_mask(a)])
    m_a = len(test_sorted)

    num = (_count_ge(null_sorted, t) + 1) / (n_a + 1)
    test_ge = _count_ge(test_sorted, t)
    if variant.is_plus:
        den = (test_ge + _count_ge(np.sort(cal_scores), t) + 1) / (m_a + n_a + 1)
    else:
        if m_a == 0:
            return np.full(t.shape, np.inf)
        den = np.maximum(test_ge, 1) / m_a
    q = num / den
    if variant.is_conservative:
        q = q * ((n_a + 1) / (len(null_sorted) + 1))
    return q


def monotonize(
    scores: np.ndarray, raw: np.ndarray, groups: Optional[np.ndarray] = None
) -> np.ndarray:
    """
    mono(j) = min{raw(k): S_k <= S_j} within each group, j included.
    Tied scores form one block and share the same value.
    """
    scores = np.asarray(scores, dtype=float)
    raw = np.asarray(raw, dtype=float)
    if groups is not None:
        out = np.empty_like(raw)
        for a in set(groups):
            mask = np.asarray(groups == a)
            out[mask] = monotonize(scores[mask], raw[mask])
        return out
    if len(raw) == 0:
        return raw.copy()
    order = np.argsort(scores, kind="stable")
    s_sorted = scores[order]
    running = np.minimum.accumulate(raw[order])
    block_end = np.searchsorted(s_sorted, s_sorted, side="right") - 1
    out = np.empty_like(raw)
    out[order] = running[block_end]
    return out


def compute_rvalues(
    cal: FrameLike,
    test: FrameLike,
    c: str,
    variant: Union[str, RValueVariant] = DEFAULT_VARIANT,
) -> RValueTable:
    """Raw and monotonized R-values of class c for every test record, group by group."""
    cal, test = as_frame(cal), as_frame(test)
    variant = RValueVariant.parse(variant)
    c = str(c)
    if not cal.is_labeled:
        missing = next(i for i, y in zip(cal.ids, cal.labels) if y is None)
        raise ValidationError("calibration record without label", missing)

    scores = test.score(c)
    raw = np.empty(len(test))
    mono = np.empty(len(test))
    cal_counts = cal.group_counts()
    for a in test.unique_groups():
        mask = test.group_mask(a)
        if cal_counts.get(a, 0) == 0:
            logger.warning("no calibration records in group '%s' for class '%s'", a, c)
        raw_a = np.minimum(q_hat(cal, test, a, c, scores[mask], variant), 1.0)
        raw[mask] = raw_a
        mono[mask] = monotonize(scores[mask], raw_a)
        logger.debug("class=%s group=%s m_a=%d n_a=%d", c, a, np.count_nonzero(mask), cal_counts.get(a, 0))

    return RValueTable(
        cls=c,
        variant=variant,
        ids=test.ids,
        groups=test.groups,
        scores=scores,
        raw_r=raw,
        mono_r=mono,
    )


def raw_rvalues(cal: FrameLike, test: FrameLike, c: str) -> Dict[str, float]:
    return compute_rvalues(cal, test, c, RValueVariant.STANDARD).as_dict("raw_r")


def raw_rvalues_plus(cal: FrameLike, test: FrameLike, c: str) -> Dict[str, float]:
    return compute_rvalues(cal, test, c, RValueVariant.PLUS).as_dict("raw_r")


def threshold_tau(
    cal: FrameLike,
    test: FrameLike,
    a: str,
    c: str,
    alpha: float,
    variant: Union[str, RValueVariant] = DEFAULT_VARIANT,
) -> float:
    """
    Smallest observed group-a test score t with capped Q(t) <= alpha, +inf if none.
    Selecting {S >= tau} reproduces selecting {mono_r <= alpha}.
    """
    test = as_frame(test)
    candidates = np.unique(test.score(c)[test.group_mask(a)])
    if len(candidates) == 0:
        return math.inf
    q = np.minimum(q_hat(cal, test, a, c, candidates, variant), 1.0)
    hits = np.flatnonzero(q <= alpha)
    return float(candidates[hits[0]]) if len(hits) else math.inf


def check_threshold_equivalence(
    table: RValueTable, cal: FrameLike, test: FrameLike, alpha: float
) -> Dict[str, float]:
    """Compare both selection representations group by group; returns tau per group."""
    taus = {}
    for a in sorted(set(table.groups)):
        mask = np.asarray(table.groups == a)
        tau = threshold_tau(cal, test, a, table.cls, alpha, table.variant)
        by_tau = table.scores[mask] >= tau
        by_r = table.mono_r[mask] <= alpha
        if not np.array_equal(by_tau, by_r):
            raise InvariantViolation(
                f"threshold and R-value selections disagree for class '{table.cls}', group '{a}'"
            )
        taus[a] = tau
    return taus


def resolve_decisions(
    r_matrix: np.ndarray, alphas: Sequence[float], classes: Sequence[str]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Column k of r_matrix holds R-values for classes[k]. A record fires for every class
    with R <= alpha; the smallest R wins, ties go to the earliest class.
    """
    r_matrix = np.asarray(r_matrix, dtype=float).reshape(-1, len(classes))
    fired = r_matrix <= np.asarray(alphas, dtype=float)[None, :]
    candidates = np.where(fired, r_matrix, np.inf)
    best = np.argmin(candidates, axis=1)
    decided = fired.any(axis=1)

    decisions = np.empty(len(r_matrix), dtype=object)
    decisions[:] = INDECISION
    labels = np.asarray(list(classes), dtype=object)
    decisions[decided] = labels[best[decided]]
    winning = np.full(len(r_matrix), np.nan)
    winning[decided] = candidates[decided, best[decided]]
    overlap = fired.sum(axis=1) > 1
    return decisions, winning, overlap


def select(
    tables: Union[Mapping[str, RValueTable], Sequence[RValueTable]],
    alphas: Mapping[str, float],
    class_set: Optional[ClassSet] = None,
) -> SelectionOutcome:
    """Selection rule: one class or INDECISION per test record."""
    if not isinstance(tables, Mapping):
        tables = {t.cls: t for t in tables}
    classes = list(class_set) if class_set is not None else list(tables)
    missing = [c for c in classes if c not in tables or c not in alphas]
    if missing:
        raise ValidationError(f"no R-value table or alpha for classes {missing}")

    first = tables[classes[0]]
    for c in classes[1:]:
        if not np.array_equal(tables[c].ids, first.ids):
            raise ValidationError(f"R-value table for class '{c}' is not aligned with '{classes[0]}'")

    r_matrix = np.column_stack([tables[c].mono_r for c in classes])
    decisions, winning, overlap = resolve_decisions(r_matrix, [alphas[c] for c in classes], classes)
    if overlap.any():
        logger.debug("%d records fired for more than one class", int(overlap.sum()))
    return SelectionOutcome(
        ids=first.ids, groups=first.groups, decisions=decisions, winning_r=winning, overlap=overlap
    )


def run_fasi(
    cal: FrameLike,
    test: FrameLike,
    alphas: Mapping[str, float],
    variant: Union[str, RValueVariant] = DEFAULT_VARIANT,
    class_set: Optional[ClassSet] = None,
) -> Tuple[SelectionOutcome, Dict[str, RValueTable]]:
    """R-values for every class followed by the selection rule."""
    cal, test = as_frame(cal), as_frame(test)
    classes = list(class_set) if class_set is not None else list(alphas)
    tables = {c: compute_rvalues(cal, test, c, variant) for c in classes}
    return select(tables, alphas, ClassSet(tuple(classes))), tables
