"""
Domain types shared by every module: score records, label sets, the columnar
``ScoreFrame`` view used for all numeric work, and seeded dataset splitting.
"""

from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np

from ..constants import ALL_GROUPS, INDECISION
from .errors import SplitSizeError, ValidationError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LabelSet:
    """Ordered, duplicate-free collection of labels. Order is the canonical tie-break order."""

    labels: Tuple[str, ...]

    def __post_init__(self):
        labels = tuple(str(label) for label in self.labels)
        if not labels:
            raise ValidationError(f"{type(self).__name__} must not be empty")
        if len(set(labels)) != len(labels):
            raise ValidationError(f"{type(self).__name__} contains duplicate labels: {labels}")
        object.__setattr__(self, "labels", labels)

    def __iter__(self):
        return iter(self.labels)

    def __len__(self) -> int:
        return len(self.labels)

    def __contains__(self, label: object) -> bool:
        return str(label) in self.labels

    def index(self, label: str) -> int:
        return self.labels.index(str(label))


@dataclass(frozen=True)
class ClassSet(LabelSet):
    def __post_init__(self):
        super().__post_init__()
        for reserved in (INDECISION, ALL_GROUPS):
            if reserved in self.labels:
                raise ValidationError(f"'{reserved}' is reserved and cannot be a class label")


@dataclass(frozen=True)
class GroupSet(LabelSet):
    pass


@dataclass(frozen=True)
class ScoreRecord:
    """One individual: protected group, per-class confidence scores and optional true class."""

    id: str
    group: str
    scores: Mapping[str, float]
    label: Optional[str] = None


def validate(
    records: Iterable[ScoreRecord], class_set: ClassSet, group_set: GroupSet
) -> List[ScoreRecord]:
    """
    Check every record against the declared class and group sets.
    Raises ValidationError naming the first offending record.
    """
    seen = set()
    out = []
    for rec in records:
        if rec.id in seen:
            raise ValidationError("duplicate id", rec.id)
        seen.add(rec.id)
        if rec.group not in group_set:
            raise ValidationError(f"unknown group '{rec.group}'", rec.id)
        if rec.label is not None and rec.label not in class_set:
            raise ValidationError(f"unknown class '{rec.label}'", rec.id)
        for c in rec.scores:
            if c not in class_set:
                raise ValidationError(f"score for unknown class '{c}'", rec.id)
        for c in class_set:
            if c not in rec.scores:
                raise ValidationError(f"missing score for class '{c}'", rec.id)
            s = rec.scores[c]
            if s is None or not math.isfinite(s) or s < 0.0 or s > 1.0:
                raise ValidationError(f"score out of range for class '{c}': {s}", rec.id)
        out.append(rec)
    return out


def _object_array(values: Iterable) -> np.ndarray:
    values = list(values)
    arr = np.empty(len(values), dtype=object)
    arr[:] = values
    return arr


@dataclass(frozen=True, eq=False)
class ScoreFrame:
    """
    Columnar view of a collection of records.

    ids, groups and labels are object arrays (labels hold None when unknown);
    scores maps class label -> float array aligned with ids.
    """

    ids: np.ndarray
    groups: np.ndarray
    labels: np.ndarray
    scores: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        n = len(self.ids)
        if len(self.groups) != n or len(self.labels) != n:
            raise ValidationError("ids, groups and labels must have equal length")
        for c, s in self.scores.items():
            if len(s) != n:
                raise ValidationError(f"score column for class '{c}' has wrong length")

    @classmethod
    def from_arrays(
        cls,
        ids: Sequence,
        groups: Sequence,
        labels: Optional[Sequence] = None,
        scores: Optional[Mapping[str, Sequence[float]]] = None,
    ) -> "ScoreFrame":
        n = len(ids)
        if labels is None:
            labels = [None] * n
        return cls(
            ids=_object_array(str(i) for i in ids),
            groups=_object_array(str(g) for g in groups),
            labels=_object_array(None if y is None else str(y) for y in labels),
            scores={str(c): np.asarray(s, dtype=float) for c, s in (scores or {}).items()},
        )

    @classmethod
    def from_records(
        cls, records: Iterable[ScoreRecord], classes: Optional[Iterable[str]] = None
    ) -> "ScoreFrame":
        records = list(records)
        if classes is None:
            classes = []
            for rec in records:
                for c in rec.scores:
                    if c not in classes:
                        classes.append(c)
        return cls.from_arrays(
            ids=[r.id for r in records],
            groups=[r.group for r in records],
            labels=[r.label for r in records],
            scores={c: [r.scores[c] for r in records] for c in classes},
        )

    @classmethod
    def concat(cls, frames: Sequence["ScoreFrame"]) -> "ScoreFrame":
        classes = list(frames[0].scores) if frames else []
        return cls(
            ids=_object_array(i for f in frames for i in f.ids),
            groups=_object_array(g for f in frames for g in f.groups),
            labels=_object_array(y for f in frames for y in f.labels),
            scores={c: np.concatenate([f.scores[c] for f in frames]) for c in classes},
        )

    def to_records(self) -> List[ScoreRecord]:
        return [
            ScoreRecord(
                id=self.ids[i],
                group=self.groups[i],
                scores={c: float(s[i]) for c, s in self.scores.items()},
                label=self.labels[i],
            )
            for i in range(len(self))
        ]

    def __len__(self) -> int:
        return len(self.ids)

    @property
    def classes(self) -> Tuple[str, ...]:
        return tuple(self.scores)

    @property
    def is_labeled(self) -> bool:
        return all(y is not None for y in self.labels)

    def score(self, c: str) -> np.ndarray:
        try:
            return self.scores[str(c)]
        except KeyError:
            raise ValidationError(f"no score column for class '{c}'")

    def group_mask(self, a: str) -> np.ndarray:
        return self.groups == a

    def null_mask(self, c: str) -> np.ndarray:
        """True where the true class differs from c. Requires labels."""
        missing = [self.ids[i] for i, y in enumerate(self.labels) if y is None]
        if missing:
            raise ValidationError("unlabeled record where a label is required", missing[0])
        return self.labels != str(c)

    def group_counts(self) -> Dict[str, int]:
        values, counts = np.unique(self.groups.astype(str), return_counts=True)
        return {str(v): int(k) for v, k in zip(values, counts)}

    def unique_groups(self) -> List[str]:
        return sorted(set(self.groups))

    def take(self, indices: Sequence[int]) -> "ScoreFrame":
        idx = np.asarray(indices, dtype=int)
        return ScoreFrame(
            ids=self.ids[idx],
            groups=self.groups[idx],
            labels=self.labels[idx],
            scores={c: s[idx] for c, s in self.scores.items()},
        )

    def subset(self, mask: np.ndarray) -> "ScoreFrame":
        return self.take(np.flatnonzero(mask))

    def pooled(self, group: str = ALL_GROUPS) -> "ScoreFrame":
        """Same records with the protected attribute collapsed into a single group."""
        return ScoreFrame(
            ids=self.ids,
            groups=_object_array([group] * len(self)),
            labels=self.labels,
            scores=self.scores,
        )


@dataclass(frozen=True, eq=False)
class DatasetSplit:
    train: ScoreFrame
    cal: ScoreFrame
    test: ScoreFrame
    seed: int

    def __post_init__(self):
        parts = (set(self.train.ids), set(self.cal.ids), set(self.test.ids))
        if parts[0] & parts[1] or parts[0] & parts[2] or parts[1] & parts[2]:
            raise ValidationError("train, calibration and test partitions overlap")
        if not self.cal.is_labeled:
            missing = next(i for i, y in zip(self.cal.ids, self.cal.labels) if y is None)
            raise ValidationError("calibration record without label", missing)

    @property
    def n_cal(self) -> int:
        return len(self.cal)

    @property
    def m(self) -> int:
        return len(self.test)

    @property
    def n_cal_by_group(self) -> Dict[str, int]:
        return self.cal.group_counts()

    @property
    def m_by_group(self) -> Dict[str, int]:
        return self.test.group_counts()


def split_indices(
    ids: Sequence, n_train: int, n_cal: int, rng: Union[int, np.random.Generator]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Uniform random partition of positions 0..n-1 into train / cal / remainder.
    Positions are first sorted by id so the result does not depend on input order.
    """
    n = len(ids)
    if n_train < 0 or n_cal < 0 or n_train + n_cal > n:
        raise SplitSizeError(f"split sizes {n_train}+{n_cal} exceed population of {n}")
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    canonical = np.argsort(np.asarray([str(i) for i in ids], dtype=str), kind="stable")
    order = canonical[rng.permutation(n)]
    return order[:n_train], order[n_train:n_train + n_cal], order[n_train + n_cal:]


def split(
    records: Union[Sequence[ScoreRecord], ScoreFrame],
    n_train: int,
    n_cal: int,
    seed: int,
    test: Optional[ScoreFrame] = None,
) -> DatasetSplit:
    """
    Randomly split labeled records into train / calibration; the remainder joins the
    test partition together with any separately supplied test frame.
    """
    frame = records if isinstance(records, ScoreFrame) else ScoreFrame.from_records(records)
    if not frame.is_labeled:
        missing = next(i for i, y in zip(frame.ids, frame.labels) if y is None)
        raise ValidationError("split requires labeled records", missing)
    train_idx, cal_idx, rest_idx = split_indices(frame.ids, n_train, n_cal, seed)
    remainder = frame.take(rest_idx)
    test_frame = remainder if test is None else ScoreFrame.concat([remainder, test])
    logger.debug("split seed=%s train=%d cal=%d test=%d", seed, len(train_idx), len(cal_idx), len(test_frame))
    return DatasetSplit(train=frame.take(train_idx), cal=frame.take(cal_idx), test=test_frame, seed=seed)
