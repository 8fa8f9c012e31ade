"""
Conformal p-values and Benjamini-Hochberg q-values for one-class selection.

Scores are oriented so that a larger score means "more likely to belong to the
target class", hence every count uses S >= t. The calibration pool contains
only reference (null) scores.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Union
import logging

import numpy as np

from .rvalue import monotonize

logger = logging.getLogger(__name__)

ArrayLike = Union[Sequence[float], np.ndarray]


@dataclass(frozen=True, eq=False)
class ConformalTable:
    """
    p, raw and monotonized BH q-values per test point. q-values are not capped here;
    ``capped`` gives the reporting view.
    """

    ids: np.ndarray
    scores: np.ndarray
    p: np.ndarray
    q_raw: np.ndarray
    q_mono: np.ndarray
    n_cal: int
    empty_calibration: bool = False

    def __len__(self) -> int:
        return len(self.ids)

    def capped(self, column: str = "q_mono") -> np.ndarray:
        return np.minimum(getattr(self, column), 1.0)


def _count_ge(sorted_values: np.ndarray, t: np.ndarray) -> np.ndarray:
    return len(sorted_values) - np.searchsorted(sorted_values, t, side="left")


def conformal_pvalue(cal_scores: ArrayLike, t: Union[float, ArrayLike]) -> Union[float, np.ndarray]:
    """p(t) = (#{cal: S >= t} + 1) / (n + 1)."""
    cal_sorted = np.sort(np.asarray(cal_scores, dtype=float))
    t_arr = np.asarray(t, dtype=float)
    p = (_count_ge(cal_sorted, t_arr) + 1) / (len(cal_sorted) + 1)
    return float(p) if np.ndim(t) == 0 else p


def empirical_G(test_scores: ArrayLike, t: Union[float, ArrayLike]) -> Union[float, np.ndarray]:
    """G(t) = #{test: S >= t} / m."""
    test_sorted = np.sort(np.asarray(test_scores, dtype=float))
    if len(test_sorted) == 0:
        raise ValueError("empirical_G needs at least one test score")
    t_arr = np.asarray(t, dtype=float)
    g = _count_ge(test_sorted, t_arr) / len(test_sorted)
    return float(g) if np.ndim(t) == 0 else g


def bh_qvalues(
    cal_scores: ArrayLike,
    test_scores: ArrayLike,
    ids: Optional[Sequence[str]] = None,
) -> ConformalTable:
    """
    q_raw(j) = p(S_j) / G(S_j); q_mono(j) = min{q_raw(k): S_k <= S_j}.
    Thresholding q_mono at alpha reproduces the BH step-up on the conformal p-values.
    """
    cal = np.asarray(cal_scores, dtype=float)
    test = np.asarray(test_scores, dtype=float)
    if ids is None:
        ids = [str(i) for i in range(len(test))]
    empty = len(cal) == 0
    if empty:
        logger.warning("empty calibration pool: every conformal p-value equals 1")

    p = conformal_pvalue(cal, test) if len(test) else np.zeros(0)
    g = empirical_G(test, test) if len(test) else np.zeros(0)
    q_raw = p / g
    id_arr = np.empty(len(test), dtype=object)
    id_arr[:] = [str(i) for i in ids]
    return ConformalTable(
        ids=id_arr,
        scores=test,
        p=np.asarray(p, dtype=float),
        q_raw=q_raw,
        q_mono=monotonize(test, q_raw),
        n_cal=len(cal),
        empty_calibration=empty,
    )


def bh_decisions(table: ConformalTable, alpha: float) -> np.ndarray:
    """Boolean selection mask {q_mono <= alpha}."""
    return table.q_mono <= alpha
