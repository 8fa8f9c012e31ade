"""Independent reference implementations and fixture builders used by the tests."""

import os
from typing import List, Optional, Sequence

import numpy as np

from fasi_sdk.core.records import ScoreFrame

RUN_SLOW = os.getenv("FASI_RUN_SLOW") == "1"


def frame(
    scores: Sequence[float],
    labels: Optional[Sequence[Optional[str]]] = None,
    groups: Optional[Sequence[str]] = None,
    cls: str = "c",
    prefix: str = "r",
) -> ScoreFrame:
    n = len(scores)
    return ScoreFrame.from_arrays(
        ids=[f"{prefix}{i}" for i in range(n)],
        groups=groups if groups is not None else ["a"] * n,
        labels=labels,
        scores={cls: list(scores)},
    )


def brute_force_rvalues(cal: ScoreFrame, test: ScoreFrame, c: str, plus: bool = False) -> List[float]:
    """Double loop over test points and candidate thresholds, counting every set directly."""
    out = []
    for j in range(len(test)):
        a = test.groups[j]
        s_j = test.scores[c][j]
        best = np.inf
        for k in range(len(test)):
            if test.groups[k] != a or test.scores[c][k] > s_j:
                continue
            t = test.scores[c][k]
            n_a = sum(1 for i in range(len(cal)) if cal.groups[i] == a)
            m_a = sum(1 for i in range(len(test)) if test.groups[i] == a)
            false = sum(
                1 for i in range(len(cal))
                if cal.groups[i] == a and cal.scores[c][i] >= t and cal.labels[i] != c
            )
            test_ge = sum(1 for i in range(len(test)) if test.groups[i] == a and test.scores[c][i] >= t)
            if plus:
                cal_ge = sum(1 for i in range(len(cal)) if cal.groups[i] == a and cal.scores[c][i] >= t)
                q = ((false + 1) / (n_a + 1)) / ((test_ge + cal_ge + 1) / (m_a + n_a + 1))
            else:
                q = ((false + 1) / (n_a + 1)) / (test_ge / m_a)
            best = min(best, min(q, 1.0))
        out.append(best)
    return out


def bh_stepup(pvalues: Sequence[float], alpha: float) -> np.ndarray:
    """Textbook Benjamini-Hochberg: reject the k smallest p-values, k = max{i: p_(i) <= i alpha / m}."""
    p = np.asarray(pvalues, dtype=float)
    m = len(p)
    order = np.argsort(p, kind="stable")
    k = 0
    for i in range(m, 0, -1):
        if p[order[i - 1]] <= i * alpha / m:
            k = i
            break
    reject = np.zeros(m, dtype=bool)
    if k:
        reject[p <= p[order[k - 1]]] = True
    return reject


def random_instance(rng: np.random.Generator, max_per_group: int = 6, groups=("a", "b"), cls: str = "c"):
    """Small calibration/test pair with coarse scores so ties are frequent."""
    def draw(prefix: str, labeled: bool) -> ScoreFrame:
        ids, gs, ys, ss = [], [], [], []
        for g in groups:
            for i in range(int(rng.integers(1, max_per_group + 1))):
                ids.append(f"{prefix}{g}{i}")
                gs.append(g)
                ss.append(float(np.round(rng.random(), 1)))
                ys.append((cls if rng.random() < 0.4 else "o") if labeled else None)
        return ScoreFrame.from_arrays(ids, gs, ys, {cls: ss})

    return draw("c", True), draw("t", False)
