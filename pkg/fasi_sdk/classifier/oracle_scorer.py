from typing import Dict, Sequence

import numpy as np

from ..oracle import MixtureSpec, posterior_score, rcc_score
from .base import AbstractScorer


class OracleScorer(AbstractScorer):
    """
    Exact posterior of a known mixture. With ``reduced`` the group is marginalized
    out, giving the reduced-covariate score.
    """

    def __init__(self, spec: MixtureSpec, reduced: bool = False):
        self.spec = spec
        self.reduced = reduced

    def fit(self, features, groups, labels) -> "OracleScorer":
        return self

    def score(self, features: np.ndarray, groups: Sequence[str]) -> Dict[str, np.ndarray]:
        x = np.atleast_2d(np.asarray(features, dtype=float))
        if self.reduced:
            return {c: rcc_score(x, c, self.spec) for c in self.spec.classes}
        return {c: posterior_score(x, np.asarray(groups, dtype=object), c, self.spec) for c in self.spec.classes}
