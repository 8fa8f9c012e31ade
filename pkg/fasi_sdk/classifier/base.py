from abc import ABC, abstractmethod
from typing import Dict, Optional, Sequence

import numpy as np

from ..core.records import ScoreFrame


class AbstractScorer(ABC):
    """
    Interface for score back-ends (built-in logistic model, exact mixture posterior).
    """

    @abstractmethod
    def fit(self, features: np.ndarray, groups: Sequence[str], labels: Sequence[str]) -> "AbstractScorer":
        """
        Train on labeled data. Back-ends that need no training return self unchanged.
        """
        pass

    @abstractmethod
    def score(self, features: np.ndarray, groups: Sequence[str]) -> Dict[str, np.ndarray]:
        """
        Return class label -> confidence scores in [0, 1], aligned with the rows of features.
        """
        pass

    def score_frame(
        self,
        ids: Sequence[str],
        features: np.ndarray,
        groups: Sequence[str],
        labels: Optional[Sequence[str]] = None,
    ) -> ScoreFrame:
        return ScoreFrame.from_arrays(ids, groups, labels, self.score(features, groups))
