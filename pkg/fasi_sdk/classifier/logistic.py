"""
Built-in binary logistic scorer trained by full-batch gradient ascent on the
L2-penalized mean log-likelihood. Features are standardized; the protected group
enters as reference-coded indicator columns unless ``use_group`` is off.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
from scipy.special import expit

from ..core.errors import SingleClassError, ValidationError
from .base import AbstractScorer

logger = logging.getLogger(__name__)


@dataclass
class LogisticConfig:
    max_iter: int = 5000
    tol: float = 1e-6
    l2: float = 1e-3

    def validate(self) -> None:
        if self.max_iter < 1:
            raise ValidationError("max_iter must be positive")
        if self.tol <= 0:
            raise ValidationError("tol must be positive")
        if self.l2 < 0:
            raise ValidationError("l2 must be non-negative")


@dataclass
class LogisticModel:
    positive: str
    intercept: float
    weights: np.ndarray
    center: np.ndarray
    scale: np.ndarray
    group_levels: Tuple[str, ...] = ()
    use_group: bool = True
    n_iter: int = 0
    grad_norm: float = 0.0
    converged: bool = False

    @property
    def n_features(self) -> int:
        return len(self.center)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "positive": self.positive,
            "intercept": self.intercept,
            "weights": self.weights.tolist(),
            "center": self.center.tolist(),
            "scale": self.scale.tolist(),
            "group_levels": list(self.group_levels),
            "use_group": self.use_group,
            "n_iter": self.n_iter,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LogisticModel":
        try:
            return cls(
                positive=str(data["positive"]),
                intercept=float(data["intercept"]),
                weights=np.asarray(data["weights"], dtype=float),
                center=np.asarray(data["center"], dtype=float),
                scale=np.asarray(data["scale"], dtype=float),
                group_levels=tuple(data.get("group_levels", ())),
                use_group=bool(data.get("use_group", True)),
                n_iter=int(data.get("n_iter", 0)),
                grad_norm=float(data.get("grad_norm", 0.0)),
                converged=bool(data.get("converged", False)),
            )
        except KeyError as e:
            raise ValidationError(f"logistic model is missing {e}")


def _check_features(features: Any) -> np.ndarray:
    x = np.asarray(features, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    bad = ~np.isfinite(x).all(axis=1)
    if bad.any():
        raise ValidationError("non-finite feature", str(int(np.flatnonzero(bad)[0])))
    return x


def _group_columns(groups: Sequence[str], levels: Tuple[str, ...]) -> np.ndarray:
    groups = np.asarray([str(g) for g in groups], dtype=object)
    unknown = sorted(set(groups) - set(levels))
    if unknown:
        raise ValidationError(f"group '{unknown[0]}' was not seen in training")
    # first level is the reference
    return np.column_stack([groups == g for g in levels[1:]]).astype(float) if len(levels) > 1 else np.zeros((len(groups), 0))


def _design(model: LogisticModel, x: np.ndarray, groups: Optional[Sequence[str]]) -> np.ndarray:
    z = (x - model.center) / model.scale
    if model.use_group:
        if groups is None:
            raise ValidationError("this model needs the group of every record")
        z = np.hstack([z, _group_columns(groups, model.group_levels)])
    return z


def train(
    features: Any,
    groups: Optional[Sequence[str]],
    labels: Sequence[str],
    config: Optional[LogisticConfig] = None,
    positive: Optional[str] = None,
    use_group: bool = True,
) -> LogisticModel:
    """
    Fit P(Y = positive | x, a). Deterministic: zero start, fixed step 1 / L where L
    bounds the curvature of the penalized objective.
    """
    config = config or LogisticConfig()
    config.validate()
    x = _check_features(features)
    labels = np.asarray([str(y) for y in labels], dtype=object)
    if len(labels) != len(x):
        raise ValidationError("features and labels have different lengths")
    distinct = sorted(set(labels))
    if len(distinct) < 2:
        raise SingleClassError(f"training labels contain a single class: {distinct}")
    if positive is None:
        if len(distinct) > 2:
            raise ValidationError("positive class must be named when training on more than two labels")
        positive = distinct[-1]
    y = (labels == str(positive)).astype(float)

    center = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0] = 1.0
    levels: Tuple[str, ...] = ()
    if use_group:
        if groups is None:
            raise ValidationError("use_group needs the group of every record")
        levels = tuple(sorted(set(str(g) for g in groups)))
    model = LogisticModel(
        positive=str(positive),
        intercept=0.0,
        weights=np.zeros(0),
        center=center,
        scale=scale,
        group_levels=levels,
        use_group=use_group,
    )

    n = len(x)
    a = np.hstack([np.ones((n, 1)), _design(model, x, groups)])
    penalty = np.full(a.shape[1], config.l2)
    penalty[0] = 0.0
    curvature = 0.25 * float(np.linalg.eigvalsh(a.T @ a / n)[-1]) + config.l2
    step = 1.0 / curvature

    theta = np.zeros(a.shape[1])
    grad_norm = np.inf
    it = 0
    for it in range(1, config.max_iter + 1):
        grad = a.T @ (y - expit(a @ theta)) / n - penalty * theta
        grad_norm = float(np.max(np.abs(grad)))
        if grad_norm < config.tol:
            break
        theta += step * grad

    model.intercept = float(theta[0])
    model.weights = theta[1:].copy()
    model.n_iter = it
    model.grad_norm = grad_norm
    model.converged = grad_norm < config.tol
    if not model.converged:
        logger.warning("logistic fit stopped at max_iter=%d with gradient norm %.3g", config.max_iter, grad_norm)
    logger.debug("logistic fit: positive=%s iterations=%d grad=%.3g", positive, it, grad_norm)
    return model


def predict(model: LogisticModel, features: Any, groups: Optional[Sequence[str]] = None):
    """P(Y = model.positive | x, a). A single 1-D row returns a float."""
    single = np.ndim(features) == 1 and model.n_features > 1
    if single:
        features = np.asarray(features, dtype=float)[None, :]
        if groups is not None and isinstance(groups, str):
            groups = [groups]
    elif isinstance(groups, str):
        groups = [groups] * len(np.atleast_1d(features))
    x = _check_features(features)
    if x.shape[1] != model.n_features:
        raise ValidationError(f"model expects {model.n_features} features, got {x.shape[1]}")
    p = expit(_design(model, x, groups) @ model.weights + model.intercept)
    return float(p[0]) if single else p


class LogisticScorer(AbstractScorer):
    """
    Binary labels use one model whose complement scores the other class; more labels
    use one-vs-rest models.
    """

    def __init__(self, config: Optional[LogisticConfig] = None, use_group: bool = True):
        self.config = config or LogisticConfig()
        self.use_group = use_group
        self.classes: Tuple[str, ...] = ()
        self.models: Dict[str, LogisticModel] = {}

    def fit(self, features, groups, labels, classes: Optional[Sequence[str]] = None) -> "LogisticScorer":
        self.classes = tuple(classes) if classes is not None else tuple(sorted(set(str(y) for y in labels)))
        if len(self.classes) < 2:
            raise SingleClassError(f"training labels contain a single class: {list(self.classes)}")
        targets: List[str] = [self.classes[-1]] if len(self.classes) == 2 else list(self.classes)
        self.models = {
            c: train(features, groups, labels, self.config, positive=c, use_group=self.use_group) for c in targets
        }
        return self

    def score(self, features, groups) -> Dict[str, np.ndarray]:
        if not self.models:
            raise ValidationError("scorer has not been fitted")
        if len(self.classes) == 2:
            c0, c1 = self.classes
            p = predict(self.models[c1], features, groups)
            return {c0: 1.0 - p, c1: p}
        return {c: predict(self.models[c], features, groups) for c in self.classes}

    def to_dict(self) -> Dict[str, Any]:
        return {
            "classes": list(self.classes),
            "use_group": self.use_group,
            "config": {"max_iter": self.config.max_iter, "tol": self.config.tol, "l2": self.config.l2},
            "models": {c: m.to_dict() for c, m in self.models.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "LogisticScorer":
        scorer = cls(LogisticConfig(**data.get("config", {})), use_group=bool(data.get("use_group", True)))
        scorer.classes = tuple(data["classes"])
        scorer.models = {str(c): LogisticModel.from_dict(m) for c, m in data["models"].items()}
        return scorer
