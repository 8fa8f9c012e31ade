"""
Idealized machinery used as ground truth in simulations: a group-wise Gaussian
mixture, exact posterior scores, conditional error curves Q_a^c(t), theoretical
R-values, the oracle selection rule and the marginal FSR.
"""

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union
import logging
import math

import numpy as np
from scipy import stats
from scipy.special import logit, logsumexp

from .constants import (
    GRID_STEP,
    MC_CHUNK,
    MC_DRAWS,
    MC_MIN_DRAWS,
    SCENARIO_2_MU_1_F,
    SCENARIO_2_MU_2_F,
    SCENARIO_CLASSES,
    SCENARIO_MU_1,
    SCENARIO_MU_2,
    SCENARIO_PI_2_M,
    SCENARIO_VARIANCE,
)
from .core.errors import DegeneratePointError, ValidationError
from .rvalue import resolve_decisions

logger = logging.getLogger(__name__)

_PRIOR_TOL = 1e-9


@dataclass
class MixtureSpec:
    """
    A ~ group_priors; Y | A=a ~ class_priors[a]; X | Y=c, A=a ~ N(means[a][c], diag(variances[a][c])).
    """

    groups: Tuple[str, ...]
    classes: Tuple[str, ...]
    group_priors: Dict[str, float]
    class_priors: Dict[str, Dict[str, float]]
    means: Dict[str, Dict[str, Tuple[float, ...]]]
    variances: Dict[str, Dict[str, Tuple[float, ...]]]

    def __post_init__(self):
        self.groups = tuple(str(a) for a in self.groups)
        self.classes = tuple(str(c) for c in self.classes)
        self.validate()

    def validate(self) -> None:
        if not self.groups or not self.classes:
            raise ValidationError("mixture needs at least one group and one class")
        if abs(sum(self.group_priors[a] for a in self.groups) - 1.0) > _PRIOR_TOL:
            raise ValidationError("group priors must sum to 1")
        dims = set()
        for a in self.groups:
            priors = self.class_priors[a]
            if any(priors[c] < 0 for c in self.classes):
                raise ValidationError(f"negative class prior in group '{a}'")
            if abs(sum(priors[c] for c in self.classes) - 1.0) > _PRIOR_TOL:
                raise ValidationError(f"class priors of group '{a}' must sum to 1")
            for c in self.classes:
                mean = self.means[a][c]
                var = self.variances[a][c]
                if len(mean) != len(var):
                    raise ValidationError(f"mean/variance dimension mismatch for ({c}, {a})")
                if any(v <= 0 for v in var):
                    raise ValidationError(f"covariance of ({c}, {a}) must be positive")
                dims.add(len(mean))
        if len(dims) != 1:
            raise ValidationError("all mixture components must share one dimension")

    @property
    def dim(self) -> int:
        a, c = self.groups[0], self.classes[0]
        return len(self.means[a][c])

    def log_density(self, x: np.ndarray, c: str, a: str) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=float))
        mean = np.asarray(self.means[a][c], dtype=float)
        sd = np.sqrt(np.asarray(self.variances[a][c], dtype=float))
        return stats.norm.logpdf(x, loc=mean, scale=sd).sum(axis=1)

    def draw_group(self, a: str, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
        """n draws of (X, Y) conditional on A = a."""
        priors = [self.class_priors[a][c] for c in self.classes]
        labels = np.asarray(self.classes, dtype=object)[rng.choice(len(self.classes), size=n, p=priors)]
        x = np.empty((n, self.dim))
        for c in self.classes:
            mask = labels == c
            k = int(np.count_nonzero(mask))
            if k:
                mean = np.asarray(self.means[a][c], dtype=float)
                sd = np.sqrt(np.asarray(self.variances[a][c], dtype=float))
                x[mask] = rng.normal(mean, sd, size=(k, self.dim))
        return x, labels

    def draw(self, n: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """n i.i.d. draws of (X, A, Y)."""
        priors = [self.group_priors[a] for a in self.groups]
        groups = np.asarray(self.groups, dtype=object)[rng.choice(len(self.groups), size=n, p=priors)]
        x = np.empty((n, self.dim))
        labels = np.empty(n, dtype=object)
        for a in self.groups:
            mask = groups == a
            k = int(np.count_nonzero(mask))
            if k:
                x[mask], labels[mask] = self.draw_group(a, k, rng)
        return x, groups, labels

    def to_dict(self) -> Dict[str, Any]:
        return {
            "groups": list(self.groups),
            "classes": list(self.classes),
            "group_priors": dict(self.group_priors),
            "class_priors": {a: dict(p) for a, p in self.class_priors.items()},
            "means": {a: {c: list(m) for c, m in ms.items()} for a, ms in self.means.items()},
            "variances": {a: {c: list(v) for c, v in vs.items()} for a, vs in self.variances.items()},
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "MixtureSpec":
        try:
            return cls(
                groups=tuple(data["groups"]),
                classes=tuple(data["classes"]),
                group_priors={str(k): float(v) for k, v in data["group_priors"].items()},
                class_priors={
                    str(a): {str(c): float(p) for c, p in ps.items()} for a, ps in data["class_priors"].items()
                },
                means={str(a): {str(c): tuple(m) for c, m in ms.items()} for a, ms in data["means"].items()},
                variances={
                    str(a): {str(c): tuple(v) for c, v in vs.items()} for a, vs in data["variances"].items()
                },
            )
        except KeyError as e:
            raise ValidationError(f"mixture config is missing {e}")


def _two_group_spec(
    pi2f: float,
    means_f: Tuple[Tuple[float, ...], Tuple[float, ...]],
    means_m: Tuple[Tuple[float, ...], Tuple[float, ...]],
    pi2m: float = SCENARIO_PI_2_M,
    variance: float = SCENARIO_VARIANCE,
) -> MixtureSpec:
    c1, c2 = SCENARIO_CLASSES
    var = tuple([variance] * len(means_f[0]))
    return MixtureSpec(
        groups=("F", "M"),
        classes=(c1, c2),
        group_priors={"F": 0.5, "M": 0.5},
        class_priors={"F": {c1: 1.0 - pi2f, c2: pi2f}, "M": {c1: 1.0 - pi2m, c2: pi2m}},
        means={"F": {c1: means_f[0], c2: means_f[1]}, "M": {c1: means_m[0], c2: means_m[1]}},
        variances={"F": {c1: var, c2: var}, "M": {c1: var, c2: var}},
    )


def scenario_one(pi2f: float) -> MixtureSpec:
    """Identical class-conditional laws in both groups; only pi_{2|F} varies."""
    return _two_group_spec(pi2f, (SCENARIO_MU_1, SCENARIO_MU_2), (SCENARIO_MU_1, SCENARIO_MU_2))


def scenario_two(pi2f: float) -> MixtureSpec:
    """Female and male class-conditional means differ."""
    return _two_group_spec(pi2f, (SCENARIO_2_MU_1_F, SCENARIO_2_MU_2_F), (SCENARIO_MU_1, SCENARIO_MU_2))


def stability_mixture() -> MixtureSpec:
    """Setting of the R vs R+ variability study: pi_{2|a} = 0.8, means (1,1,1) and (2,2,2)."""
    return _two_group_spec(0.8, ((1.0,) * 3, (2.0,) * 3), ((1.0,) * 3, (2.0,) * 3), pi2m=0.8)


def _log_weights(x: np.ndarray, a: str, spec: MixtureSpec) -> np.ndarray:
    """log pi_{c|a} + log f_{c,a}(x), one column per class."""
    with np.errstate(divide="ignore"):
        return np.column_stack(
            [np.log(spec.class_priors[a][c]) + spec.log_density(x, c, a) for c in spec.classes]
        )


def _check_points(x: np.ndarray, total: np.ndarray) -> None:
    bad = ~np.isfinite(total)
    if bad.any():
        row = int(np.flatnonzero(bad)[0])
        raise DegeneratePointError(f"all mixture densities vanish at point {x[row].tolist()}")


def posterior_score(
    x: Union[Sequence[float], np.ndarray],
    a: Union[str, Sequence[str], np.ndarray],
    c: str,
    spec: MixtureSpec,
) -> Union[float, np.ndarray]:
    """Group-conditional Bayes posterior P(Y = c | X = x, A = a)."""
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    groups = np.full(len(x), a, dtype=object) if isinstance(a, str) else np.asarray(a, dtype=object)
    k = spec.classes.index(str(c))
    out = np.empty(len(x))
    for g in set(groups):
        mask = groups == g
        lw = _log_weights(x[mask], g, spec)
        total = logsumexp(lw, axis=1)
        _check_points(x[mask], total)
        out[mask] = np.exp(lw[:, k] - total)
    return float(out[0]) if single else out


def rcc_score(x: Union[Sequence[float], np.ndarray], c: str, spec: MixtureSpec) -> Union[float, np.ndarray]:
    """Posterior P(Y = c | X = x) with the protected attribute marginalized out."""
    single = np.ndim(x) == 1
    x = np.atleast_2d(np.asarray(x, dtype=float))
    k = spec.classes.index(str(c))
    with np.errstate(divide="ignore"):
        per_group = [np.log(spec.group_priors[a]) + _log_weights(x, a, spec) for a in spec.groups]
    stacked = np.stack(per_group, axis=0)
    by_class = logsumexp(stacked, axis=0)
    total = logsumexp(by_class, axis=1)
    _check_points(x, total)
    out = np.exp(by_class[:, k] - total)
    return float(out[0]) if single else out


@dataclass(frozen=True, eq=False)
class QCurve:
    """Q_a^c(t) = P(Y != c | S^c >= t, A = a) on a grid. NaN marks grid points without mass."""

    group: str
    cls: str
    grid: np.ndarray
    q: np.ndarray
    se: np.ndarray
    n_selected: np.ndarray
    mc_n: int
    seed: Optional[int]
    chunks: int
    method: str = "mc"

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.q)


def default_grid(step: float = GRID_STEP) -> np.ndarray:
    return np.round(np.arange(0.0, 1.0 + step / 2, step), 12)


def _check_grid(grid: Optional[Sequence[float]]) -> np.ndarray:
    grid = default_grid() if grid is None else np.sort(np.asarray(grid, dtype=float))
    if len(grid) == 0 or grid[0] < 0.0 or grid[-1] > 1.0:
        raise ValidationError("Q-curve grid must be a non-empty subset of [0, 1]")
    return grid


def _count_ge(sorted_values: np.ndarray, t: np.ndarray) -> np.ndarray:
    return len(sorted_values) - np.searchsorted(sorted_values, t, side="left")


def _mc_chunk(spec: MixtureSpec, a: str, c: str, grid: np.ndarray, n: int, seed: int, index: int):
    rng = np.random.default_rng([seed, index])
    x, labels = spec.draw_group(a, n, rng)
    s = posterior_score(x, a, c, spec)
    selected = _count_ge(np.sort(s), grid)
    false = _count_ge(np.sort(s[labels != c]), grid)
    return selected, false


def q_curve(
    spec: MixtureSpec,
    a: str,
    c: str,
    grid: Optional[Sequence[float]] = None,
    mc_n: int = MC_DRAWS,
    seed: int = 0,
    chunk_size: int = MC_CHUNK,
    threads: int = 1,
) -> QCurve:
    """
    Monte Carlo estimate of Q_a^c on the grid. Chunk k draws from the stream seeded by
    (seed, k), so results depend only on (seed, mc_n, chunk_size).
    """
    if mc_n < MC_MIN_DRAWS:
        raise ValidationError(f"mc_n must be at least {MC_MIN_DRAWS}")
    grid = _check_grid(grid)
    a, c = str(a), str(c)
    sizes = [chunk_size] * (mc_n // chunk_size)
    if mc_n % chunk_size:
        sizes.append(mc_n % chunk_size)

    jobs = list(enumerate(sizes))
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: _mc_chunk(spec, a, c, grid, job[1], seed, job[0]), jobs))
    else:
        parts = [_mc_chunk(spec, a, c, grid, n, seed, k) for k, n in jobs]

    selected = np.sum([p[0] for p in parts], axis=0)
    false = np.sum([p[1] for p in parts], axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(selected > 0, false / selected, np.nan)
        se = np.where(selected > 0, np.sqrt(q * (1.0 - q) / selected), np.nan)
    undefined = int(np.count_nonzero(selected == 0))
    if undefined:
        logger.warning("Q curve (%s, %s): %d grid points have no draws above threshold", a, c, undefined)
    return QCurve(
        group=a, cls=c, grid=grid, q=q, se=se, n_selected=selected,
        mc_n=mc_n, seed=seed, chunks=len(sizes), method="mc",
    )


def supports_analytic(spec: MixtureSpec, a: str) -> bool:
    """Binary group with a shared diagonal covariance and both classes present."""
    if len(spec.classes) != 2:
        return False
    c0, c1 = spec.classes
    priors = spec.class_priors[a]
    same_cov = tuple(spec.variances[a][c0]) == tuple(spec.variances[a][c1])
    return same_cov and 0.0 < priors[c0] < 1.0


def analytic_q_curve(spec: MixtureSpec, a: str, c: str, grid: Optional[Sequence[float]] = None) -> QCurve:
    """
    Closed-form Q curve via the linear discriminant: the log-odds L = w.x + b is Gaussian
    under each class, and S^c >= t is a half-line in L.
    """
    if not supports_analytic(spec, a):
        raise ValidationError(f"group '{a}' does not admit the analytic Q curve")
    grid = _check_grid(grid)
    c0, c1 = spec.classes
    var = np.asarray(spec.variances[a][c0], dtype=float)
    mu0 = np.asarray(spec.means[a][c0], dtype=float)
    mu1 = np.asarray(spec.means[a][c1], dtype=float)
    pi0, pi1 = spec.class_priors[a][c0], spec.class_priors[a][c1]

    w = (mu1 - mu0) / var
    b = -0.5 * float(np.sum(mu1 ** 2 / var) - np.sum(mu0 ** 2 / var)) + math.log(pi1 / pi0)
    sd = math.sqrt(float(np.sum(w ** 2 * var)))
    loc = {c0: float(w @ mu0) + b, c1: float(w @ mu1) + b}

    with np.errstate(divide="ignore"):
        cut = logit(grid)

    def tail(k: str) -> np.ndarray:
        # P(S^c >= t | Y = k)
        if str(c) == c1:
            return stats.norm.sf(cut, loc=loc[k], scale=sd) if sd > 0 else (loc[k] >= cut).astype(float)
        return stats.norm.cdf(-cut, loc=loc[k], scale=sd) if sd > 0 else (-loc[k] >= cut).astype(float)

    other = c0 if str(c) == c1 else c1
    priors = {c0: pi0, c1: pi1}
    false = priors[other] * tail(other)
    total = priors[str(c)] * tail(str(c)) + false
    with np.errstate(divide="ignore", invalid="ignore"):
        q = np.where(total > 0, false / total, np.nan)
    return QCurve(
        group=str(a), cls=str(c), grid=grid, q=q, se=np.zeros_like(q),
        n_selected=np.zeros(len(grid), dtype=int), mc_n=0, seed=None, chunks=0, method="analytic",
    )


def theoretical_rvalue(curve: QCurve, s: Union[float, Sequence[float], np.ndarray]) -> Union[float, np.ndarray]:
    """R(s) = inf over grid points t <= s of Q(t); grid points without mass are skipped."""
    running = np.minimum.accumulate(np.where(np.isnan(curve.q), np.inf, curve.q))
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    idx = np.clip(np.searchsorted(curve.grid, s_arr, side="right") - 1, 0, len(curve.grid) - 1)
    r = np.minimum(running[idx], 1.0)
    return float(r[0]) if np.ndim(s) == 0 else r


def oracle_rvalues(
    spec: MixtureSpec,
    x: np.ndarray,
    groups: Sequence[str],
    c: str,
    grid: Optional[Sequence[float]] = None,
    mc_n: int = MC_DRAWS,
    seed: int = 0,
    curves: Optional[Dict[Tuple[str, str], QCurve]] = None,
) -> np.ndarray:
    """Theoretical R-values of class c for a batch of points, one Q curve per group."""
    groups = np.asarray(groups, dtype=object)
    scores = posterior_score(x, groups, c, spec)
    out = np.empty(len(groups))
    for a in set(groups):
        mask = groups == a
        curve = (curves or {}).get((a, str(c)))
        if curve is None:
            if supports_analytic(spec, a):
                curve = analytic_q_curve(spec, a, c, grid)
            else:
                curve = q_curve(spec, a, c, grid, mc_n=mc_n, seed=seed)
            if curves is not None:
                curves[(a, str(c))] = curve
        out[mask] = theoretical_rvalue(curve, scores[mask])
    return out


@dataclass(frozen=True, eq=False)
class OracleDecisions:
    decisions: np.ndarray
    overlap: np.ndarray

    @property
    def n_overlap(self) -> int:
        return int(np.count_nonzero(self.overlap))


def oracle_rule(
    r1: Sequence[float],
    r2: Sequence[float],
    alpha1: float,
    alpha2: float,
    classes: Tuple[str, str] = SCENARIO_CLASSES,
) -> OracleDecisions:
    """Select class 1 when R1 <= alpha1, class 2 when R2 <= alpha2; overlaps go to the smaller R."""
    r = np.column_stack([np.asarray(r1, dtype=float), np.asarray(r2, dtype=float)])
    decisions, _, overlap = resolve_decisions(r, [alpha1, alpha2], classes)
    return OracleDecisions(decisions=decisions, overlap=overlap)


def mfsr(
    decisions: Sequence[str],
    truths: Sequence[str],
    groups: Sequence[str],
    a: str,
    c: str,
) -> Optional[float]:
    """
    Marginal FSR as a ratio of pooled sums over all supplied records (concatenate
    replications before calling). None when nothing was selected.
    """
    decisions = np.asarray(decisions, dtype=object)
    truths = np.asarray(truths, dtype=object)
    groups = np.asarray(groups, dtype=object)
    selected = (decisions == str(c)) & (groups == str(a))
    n_selected = int(np.count_nonzero(selected))
    if n_selected == 0:
        return None
    return int(np.count_nonzero(selected & (truths != str(c)))) / n_selected
