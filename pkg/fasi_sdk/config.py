from dataclasses import dataclass, field
from typing import Dict, Literal, Optional, Tuple

from .constants import (
    DEFAULT_ALPHA,
    DEFAULT_QUANTILES,
    DEFAULT_SEED,
    DEFAULT_THREADS,
    DEFAULT_VARIANT,
    FASI_SEED,
    GRID_STEP,
    SCENARIO_CLASSES,
    SIM_N_CAL,
    SIM_N_DATA,
    SIM_N_TEST,
    SIM_N_TRAIN,
    SIM_PI2F_GRID,
    SIM_REPS,
)
from .core.errors import ValidationError
from .core.records import ClassSet, GroupSet
from .rvalue import RValueVariant

METHODS = ("fasi", "fcc", "rcc", "oracle")


def resolve_seed(seed: Optional[int]) -> int:
    """FASI_SEED from the environment wins over an explicit seed."""
    if FASI_SEED:
        try:
            return int(FASI_SEED)
        except ValueError:
            raise ValidationError(f"FASI_SEED must be an integer, got '{FASI_SEED}'")
    return DEFAULT_SEED if seed is None else int(seed)


def _check_alphas(alphas: Dict[str, float]) -> None:
    if not alphas:
        raise ValidationError("at least one class with an alpha is required")
    for c, a in alphas.items():
        if not 0.0 < a <= 1.0:
            raise ValidationError(f"alpha for class '{c}' must lie in (0, 1], got {a}")


@dataclass
class RunConfig:
    """
    Settings of one R-value run.

    Must provide:
    - alphas: target FSR level per selectable class (the keys define the class order unless classes is set)

    Optional:
    - classes: full declared class set (the CLI falls back to the calibration score columns);
      classes without an alpha are scored but never selected
    - variant: standard, plus, conservative or conservative_plus
    - groups: declared protected groups; records outside them are rejected
    - fcc: pool all groups (full covariate classifier baseline)
    - rcc: scores came from a reduced covariate classifier; implies pooled counts
    - conservative: switch the variant to its conservative form
    """

    alphas: Dict[str, float]
    variant: str = DEFAULT_VARIANT
    classes: Optional[Tuple[str, ...]] = None
    groups: Optional[Tuple[str, ...]] = None
    fcc: bool = False
    rcc: bool = False
    conservative: bool = False
    threads: int = DEFAULT_THREADS

    def validate(self) -> None:
        _check_alphas(self.alphas)
        RValueVariant.parse(self.variant)
        unknown = [c for c in self.alphas if c not in self.class_set]
        if unknown:
            raise ValidationError(f"alpha given for classes outside the class set: {unknown}")
        if self.threads < 1:
            raise ValidationError("threads must be at least 1")

    @property
    def class_set(self) -> ClassSet:
        return ClassSet(tuple(self.classes) if self.classes else tuple(self.alphas))

    @property
    def selected_classes(self) -> ClassSet:
        """Classes that carry an alpha, in class-set order. Only these can be selected."""
        return ClassSet(tuple(c for c in self.class_set if c in self.alphas))

    @property
    def group_set(self) -> Optional[GroupSet]:
        return GroupSet(tuple(self.groups)) if self.groups else None

    @property
    def pooled(self) -> bool:
        return self.fcc or self.rcc

    @property
    def rvalue_variant(self) -> RValueVariant:
        variant = RValueVariant.parse(self.variant)
        if self.pooled:
            # pooled baselines always use the plus-style denominator
            return RValueVariant.from_flags(True, variant.is_conservative or self.conservative)
        if self.conservative:
            return RValueVariant.from_flags(variant.is_plus, True)
        return variant


@dataclass
class ScenarioConfig:
    """
    Simulation study on the two-group Gaussian mixture. Scenario 1 shares class
    laws across groups; scenario 2 shifts the female means.
    """

    scenario: Literal[1, 2] = 1
    pi2f_grid: Tuple[float, ...] = SIM_PI2F_GRID
    n_data: int = SIM_N_DATA
    n_train: int = SIM_N_TRAIN
    n_cal: int = SIM_N_CAL
    n_test: int = SIM_N_TEST
    alphas: Dict[str, float] = field(default_factory=lambda: {c: DEFAULT_ALPHA for c in SCENARIO_CLASSES})
    reps: int = SIM_REPS
    seed: Optional[int] = None
    methods: Tuple[str, ...] = ("fasi", "fcc", "oracle")
    scores: Literal["oracle", "logistic"] = "oracle"
    variant: str = DEFAULT_VARIANT
    quantiles: Tuple[float, ...] = DEFAULT_QUANTILES
    grid_step: float = GRID_STEP
    threads: int = 1

    def validate(self) -> None:
        if self.scenario not in (1, 2):
            raise ValidationError(f"unknown scenario {self.scenario}")
        if not self.pi2f_grid or any(not 0.0 < p < 1.0 for p in self.pi2f_grid):
            raise ValidationError("pi2f grid must be a non-empty subset of (0, 1)")
        if min(self.n_train, self.n_cal, self.n_test) < 1:
            raise ValidationError("train, calibration and test sizes must be positive")
        if self.n_train + self.n_cal != self.n_data:
            raise ValidationError(
                f"train + calibration sizes ({self.n_train}+{self.n_cal}) must equal the data size {self.n_data}"
            )
        _check_alphas(self.alphas)
        unknown = [c for c in self.alphas if c not in SCENARIO_CLASSES]
        if unknown or len(self.alphas) != len(SCENARIO_CLASSES):
            raise ValidationError(f"scenario alphas must cover classes {list(SCENARIO_CLASSES)}")
        if self.reps < 1:
            raise ValidationError("reps must be at least 1")
        bad = [m for m in self.methods if m not in METHODS]
        if bad or not self.methods:
            raise ValidationError(f"unknown methods {bad}; choose from {list(METHODS)}")
        if self.scores not in ("oracle", "logistic"):
            raise ValidationError(f"unknown score mode '{self.scores}'")
        RValueVariant.parse(self.variant)
        if any(not 0.0 <= q <= 1.0 for q in self.quantiles):
            raise ValidationError("quantile levels must lie in [0, 1]")
        if not 0.0 < self.grid_step < 1.0:
            raise ValidationError("grid_step must lie in (0, 1)")
        if self.threads < 1:
            raise ValidationError("threads must be at least 1")

    @property
    def effective_seed(self) -> int:
        return resolve_seed(self.seed)
