from .config import RunConfig, ScenarioConfig
from .conformal import ConformalTable, bh_decisions, bh_qvalues, conformal_pvalue, empirical_G
from .core.errors import FasiError, FormatError, InvariantViolation, ValidationError
from .core.records import ClassSet, DatasetSplit, GroupSet, ScoreFrame, ScoreRecord, split, validate
from .metrics import MetricsReport, aggregate, epi, evaluate, fsp, fsp_star, gamma_estimate, power_per_class
from .oracle import (
    MixtureSpec,
    QCurve,
    analytic_q_curve,
    mfsr,
    oracle_rule,
    oracle_rvalues,
    posterior_score,
    q_curve,
    rcc_score,
    theoretical_rvalue,
)
from .rvalue import (
    RValueTable,
    RValueVariant,
    SelectionOutcome,
    compute_rvalues,
    monotonize,
    raw_rvalues,
    raw_rvalues_plus,
    run_fasi,
    select,
    threshold_tau,
)
from .simulate import fcc_rvalues, generate, run_replication, rvalue_stability, sweep

__all__ = [
    "RunConfig", "ScenarioConfig",
    "ConformalTable", "bh_decisions", "bh_qvalues", "conformal_pvalue", "empirical_G",
    "FasiError", "FormatError", "InvariantViolation", "ValidationError",
    "ClassSet", "DatasetSplit", "GroupSet", "ScoreFrame", "ScoreRecord", "split", "validate",
    "MetricsReport", "aggregate", "epi", "evaluate", "fsp", "fsp_star", "gamma_estimate", "power_per_class",
    "MixtureSpec", "QCurve", "analytic_q_curve", "mfsr", "oracle_rule", "oracle_rvalues",
    "posterior_score", "q_curve", "rcc_score", "theoretical_rvalue",
    "RValueTable", "RValueVariant", "SelectionOutcome", "compute_rvalues", "monotonize",
    "raw_rvalues", "raw_rvalues_plus", "run_fasi", "select", "threshold_tau",
    "fcc_rvalues", "generate", "run_replication", "rvalue_stability", "sweep",
]
