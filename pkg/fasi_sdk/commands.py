"""
Bodies of the command-line sub-commands. Each takes the parsed argparse namespace,
writes data only to --out (stdout when omitted) and returns the process exit code.
"""

from argparse import Namespace
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from typing import Dict, List, Optional, Sequence, Tuple
import logging

import numpy as np
import pandas as pd

from .config import RunConfig, ScenarioConfig, resolve_seed
from .conformal import bh_decisions, bh_qvalues
from .constants import DEFAULT_ALPHA, INDECISION, SCENARIO_CLASSES
from .core.errors import FormatError, ValidationError
from .core.persistence import (
    read_scores,
    read_selections,
    read_truth,
    write_conformal,
    write_report,
    write_rvalue_table,
    write_selections,
    write_table,
)
from .core.records import ScoreFrame
from .metrics import evaluate
from .rvalue import RValueTable, check_threshold_equivalence, compute_rvalues, select
from .simulate import rvalue_stability, sweep

logger = logging.getLogger(__name__)


def _split_list(value: Optional[str]) -> Optional[Tuple[str, ...]]:
    if not value:
        return None
    return tuple(v.strip() for v in value.split(",") if v.strip())


def _pair_alphas(classes: Sequence[str], alphas: Optional[Sequence[float]]) -> Dict[str, float]:
    alphas = list(alphas or [DEFAULT_ALPHA])
    if len(alphas) == 1 and len(classes) > 1:
        alphas = alphas * len(classes)
    if len(alphas) != len(classes):
        raise ValidationError(f"got {len(classes)} --class and {len(alphas)} --alpha values")
    return dict(zip(classes, alphas))


def parse_grid(value: str) -> Tuple[float, ...]:
    """LO:HI:STEP (inclusive) or a comma-separated list."""
    try:
        if ":" in value:
            lo, hi, step = (float(v) for v in value.split(":"))
            if step <= 0:
                raise ValueError("step must be positive")
            n = int(np.floor((hi - lo) / step + 1e-9)) + 1
            return tuple(float(np.round(lo + k * step, 10)) for k in range(n))
        return tuple(float(v) for v in value.split(","))
    except ValueError as e:
        raise ValidationError(f"cannot parse grid '{value}': {e}")


def _class_table(config: RunConfig, cal: ScoreFrame, test: ScoreFrame, c: str) -> RValueTable:
    variant = config.rvalue_variant
    if config.pooled:
        table = compute_rvalues(cal.pooled(), test.pooled(), c, variant)
        taus = check_threshold_equivalence(table, cal.pooled(), test.pooled(), config.alphas[c])
        table = replace(table, groups=test.groups)
    else:
        table = compute_rvalues(cal, test, c, variant)
        taus = check_threshold_equivalence(table, cal, test, config.alphas[c])
    logger.info("class %s: thresholds %s", c, {a: round(t, 6) for a, t in taus.items()})
    return table


def _rvalue_tables(config: RunConfig, cal: ScoreFrame, test: ScoreFrame) -> Dict[str, RValueTable]:
    classes = list(config.selected_classes)
    if config.threads > 1 and len(classes) > 1:
        with ThreadPoolExecutor(max_workers=min(config.threads, len(classes))) as pool:
            tables = list(pool.map(lambda c: _class_table(config, cal, test, c), classes))
    else:
        tables = [_class_table(config, cal, test, c) for c in classes]
    return dict(zip(classes, tables))


def cmd_rvalue(args: Namespace) -> int:
    config = RunConfig(
        alphas=_pair_alphas(args.classes, args.alphas),
        variant=args.variant,
        classes=_split_list(args.class_set),
        groups=_split_list(args.groups),
        fcc=args.fcc,
        rcc=args.rcc,
        conservative=args.conservative,
        threads=args.threads,
    )
    config.validate()
    groups = config.group_set.labels if config.group_set else None
    if config.classes is None:
        # without --class-set every score column of the calibration file is a class
        cal = read_scores(args.cal, None, groups, require_labels=True)
        missing = [c for c in config.alphas if c not in cal.classes]
        if missing:
            raise FormatError(f"{args.cal}: no score column for class(es) {missing}")
        config = replace(config, classes=cal.classes)
        config.validate()
    else:
        cal = read_scores(args.cal, config.class_set.labels, groups, require_labels=True)
    test = read_scores(args.test, config.class_set.labels, groups)

    tables = _rvalue_tables(config, cal, test)
    outcome = select(tables, config.alphas, config.selected_classes)
    logger.info(
        "selected %d of %d test records (%d overlaps)",
        int(np.count_nonzero(outcome.decided)), len(outcome), outcome.n_overlap,
    )

    order = np.repeat(np.arange(len(test)), len(tables))
    per_class = list(tables.values())
    rows = pd.DataFrame(
        {
            "id": test.ids[order],
            "group": test.groups[order],
            "class": [t.cls for t in per_class] * len(test),
            "score": np.column_stack([t.scores for t in per_class]).ravel(),
            "raw_r": np.column_stack([t.raw_r for t in per_class]).ravel(),
            "mono_r": np.column_stack([t.mono_r for t in per_class]).ravel(),
            "decision": outcome.decisions[order],
        }
    )
    write_rvalue_table(args.out, rows)
    if args.selections:
        write_selections(
            args.selections,
            pd.DataFrame(
                {"id": outcome.ids, "group": outcome.groups, "decision": outcome.decisions, "winning_r": outcome.winning_r}
            ),
        )
    return 0


def cmd_conformal(args: Namespace) -> int:
    if not 0.0 <= args.alpha <= 1.0:
        raise ValidationError(f"alpha must lie in [0, 1], got {args.alpha}")
    c = args.cls
    cal = read_scores(args.cal, (c,), strict_labels=False)
    test = read_scores(args.test, (c,), strict_labels=False)
    # unlabeled calibration files are taken as all-reference
    pool = cal.score(c)[cal.null_mask(c)] if cal.is_labeled else cal.score(c)
    logger.info("calibration pool: %d reference scores", len(pool))

    table = bh_qvalues(pool, test.score(c), test.ids)
    decisions = bh_decisions(table, args.alpha)
    write_conformal(
        args.out,
        pd.DataFrame(
            {
                "id": table.ids,
                "score": table.scores,
                "p": table.p,
                "q_raw": table.capped("q_raw"),
                "q_mono": table.capped("q_mono"),
                "decision": decisions,
            }
        ),
    )
    logger.info("BH selected %d of %d", int(np.count_nonzero(decisions)), len(table))
    return 0


def cmd_evaluate(args: Namespace) -> int:
    selections = read_selections(args.selections)
    truth = read_truth(args.truth)
    ids = selections["id"].tolist()
    truths = [truth.get(i) for i in ids]
    decisions = selections["decision"].tolist()
    classes = list(args.classes) if args.classes else sorted(
        {d for d in decisions if d != INDECISION} | {y for y in truths if y is not None}
    )
    if not classes:
        raise FormatError(f"{args.selections}: no class labels found; pass --class")
    groups = _split_list(args.groups) or tuple(sorted(set(selections["group"])))
    report = evaluate(decisions, truths, selections["group"].tolist(), classes, groups, ids=ids)
    write_report(args.out, report)
    logger.info("evaluated %d records: EPI %.4f", len(ids), report.epi)
    return 0


def cmd_simulate(args: Namespace) -> int:
    config = ScenarioConfig(
        scenario=args.scenario,
        alphas=_pair_alphas(SCENARIO_CLASSES, args.alphas),
        seed=args.seed,
        methods=_split_list(args.methods) or ScenarioConfig.methods,
        scores=args.scores,
        variant=args.variant,
        threads=args.threads,
    )
    if args.reps is not None:
        config.reps = args.reps
    if args.pi2f:
        config.pi2f_grid = parse_grid(args.pi2f)
    if args.quantiles:
        config.quantiles = parse_grid(args.quantiles)
    logger.info(
        "scenario %d: %d replications per grid point, methods %s, seed %d",
        config.scenario, config.reps, ",".join(config.methods), config.effective_seed,
    )
    result = sweep(config)
    write_table(args.out, result.to_frame())
    return 0


def cmd_stability(args: Namespace) -> int:
    sizes: List[int] = [int(v) for v in _split_list(args.test_sizes) or ("5", "50", "200")]
    if any(m < 1 for m in sizes) or args.n_cal < 1 or args.draws < 2:
        raise ValidationError("test sizes and n-cal must be positive, draws at least 2")
    rows = rvalue_stability(
        test_sizes=sizes,
        n_cal=args.n_cal,
        base_score=args.score,
        draws=args.draws,
        seed=resolve_seed(args.seed),
    )
    write_table(args.out, pd.DataFrame([r.__dict__ for r in rows]))
    return 0
