"""
Delimited-text and JSON files read and written by the command line. Every writer
has a matching reader so outputs re-parse through the same code.
"""

from dataclasses import replace
from typing import IO, Any, Dict, List, Optional, Sequence, Union
import json
import logging
import sys

import numpy as np
import pandas as pd

from ..constants import CSV_DELIMITER, FLOAT_FORMAT, SCORE_PREFIX
from .errors import FormatError
from .records import ClassSet, GroupSet, ScoreFrame, ScoreRecord, validate

logger = logging.getLogger(__name__)

PathLike = Union[str, IO[str], None]

RVALUE_COLUMNS = ["id", "group", "class", "score", "raw_r", "mono_r", "decision"]
SELECTION_COLUMNS = ["id", "group", "decision", "winning_r"]
CONFORMAL_COLUMNS = ["id", "score", "p", "q_raw", "q_mono", "decision"]


def _read_csv(path: PathLike, str_columns: Sequence[str] = ()) -> pd.DataFrame:
    try:
        df = pd.read_csv(
            path,
            sep=CSV_DELIMITER,
            dtype={c: str for c in str_columns},
            keep_default_na=False,
            encoding="utf-8",
        )
    except (OSError, UnicodeDecodeError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise FormatError(f"cannot read {path}: {e}")
    df.columns = [str(c).strip() for c in df.columns]
    return df


def _write_csv(path: PathLike, df: pd.DataFrame) -> None:
    target = sys.stdout if path in (None, "-") else path
    df.to_csv(target, sep=CSV_DELIMITER, index=False, float_format=FLOAT_FORMAT, lineterminator="\n")


def _require(df: pd.DataFrame, columns: Sequence[str], path: PathLike) -> None:
    missing = [c for c in columns if c not in df.columns]
    if missing:
        raise FormatError(f"{path}: missing column(s) {missing}")


def _numeric(df: pd.DataFrame, column: str, path: PathLike) -> np.ndarray:
    values = pd.to_numeric(df[column].replace("", np.nan), errors="coerce")
    bad = values.isna() & (df[column].astype(str) != "")
    if bad.any():
        row = int(np.flatnonzero(bad.to_numpy())[0])
        raise FormatError(f"{path}: column '{column}' row {row + 2} is not a number: {df[column].iloc[row]!r}")
    return values.to_numpy(dtype=float)


def score_classes(columns: Sequence[str]) -> List[str]:
    return [c[len(SCORE_PREFIX):] for c in columns if c.startswith(SCORE_PREFIX)]


def read_scores(
    path: PathLike,
    classes: Optional[Sequence[str]] = None,
    groups: Optional[Sequence[str]] = None,
    require_labels: bool = False,
    strict_labels: bool = True,
) -> ScoreFrame:
    """
    Score file: id, group, optional label, one score_<class> column per class.
    Empty labels mean unknown. Records are validated against the class and group sets;
    with strict_labels off, labels outside the class set are accepted.
    """
    df = _read_csv(path, ("id", "group", "label"))
    _require(df, ["id", "group"], path)
    present = score_classes(df.columns)
    extra = [c for c in df.columns if c not in ("id", "group", "label") and not c.startswith(SCORE_PREFIX)]
    if extra:
        raise FormatError(f"{path}: unexpected column(s) {extra}")
    if classes is None:
        classes = present
    missing = [c for c in classes if c not in present]
    if missing:
        raise FormatError(f"{path}: no score column for class(es) {missing}")
    if not classes:
        raise FormatError(f"{path}: no score_<class> columns")

    labels = df["label"].tolist() if "label" in df.columns else [""] * len(df)
    labels = [None if y == "" else y for y in labels]
    if require_labels and any(y is None for y in labels):
        raise FormatError(f"{path}: every row needs a label")
    scores = {c: _numeric(df, SCORE_PREFIX + c, path) for c in classes}

    records = [
        ScoreRecord(
            id=df["id"].iloc[i],
            group=df["group"].iloc[i],
            scores={c: float(scores[c][i]) for c in classes},
            label=labels[i],
        )
        for i in range(len(df))
    ]
    if records:
        group_set = GroupSet(tuple(groups) if groups else tuple(sorted(set(df["group"]))))
        checked = records if strict_labels else [replace(r, label=None) for r in records]
        validate(checked, ClassSet(tuple(classes)), group_set)
    logger.debug("read %d records from %s", len(records), path)
    return ScoreFrame.from_arrays(df["id"].tolist(), df["group"].tolist(), labels, scores)


def write_scores(path: PathLike, frame: ScoreFrame) -> None:
    df = pd.DataFrame({"id": frame.ids, "group": frame.groups})
    df["label"] = ["" if y is None else y for y in frame.labels]
    for c, s in frame.scores.items():
        df[SCORE_PREFIX + c] = s
    _write_csv(path, df)


def write_rvalue_table(path: PathLike, df: pd.DataFrame) -> None:
    _write_csv(path, df[RVALUE_COLUMNS])


def read_rvalue_table(path: PathLike) -> pd.DataFrame:
    df = _read_csv(path, ("id", "group", "class", "decision"))
    _require(df, RVALUE_COLUMNS, path)
    for column in ("score", "raw_r", "mono_r"):
        df[column] = _numeric(df, column, path)
    return df


def write_selections(path: PathLike, df: pd.DataFrame) -> None:
    _write_csv(path, df[SELECTION_COLUMNS])


def read_selections(path: PathLike) -> pd.DataFrame:
    """id, group, decision (a class label or the indecision token); winning_r is optional."""
    df = _read_csv(path, ("id", "group", "decision"))
    _require(df, ["id", "group", "decision"], path)
    if "winning_r" in df.columns:
        df["winning_r"] = _numeric(df, "winning_r", path)
    if df["id"].duplicated().any():
        raise FormatError(f"{path}: duplicate id {df['id'][df['id'].duplicated()].iloc[0]}")
    return df


def read_truth(path: PathLike) -> Dict[str, Optional[str]]:
    """id -> label from any file with id and label columns (a labeled score file works)."""
    df = _read_csv(path, ("id", "label"))
    _require(df, ["id", "label"], path)
    return {i: (None if y == "" else y) for i, y in zip(df["id"], df["label"])}


def write_conformal(path: PathLike, df: pd.DataFrame) -> None:
    _write_csv(path, df[CONFORMAL_COLUMNS])


def read_conformal(path: PathLike) -> pd.DataFrame:
    df = _read_csv(path, ("id",))
    _require(df, CONFORMAL_COLUMNS, path)
    for column in ("score", "p", "q_raw", "q_mono"):
        df[column] = _numeric(df, column, path)
    df["decision"] = df["decision"].astype(str).str.lower() == "true"
    return df


def write_table(path: PathLike, df: pd.DataFrame) -> None:
    _write_csv(path, df)


def read_table(path: PathLike, str_columns: Sequence[str] = ("method", "class", "group", "metric")) -> pd.DataFrame:
    return _read_csv(path, str_columns)


def write_json(path: PathLike, data: Dict[str, Any]) -> None:
    text = json.dumps(data, indent=2, sort_keys=False)
    if path in (None, "-"):
        sys.stdout.write(text + "\n")
        return
    with open(path, "w", encoding="utf-8") as f:
        f.write(text + "\n")


def read_json(path: str) -> Dict[str, Any]:
    try:
        with open(path, "r", encoding="utf-8") as f:
            return json.load(f)
    except (OSError, ValueError) as e:
        raise FormatError(f"cannot read {path}: {e}")


def write_report(path: PathLike, report) -> None:
    write_json(path, report.to_dict())


def read_report(path: str):
    from ..metrics import MetricsReport

    try:
        return MetricsReport.from_dict(read_json(path))
    except (KeyError, TypeError) as e:
        raise FormatError(f"{path}: not a metrics report ({e})")
