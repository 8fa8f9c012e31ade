from typing import Iterable, List, Optional


class FasiError(Exception):
    """Base class for every error raised by the toolkit. Carries the CLI exit code."""

    exit_code = 4


class FormatError(FasiError):
    """Input file or table does not follow the expected schema."""

    exit_code = 2


class ValidationError(FasiError):
    """A record or a configuration value breaks a domain invariant."""

    exit_code = 3

    def __init__(self, reason: str, record_id: Optional[str] = None):
        self.reason = reason
        self.record_id = record_id
        if record_id is None:
            super().__init__(reason)
        else:
            super().__init__(f"{reason} (record id={record_id})")


class SplitSizeError(ValidationError):
    """Requested partition sizes exceed the population."""


class DegeneratePointError(ValidationError):
    """Every mixture density vanishes at the evaluated point."""


class SingleClassError(ValidationError):
    """Training data carries fewer than two distinct labels."""


class MissingTruthError(ValidationError):
    """Selected records have no true label to evaluate against."""

    def __init__(self, ids: Iterable[str]):
        self.ids: List[str] = [str(i) for i in ids]
        preview = ", ".join(self.ids[:10])
        more = "" if len(self.ids) <= 10 else f" (+{len(self.ids) - 10} more)"
        super().__init__(f"missing truth for selected records: {preview}{more}")


class InvariantViolation(FasiError):
    """An internal post-condition failed; indicates a bug rather than bad input."""

    exit_code = 4
