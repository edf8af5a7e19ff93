"""Exception types shared across the package."""

from __future__ import annotations


class QhistError(Exception):
    """Base class for all qhist-specific errors."""


class DimensionCapExceeded(QhistError):
    """A tensor product or model would exceed the configured dimension cap."""


class InconsistentFamily(QhistError):
    """Probabilities were requested for a family that fails the consistency test.

    Carries the consistency report so callers can surface the witness pair.
    """

    def __init__(self, report):
        self.report = report
        pair = report.witness
        super().__init__(
            f"family is not consistent: |D({pair[0]}, {pair[1]})| = "
            f"{report.max_offdiag:.6e} exceeds tol = {report.tol:.6e}"
        )


class NullOutcome(QhistError):
    """Conditioning on a history whose weight is numerically zero."""


class NoncommutingSlots(QhistError):
    """A common refinement was requested for families with noncommuting slots."""

    def __init__(self, time_index: int, pair: tuple[str, str], witness: float):
        self.time_index = time_index
        self.pair = pair
        self.witness = witness
        super().__init__(
            f"projectors {pair[0]!r} and {pair[1]!r} at time slot {time_index} "
            f"do not commute (witness {witness:.6e})"
        )


class BudgetExceeded(QhistError):
    """A combinatorial search would exceed its configured budget."""


class ScenarioFormatError(QhistError):
    """A scenario file failed to parse or validate; message carries diagnostics."""
