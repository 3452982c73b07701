"""Exception types shared across the engine."""

from __future__ import annotations


class HypologError(Exception):
    """Base class for all errors raised by this package."""


class NegativeTimeError(HypologError):
    """A substitution instantiated a time term below zero.

    The temporal sort is the natural numbers; callers treat the offending
    instance as nonexistent and discard it.
    """


class SortError(HypologError):
    """A term was used at a position of the wrong sort."""


class SignatureError(HypologError):
    """Inconsistent predicate signature (arity, temporal-ness or sorts)."""


class UnsafeRuleError(HypologError):
    """A rule violates safety: a head or negated variable has no positive
    binding occurrence in the body."""

    def __init__(self, message: str, rule=None, variable: str | None = None):
        super().__init__(message)
        self.rule = rule
        self.variable = variable


class ParseError(HypologError):
    """Syntax error with a source location."""

    def __init__(self, message: str, span=None):
        super().__init__(message)
        self.span = span

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        base = super().__str__()
        if self.span is not None:
            return f"{self.span}: {base}"
        return base


class StreamError(HypologError):
    """Malformed or out-of-contract stream input."""


class NotEligibleError(HypologError):
    """The query does not meet the preconditions of the requested
    compilation mode."""

    def __init__(self, message: str, classification=None):
        super().__init__(message)
        self.classification = classification


class LimitExceededError(HypologError):
    """A search limit was hit or a loop was detected during compilation.

    Carries whatever results were found before the limit tripped, plus a
    human-readable diagnosis (for loops: the repeating goal).
    """

    def __init__(self, message: str, partial=None, diagnosis: str | None = None):
        super().__init__(message)
        self.partial = partial if partial is not None else []
        self.diagnosis = diagnosis


class NotStratifiedError(HypologError):
    """Negation mode requires a T-stratified program and this one is not."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


class BudgetExceededError(HypologError):
    """The brute-force oracle exceeded its enumeration budget."""
