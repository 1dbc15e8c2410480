"""Exception hierarchy.

Three families, matching the CLI exit codes:

* ``UsageError`` (exit 2): malformed input, bad parameters.
* ``MathFailure`` (exit 1): the input is well formed but violates a
  mathematical hypothesis (containment, persistence, transversality, ...).
* ``InternalBreach`` (exit 3): a consistency check that should never fail did.
"""

from __future__ import annotations


class EchelonError(Exception):
    exit_code = 3


class UsageError(EchelonError):
    exit_code = 2


class MathFailure(EchelonError):
    exit_code = 1


class InternalBreach(EchelonError):
    exit_code = 3


# --- usage --------------------------------------------------------------


class ParseError(UsageError):
    def __init__(self, location, message):
        self.location = location
        self.message = message
        super().__init__(f"{location}: {message}")


class VarTableMismatch(UsageError):
    pass


class BadParameters(UsageError):
    pass


class DimensionMismatch(UsageError):
    pass


class RankMismatch(UsageError):
    pass


class MapUnsupported(UsageError):
    pass


# --- arithmetic ---------------------------------------------------------


class NotDivisible(MathFailure):
    pass


class DivisionByZero(MathFailure, ZeroDivisionError):
    pass


class SingularMatrix(MathFailure):
    pass


class NotContained(MathFailure):
    pass


class NotFreeSplit(MathFailure):
    pass


class NotUnimodular(MathFailure):
    pass


# --- datum violations ---------------------------------------------------


class InvalidDatum(MathFailure):
    """Base for validation failures; instances double as report records."""

    kind = "invalid"

    def key(self):
        return (self.i, getattr(self, "j", -1))

    def as_dict(self):
        d = {"kind": self.kind, "i": self.i}
        if getattr(self, "j", None) is not None:
            d["j"] = self.j
        if self.detail:
            d["detail"] = self.detail
        return d


class ContainmentViolation(InvalidDatum):
    kind = "ContainmentViolation"

    def __init__(self, i, detail=""):
        self.i = i
        self.detail = detail
        super().__init__(f"ContainmentViolation(i={i}) {detail}".rstrip())


class EffectivityViolation(InvalidDatum):
    kind = "EffectivityViolation"

    def __init__(self, i, detail=""):
        self.i = i
        self.detail = detail
        super().__init__(f"EffectivityViolation(i={i}) {detail}".rstrip())


class CommonComponentViolation(InvalidDatum):
    kind = "CommonComponentViolation"

    def __init__(self, i, detail=""):
        self.i = i
        self.detail = detail
        super().__init__(f"CommonComponentViolation(i={i}) {detail}".rstrip())


class PersistenceViolation(InvalidDatum):
    kind = "PersistenceViolation"

    def __init__(self, i, j, detail=""):
        self.i = i
        self.j = j
        self.detail = detail
        super().__init__(f"PersistenceViolation(i={i}, j={j}) {detail}".rstrip())


class NotFullRank(InvalidDatum):
    kind = "NotFullRank"

    def __init__(self, i, detail=""):
        self.i = i
        self.detail = detail
        super().__init__(f"NotFullRank(i={i}) {detail}".rstrip())


class HypothesisFail(MathFailure):
    def __init__(self, i, column):
        self.i = i
        self.column = column
        super().__init__(f"HypothesisFail(i={i}, column={column})")


class NotTransverse(MathFailure):
    pass


# --- internal breaches --------------------------------------------------


class ClosedFormMismatch(InternalBreach):
    pass


class AuditFailure(InternalBreach):
    def __init__(self, message, witness=None):
        self.witness = witness
        super().__init__(message)


class ExtensionFail(InternalBreach):
    pass


class DecompositionFailure(InternalBreach):
    pass
