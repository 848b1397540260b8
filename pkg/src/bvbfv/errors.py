"""Exception hierarchy for the workbench.

Every mathematically meaningful failure gets its own class so callers
(and the CLI exit-code logic) can distinguish bad input from a genuine
mathematical verdict.
"""


class BVError(Exception):
    """Base class for all workbench errors."""


class DuplicateName(BVError):
    pass


class ReservedName(BVError):
    pass


class GeneratorCapExceeded(BVError):
    pass


class RegistryMismatch(BVError):
    pass


class WindowMismatch(BVError):
    """Hbar-series operands carry incompatible truncation windows."""


class LaurentWindowExceeded(BVError):
    pass


class PairingIncomplete(BVError):
    """A generator appearing in the input has no symplectic partner."""


class InvalidPairing(BVError):
    """The pair list is not a perfect pairing (duplicate or self-paired slots)."""


class OddPairingRequired(BVError):
    pass


class MissingBoundaryData(BVError):
    pass


class NotASplitting(BVError):
    """A Darboux pair straddles the requested bulk/boundary-leaf partition."""


class GhostDegreeMismatch(BVError):
    pass


class TruncationUnsound(BVError):
    """The differential leaves the truncated monomial span.

    Carries the offending monomial (rendered) so the caller can report it.
    """

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class ClosednessFailure(BVError):
    """An order-by-order right-hand side failed its exact closedness check.

    This is never expected on valid input; it signals an internal sign bug.
    """


class NotClosed(BVError):
    pass


class ClassicalMasterFailure(BVError):
    pass


class InvalidSource(BVError):
    pass


class InvalidHodge(BVError):
    pass


class NotManinTriple(BVError):
    pass


class ContractionInvalid(BVError):
    pass


class ExpressionError(BVError):
    """Parse failure; carries a 1-based character position for diagnostics."""

    def __init__(self, message, position=None):
        super().__init__(message)
        self.position = position


class UnknownIdentifier(ExpressionError):
    pass


class NegativeExponent(ExpressionError):
    pass
