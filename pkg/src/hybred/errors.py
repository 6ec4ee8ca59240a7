"""Exception hierarchy shared across the package."""


class HybredError(Exception):
    """Base class for all package errors."""


class ExprSyntaxError(HybredError):
    """Malformed expression source. Carries a 0-based character offset."""

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at offset {position})")
        self.position = position


class UnknownNameError(HybredError):
    """Identifier not among the declared variables/parameters/functions."""

    def __init__(self, name: str, position: int):
        super().__init__(f"unknown name {name!r} (at offset {position})")
        self.name = name
        self.position = position


class DomainError(HybredError):
    """Evaluation left the real domain (division by zero, sqrt of negative, ...)."""


class NotSeparableError(HybredError):
    """Leapfrog requested for a system not declared separable."""


class DimensionMismatchError(HybredError):
    """Inconsistent array/vector dimensions."""


class ReCrossingError(HybredError):
    """Post-impact state still moves into the guard (would re-trigger immediately)."""


class ZenoSuspectedError(HybredError):
    """Impact count or impact spacing violated the Zeno safeguards.

    Carries the partial flow accumulated before the abort.
    """

    def __init__(self, message: str, flow=None):
        super().__init__(message)
        self.flow = flow


class NotConstantError(HybredError):
    """Cocycle samples are point-dependent beyond tolerance."""


class TangencyViolationError(HybredError):
    """Group action does not map the guard surface into itself."""


class EmptyLevelSetError(HybredError):
    """No admissible guard points found on the requested momentum level."""


class UnsupportedIsotropyError(HybredError):
    """Nontrivial isotropy subgroup: quotient charts are out of scope."""


class SingularSelectionError(HybredError):
    """Requested free coordinates do not determine the bound ones."""


class DegenerateReducedFormError(HybredError):
    """Pulled-back two-form is singular (bad chart or non-symplectic slice)."""


class LevelMismatchError(HybredError):
    """Impact image left the expected momentum level set."""


class StructureMismatchError(HybredError):
    """Compared flows disagree structurally (impact counts or chart sequence)."""


class SpecParseError(HybredError):
    """System specification file is not well-formed JSON. Carries a location."""


class ValidationError(HybredError):
    """System specification failed validation."""
