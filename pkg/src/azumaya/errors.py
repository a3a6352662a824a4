"""Exception hierarchy.

Every error raised by the library derives from :class:`AzumayaError`.  Errors
describing a property of the mathematical input (non-commuting matrices, a
pole at a support point, ...) derive from :class:`DomainError`; errors about
malformed documents derive from :class:`InputError`.  The CLI maps the former
to exit code 1 and the latter to exit code 2.
"""

from __future__ import annotations


class AzumayaError(Exception):
    """Base class for all library errors."""


class DomainError(AzumayaError):
    """The input is well formed but fails a mathematical requirement."""


class InputError(AzumayaError):
    """The input document or argument list is malformed."""


class SingularBasis(DomainError):
    """Generalized eigenvector assembly is numerically rank deficient."""


class NotCommuting(DomainError):
    """Matrices that must commute have a commutator above tolerance."""


class NonRealSpectrum(DomainError):
    """An eigenvalue has an imaginary part above tolerance."""


class DimensionMismatch(DomainError):
    """Operand shapes are incompatible."""


class PoleAtPoint(DomainError):
    """A rational function has a vanishing denominator at the base point."""


class PoleAtSupport(PoleAtPoint):
    """The function to evaluate is undefined at a support point."""


class OrderTooHigh(DomainError):
    """Requested jet order exceeds the configured cap."""


class BasePointMismatch(DomainError):
    """Jets at different base points cannot be combined."""


class DegreeMismatch(DomainError):
    """A form of the wrong degree was supplied."""


class NotADerivation(DomainError):
    """Action data is not a derivation compatible with the splitting."""


class FiberNotAdmissible(DomainError):
    """A fiber of a curve map fails admissibility."""

    def __init__(self, x: float, reason: str):
        super().__init__(f"fiber at x={x!r} is not admissible: {reason}")
        self.x = x
        self.reason = reason


class TrackingAmbiguous(DomainError):
    """Two track assignments tie within tolerance."""


class MonodromyMismatch(DomainError):
    """Monodromy permutation is incompatible with the cover."""


class HypothesesNotMet(DomainError):
    """Push-forward connection hypotheses fail on a component."""

    def __init__(self, component: int, reason: str):
        super().__init__(f"component {component}: {reason}")
        self.component = component
        self.reason = reason


class DimensionCondition(DomainError):
    """Base and target dimensions violate the required relation."""


class OutOfRange(DomainError):
    """Family parameter outside its declared range."""


class ParseError(InputError):
    """Document is not valid UTF-8 JSON."""


class SchemaError(InputError):
    """Document violates the schema; ``path`` is a JSON pointer."""

    def __init__(self, path: str, message: str = ""):
        super().__init__(f"{path}: {message}" if message else path)
        self.path = path
        self.message = message


class VersionUnsupported(InputError):
    """Document version is not recognized."""
