"""Exception hierarchy.

Every failure path raises one of these, named after the contract that
failed, so the CLI can map them onto its exit codes (contract failure 1,
configuration error 2, budget exceeded 3).
"""


class DiracTraceError(Exception):
    """Base class for all package errors."""


class ContractError(DiracTraceError):
    """A module contract (precondition, invariant, tolerance) was violated."""


class ConfigError(DiracTraceError):
    """Bad or inconsistent run configuration."""


class BudgetError(DiracTraceError):
    """A resource budget (enumeration cap, quadrature budget) was exceeded."""


class ClassificationError(ContractError):
    """Length or axis data requested for a non-hyperbolic group element."""


class SingularPairError(ContractError):
    """Point-pair prefactors evaluated at coincident points."""


class PresentationError(ContractError):
    """Surface presentation failed validation (relator, area, generator type)."""


class SpinStructureError(ContractError):
    """Multiplier system inconsistent with the requested weight parity."""


class AdmissibilityError(ContractError):
    """Test function violates an admissibility clause."""


class DomainError(ContractError):
    """Special-function argument outside the supported domain."""


class QuadratureError(ContractError):
    """Adaptive quadrature failed to reach the requested tolerance."""


class TailBoundError(ContractError):
    """Truncation tail bound exceeds the requested tolerance; raise the cutoff."""


class CacheError(ContractError):
    """Spectrum cache rejected (fingerprint or format mismatch)."""
