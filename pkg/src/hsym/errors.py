"""Exception types shared across the package."""


class HsymError(Exception):
    """Base class for all package-specific errors."""


class AlgebraMismatch(HsymError):
    """Operands live on different site algebras or site counts."""


class DimensionMismatch(HsymError):
    """Dense objects of incompatible dimension were combined."""


class DimensionOverflow(HsymError):
    """Requested dense realization exceeds the configured cap."""


class NonHermitian(HsymError):
    """An operation requiring a Hermitian operator received one that is not."""


class EmptyGenerators(HsymError):
    """A sequence builder was called with no generators."""


class ConditionViolated(HsymError):
    """A commutation condition required by a shortened protocol fails.

    Carries the measured relative commutator norm in ``norm``.
    """

    def __init__(self, message, norm):
        super().__init__(f"{message} (relative commutator norm {norm:.3e})")
        self.norm = norm


class LeadingOrderMismatch(HsymError):
    """Leading effective orders of two sub-sequences disagree."""

    def __init__(self, message, norm):
        super().__init__(f"{message} (relative difference {norm:.3e})")
        self.norm = norm


class TruncationUnsupported(HsymError):
    """Symbolic series truncation order above the supported maximum."""


class BranchAmbiguity(HsymError):
    """An eigenphase of the period unitary sits too close to the log branch cut."""


class IllConditionedFit(HsymError):
    """Order extraction grid leads to an unusable fit."""


class SectorEmpty(HsymError):
    """A requested symmetry sector contains no basis states."""


class NormDrift(HsymError):
    """State norm drifted beyond tolerance during evolution."""


class AntiunitaryUnsupported(HsymError):
    """Real-space certification of antiunitary generators is not provided."""
