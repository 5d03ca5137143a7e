"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit with 2,
numerical failures with 3 and statistics starved of data with 4.
"""


class FluxsimError(Exception):
    """Base class for all package errors."""


class ConfigError(FluxsimError):
    """Invalid configuration file, unknown key, or inconsistent parameters."""


class TruncationTooLarge(ConfigError):
    """Requested Hilbert-space dimension exceeds the configured cap."""


class NumericalError(FluxsimError):
    """A computation failed or left its domain of validity."""


class MissingLabel(NumericalError):
    """A required dressed-state label is not present in the retained set."""


class TruncationEdge(NumericalError):
    """A quantity was requested too close to the truncation boundary."""


class NonPositiveKerr(NumericalError):
    """Bifurcation photon number needs a positive Kerr magnitude."""


class Bifurcated(NumericalError):
    """Steady state is bistable at the requested drive and detuning."""


class AboveBifurcation(NumericalError):
    """Requested photon number lies above the bifurcation point."""


class NoBracket(NumericalError):
    """Root bracketing failed; the target value is outside the reachable range."""


class FitDiverged(NumericalError):
    """A least-squares fit failed to converge.

    Carries the list of initializations that were tried so the caller can
    report them.
    """

    def __init__(self, message, attempts=None):
        super().__init__(message)
        self.attempts = attempts or []


class Unphysical(NumericalError):
    """Input lies outside the physical domain (e.g. population >= 1/2)."""


class InsufficientData(FluxsimError):
    """Not enough samples to produce a meaningful estimate."""


class InsufficientDwells(InsufficientData):
    """Fewer complete dwell intervals than the analysis requires."""


class InsufficientTriggers(InsufficientData):
    """Fewer trigger events than the decay averaging requires."""


class DegenerateFilter(UserWarning):
    """Latching windows overlap so strongly that switching is suppressed."""
