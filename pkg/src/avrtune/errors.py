"""Exception types raised across the package."""


class AvrTuneError(Exception):
    """Base class for all package errors."""


class PoleOnAxis(AvrTuneError):
    """Frequency response requested at (or numerically on) a pole."""


class DegenerateLoop(AvrTuneError):
    """Feedback composition produced an identically zero denominator."""


class ConvergenceFailure(AvrTuneError):
    """Root finder residual stayed above tolerance."""


class SingularResponse(AvrTuneError):
    """Effective open loop undefined because 1 - G_cl vanishes."""


class NoGainCrossover(AvrTuneError):
    """Loop magnitude never crosses unity in the scanned band."""


class Divergence(AvrTuneError):
    """Chaotic map state left its attractor basin."""


class ImproperSystem(AvrTuneError):
    """Numerator degree exceeds denominator degree."""


class StepTooLarge(AvrTuneError):
    """Integration step violates the RK4 stability bound."""


class ConfigError(AvrTuneError):
    """Invalid optimizer or run configuration."""


class DataFileError(AvrTuneError):
    """Bundled or user-supplied table file is missing or malformed."""
