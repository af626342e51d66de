"""Exception hierarchy for the simulator"""


class ManetError(Exception):
    """Base class for every error raised by manetsim"""


class ConfigError(ManetError, ValueError):
    """Invalid scenario configuration or input file"""


class GeometryError(ManetError, ValueError):
    """Degenerate geometry: coincident points, collinear or coplanar references"""


class ConvergenceError(ManetError):
    """Iterative solver did not converge"""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class OutOfRangeError(ManetError):
    """Target beyond transmission range of the measuring node"""


class InsufficientDataError(ManetError, ValueError):
    """Not enough samples, readings, references or candidates"""


class TrackingError(ManetError):
    """Tracker cannot produce a heading or a zone"""


class TrustError(ManetError):
    """Trust/PKI protocol violation (bad role, unknown node, undecidable)"""


class ElectionError(ManetError):
    """An election produced no winner"""


class ExportError(ManetError):
    """Output could not be written"""


class LocalizationError(ManetError, ValueError):
    """Invalid localization input such as negative propagation times"""
