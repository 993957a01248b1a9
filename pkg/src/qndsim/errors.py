"""Exception types shared across the package."""


class QndsimError(Exception):
    """Base class for all package errors; carries a machine-readable category."""

    category = "runtime"


class ConfigError(QndsimError, ValueError):
    """Invalid configuration value, unknown key, or infeasible parameter combination."""

    category = "config"


class TruncationError(ConfigError):
    """Photon-number cutoff too small for the requested mean photon number."""

    category = "truncation"


class SubsystemError(QndsimError, KeyError):
    """Unknown subsystem label or index."""

    category = "subsystem"


class ZeroProbabilityError(QndsimError, ValueError):
    """Conditioning on an outcome of zero probability; the conditional is undefined."""

    category = "conditioning"
