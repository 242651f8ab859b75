"""Exception types raised across terraseg."""


class TerrasegError(Exception):
    """Base class for every error terraseg raises on purpose."""


class ShapeError(TerrasegError, ValueError):
    pass


class ContractError(TerrasegError, ValueError):
    """A documented precondition was violated (non-scalar loss, non-binary target...)."""


class ConfigurationError(TerrasegError, ValueError):
    pass


class DatasetError(TerrasegError):
    pass


class ImageReadError(TerrasegError, OSError):
    """A file could not be decoded as an image."""


class FormatError(TerrasegError, ValueError):
    pass


class VersionError(FormatError):
    pass


class IntegrityError(TerrasegError, ValueError):
    """Checkpoint contents are inconsistent or truncated."""


class TrainingDiverged(TerrasegError, RuntimeError):
    pass
