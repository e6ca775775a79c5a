"""Exception types shared across the package."""


class CoglError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CoglError):
    """Operands have incompatible shapes; the message names both."""


class ConfigError(CoglError):
    """A configuration value violates its documented range or contract."""


class GraphLoadError(CoglError):
    """A dataset file failed to parse; the message carries file/line context."""


class NumericalError(CoglError):
    """A computation produced NaN/Inf or otherwise left the finite domain."""


class ContractError(CoglError):
    """An API was called outside its documented contract (e.g. non-scalar loss)."""
