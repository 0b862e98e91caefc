"""Exception types shared across the package."""


class ShapeMismatchError(ValueError):
    """Operand shapes are incompatible for the requested operation."""


class NonFiniteError(ValueError):
    """An input or result contains NaN or infinite entries."""


class ZeroNormError(ValueError):
    """A reference quantity that must be nonzero (norm, spectrum) is zero."""


class RankError(ValueError):
    """A requested rank, sketch width or rank budget is out of range."""


class ProfileError(ValueError):
    """A hardware profile file failed to parse or violated an invariant."""


class ConfigError(ValueError):
    """A benchmark configuration is contradictory or malformed."""


class FileFormatError(ValueError):
    """A matrix or factor container file is corrupt or not of the expected type."""


class VerificationError(RuntimeError):
    """A benchmark run violated its declared error bound."""
