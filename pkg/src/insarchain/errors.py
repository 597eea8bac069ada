"""Exception hierarchy shared by all processing stages."""


class InsarChainError(Exception):
    """Base class for runtime failures inside the processing chain."""


class EmptyCatalog(InsarChainError):
    pass


class DisconnectedNetwork(InsarChainError):
    def __init__(self, components):
        self.components = [sorted(c) for c in components]
        sizes = ", ".join(str(len(c)) for c in self.components)
        super().__init__(
            f"pair graph has {len(self.components)} components (sizes {sizes}): "
            f"{self.components}"
        )


class DimensionMismatch(InsarChainError):
    pass


class DegenerateInput(InsarChainError):
    pass


class InfeasibleNetwork(InsarChainError):
    pass


class InsufficientPixels(InsarChainError):
    pass


class DegenerateGeometry(InsarChainError):
    pass


class RankDeficient(InsarChainError):
    pass


class InsufficientEpochs(InsarChainError):
    pass


class NoPixelsNearStation(InsarChainError):
    pass


class PixelOutsideGrid(InsarChainError):
    pass


class EmptyProduct(InsarChainError):
    pass


class IoFailure(InsarChainError):
    pass


class FormatError(InsarChainError):
    """An input file does not follow its documented format."""


class ConfigError(ValueError):
    """Invalid pipeline configuration; ``field`` names the offending key."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class StageError(InsarChainError):
    """Wraps a failure with the pipeline stage it happened in."""

    def __init__(self, stage, cause, hint=""):
        self.stage = stage
        self.cause = cause
        self.hint = hint
        msg = f"stage '{stage}' failed: {cause}"
        if hint:
            msg += f" (hint: {hint})"
        super().__init__(msg)


class ConstantElevation(UserWarning):
    """Elevation has no spatial variation; topographic delay is unidentifiable."""
