"""Exception hierarchy shared by all engine modules."""


class EngineError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(EngineError):
    """Tensor dimensions are incompatible with the requested operation."""


class ConfigError(EngineError):
    """A graph or layer configuration is structurally invalid."""


class FormatError(EngineError):
    """A container or image file does not follow its declared format."""


class CorruptionError(EngineError):
    """A container file is truncated or fails its checksum."""


class UsageError(EngineError):
    """An API or CLI call violates its contract."""


class DegenerateMapError(EngineError):
    """A metric input is degenerate (all-zero map, empty fixation set)."""


class BindError(EngineError):
    """Base for weight-binding failures; carries the offending layer names."""

    def __init__(self, message: str, names: list[str]):
        super().__init__(f"{message}: {', '.join(names)}")
        self.names = list(names)


class MissingWeightError(BindError):
    def __init__(self, names: list[str]):
        super().__init__("missing weight entries", names)


class ExtraWeightError(BindError):
    def __init__(self, names: list[str]):
        super().__init__("extra weight entries not used by the graph", names)


class ShapeMismatchError(BindError):
    def __init__(self, names: list[str]):
        super().__init__("weight entries with mismatched dims", names)
