"""Exception taxonomy shared by all synmt modules."""


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class DataError(ValueError):
    """Input data is malformed (bad treebank line, cyclic heads, empty corpus...)."""


class ConfigError(ValueError):
    """Experiment configuration failed validation."""


class StateError(RuntimeError):
    """Operation called on an object in the wrong mode or state."""
