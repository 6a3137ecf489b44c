"""Exception hierarchy shared by the simulator modules."""


class LocsimError(Exception):
    """Base class for all errors raised by locsim."""


class DomainError(LocsimError, ValueError):
    """A numeric parameter lies outside its physical domain."""


class StructuralError(LocsimError, ValueError):
    """Shapes, mode indices or orderings are inconsistent."""


class NetlistError(LocsimError, ValueError):
    """Parse error in a netlist; always carries the offending line number."""

    def __init__(self, message, lineno, source=None):
        self.message = message
        self.lineno = lineno
        self.source = source
        where = f"{source}:{lineno}" if source else f"line {lineno}"
        super().__init__(f"{where}: {message}")


class BindingError(LocsimError, ValueError):
    """Parameter binding does not match the circuit's declared parameters."""


class ModelError(LocsimError, ValueError):
    """Inputs violate a modelling assumption (e.g. a lossy output distribution)."""


class ConfigError(LocsimError, ValueError):
    """Invalid or inconsistent experiment configuration."""
