class LdpError(Exception):
    pass

class InvalidLawError(LdpError, ValueError):
    """Parameters that do not describe a valid waiting time/reward law."""

class DimensionError(LdpError, ValueError):
    pass

class InsufficientSamplesError(LdpError, ValueError):
    pass

class SimulationError(LdpError, RuntimeError):
    """A sampler hit its rejection cap or a trajectory hit the renewal guard."""

class UnimodalityError(LdpError, ArithmeticError):
    """Golden-section search saw an interior value above both ends of its bracket."""

class ConfigError(LdpError, ValueError):
    pass
