"""Exception types shared across the simulator."""


class ConfigError(ValueError):
    """Invalid configuration; the CLI maps this to exit status 2."""


class ContractViolation(RuntimeError):
    """A runtime precondition was broken; the CLI maps this to exit status 3."""


class DecodeError(ValueError):
    """A gossip message could not be decoded."""
