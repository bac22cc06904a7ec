"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of a function."""


class DegenerateChannelError(ValueError):
    """The channel vector carries no energy, so no codeword can be chosen."""


class ContractError(ValueError):
    """Inputs violate an ordering the caller is required to guarantee."""


class CalibrationError(RuntimeError):
    """No usable eta moments for the requested (N, B_prime)."""
