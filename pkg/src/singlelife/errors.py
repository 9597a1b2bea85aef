"""Exception taxonomy shared by all modules.

The CLI maps these onto stable exit codes: config/contract problems -> 2,
missing data channels -> 3, numeric failures (NaN/Inf) -> 4.
"""


class SingleLifeError(Exception):
    """Base class for all package errors."""


class ConfigError(SingleLifeError):
    """Invalid configuration: bad dimensions, unknown keys, infeasible setups."""


class ContractError(SingleLifeError):
    """A documented precondition or API contract was violated by the caller."""


class DimensionError(ConfigError):
    """Tensor/array shapes do not line up."""


class EmptyIndexError(ContractError):
    """A pair-mining run produced no pairs at all."""


class ChannelError(SingleLifeError):
    """A required data channel (pose, depth, flow, visibility) is missing."""


class NumericError(SingleLifeError):
    """A numeric invariant broke: NaN/Inf values, aborted optimizer step."""
