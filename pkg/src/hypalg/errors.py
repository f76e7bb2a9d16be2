"""Exception hierarchy.

Every error carries the CLI exit code it maps to, so the command layer can
translate failures without a lookup table.
"""


class HypergroupError(Exception):
    exit_code = 1


class ConfigError(HypergroupError):
    exit_code = 1


class UnknownPreset(ConfigError):
    pass


class InvalidParameter(ConfigError):
    pass


class TableExhausted(HypergroupError):
    exit_code = 3


class DegenerateTable(HypergroupError):
    exit_code = 2


class WindowTooSmall(ConfigError):
    pass


class OrderTooSmall(HypergroupError):
    exit_code = 3


class EigensolverFailure(HypergroupError):
    exit_code = 3


class NotL2(HypergroupError):
    """No alpha-mean of the form alpha / ||alpha||_2^2 exists at this character."""

    exit_code = 4


class OutsideDual(NotL2):
    """The point does not parametrize a bounded character."""
