"""Exception hierarchy; exit_code is what the CLI returns for each class."""


class CirsimplexError(Exception):
    exit_code = 1


class ParameterError(CirsimplexError, ValueError):
    """Invalid argument to a library function."""

    exit_code = 2


class ConfigError(CirsimplexError):
    """Bad configuration file, unknown key, or unusable CLI flag combination."""

    exit_code = 2


class DataError(CirsimplexError):
    """Malformed or inconsistent input data (corpus files, traces)."""

    exit_code = 3


class DomainError(CirsimplexError, ArithmeticError):
    """Numerical-domain failure: diverging MGF, overflow, degenerate state."""

    exit_code = 4
