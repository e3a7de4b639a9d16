"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class TNetError(Exception):
    exit_code = 1


class ShapeError(TNetError, ValueError):
    pass


class ConfigError(TNetError, ValueError):
    pass


class StateError(TNetError, RuntimeError):
    pass


class ModeError(StateError):
    pass


class NumericError(TNetError, ArithmeticError):
    exit_code = 3


class DataError(TNetError, IOError):
    exit_code = 2
