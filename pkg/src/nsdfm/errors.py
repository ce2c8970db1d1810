"""Exception hierarchy. The CLI maps each class to an exit code."""


class NsdfmError(Exception):
    exit_code = 1


class ConfigError(NsdfmError, ValueError):
    exit_code = 2


class DataError(NsdfmError, ValueError):
    exit_code = 3


class EstimationError(NsdfmError, ArithmeticError):
    exit_code = 4


class SelectionError(EstimationError):
    pass


class IdentificationError(EstimationError):
    pass
