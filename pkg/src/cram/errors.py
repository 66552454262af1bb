"""Exception hierarchy; each family maps to a CLI exit code."""


class CramError(Exception):
    exit_code = 1
    kind = "error"


class InputError(CramError, ValueError):
    """Malformed user input: bad CSV cells, missing columns, bad flags."""

    exit_code = 2
    kind = "input"


class ContractError(CramError, ValueError):
    """A precondition of an operation was violated."""

    exit_code = 3
    kind = "contract"


class NumericError(CramError, ArithmeticError):
    exit_code = 4
    kind = "numeric"


class DegenerateSmootherError(NumericError):
    def __init__(self, row, message=None):
        self.row = row
        super().__init__(message or f"kernel mass vanishes at evaluation row {row}")


class PersistenceError(CramError, OSError):
    """Unreadable, truncated or incompatible model/data files."""

    exit_code = 5
    kind = "io"


class FormatVersionError(PersistenceError):
    pass
