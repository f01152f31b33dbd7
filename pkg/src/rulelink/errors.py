"""Exception hierarchy shared by all modules.

The CLI maps these onto exit codes: input problems (``ParseError``,
``ValidationError``) exit with 2, ``ContractError`` with 3.
"""


class RulelinkError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(RulelinkError, ValueError):
    """A file or string does not follow its grammar."""

    def __init__(self, message: str, path=None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class UnsupportedRuleError(ParseError):
    """A syntactically valid rule that is not of type C, AC1 or AC2."""


class ValidationError(RulelinkError, ValueError):
    """Input is well-formed but semantically inconsistent."""


class ContractError(RulelinkError, ValueError):
    """A caller broke an operation's precondition (bad id, mismatched relation, ...)."""
