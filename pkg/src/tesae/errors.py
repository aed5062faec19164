"""Exception hierarchy shared across the package."""


class TesaeError(Exception):
    """Base class for all errors raised by this package."""


class TermSyntaxError(TesaeError, SyntaxError):
    """Malformed tree term, grammar file or corpus line.

    ``offset`` is the 0-based character offset into the offending text,
    ``lineno`` the 1-based line number when the text came from a file.
    """

    def __init__(self, message, offset=None, lineno=None):
        self.detail = message
        where = []
        if lineno is not None:
            where.append(f"line {lineno}")
        if offset is not None:
            where.append(f"offset {offset}")
        text = f"{message} ({', '.join(where)})" if where else message
        super().__init__(text)
        self.msg = text
        self.offset = offset
        self.lineno = lineno

    def __str__(self):
        return self.msg


class GrammarError(TesaeError, ValueError):
    pass


class DeterminismError(GrammarError):
    pass


class UnproductiveError(GrammarError):
    pass


class MissingStartError(GrammarError):
    pass


class NotInLanguage(TesaeError, ValueError):
    pass


class ReplayError(TesaeError, ValueError):
    pass


class DegenerateMatrixError(TesaeError, ArithmeticError):
    pass


class EmptyAllowedError(TesaeError, ValueError):
    pass


class SingularError(TesaeError, ArithmeticError):
    pass


class BudgetError(TesaeError, ValueError):
    pass


class EmptyError(TesaeError, ValueError):
    pass


class ModelFormatError(TesaeError, ValueError):
    pass


class VersionError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


class SchemaError(ModelFormatError):
    pass
