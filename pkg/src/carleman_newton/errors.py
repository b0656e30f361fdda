class ConfigError(ValueError):
    """Invalid experiment configuration."""

    def __init__(self, msg: str, line: int | None = None, key: str | None = None):
        self.msg, self.line, self.key = msg, line, key
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


class NumericalError(RuntimeError):
    """A computation failed or produced non-finite values."""


class CFLError(NumericalError):
    pass


class BlowUpError(NumericalError):
    pass


class SolverError(NumericalError):
    pass
