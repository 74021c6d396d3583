"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class FieldMapError(ValidationError):
    """Malformed field-map document; carries the 1-based line and column."""

    def __init__(self, message, line, column=1):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class UnreachableTargetError(ValidationError):
    pass


class UndefinedMetricError(ValueError):
    pass


class UnreachableCellError(ValidationError):
    def __init__(self, cells):
        self.cells = sorted(cells)
        listed = ", ".join(f"({r}, {c})" for r, c in self.cells)
        super().__init__(f"unreachable cell(s): {listed}")


class InstanceTooLargeError(ValidationError):
    pass
