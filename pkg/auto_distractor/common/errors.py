class ContractViolationError(ValueError):
    """Raised when a caller breaks an operation's precondition."""
    pass


class SpanError(ValueError):
    """Raised when an answer span is empty or falls outside its text."""
    pass
