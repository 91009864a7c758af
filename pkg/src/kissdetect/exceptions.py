class ValidationError(ValueError):
    """Input violates a documented precondition."""


class FormatError(ValueError):
    """A binary or text file does not follow its declared layout."""
