"""Exception types shared across the package."""


class ValidationError(ValueError):
    """A value violates a domain invariant."""


class FormatError(ValueError):
    """A document could not be parsed or does not match its schema.

    ``path`` is a JSON-pointer-like location (``entities[2].box.center``) or a
    ``line N`` marker for line-oriented formats.
    """

    def __init__(self, message: str, path: str | None = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class GeometryError(ValueError):
    """Degenerate geometric configuration (e.g. an element placed at the eye)."""


class InfeasibleError(RuntimeError):
    """The optimizer could not find any finite-cost candidate."""


class CapExceededError(RuntimeError):
    """Brute-force enumeration would exceed the configured candidate cap."""
