class RenderError(Exception):
    """Base class for rendering failures."""


class MissingInput(RenderError):
    """A required CSV is absent or empty."""


class SchemaMismatch(RenderError):
    """A CSV header does not match the recipe."""
