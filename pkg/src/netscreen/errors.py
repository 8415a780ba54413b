"""Exception types mapped to CLI exit codes."""


class ValidationError(ValueError):
    """Malformed input data: bad labels, bad edges, empty results. CLI exit 3."""


class DegeneracyError(ValueError):
    """Numerically degenerate input, e.g. a response level with no nodes. CLI exit 4."""
