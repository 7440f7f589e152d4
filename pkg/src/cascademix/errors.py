"""Exception types raised across the package."""


class CascadeMixError(Exception):
    """Base class for package errors."""


class ValidationError(CascadeMixError, ValueError):
    """Input failed a domain invariant (shape, range, support)."""


class SourceNode(CascadeMixError, ValueError):
    """Node has no strictly earlier activated node, so it has no activation term."""


class DegenerateData(CascadeMixError, ValueError):
    """No cascade carries transmission information (fewer than two activations)."""


class EmptySupport(CascadeMixError, ValueError):
    """Reference network has no positive entry to normalize against."""


class GenerationFailure(CascadeMixError, RuntimeError):
    """A generator could not meet its target within the retry budget."""


class SvdFailure(CascadeMixError, RuntimeError):
    """SVD did not converge during a nuclear-norm projection."""
