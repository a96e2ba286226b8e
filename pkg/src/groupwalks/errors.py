"""Exception taxonomy shared by all modules."""


class GroupwalksError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(GroupwalksError):
    """A group spec, policy, or experiment config is malformed."""


class UsageError(GroupwalksError):
    """An operation was called with operands it does not support."""


class ValidationError(GroupwalksError):
    """Input data failed a numeric validation rule (e.g. mass not 1)."""


class ResourceError(GroupwalksError):
    """A computation exceeded its configured element or memory budget."""

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial
