"""Exception hierarchy shared across the package."""


class PromptEvoError(Exception):
    """Base class for every error raised by promptevo."""


# genome / template
class TemplateError(PromptEvoError):
    pass


class MissingSlotValue(PromptEvoError):
    pass


class MalformedMarkup(PromptEvoError):
    pass


class EmptyPool(PromptEvoError):
    pass


# memory
class TypeMismatch(PromptEvoError):
    pass


# llm gateway
class BackendUnavailable(PromptEvoError):
    """The backend failed permanently or after all retry attempts."""


class TransientBackendError(PromptEvoError):
    """Raised by backends for failures worth retrying (429, 5xx, transport)."""


class ContentEmpty(PromptEvoError):
    pass


class UnmatchedPattern(PromptEvoError):
    pass


# evolution
class PopulationTooSmall(PromptEvoError):
    pass


# evaluation
class LengthMismatch(PromptEvoError):
    pass


class NoAnswerFound(PromptEvoError):
    pass


class MalformedPromptFile(PromptEvoError):
    pass


class ConfigError(PromptEvoError):
    pass
