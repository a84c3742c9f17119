"""Exception taxonomy shared across pipeline stages.

InputError subclasses map to CLI exit code 1, ProviderError to exit code 2.
"""


class InputError(ValueError):
    """Bad or inconsistent user-supplied input (files, config, arguments)."""


class GraphLoadError(InputError):
    """Node/edge tables violate the graph file contract."""


class CohortError(InputError):
    """Cohort file or split request violates the cohort contract."""


class AlignmentError(InputError):
    """Entity alignment cannot proceed (e.g. unresolvable disease target)."""


class EvidenceError(InputError):
    """Evidence mining cannot produce a usable relevance/path set."""


class PromptError(InputError):
    """Template rendering failed (unbound placeholder, unknown template)."""


class ProviderError(RuntimeError):
    """LLM/embedding provider failed after retries, or scenario had no rule."""
