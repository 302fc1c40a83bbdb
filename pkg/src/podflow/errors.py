"""Error taxonomy shared by the engine, gateway, and pipeline.

Classification drives retries: the engine re-attempts a failed step iff
the raised error is a ``PodflowError`` with ``retryable=True``. Anything
else — including plain Python exceptions — is fatal for the step.
"""

from __future__ import annotations


class PodflowError(Exception):
    """Base error; ``retryable`` tells the engine whether to re-attempt."""

    retryable = False


# ---------------------------------------------------------------------------
# workflow / engine
# ---------------------------------------------------------------------------


class InvalidWorkflow(PodflowError):
    """The spec has validation findings and must not be executed."""


class InputSchemaMismatch(PodflowError):
    pass


class UnresolvedBinding(PodflowError):
    def __init__(self, name: str):
        super().__init__(f"binding source not available: {name}")
        self.name = name


class FatalStepError(PodflowError):
    """A step exhausted its attempts or hit a non-retryable error."""

    def __init__(self, step: str, cause: BaseException):
        super().__init__(f"step {step!r} failed: {cause.__class__.__name__}: {cause}")
        self.step = step
        self.cause = cause


# ---------------------------------------------------------------------------
# agent runtime
# ---------------------------------------------------------------------------


class ToolRoundsExceeded(PodflowError):
    pass


class MalformedToolCall(PodflowError):
    """The model's structured call failed schema validation.

    ``reason`` is one of: wrong_name, missing_required, type_mismatch,
    unknown_argument.
    """

    def __init__(self, reason: str, message: str = ""):
        super().__init__(message or reason)
        self.reason = reason


class OutputContractViolation(PodflowError):
    # Models occasionally emit malformed or prose-wrapped JSON; a plain
    # retry with the identical prompt is the mitigation, so retryable.
    retryable = True


# ---------------------------------------------------------------------------
# prompt store
# ---------------------------------------------------------------------------


class PromptNotFound(PodflowError):
    pass


class PromptPinMismatch(PodflowError):
    pass


class SourceUnreachable(PodflowError):
    retryable = True


class MissingVariable(PodflowError):
    def __init__(self, name: str):
        super().__init__(f"template placeholder has no variable: {name}")
        self.name = name


class ExtraVariable(PodflowError):
    def __init__(self, names):
        super().__init__(f"variables not used by template: {sorted(names)}")
        self.names = sorted(names)


# ---------------------------------------------------------------------------
# provider gateway
# ---------------------------------------------------------------------------


class AuthError(PodflowError):
    pass


class ProviderNotConfigured(PodflowError):
    pass


class RateLimited(PodflowError):
    retryable = True

    def __init__(self, message: str = "rate limited", retry_after_s: float = 0.0):
        super().__init__(message)
        self.retry_after_s = retry_after_s


class Timeout(PodflowError):
    retryable = True


class ProviderUnavailable(PodflowError):
    retryable = True


class MalformedProviderResponse(PodflowError):
    retryable = True


class StubExhausted(PodflowError):
    pass


# ---------------------------------------------------------------------------
# consortium
# ---------------------------------------------------------------------------


class QuorumNotReached(PodflowError):
    def __init__(self, succeeded: int, required: int):
        super().__init__(f"consortium quorum not reached: {succeeded} of {required}")
        self.succeeded = succeeded
        self.required = required


# ---------------------------------------------------------------------------
# pipeline
# ---------------------------------------------------------------------------


class FetchFailed(PodflowError):
    def __init__(self, message: str, retryable: bool = True):
        super().__init__(message)
        self.retryable = retryable


class NonHtmlContent(PodflowError):
    pass


class FeedUnparseable(PodflowError):
    pass


class StoreUnavailable(PodflowError):
    retryable = True


class BackendUnavailable(PodflowError):
    retryable = True


class BackendRejectedSpec(PodflowError):
    pass


class AuthFailed(PodflowError):
    pass


class BranchExists(PodflowError):
    pass


class HostUnavailable(PodflowError):
    retryable = True


class MissingArtifact(PodflowError):
    def __init__(self, name: str):
        super().__init__(f"artifact missing from content store: {name}")
        self.name = name
