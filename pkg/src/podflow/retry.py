"""Retry policy and the shared retry loop.

Used by the engine for step attempts and by the consortium for member
agents. A ``RateLimited`` error's retry-after hint wins over the policy
backoff when it is larger.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Callable, TypeVar

from .errors import PodflowError, RateLimited

T = TypeVar("T")

MAX_ATTEMPT_CEILING = 5


@dataclass(frozen=True)
class RetryPolicy:
    max_attempts: int = 1
    backoff_initial_s: float = 0.0
    backoff_multiplier: float = 1.0

    def __post_init__(self):
        if self.max_attempts < 1:
            raise ValueError("max_attempts must be >= 1")
        if self.backoff_multiplier < 1.0:
            raise ValueError("backoff_multiplier must be >= 1")

    def backoff_for(self, attempt: int) -> float:
        """Sleep before attempt ``attempt + 1`` (attempts count from 1)."""
        return self.backoff_initial_s * (self.backoff_multiplier ** (attempt - 1))

    def to_jsonable(self) -> dict:
        return {
            "max_attempts": self.max_attempts,
            "backoff_initial_s": self.backoff_initial_s,
            "backoff_multiplier": self.backoff_multiplier,
        }

    @classmethod
    def from_jsonable(cls, doc: dict) -> "RetryPolicy":
        return cls(
            max_attempts=int(doc.get("max_attempts", 1)),
            backoff_initial_s=float(doc.get("backoff_initial_s", 0.0)),
            backoff_multiplier=float(doc.get("backoff_multiplier", 1.0)),
        )


def retry_call(fn: Callable[[], T], policy: RetryPolicy, sleep=time.sleep) -> T:
    """Run ``fn`` under the policy, re-raising the last error on exhaustion."""
    for attempt in range(1, policy.max_attempts + 1):
        try:
            return fn()
        except PodflowError as err:
            if not err.retryable or attempt == policy.max_attempts:
                raise
            pause = policy.backoff_for(attempt)
            if isinstance(err, RateLimited):
                pause = max(pause, err.retry_after_s)
            if pause > 0:
                sleep(pause)
    raise AssertionError("unreachable")
