"""Multi-model draft generation and reasoning-agent consolidation.

A consortium fans one generation task across heterogeneous model
bindings; a dedicated reasoning agent then consolidates the labeled
drafts. Drafts are embedded in the consolidation prompt inside
digest-derived fences so that draft *content* — which ultimately comes
from scraped web text — cannot impersonate the prompt structure.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence

from .agents import AgentDefinition, run_agent
from .canonical import digest_text
from .errors import PodflowError, QuorumNotReached
from .gateway import Gateway
from .prompts import PromptStore
from .retry import RetryPolicy, retry_call


@dataclass(frozen=True)
class Draft:
    agent_name: str
    binding_summary: str
    text: str
    digest: str

    def to_jsonable(self) -> dict:
        return {
            "agent_name": self.agent_name,
            "binding": self.binding_summary,
            "text": self.text,
            "digest": self.digest,
        }


def _fence_token(draft: Draft) -> str:
    """Shortest digest prefix whose fence lines cannot occur in the text."""
    for length in (12, 16, 24, 32, 48, 64):
        token = draft.digest[:length]
        begin = _begin_line(draft.agent_name, token)
        end = _end_line(draft.agent_name, token)
        if begin not in draft.text and end not in draft.text:
            return token
    counter = 1
    while True:
        token = f"{draft.digest}-{counter}"
        if _begin_line(draft.agent_name, token) not in draft.text and _end_line(draft.agent_name, token) not in draft.text:
            return token
        counter += 1


def _begin_line(agent_name: str, token: str) -> str:
    return f"<<<BEGIN DRAFT agent={agent_name} fence={token}>>>"


def _end_line(agent_name: str, token: str) -> str:
    return f"<<<END DRAFT agent={agent_name} fence={token}>>>"


def fenced_draft_block(draft: Draft) -> str:
    token = _fence_token(draft)
    return "\n".join([_begin_line(draft.agent_name, token), draft.text, _end_line(draft.agent_name, token)])


@dataclass(frozen=True)
class DraftSet:
    topic: str
    drafts: tuple[Draft, ...]

    def __post_init__(self):
        names = [d.agent_name for d in self.drafts]
        if names != sorted(names):
            raise ValueError("drafts must be ordered lexically by agent name")
        if len(names) != len(set(names)):
            raise ValueError("draft agent names must be unique")

    def digests(self) -> list[str]:
        return [d.digest for d in self.drafts]

    def agent_names(self) -> list[str]:
        return [d.agent_name for d in self.drafts]

    def as_prompt_text(self) -> str:
        return "\n\n".join(fenced_draft_block(d) for d in self.drafts)

    def to_jsonable(self) -> dict:
        return {"topic": self.topic, "drafts": [d.to_jsonable() for d in self.drafts]}


@dataclass(frozen=True)
class ConsolidatedScript:
    text: str
    source_agents: tuple[str, ...]
    reasoning_binding: str
    draft_digests: tuple[str, ...]

    def to_jsonable(self) -> dict:
        return {
            "text": self.text,
            "source_agents": list(self.source_agents),
            "reasoning_binding": self.reasoning_binding,
            "draft_digests": list(self.draft_digests),
        }


def fan_out(
    agents: Sequence[AgentDefinition],
    variables: Mapping[str, object],
    prompt_store: PromptStore,
    gateway: Gateway,
    retry: Optional[RetryPolicy] = None,
    quorum: Optional[int] = None,
) -> DraftSet:
    """Run every agent on the same variables, concurrently.

    Members are plain generation agents (no tools). Individual retryable
    failures are retried per policy; the set is returned only if at least
    ``quorum`` members (default: all) succeed. Output order is lexical by
    agent name regardless of completion order.
    """
    if not agents:
        raise ValueError("consortium needs at least one agent")
    for agent in agents:
        if agent.tool is not None:
            raise ValueError(f"consortium member {agent.name} must not carry a tool")
    policy = retry or RetryPolicy()
    required = len(agents) if quorum is None else quorum

    def one(agent: AgentDefinition) -> Draft:
        result = retry_call(lambda: run_agent(agent, variables, prompt_store, gateway), policy)
        return Draft(
            agent_name=agent.name,
            binding_summary=agent.binding.summary(),
            text=result.text,
            digest=digest_text(result.text),
        )

    drafts: list[Draft] = []
    failures: list[PodflowError] = []
    with ThreadPoolExecutor(max_workers=len(agents)) as pool:
        for outcome in pool.map(lambda a: _capture(one, a), agents):
            if isinstance(outcome, Draft):
                drafts.append(outcome)
            else:
                failures.append(outcome)
    if len(drafts) < required:
        raise QuorumNotReached(len(drafts), required)
    drafts.sort(key=lambda d: d.agent_name)
    return DraftSet(topic=str(variables.get("topic", "")), drafts=tuple(drafts))


def _capture(fn, agent):
    try:
        return fn(agent)
    except PodflowError as err:
        return err


def consolidate(
    drafts: DraftSet,
    reasoner: AgentDefinition,
    prompt_store: PromptStore,
    gateway: Gateway,
) -> ConsolidatedScript:
    """Single-pass synthesis of the drafts by the reasoning agent.

    The rendered prompt embeds every draft exactly once, fenced and
    labeled by agent name; provenance records which digests were consumed
    and in what order.
    """
    if not drafts.drafts:
        raise ValueError("cannot consolidate an empty draft set")
    variables = {"topic": drafts.topic, "drafts": drafts.as_prompt_text()}
    result = run_agent(reasoner, variables, prompt_store, gateway)
    return ConsolidatedScript(
        text=result.text,
        source_agents=tuple(drafts.agent_names()),
        reasoning_binding=reasoner.binding.summary(),
        draft_digests=tuple(drafts.digests()),
    )


def _word_trigrams(text: str) -> set[tuple[str, str, str]]:
    words = text.lower().split()
    return {tuple(words[i : i + 3]) for i in range(len(words) - 2)}


def _jaccard(a: set, b: set) -> float:
    if not a and not b:
        return 1.0
    union = a | b
    if not union:
        return 0.0
    return len(a & b) / len(union)


@dataclass(frozen=True)
class AgreementMetrics:
    agents: tuple[str, ...]
    pairwise_jaccard: tuple[tuple[float, ...], ...]
    mean_jaccard: Optional[float]

    def to_jsonable(self) -> dict:
        return {
            "agents": list(self.agents),
            "pairwise_jaccard": [list(row) for row in self.pairwise_jaccard],
            "mean_jaccard": self.mean_jaccard,
        }


def agreement_metrics(drafts: DraftSet) -> AgreementMetrics:
    """Pairwise word-3-gram Jaccard over the drafts.

    Supports auditing how much the consortium members agreed; with fewer
    than two drafts there is nothing to compare and the matrix is empty.
    """
    if len(drafts.drafts) < 2:
        return AgreementMetrics(agents=tuple(drafts.agent_names()), pairwise_jaccard=(), mean_jaccard=None)
    grams = [_word_trigrams(d.text) for d in drafts.drafts]
    n = len(grams)
    matrix = [[1.0] * n for _ in range(n)]
    values = []
    for i in range(n):
        for j in range(i + 1, n):
            score = _jaccard(grams[i], grams[j])
            matrix[i][j] = matrix[j][i] = score
            values.append(score)
    return AgreementMetrics(
        agents=tuple(drafts.agent_names()),
        pairwise_jaccard=tuple(tuple(row) for row in matrix),
        mean_jaccard=sum(values) / len(values),
    )
