"""Workflow step functions and the shipped function registry.

Everything that needs no language reasoning runs here as a pure function
step against injected services; the agent steps (topic filter, the
consortium, consolidation, and the two video builders) live in the
workflow spec. ``scrape_markdown`` and ``publish_markdown`` are also
registered as single-agent tools for tool-loop verification, though the
shipped workflow calls them directly.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass
from typing import Optional

from ..agents import AgentDefinition, run_agent
from ..canonical import digest_text
from ..consortium import DraftSet
from ..errors import FeedUnparseable, OutputContractViolation
from ..store import ArtifactRef, ContentStore
from ..workflow.engine import FunctionRegistry, StepContext
from .bundle import PodcastBundle, assemble_bundle
from .feeds import NewsBatch, discover_feeds, fetch_feed
from .media import script_to_video, synthesize_audio
from .publish import RepoTarget, create_github_pr, publish_markdown
from .scrape import ScrapedDoc, ScrapeResult, scrape_markdown
from .veo import parse_veo_text, veo_output_validator

log = logging.getLogger(__name__)


@dataclass
class PipelineServices:
    """Runtime dependencies the function steps reach for."""

    http: object
    tts: object
    video: object
    git: object
    audit_store: ContentStore
    repo: RepoTarget
    base_branch: str = "main"


# ---------------------------------------------------------------------------
# topic filtering glue
# ---------------------------------------------------------------------------


def select_relevant_urls(items: NewsBatch, verdicts_text: str, warnings: Optional[list[str]] = None) -> list[str]:
    """Apply the filter agent's verdicts, guarding against invention.

    Output preserves input order and is always a subset of the input
    URLs; verdicts for URLs that were never offered are dropped with a
    warning.
    """
    verdicts = json.loads(verdicts_text)
    known = set(items.urls())
    relevant: set[str] = set()
    for verdict in verdicts:
        url = verdict.get("url")
        if url not in known:
            message = f"filter agent returned a URL not in its input: {url!r}"
            log.warning(message)
            if warnings is not None:
                warnings.append(message)
            continue
        if verdict.get("relevant"):
            relevant.add(url)
    return [url for url in items.urls() if url in relevant]


def filter_topic(items: NewsBatch, topic: str, filter_agent: AgentDefinition, prompt_store, gateway) -> list[str]:
    """Relevance-screen items by title and summary only."""
    if filter_agent.tool is not None or filter_agent.output_contract != "strict_json":
        raise ValueError("filter agent must be zero-tool with a strict_json contract")
    if not items.items:
        return []
    result = run_agent(filter_agent, {"topic": topic, "items": items.as_prompt_text()}, prompt_store, gateway)
    return select_relevant_urls(items, result.text)


# ---------------------------------------------------------------------------
# function steps (signature: fn(ctx, **bindings))
# ---------------------------------------------------------------------------


def step_discover_feeds(ctx: StepContext, source_urls: list[str]) -> dict:
    warnings: list[str] = []
    feeds = discover_feeds(source_urls, ctx.services.http, warnings)
    return {"feeds": feeds, "warnings": warnings}


def step_fetch_news(ctx: StepContext, discovery: dict) -> NewsBatch:
    batch = NewsBatch()
    batch.warnings.extend(discovery.get("warnings", []))
    seen: set[str] = set()
    for feed_url in discovery["feeds"]:
        try:
            items = fetch_feed(feed_url, ctx.services.http)
        except FeedUnparseable as err:
            batch.warnings.append(str(err))
            continue
        for item in items:
            if item.url in seen:
                continue
            seen.add(item.url)
            batch.items.append(item)
    return batch


def step_select_relevant(ctx: StepContext, items: NewsBatch, verdicts: str) -> dict:
    warnings: list[str] = []
    urls = select_relevant_urls(items, verdicts, warnings)
    return {"urls": urls, "warnings": warnings}


def step_scrape_pages(ctx: StepContext, selection: dict) -> ScrapeResult:
    result = ScrapeResult()
    for url in selection["urls"]:
        result.docs.append(scrape_markdown(url, ctx.services.http))
    return result


def step_publish_markdown(ctx: StepContext, scraped: ScrapeResult) -> dict:
    receipts = [publish_markdown(doc, ctx.services.audit_store) for doc in scraped.docs]
    return {"receipts": receipts}


def step_synthesize_audio(ctx: StepContext, script: str) -> ArtifactRef:
    return synthesize_audio(script, ctx.services.tts, ctx.store)


def step_script_to_video(ctx: StepContext, veo: str) -> ArtifactRef:
    spec = parse_veo_text(veo)
    return script_to_video(spec, ctx.services.video, ctx.store)


def step_assemble_bundle(
    ctx: StepContext,
    topic: str,
    drafts: DraftSet,
    consolidated: str,
    video_script: str,
    veo: str,
    audio: ArtifactRef,
    video: ArtifactRef,
) -> PodcastBundle:
    bundle = assemble_bundle(
        ctx.store,
        topic=topic,
        drafts=drafts,
        consolidated_digest=digest_text(consolidated),
        video_script_digest=digest_text(video_script),
        veo_digest=digest_text(veo),
        audio=audio,
        video=video,
    )
    for ref in bundle.published_refs():
        ctx.add_artifact(ref)
    ctx.add_artifact(bundle.video_script)
    return bundle


def step_create_github_pr(ctx: StepContext, bundle: PodcastBundle, topic: str) -> dict:
    files = [(ref.name, ctx.store.get(ref.digest)) for ref in bundle.published_refs()]
    pr_url = create_github_pr(
        ctx.services.repo,
        base_branch=ctx.services.base_branch,
        new_branch=f"podcast/{ctx.run_id}",
        files=files,
        title=f"Add podcast artifacts for {topic}",
        body=f"Automated podcast artifacts for topic: {topic}",
        git_client=ctx.services.git,
    )
    return {"pr_url": pr_url}


# ---------------------------------------------------------------------------
# single-tool executors
# ---------------------------------------------------------------------------


def tool_scrape_markdown(ctx: StepContext, request) -> str:
    doc = scrape_markdown(request.arguments["url"], ctx.services.http)
    return doc.markdown


def tool_publish_markdown(ctx: StepContext, request) -> str:
    doc = ScrapedDoc(
        url=request.arguments["url"],
        markdown=request.arguments["markdown"],
        digest=digest_text(request.arguments["markdown"]),
    )
    receipt = publish_markdown(doc, ctx.services.audit_store)
    return json.dumps(receipt, sort_keys=True)


def build_registry() -> FunctionRegistry:
    registry = FunctionRegistry()
    registry.register("discover_feeds", step_discover_feeds)
    registry.register("fetch_news", step_fetch_news)
    registry.register("select_relevant_urls", step_select_relevant)
    registry.register("scrape_pages", step_scrape_pages)
    registry.register("publish_markdown", step_publish_markdown)
    registry.register("synthesize_audio", step_synthesize_audio)
    registry.register("script_to_video", step_script_to_video)
    registry.register("assemble_bundle", step_assemble_bundle)
    registry.register("create_github_pr", step_create_github_pr)
    registry.register_tool("scrape_markdown", tool_scrape_markdown)
    registry.register_tool("publish_markdown", tool_publish_markdown)
    return registry


def pipeline_validators() -> dict:
    return {"veo_spec": veo_output_validator}
