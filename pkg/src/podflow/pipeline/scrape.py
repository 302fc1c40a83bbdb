"""Deterministic HTML to Markdown conversion for scraped pages.

The rule table is fixed and versioned in docs/html-markdown-rules.md;
determinism wins over fidelity. Subtrees under script, style, nav,
header, footer, and iframe are dropped entirely, raw angle brackets in
text are entity-escaped, and whitespace runs collapse to single spaces,
so converted output never leaks markup from the stripped set.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from html.parser import HTMLParser

from ..canonical import digest_text
from ..errors import FetchFailed, NonHtmlContent

STRIPPED_TAGS = {"script", "style", "nav", "header", "footer", "iframe"}
# Not part of the stripped set, but their text is never page content.
DROPPED_TEXT_TAGS = STRIPPED_TAGS | {"title"}
BLOCK_TAGS = {"p", "div", "section", "article", "main", "aside", "blockquote", "figure", "figcaption"}
HEADING_LEVELS = {f"h{n}": n for n in range(1, 7)}
HTML_CONTENT_TYPES = {"text/html", "application/xhtml+xml"}

_WS_RUN = re.compile(r"[ \t\r\n]+")
_SPACE_RUN = re.compile(r" +")
_NEWLINE_TRIM = re.compile(r" *\n *")


def _escape_angles(text: str) -> str:
    return text.replace("<", "&lt;").replace(">", "&gt;")


class _MarkdownBuilder(HTMLParser):
    def __init__(self):
        super().__init__()
        self.blocks: list[tuple[str, str]] = []
        self.inline: list[str] = []
        self.spans: list[tuple[int, str, str]] = []
        self.list_stack: list[dict] = []
        self.open_item_prefix: str | None = None
        self.skip_depth = 0
        self.pre_depth = 0
        self.pre_parts: list[str] = []
        self.heading_level: int | None = None

    # -- assembly ---------------------------------------------------------

    def _assemble_inline(self) -> str:
        text = "".join(self.inline)
        text = _NEWLINE_TRIM.sub("\n", text)
        text = _SPACE_RUN.sub(" ", text)
        return text.strip()

    def _flush_block(self) -> None:
        text = self._assemble_inline()
        self.inline = []
        self.spans = []
        if text:
            if self.heading_level:
                text = "#" * self.heading_level + " " + text
            self.blocks.append(("item" if self.open_item_prefix else "block", text))

    def _emit_open_item(self) -> None:
        if self.open_item_prefix is None:
            return
        text = self._assemble_inline()
        self.inline = []
        self.spans = []
        if text:
            self.blocks.append(("item", self.open_item_prefix + text))
        self.open_item_prefix = None

    # -- events -----------------------------------------------------------

    def handle_starttag(self, tag, attrs):
        if tag in DROPPED_TEXT_TAGS:
            self.skip_depth += 1
            return
        if self.skip_depth:
            return
        if tag == "pre":
            self._flush_block()
            self.pre_depth += 1
            return
        if self.pre_depth:
            return
        attr_map = dict(attrs)
        if tag in HEADING_LEVELS:
            self._flush_block()
            self.heading_level = HEADING_LEVELS[tag]
        elif tag in BLOCK_TAGS or tag in ("tr", "dt", "dd"):
            self._flush_block()
        elif tag == "br":
            self.inline.append("\n")
        elif tag in ("ul", "ol"):
            self._emit_open_item()
            self._flush_block()
            self.list_stack.append({"kind": tag, "count": 0})
        elif tag == "li":
            self._emit_open_item()
            if self.list_stack:
                level = self.list_stack[-1]
                level["count"] += 1
                marker = "- " if level["kind"] == "ul" else f"{level['count']}. "
                self.open_item_prefix = "  " * (len(self.list_stack) - 1) + marker
            else:
                self.open_item_prefix = "- "
        elif tag == "a":
            self.spans.append((len(self.inline), "a", attr_map.get("href", "")))
        elif tag in ("strong", "b"):
            self.spans.append((len(self.inline), "strong", ""))
        elif tag in ("em", "i"):
            self.spans.append((len(self.inline), "em", ""))
        elif tag == "code":
            self.spans.append((len(self.inline), "code", ""))
        elif tag == "img":
            alt = _escape_angles(attr_map.get("alt", ""))
            src = attr_map.get("src", "")
            self.inline.append(f"![{alt}]({src})")
        elif tag in ("td", "th"):
            self.inline.append(" ")

    def handle_endtag(self, tag):
        if tag in DROPPED_TEXT_TAGS:
            if self.skip_depth:
                self.skip_depth -= 1
            return
        if self.skip_depth:
            return
        if tag == "pre":
            if self.pre_depth:
                self.pre_depth -= 1
                if self.pre_depth == 0:
                    text = "".join(self.pre_parts).strip("\n")
                    self.pre_parts = []
                    self.blocks.append(("fence", text))
            return
        if self.pre_depth:
            return
        if tag in HEADING_LEVELS:
            self._flush_block()
            self.heading_level = None
        elif tag in BLOCK_TAGS or tag in ("tr", "dt", "dd"):
            self._flush_block()
        elif tag == "li":
            self._emit_open_item()
        elif tag in ("ul", "ol"):
            self._emit_open_item()
            if self.list_stack:
                self.list_stack.pop()
        elif tag in ("a", "strong", "em", "code"):
            self._close_span(tag if tag != "b" else "strong")
        elif tag in ("b", "i"):
            self._close_span("strong" if tag == "b" else "em")

    def _close_span(self, kind: str) -> None:
        for index in range(len(self.spans) - 1, -1, -1):
            if self.spans[index][1] == kind:
                start, _, data = self.spans.pop(index)
                segment = "".join(self.inline[start:])
                del self.inline[start:]
                self.inline.append(self._wrap(kind, segment, data))
                return

    @staticmethod
    def _wrap(kind: str, segment: str, data: str) -> str:
        if not segment.strip():
            return ""
        if kind == "a":
            return f"[{segment}]({data})" if data else segment
        if kind == "strong":
            return f"**{segment}**"
        if kind == "em":
            return f"*{segment}*"
        if kind == "code":
            return f"`{segment}`"
        return segment

    def handle_data(self, data):
        if self.skip_depth:
            return
        if self.pre_depth:
            self.pre_parts.append(data)
            return
        text = _WS_RUN.sub(" ", _escape_angles(data))
        if text:
            self.inline.append(text)

    def result(self) -> str:
        self._emit_open_item()
        self._flush_block()
        parts: list[str] = []
        previous = None
        for kind, text in self.blocks:
            rendered = f"```\n{text}\n```" if kind == "fence" else text
            if parts:
                separator = "\n" if kind == "item" and previous == "item" else "\n\n"
                parts.append(separator)
            parts.append(rendered)
            previous = kind
        output = "".join(parts)
        return output + "\n" if output else ""


def html_to_markdown(html: str) -> str:
    builder = _MarkdownBuilder()
    builder.feed(html)
    builder.close()
    return builder.result()


@dataclass(frozen=True)
class ScrapedDoc:
    url: str
    markdown: str
    digest: str
    fetched_at: str = ""

    def to_jsonable(self) -> dict:
        # fetched_at stays out of the serialized form: artifact digests
        # must be identical across re-runs over the same content.
        return {"url": self.url, "markdown": self.markdown, "digest": self.digest}


def scrape_markdown(url: str, http) -> ScrapedDoc:
    response = http.get(url)
    if response.status >= 500:
        raise FetchFailed(f"HTTP {response.status} fetching {url}")
    if response.status >= 400:
        raise FetchFailed(f"HTTP {response.status} fetching {url}", retryable=False)
    if response.content_type not in HTML_CONTENT_TYPES:
        raise NonHtmlContent(f"{url} served {response.content_type!r}, not HTML")
    markdown = html_to_markdown(response.text)
    return ScrapedDoc(
        url=url,
        markdown=markdown,
        digest=digest_text(markdown),
        fetched_at=datetime.now(timezone.utc).isoformat(timespec="milliseconds"),
    )


@dataclass
class ScrapeResult:
    """All pages scraped for one run; the generation agents' knowledge base."""

    docs: list[ScrapedDoc] = field(default_factory=list)

    def as_prompt_text(self) -> str:
        sections = [f"# Source: {doc.url}\n\n{doc.markdown.rstrip()}" for doc in self.docs]
        return "\n\n".join(sections)

    def combined_markdown(self) -> str:
        return self.as_prompt_text() + ("\n" if self.docs else "")

    def to_jsonable(self) -> dict:
        return {"docs": [doc.to_jsonable() for doc in self.docs]}
