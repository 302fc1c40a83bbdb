"""Feed discovery and RSS/Atom parsing for news acquisition.

Discovery walks the source pages for alternate-link feed declarations
(and passes through sources that already serve a feed content type).
Parsing covers RSS 2.0 and Atom 1.0 with the date conventions of each:
RFC 822 for RSS pubDate, RFC 3339 for Atom updated. Items without a link
are useless downstream and are dropped; unparseable dates degrade to an
absent timestamp rather than failing the feed.
"""

from __future__ import annotations

import email.utils
import logging
import xml.etree.ElementTree as ET
from dataclasses import dataclass, field
from datetime import datetime
from html.parser import HTMLParser
from typing import Optional
from urllib.parse import urljoin, urlparse

from ..canonical import canonical_json
from ..errors import FeedUnparseable

log = logging.getLogger(__name__)

FEED_CONTENT_TYPES = {"application/rss+xml", "application/atom+xml"}
XML_CONTENT_TYPES = {"application/xml", "text/xml"}
ATOM_NS = "{http://www.w3.org/2005/Atom}"


@dataclass(frozen=True)
class NewsItem:
    title: str
    url: str
    feed_url: str
    published: Optional[str] = None  # ISO-8601, absent when unparseable
    summary: Optional[str] = None

    def to_jsonable(self) -> dict:
        return {
            "title": self.title,
            "url": self.url,
            "feed_url": self.feed_url,
            "published": self.published,
            "summary": self.summary,
        }


@dataclass
class NewsBatch:
    """Fetched items plus fetch warnings, as one workflow step output."""

    items: list[NewsItem] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)

    def urls(self) -> list[str]:
        return [item.url for item in self.items]

    def as_prompt_text(self) -> str:
        # Agents screening relevance see titles and summaries only,
        # never full page content.
        lines = [
            canonical_json({"title": item.title, "url": item.url, "summary": item.summary or ""})
            for item in self.items
        ]
        return "\n".join(lines)

    def to_jsonable(self) -> dict:
        return {"items": [i.to_jsonable() for i in self.items], "warnings": self.warnings}


class _AlternateLinkScanner(HTMLParser):
    def __init__(self):
        super().__init__()
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag != "link":
            return
        attr_map = dict(attrs)
        rel = (attr_map.get("rel") or "").lower()
        link_type = (attr_map.get("type") or "").lower()
        href = attr_map.get("href")
        if rel == "alternate" and link_type in FEED_CONTENT_TYPES and href:
            self.hrefs.append(href)


def _looks_like_feed(response) -> bool:
    if response.content_type in FEED_CONTENT_TYPES:
        return True
    if response.content_type in XML_CONTENT_TYPES:
        head = response.body.lstrip()[:200]
        return head.startswith(b"<?xml") and (b"<rss" in head or b"<feed" in head) or head.startswith((b"<rss", b"<feed"))
    return False


def discover_feeds(source_urls: list[str], http, warnings: Optional[list[str]] = None) -> list[str]:
    """Resolve source pages to feed URLs, deduplicated in source order."""
    found: list[str] = []
    seen: set[str] = set()
    for source in source_urls:
        if not urlparse(source).scheme:
            raise ValueError(f"source URL must be absolute: {source!r}")
        try:
            response = http.get(source)
        except Exception as err:
            if warnings is not None:
                warnings.append(f"source unreachable: {source}: {err}")
            log.warning("feed discovery skipped %s: %s", source, err)
            continue
        if response.status >= 400:
            if warnings is not None:
                warnings.append(f"source returned HTTP {response.status}: {source}")
            continue
        candidates: list[str] = []
        if _looks_like_feed(response):
            candidates.append(source)
        elif response.content_type.startswith("text/html"):
            scanner = _AlternateLinkScanner()
            scanner.feed(response.text)
            candidates.extend(urljoin(source, href) for href in scanner.hrefs)
        for url in candidates:
            if url not in seen:
                seen.add(url)
                found.append(url)
    return found


def _parse_rfc822(value: str) -> Optional[str]:
    try:
        parsed = email.utils.parsedate_to_datetime(value)
    except (TypeError, ValueError):
        return None
    if parsed is None:
        return None
    return parsed.isoformat()


def _parse_rfc3339(value: str) -> Optional[str]:
    text = value.strip()
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    try:
        return datetime.fromisoformat(text).isoformat()
    except ValueError:
        return None


def _text(element, tag: str) -> Optional[str]:
    child = element.find(tag)
    if child is None or child.text is None:
        return None
    return child.text.strip()


def _parse_rss(root, feed_url: str) -> list[NewsItem]:
    items = []
    for element in root.iter("item"):
        link = _text(element, "link")
        if not link:
            continue
        published = None
        pub_date = _text(element, "pubDate")
        if pub_date:
            published = _parse_rfc822(pub_date)
        items.append(
            NewsItem(
                title=_text(element, "title") or "",
                url=link,
                feed_url=feed_url,
                published=published,
                summary=_text(element, "description"),
            )
        )
    return items


def _atom_link(entry) -> Optional[str]:
    fallback = None
    for link in entry.findall(f"{ATOM_NS}link"):
        rel = link.get("rel")
        href = link.get("href")
        if not href:
            continue
        if rel in (None, "alternate"):
            return href
        if fallback is None:
            fallback = href
    return fallback


def _parse_atom(root, feed_url: str) -> list[NewsItem]:
    items = []
    for entry in root.findall(f"{ATOM_NS}entry"):
        link = _atom_link(entry)
        if not link:
            continue
        published = None
        updated = _text(entry, f"{ATOM_NS}updated")
        if updated:
            published = _parse_rfc3339(updated)
        items.append(
            NewsItem(
                title=_text(entry, f"{ATOM_NS}title") or "",
                url=link,
                feed_url=feed_url,
                published=published,
                summary=_text(entry, f"{ATOM_NS}summary"),
            )
        )
    return items


def parse_feed(body: bytes, feed_url: str) -> list[NewsItem]:
    try:
        root = ET.fromstring(body)
    except ET.ParseError as err:
        raise FeedUnparseable(f"feed is not well-formed XML: {feed_url}: {err}") from err
    if root.tag == "rss":
        items = _parse_rss(root, feed_url)
    elif root.tag == f"{ATOM_NS}feed":
        items = _parse_atom(root, feed_url)
    else:
        raise FeedUnparseable(f"unrecognized feed root element {root.tag!r}: {feed_url}")
    deduped = []
    seen: set[str] = set()
    for item in items:
        if item.url in seen:
            continue
        seen.add(item.url)
        deduped.append(item)
    return deduped


def fetch_feed(feed_url: str, http) -> list[NewsItem]:
    response = http.get(feed_url)
    if response.status >= 400:
        raise FeedUnparseable(f"feed fetch returned HTTP {response.status}: {feed_url}")
    return parse_feed(response.body, feed_url)
