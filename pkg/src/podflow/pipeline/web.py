"""HTTP fetching for feeds and pages, with a fixture-backed double.

The real fetcher applies the scrape politeness rules: one request per
second per host, a 10 s timeout, a custom agent string, and robots.txt
disallow directives. The fixture client serves canned responses from
memory and keeps a request log; all pipeline verification runs against
it.
"""

from __future__ import annotations

import threading
import time
import urllib.robotparser
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlparse

from ..errors import FetchFailed

USER_AGENT = "podflow-scraper/0.1"
DEFAULT_TIMEOUT_S = 10.0
PER_HOST_INTERVAL_S = 1.0


@dataclass(frozen=True)
class HttpResponse:
    url: str
    status: int
    content_type: str
    body: bytes

    @property
    def text(self) -> str:
        return self.body.decode("utf-8", errors="replace")


class UrlFetcher:
    """Real network client (httpx) with politeness controls."""

    def __init__(
        self,
        client=None,
        timeout_s: float = DEFAULT_TIMEOUT_S,
        min_interval_s: float = PER_HOST_INTERVAL_S,
        respect_robots: bool = True,
        clock=time.monotonic,
        sleep=time.sleep,
    ):
        if client is None:
            import httpx

            client = httpx.Client(timeout=timeout_s, headers={"User-Agent": USER_AGENT}, follow_redirects=True)
        self._client = client
        self._min_interval_s = min_interval_s
        self._respect_robots = respect_robots
        self._clock = clock
        self._sleep = sleep
        self._lock = threading.Lock()
        self._last_request_at: dict[str, float] = {}
        self._robots: dict[str, urllib.robotparser.RobotFileParser] = {}

    def _throttle(self, host: str) -> None:
        with self._lock:
            last = self._last_request_at.get(host)
            now = self._clock()
            wait = 0.0
            if last is not None:
                wait = max(0.0, self._min_interval_s - (now - last))
            self._last_request_at[host] = now + wait
        if wait > 0:
            self._sleep(wait)

    def _robots_for(self, parsed) -> urllib.robotparser.RobotFileParser:
        host = parsed.netloc
        with self._lock:
            if host in self._robots:
                return self._robots[host]
        parser = urllib.robotparser.RobotFileParser()
        robots_url = f"{parsed.scheme}://{host}/robots.txt"
        try:
            response = self._client.get(robots_url)
            if response.status_code == 200:
                parser.parse(response.text.splitlines())
            else:
                parser.allow_all = True
        except Exception:
            parser.allow_all = True
        with self._lock:
            self._robots[host] = parser
        return parser

    def get(self, url: str) -> HttpResponse:
        parsed = urlparse(url)
        if not parsed.scheme or not parsed.netloc:
            raise FetchFailed(f"not an absolute URL: {url!r}", retryable=False)
        if self._respect_robots and not self._robots_for(parsed).can_fetch(USER_AGENT, url):
            raise FetchFailed(f"disallowed by robots.txt: {url}", retryable=False)
        self._throttle(parsed.netloc)
        try:
            response = self._client.get(url)
        except Exception as err:
            raise FetchFailed(f"fetch failed: {url}: {err}") from err
        content_type = response.headers.get("content-type", "").split(";")[0].strip()
        return HttpResponse(url=url, status=response.status_code, content_type=content_type, body=response.content)


@dataclass
class FixtureHttp:
    """Canned responses keyed by exact URL; unknown URLs get a 404."""

    responses: dict[str, HttpResponse] = field(default_factory=dict)
    requests: list[str] = field(default_factory=list)

    def add(self, url: str, body: bytes | str, content_type: str = "text/html", status: int = 200) -> None:
        data = body.encode("utf-8") if isinstance(body, str) else body
        self.responses[url] = HttpResponse(url=url, status=status, content_type=content_type, body=data)

    def get(self, url: str) -> HttpResponse:
        self.requests.append(url)
        hit = self.responses.get(url)
        if hit is None:
            return HttpResponse(url=url, status=404, content_type="text/plain", body=b"not found")
        return hit

    @classmethod
    def from_manifest(cls, manifest: dict, base_dir: Path) -> "FixtureHttp":
        """Build from a stub-harness ``http`` section (see docs/formats.md)."""
        fixture = cls()
        for url, entry in manifest.items():
            if "body_file" in entry:
                body = (base_dir / entry["body_file"]).read_bytes()
            else:
                body = entry.get("body", "").encode("utf-8")
            fixture.add(
                url,
                body,
                content_type=entry.get("content_type", "text/html"),
                status=int(entry.get("status", 200)),
            )
        return fixture
