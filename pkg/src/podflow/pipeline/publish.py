"""Audit publishing and pull-request creation against a git host.

``create_github_pr`` is invoked only as a pure function step, directly
from the workflow — never as an agent tool in the shipped spec. The
request sequence against the hosting API is fixed: read the base branch
head, create the branch ref, commit each file, open the pull request.
Branch-name collisions resolve by numeric suffix, bounded at five tries.
"""

from __future__ import annotations

import base64
import threading
from dataclasses import dataclass, field

from ..errors import AuthFailed, BranchExists, HostUnavailable, StoreUnavailable
from ..store import ContentStore
from .scrape import ScrapedDoc

BRANCH_ATTEMPTS = 5


@dataclass(frozen=True)
class RepoTarget:
    host_base_url: str
    owner: str
    name: str

    def to_jsonable(self) -> dict:
        return {"host_base_url": self.host_base_url, "owner": self.owner, "name": self.name}


def publish_markdown(doc: ScrapedDoc, audit_store: ContentStore) -> dict:
    """Store scraped markdown for audit; idempotent by content digest."""
    try:
        key = audit_store.put(doc.markdown.encode("utf-8"))
    except OSError as err:
        raise StoreUnavailable(f"audit store write failed: {err}") from err
    return {"key": key, "digest": doc.digest, "url": doc.url}


@dataclass
class StubGitHost:
    """In-memory git host; records every API call for sequence assertions."""

    branches: dict[str, str] = field(default_factory=lambda: {"main": "0" * 40})
    files: dict[tuple[str, str], bytes] = field(default_factory=dict)
    pull_requests: list[dict] = field(default_factory=list)
    calls: list[tuple] = field(default_factory=list)
    collide_first_n: int = 0
    unavailable_first_n: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock)

    def _maybe_unavailable(self):
        if self.unavailable_first_n > 0:
            self.unavailable_first_n -= 1
            raise HostUnavailable("scripted host outage")

    def get_branch_head(self, repo: RepoTarget, branch: str) -> str:
        with self._lock:
            self.calls.append(("head-read", branch))
            self._maybe_unavailable()
            if branch not in self.branches:
                raise BranchExists(f"unknown base branch {branch!r}")  # pragma: no cover - fixture misuse
            return self.branches[branch]

    def create_branch(self, repo: RepoTarget, branch: str, sha: str) -> None:
        with self._lock:
            self.calls.append(("ref-create", branch))
            self._maybe_unavailable()
            if self.collide_first_n > 0:
                self.collide_first_n -= 1
                raise BranchExists(f"branch already exists: {branch}")
            if branch in self.branches:
                raise BranchExists(f"branch already exists: {branch}")
            self.branches[branch] = sha

    def commit_file(self, repo: RepoTarget, branch: str, path: str, data: bytes, message: str) -> None:
        with self._lock:
            self.calls.append(("file-commit", path))
            self._maybe_unavailable()
            self.files[(branch, path)] = data

    def open_pull_request(self, repo: RepoTarget, head: str, base: str, title: str, body: str) -> str:
        with self._lock:
            self.calls.append(("pr-open", head, base))
            self._maybe_unavailable()
            number = len(self.pull_requests) + 1
            url = f"{repo.host_base_url}/{repo.owner}/{repo.name}/pull/{number}"
            self.pull_requests.append(
                {"number": number, "head": head, "base": base, "title": title, "body": body, "url": url}
            )
            return url


class HttpGitHost:
    """GitHub-contract REST client (refs, contents, pulls endpoints)."""

    def __init__(self, token: str = "", client=None):
        if client is None:
            import httpx

            client = httpx.Client(timeout=30.0)
        self.token = token
        self._client = client

    def _headers(self) -> dict:
        headers = {"Accept": "application/vnd.github+json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        return headers

    def _call(self, method: str, url: str, **kwargs):
        try:
            response = self._client.request(method, url, headers=self._headers(), **kwargs)
        except Exception as err:
            raise HostUnavailable(f"git host unreachable: {err}") from err
        if response.status_code in (401, 403):
            raise AuthFailed(f"git host rejected credentials: HTTP {response.status_code}")
        if response.status_code >= 500:
            raise HostUnavailable(f"git host error: HTTP {response.status_code}")
        return response

    def get_branch_head(self, repo: RepoTarget, branch: str) -> str:
        url = f"{repo.host_base_url}/repos/{repo.owner}/{repo.name}/git/ref/heads/{branch}"
        response = self._call("GET", url)
        return response.json()["object"]["sha"]

    def create_branch(self, repo: RepoTarget, branch: str, sha: str) -> None:
        url = f"{repo.host_base_url}/repos/{repo.owner}/{repo.name}/git/refs"
        response = self._call("POST", url, json={"ref": f"refs/heads/{branch}", "sha": sha})
        if response.status_code == 422:
            raise BranchExists(f"branch already exists: {branch}")

    def commit_file(self, repo: RepoTarget, branch: str, path: str, data: bytes, message: str) -> None:
        url = f"{repo.host_base_url}/repos/{repo.owner}/{repo.name}/contents/{path}"
        payload = {
            "message": message,
            "content": base64.b64encode(data).decode("ascii"),
            "branch": branch,
        }
        self._call("PUT", url, json=payload)

    def open_pull_request(self, repo: RepoTarget, head: str, base: str, title: str, body: str) -> str:
        url = f"{repo.host_base_url}/repos/{repo.owner}/{repo.name}/pulls"
        response = self._call("POST", url, json={"title": title, "head": head, "base": base, "body": body})
        return response.json()["html_url"]


def create_github_pr(
    repo: RepoTarget,
    base_branch: str,
    new_branch: str,
    files: list[tuple[str, bytes]],
    title: str,
    body: str,
    git_client,
) -> str:
    """Branch, commit, and open a pull request; returns the PR URL."""
    if not files:
        raise ValueError("refusing to open a pull request with no files")
    head_sha = git_client.get_branch_head(repo, base_branch)
    branch = new_branch
    for attempt in range(1, BRANCH_ATTEMPTS + 1):
        try:
            git_client.create_branch(repo, branch, head_sha)
            break
        except BranchExists:
            if attempt == BRANCH_ATTEMPTS:
                raise
            branch = f"{new_branch}-{attempt + 1}"
    for path, data in files:
        git_client.commit_file(repo, branch, path, data, message=title)
    return git_client.open_pull_request(repo, head=branch, base=base_branch, title=title, body=body)
