"""Configuration and wiring: from settings to a runnable workflow stack.

A stub harness file (``--stub-script``) swaps every external surface for
deterministic doubles in one place — scripted model provider, fixture
HTTP, stub media backends, stub git host — which is what makes the full
pipeline runnable offline. Without one, providers come from
``PROVIDER_*`` environment variables and fetches go over the network.

Settings precedence is flags > environment > config file > defaults;
the CLI resolves that and hands the final values here.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib.resources import files
from pathlib import Path
from typing import Optional

from .agents import AgentCatalog
from .errors import ProviderNotConfigured
from .gateway import Gateway
from .gateway.dialects import registry_from_env
from .gateway.stub import load_stub_entries, stub_script
from .pipeline.media import StubTtsBackend, StubVideoBackend, backend_faults
from .pipeline.publish import HttpGitHost, RepoTarget, StubGitHost
from .pipeline.steps import PipelineServices, build_registry, pipeline_validators
from .pipeline.web import FixtureHttp, UrlFetcher
from .prompts import PromptStore
from .store import ContentStore
from .workflow.engine import WorkflowRuntime
from .workflow.spec import WorkflowSpec

ENV_PROMPT_SOURCE = "PROMPT_SOURCE"
ENV_PROMPT_TOKEN = "PROMPT_TOKEN"
ENV_STORE_DIR = "CONTENT_STORE_DIR"
ENV_STATE_DIR = "RUN_STATE_DIR"
ENV_AUDIT_DIR = "AUDIT_STORE_DIR"
ENV_MAX_RUNS = "WORKFLOW_MAX_RUNS"
ENV_GIT_TOKEN = "GIT_TOKEN"
ENV_GIT_REPO = "GIT_REPO"
ENV_GIT_HOST = "GIT_HOST_BASE_URL"
ENV_GIT_BASE_BRANCH = "GIT_BASE_BRANCH"

DEFAULT_WORK_DIR = ".podflow"
DEFAULT_MAX_RUNS = 4


def data_path(relative: str = "") -> Path:
    root = Path(str(files("podflow"))) / "data"
    return root / relative if relative else root


def default_workflow_path() -> Path:
    return data_path("workflows/podcast.json")


def default_catalog_path() -> Path:
    return data_path("agents/catalog.json")


def default_prompt_source() -> str:
    return str(data_path("prompts"))


@dataclass
class Settings:
    """Fully resolved configuration for one CLI command or service."""

    workflow_path: Path = field(default_factory=default_workflow_path)
    catalog_path: Path = field(default_factory=default_catalog_path)
    prompt_source: str = field(default_factory=default_prompt_source)
    prompt_token: Optional[str] = None
    store_dir: Path = Path(DEFAULT_WORK_DIR) / "store"
    state_dir: Path = Path(DEFAULT_WORK_DIR) / "runs"
    audit_dir: Path = Path(DEFAULT_WORK_DIR) / "audit"
    stub_script: Optional[Path] = None
    git_repo: str = "example/podcasts"
    git_host_base_url: str = "https://git.invalid"
    git_base_branch: str = "main"
    git_token: str = ""
    max_runs: int = DEFAULT_MAX_RUNS
    consortium_quorum: Optional[int] = None

    @classmethod
    def from_sources(cls, flags: dict, env=os.environ, config_file: Optional[Path] = None) -> "Settings":
        file_values: dict = {}
        if config_file is not None:
            file_values = json.loads(Path(config_file).read_text(encoding="utf-8"))

        def pick(flag_key: str, env_key: Optional[str], file_key: str, default):
            if flags.get(flag_key) is not None:
                return flags[flag_key]
            if env_key and env.get(env_key):
                return env[env_key]
            if file_key in file_values:
                return file_values[file_key]
            return default

        defaults = cls()
        return cls(
            workflow_path=Path(pick("workflow", None, "workflow", defaults.workflow_path)),
            catalog_path=Path(pick("agents", None, "agents", defaults.catalog_path)),
            prompt_source=str(pick("prompts", ENV_PROMPT_SOURCE, "prompt_source", defaults.prompt_source)),
            prompt_token=pick("prompt_token", ENV_PROMPT_TOKEN, "prompt_token", None),
            store_dir=Path(pick("store_dir", ENV_STORE_DIR, "store_dir", defaults.store_dir)),
            state_dir=Path(pick("state_dir", ENV_STATE_DIR, "state_dir", defaults.state_dir)),
            audit_dir=Path(pick("audit_dir", ENV_AUDIT_DIR, "audit_dir", defaults.audit_dir)),
            stub_script=Path(flags["stub_script"]) if flags.get("stub_script") else None,
            git_repo=str(pick(None, ENV_GIT_REPO, "git_repo", defaults.git_repo)),
            git_host_base_url=str(pick(None, ENV_GIT_HOST, "git_host_base_url", defaults.git_host_base_url)),
            git_base_branch=str(pick(None, ENV_GIT_BASE_BRANCH, "git_base_branch", defaults.git_base_branch)),
            git_token=str(pick(None, ENV_GIT_TOKEN, "git_token", defaults.git_token)),
            max_runs=int(pick("max_runs", ENV_MAX_RUNS, "max_runs", defaults.max_runs)),
            consortium_quorum=flags.get("quorum") or file_values.get("consortium_quorum"),
        )

    def repo_target(self) -> RepoTarget:
        owner, _, name = self.git_repo.partition("/")
        return RepoTarget(host_base_url=self.git_host_base_url, owner=owner, name=name or "podcasts")


@dataclass
class StubHarness:
    """Deterministic doubles decoded from one stub-script file."""

    provider: object
    http: Optional[FixtureHttp] = None
    git: Optional[StubGitHost] = None
    tts_faults: dict = field(default_factory=dict)
    video_faults: dict = field(default_factory=dict)


def load_stub_harness(path: Path) -> StubHarness:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    base_dir = Path(path).parent
    provider = stub_script(load_stub_entries(doc.get("provider", {})))
    http = None
    if "http" in doc:
        http = FixtureHttp.from_manifest(doc["http"], base_dir)
    git = None
    if "git" in doc:
        git = StubGitHost(
            collide_first_n=int(doc["git"].get("collide_first_n", 0)),
            unavailable_first_n=int(doc["git"].get("unavailable_first_n", 0)),
        )
    return StubHarness(
        provider=provider,
        http=http,
        git=git,
        tts_faults=doc.get("tts", {}),
        video_faults=doc.get("video", {}),
    )


@dataclass
class Stack:
    """Everything a run (or the API service) needs, fully wired."""

    settings: Settings
    spec: WorkflowSpec
    runtime: WorkflowRuntime
    harness: Optional[StubHarness] = None

    @property
    def prompt_store(self) -> PromptStore:
        return self.runtime.prompt_store

    @property
    def gateway(self) -> Gateway:
        return self.runtime.gateway


def _build_backends(harness: Optional[StubHarness]):
    tts = StubTtsBackend()
    video = StubVideoBackend()
    if harness is not None:
        for kind, count in harness.tts_faults.items():
            tts.faults.extend(backend_faults(kind, int(count)))
        for kind, count in harness.video_faults.items():
            video.faults.extend(backend_faults(kind, int(count)))
    return tts, video


def build_stack(settings: Settings, env=os.environ) -> Stack:
    spec = WorkflowSpec.load(settings.workflow_path)
    catalog = AgentCatalog.load(settings.catalog_path)
    prompt_store = PromptStore(settings.prompt_source, token=settings.prompt_token)
    store = ContentStore(settings.store_dir)
    audit_store = ContentStore(settings.audit_dir)

    harness = None
    if settings.stub_script is not None:
        harness = load_stub_harness(settings.stub_script)
        # Every binding routes to the scripted provider, whatever its id.
        gateway = Gateway(fallback=harness.provider)
        http = harness.http or FixtureHttp()
        git = harness.git or StubGitHost()
    else:
        providers = registry_from_env(env)
        gateway = Gateway(providers=providers)
        http = UrlFetcher()
        git = HttpGitHost(token=settings.git_token) if settings.git_token else StubGitHost()

    tts, video = _build_backends(harness)
    services = PipelineServices(
        http=http,
        tts=tts,
        video=video,
        git=git,
        audit_store=audit_store,
        repo=settings.repo_target(),
        base_branch=settings.git_base_branch,
    )
    runtime = WorkflowRuntime(
        registry=build_registry(),
        catalog=catalog,
        gateway=gateway,
        prompt_store=prompt_store,
        store=store,
        services=services,
        validators=pipeline_validators(),
        consortium_quorum=settings.consortium_quorum,
    )
    _check_bindings_routable(catalog, gateway)
    return Stack(settings=settings, spec=spec, runtime=runtime, harness=harness)


def _check_bindings_routable(catalog: AgentCatalog, gateway: Gateway) -> None:
    """Unknown provider ids are configuration errors, surfaced before any chat."""
    unroutable = []
    for name in catalog.names():
        entry = catalog.raw(name)
        provider_id = (entry.get("binding") or {}).get("provider", "")
        if provider_id and not gateway.can_route(provider_id):
            unroutable.append(f"{name}: {provider_id}")
    if unroutable:
        raise ProviderNotConfigured(
            "no configured provider for agent bindings: " + ", ".join(sorted(unroutable))
        )
