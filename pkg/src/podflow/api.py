"""REST service exposing workflow execution, run status, and artifacts.

Runs are asynchronous: POST /runs answers 202 with a pollable run id and
the ledger is persisted write-ahead on every record, so a status view
can always be rebuilt from disk alone — restarting the service never
loses a completed run. Errors use one envelope:
``{"error": {"code", "message", "field?"}}``.
"""

from __future__ import annotations

import logging
import threading
import uuid
from pathlib import Path
from typing import Optional
from urllib.parse import urlparse

from fastapi import FastAPI, Request, Response
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel, field_validator

from .runtime import Stack
from .workflow.engine import RunLedger, execute_workflow

log = logging.getLogger(__name__)

API_VERSION = "0.1.0"


class RunRequest(BaseModel):
    topic: str
    source_urls: list[str]

    @field_validator("topic")
    @classmethod
    def _topic_nonempty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("topic must be non-empty")
        return value

    @field_validator("source_urls")
    @classmethod
    def _urls_absolute(cls, value: list[str]) -> list[str]:
        if not value:
            raise ValueError("source_urls must be non-empty")
        for url in value:
            parsed = urlparse(url)
            if not parsed.scheme or not parsed.netloc:
                raise ValueError(f"source URL must be absolute: {url!r}")
        return value


def _error(status: int, code: str, message: str, field: Optional[str] = None) -> JSONResponse:
    body = {"error": {"code": code, "message": message}}
    if field:
        body["error"]["field"] = field
    return JSONResponse(status_code=status, content=body)


def status_view(ledger_doc: dict) -> dict:
    records = ledger_doc.get("records", [])
    error_detail = None
    for record in reversed(records):
        if record.get("error_detail"):
            error_detail = record["error_detail"]
            break
    running = ledger_doc.get("status") == "running"
    return {
        "run_id": ledger_doc.get("run_id"),
        "workflow_id": ledger_doc.get("workflow_id"),
        "status": ledger_doc.get("status"),
        "current_step": records[-1]["step"] if running and records else None,
        "records": [
            {"step": r["step"], "attempt": r["attempt"], "outcome": r["outcome"]}
            for r in records
        ],
        "artifacts": {
            name: {"media_type": ref["media_type"], "digest": ref["digest"]}
            for name, ref in ledger_doc.get("artifacts", {}).items()
        },
        "error_detail": error_detail,
    }


class RunManager:
    """Starts runs on worker threads, bounded by a concurrency cap."""

    def __init__(self, stack: Stack, max_runs: int):
        self._stack = stack
        self._max_runs = max_runs
        self._lock = threading.Lock()
        self._active: dict[str, RunLedger] = {}
        self._state_dir = Path(stack.settings.state_dir)
        self._state_dir.mkdir(parents=True, exist_ok=True)

    def _persist(self, ledger: RunLedger) -> None:
        path = self._state_dir / f"{ledger.run_id}.json"
        tmp = path.with_suffix(".json.tmp")
        tmp.write_text(ledger.canonical(), encoding="utf-8")
        tmp.replace(path)

    def start(self, inputs: dict) -> Optional[str]:
        """Returns the run id, or None when at capacity."""
        run_id = uuid.uuid4().hex
        with self._lock:
            if len(self._active) >= self._max_runs:
                return None
            placeholder = RunLedger(
                run_id=run_id,
                workflow_id=self._stack.spec.id,
                workflow_version=self._stack.spec.version,
                status="running",
                inputs=dict(inputs),
            )
            self._active[run_id] = placeholder
        self._persist(placeholder)

        def observer(ledger: RunLedger) -> None:
            with self._lock:
                self._active[run_id] = ledger
            self._persist(ledger)

        def work() -> None:
            try:
                execute_workflow(self._stack.spec, inputs, self._stack.runtime, run_id=run_id, observer=observer)
            except Exception:
                log.exception("run %s crashed before producing a ledger", run_id)
                with self._lock:
                    ledger = self._active.get(run_id)
                if ledger is not None:
                    ledger.status = "failed"
                    self._persist(ledger)
            finally:
                with self._lock:
                    self._active.pop(run_id, None)

        threading.Thread(target=work, name=f"run-{run_id[:8]}", daemon=True).start()
        return run_id

    def ledger_doc(self, run_id: str) -> Optional[dict]:
        with self._lock:
            active = self._active.get(run_id)
            if active is not None:
                return active.to_jsonable()
        path = self._state_dir / f"{run_id}.json"
        if not path.is_file():
            return None
        import json

        return json.loads(path.read_text(encoding="utf-8"))


def create_app(stack: Stack, max_runs: Optional[int] = None) -> FastAPI:
    app = FastAPI(title="podflow", version=API_VERSION)
    manager = RunManager(stack, max_runs or stack.settings.max_runs)
    app.state.manager = manager
    app.state.stack = stack

    @app.exception_handler(RequestValidationError)
    async def validation_handler(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        location = ".".join(str(part) for part in first.get("loc", []) if part != "body")
        return _error(400, "invalid_request", first.get("msg", "invalid request body"), field=location or None)

    @app.post("/runs", status_code=202)
    def start_run(body: RunRequest):
        run_id = manager.start({"topic": body.topic, "source_urls": body.source_urls})
        if run_id is None:
            return _error(409, "capacity_exceeded", f"at most {manager._max_runs} concurrent runs")
        return {"run_id": run_id}

    @app.get("/runs/{run_id}")
    def run_status(run_id: str):
        doc = manager.ledger_doc(run_id)
        if doc is None:
            return _error(404, "not_found", f"no run with id {run_id!r}")
        return status_view(doc)

    @app.get("/runs/{run_id}/artifacts/{name:path}")
    def run_artifact(run_id: str, name: str):
        doc = manager.ledger_doc(run_id)
        if doc is None:
            return _error(404, "not_found", f"no run with id {run_id!r}")
        ref = doc.get("artifacts", {}).get(name)
        if ref is None:
            return _error(404, "not_found", f"run has no artifact {name!r}")
        data = stack.runtime.store.get(ref["location"])
        return Response(content=data, media_type=ref["media_type"])

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.get("/readyz")
    def readyz():
        prompt_ok = stack.prompt_store.reachable()
        gateway_ok = stack.gateway.has_fallback or bool(stack.gateway.provider_ids)
        if prompt_ok and gateway_ok:
            return {"status": "ready"}
        detail = []
        if not prompt_ok:
            detail.append("prompt source unreachable")
        if not gateway_ok:
            detail.append("no providers configured")
        return _error(503, "not_ready", "; ".join(detail))

    return app
