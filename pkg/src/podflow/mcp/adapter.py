"""JSON-RPC 2.0 request handling for the MCP adapter.

Every tools/call forwards exactly one REST request to the workflow API
and wraps the JSON reply in a text content block. REST failures map onto
the protocol: 400 becomes an invalid-params error, 404 a tool result
flagged as an error, and 5xx an internal error with a retry hint. The
protocol revision is pinned; unknown client versions are answered with
ours rather than negotiated.
"""

from __future__ import annotations

import base64
import json
from typing import Any, Optional

import httpx

PROTOCOL_VERSION = "2025-03-26"
SERVER_NAME = "podflow-mcp"
SERVER_VERSION = "0.1.0"

PARSE_ERROR = -32700
INVALID_REQUEST = -32600
METHOD_NOT_FOUND = -32601
INVALID_PARAMS = -32602
INTERNAL_ERROR = -32603

_TOOLS: list[dict] = [
    {
        "name": "generate_podcast",
        "description": "Start a podcast-generation run for a topic and source URLs; returns a run_id to poll.",
        "inputSchema": {
            "type": "object",
            "properties": {
                "topic": {"type": "string"},
                "source_urls": {"type": "array", "items": {"type": "string"}},
            },
            "required": ["topic", "source_urls"],
        },
    },
    {
        "name": "get_run_status",
        "description": "Fetch the status view of a run, including step records and the artifact index.",
        "inputSchema": {
            "type": "object",
            "properties": {"run_id": {"type": "string"}},
            "required": ["run_id"],
        },
    },
    {
        "name": "get_artifact",
        "description": "Fetch one named artifact of a run; binary content is base64-encoded.",
        "inputSchema": {
            "type": "object",
            "properties": {"run_id": {"type": "string"}, "name": {"type": "string"}},
            "required": ["run_id", "name"],
        },
    },
]


def tool_descriptors() -> list[dict]:
    return [dict(tool) for tool in _TOOLS]


def _canonical(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _check_arguments(schema: dict, arguments: dict) -> Optional[str]:
    """Minimal hand-rolled validation; the schemas here are flat objects."""
    if not isinstance(arguments, dict):
        return "arguments must be an object"
    properties = schema.get("properties", {})
    for name in schema.get("required", []):
        if name not in arguments:
            return f"missing required argument {name!r}"
    for name, value in arguments.items():
        declared = properties.get(name)
        if declared is None:
            return f"unknown argument {name!r}"
        expected = declared.get("type")
        if expected == "string" and not isinstance(value, str):
            return f"argument {name!r} must be a string"
        if expected == "array" and not (isinstance(value, list) and all(isinstance(v, str) for v in value)):
            return f"argument {name!r} must be an array of strings"
    return None


class _ToolError(Exception):
    """Tool-level failure reported as an isError result, not a protocol error."""


class _RpcError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


class McpAdapter:
    def __init__(self, api_base_url: str, client: Optional[httpx.Client] = None, bearer_token: Optional[str] = None):
        self.api_base_url = api_base_url.rstrip("/")
        self._client = client or httpx.Client(timeout=30.0)
        self._bearer_token = bearer_token
        self._initialized = False

    # -- envelope dispatch --------------------------------------------------

    def handle_envelope(self, envelope: Any) -> Optional[dict]:
        """Handle one JSON-RPC envelope; None for notifications."""
        if not isinstance(envelope, dict) or envelope.get("jsonrpc") != "2.0" or "method" not in envelope:
            return self._error_reply(envelope.get("id") if isinstance(envelope, dict) else None,
                                     INVALID_REQUEST, "not a JSON-RPC 2.0 request")
        request_id = envelope.get("id")
        method = envelope["method"]
        params = envelope.get("params") or {}
        is_notification = "id" not in envelope

        try:
            result = self._dispatch(method, params)
        except _RpcError as err:
            if is_notification:
                return None
            return self._error_reply(request_id, err.code, str(err))
        if is_notification:
            return None
        return {"jsonrpc": "2.0", "id": request_id, "result": result}

    def _dispatch(self, method: str, params: Any) -> dict:
        if method == "initialize":
            return self._handle_initialize(params)
        if method == "notifications/initialized":
            return {}
        if method == "tools/list":
            return {"tools": tool_descriptors()}
        if method == "tools/call":
            return self._handle_tools_call(params)
        if method == "ping":
            return {}
        raise _RpcError(METHOD_NOT_FOUND, f"unknown method {method!r}")

    @staticmethod
    def _error_reply(request_id, code: int, message: str) -> dict:
        return {"jsonrpc": "2.0", "id": request_id, "error": {"code": code, "message": message}}

    # -- methods --------------------------------------------------------------

    def _handle_initialize(self, params: Any) -> dict:
        if not isinstance(params, dict):
            raise _RpcError(INVALID_PARAMS, "initialize params must be an object")
        self._initialized = True
        return {
            "protocolVersion": PROTOCOL_VERSION,
            "capabilities": {"tools": {}},
            "serverInfo": {"name": SERVER_NAME, "version": SERVER_VERSION},
        }

    def _handle_tools_call(self, params: Any) -> dict:
        if not self._initialized:
            raise _RpcError(INVALID_REQUEST, "server not initialized")
        if not isinstance(params, dict):
            raise _RpcError(INVALID_PARAMS, "tools/call params must be an object")
        name = params.get("name")
        tool = next((t for t in _TOOLS if t["name"] == name), None)
        if tool is None:
            raise _RpcError(INVALID_PARAMS, f"unknown tool {name!r}")
        arguments = params.get("arguments") or {}
        problem = _check_arguments(tool["inputSchema"], arguments)
        if problem is not None:
            raise _RpcError(INVALID_PARAMS, problem)
        try:
            payload = self._forward(name, arguments)
        except _ToolError as err:
            return {"content": [{"type": "text", "text": str(err)}], "isError": True}
        return {"content": [{"type": "text", "text": payload}], "isError": False}

    # -- REST forwarding ------------------------------------------------------

    def _headers(self) -> dict:
        if self._bearer_token:
            return {"Authorization": f"Bearer {self._bearer_token}"}
        return {}

    def _request(self, method: str, path: str, body: Optional[dict] = None) -> httpx.Response:
        url = f"{self.api_base_url}{path}"
        try:
            response = self._client.request(method, url, json=body, headers=self._headers())
        except httpx.HTTPError as err:
            raise _RpcError(INTERNAL_ERROR, f"workflow API unreachable: {err}") from err
        if response.status_code >= 500:
            raise _RpcError(INTERNAL_ERROR, f"workflow API error HTTP {response.status_code}; retry later")
        if response.status_code == 400:
            raise _RpcError(INVALID_PARAMS, _rest_error_message(response))
        if response.status_code == 404:
            raise _ToolError(_rest_error_message(response))
        if response.status_code == 409:
            raise _ToolError(_rest_error_message(response))
        return response

    def _forward(self, name: str, arguments: dict) -> str:
        if name == "generate_podcast":
            response = self._request(
                "POST", "/runs", {"topic": arguments["topic"], "source_urls": arguments["source_urls"]}
            )
            return _canonical(response.json())
        if name == "get_run_status":
            response = self._request("GET", f"/runs/{arguments['run_id']}")
            return _canonical(response.json())
        response = self._request("GET", f"/runs/{arguments['run_id']}/artifacts/{arguments['name']}")
        media_type = response.headers.get("content-type", "application/octet-stream").split(";")[0].strip()
        if media_type.startswith("text/") or media_type in ("application/json",):
            return _canonical({"media_type": media_type, "encoding": "utf-8", "data": response.text})
        return _canonical(
            {
                "media_type": media_type,
                "encoding": "base64",
                "data": base64.b64encode(response.content).decode("ascii"),
            }
        )


def _rest_error_message(response: httpx.Response) -> str:
    try:
        doc = response.json()
        return doc["error"]["message"]
    except Exception:
        return f"workflow API returned HTTP {response.status_code}"
