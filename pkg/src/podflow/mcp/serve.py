"""MCP transports: newline-delimited stdio and HTTP POST /mcp.

stdio is strictly sequential — one envelope per line, one reply per
line, canonical key order so golden transcripts replay byte-identically.
The HTTP transport accepts exactly one envelope per request.
"""

from __future__ import annotations

import json
import sys
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .adapter import PARSE_ERROR, McpAdapter


def _encode_reply(reply: dict) -> str:
    return json.dumps(reply, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def _parse_error_reply() -> dict:
    return {"jsonrpc": "2.0", "id": None, "error": {"code": PARSE_ERROR, "message": "parse error"}}


def serve_stdio(adapter: McpAdapter, stdin=None, stdout=None) -> None:
    stdin = stdin or sys.stdin
    stdout = stdout or sys.stdout
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        try:
            envelope = json.loads(line)
        except ValueError:
            reply = _parse_error_reply()
        else:
            reply = adapter.handle_envelope(envelope)
        if reply is not None:
            stdout.write(_encode_reply(reply) + "\n")
            stdout.flush()


def make_http_handler(adapter: McpAdapter):
    class Handler(BaseHTTPRequestHandler):
        def do_POST(self):  # noqa: N802 - BaseHTTPRequestHandler contract
            if self.path != "/mcp":
                self.send_error(404)
                return
            length = int(self.headers.get("content-length", 0))
            raw = self.rfile.read(length)
            try:
                envelope = json.loads(raw.decode("utf-8"))
            except ValueError:
                reply = _parse_error_reply()
            else:
                reply = adapter.handle_envelope(envelope)
            if reply is None:
                self.send_response(204)
                self.end_headers()
                return
            body = _encode_reply(reply).encode("utf-8")
            self.send_response(200)
            self.send_header("content-type", "application/json")
            self.send_header("content-length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def log_message(self, fmt, *args):  # quiet by default
            pass

    return Handler


def serve_http(adapter: McpAdapter, host: str = "127.0.0.1", port: int = 8765) -> ThreadingHTTPServer:
    server = ThreadingHTTPServer((host, port), make_http_handler(adapter))
    return server
