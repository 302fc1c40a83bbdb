"""Thin MCP server over the workflow REST API.

This subpackage holds no workflow logic and must import nothing from the
engine, pipeline, or provider modules — only the standard library and an
HTTP client. A dependency audit in the test suite enforces that boundary
so the adapter stays independently deployable.
"""

from .adapter import PROTOCOL_VERSION, McpAdapter, tool_descriptors

__all__ = ["PROTOCOL_VERSION", "McpAdapter", "tool_descriptors"]
