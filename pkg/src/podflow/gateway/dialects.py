"""Wire adapters for the three supported provider dialects.

Each adapter translates the neutral (messages, tool) representation into
one provider family's chat-completion format and back. The exact request
and response shapes are documented in docs/provider-dialects.md and
frozen by recorded wire fixtures; nothing here is verified against live
services.

Configuration is per provider id via environment variables:
``PROVIDER_<ID>_BASE_URL`` and ``PROVIDER_<ID>_API_KEY`` (id upper-cased,
dashes to underscores).
"""

from __future__ import annotations

import json
import time
from typing import Optional, Sequence

import httpx

from ..errors import (
    AuthError,
    MalformedProviderResponse,
    ProviderUnavailable,
    RateLimited,
    Timeout,
)
from . import ChatMessage, ChatResponse, ModelBinding, ToolCall, Usage

DIALECT_IDS = ("openai-compatible", "gemini-compatible", "anthropic-compatible")

_PARAM_TYPE_TO_JSON = {
    "text": {"type": "string"},
    "text-list": {"type": "array", "items": {"type": "string"}},
    "integer": {"type": "integer"},
    "boolean": {"type": "boolean"},
}


def tool_parameters_schema(tool) -> dict:
    """JSON-schema object for a tool's typed parameter list."""
    properties = {}
    required = []
    for param in tool.parameters:
        properties[param.name] = dict(_PARAM_TYPE_TO_JSON[param.type])
        if param.required:
            required.append(param.name)
    schema = {"type": "object", "properties": properties}
    if required:
        schema["required"] = required
    return schema


def _tool_call_names(messages: Sequence[ChatMessage]) -> dict:
    """Map call id -> tool name for dialects without call ids."""
    names = {}
    for message in messages:
        if message.tool_call is not None and message.tool_call.call_id is not None:
            names[message.tool_call.call_id] = message.tool_call.name
    return names


class _HttpDialect:
    """Shared HTTP plumbing and error classification."""

    def __init__(self, base_url: str, api_key: str = "", client: Optional[httpx.Client] = None, timeout_s: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.api_key = api_key
        self._client = client or httpx.Client(timeout=timeout_s)

    def _post(self, url: str, payload: dict, headers: dict) -> dict:
        try:
            response = self._client.post(url, json=payload, headers=headers)
        except httpx.TimeoutException as err:
            raise Timeout(f"provider timeout: {url}") from err
        except httpx.HTTPError as err:
            raise ProviderUnavailable(f"provider unreachable: {url}: {err}") from err
        if response.status_code in (401, 403):
            raise AuthError(f"provider rejected credentials: HTTP {response.status_code}")
        if response.status_code == 429:
            retry_after = response.headers.get("retry-after")
            hint = float(retry_after) if retry_after and retry_after.replace(".", "", 1).isdigit() else 0.0
            raise RateLimited(retry_after_s=hint)
        if response.status_code >= 500:
            raise ProviderUnavailable(f"provider error: HTTP {response.status_code}")
        if response.status_code >= 400:
            raise MalformedProviderResponse(f"provider rejected request: HTTP {response.status_code}: {response.text[:200]}")
        try:
            return response.json()
        except ValueError as err:
            raise MalformedProviderResponse(f"provider returned non-JSON body: {url}") from err

    def chat(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> ChatResponse:
        started = time.monotonic()
        body = self._post(*self._request(binding, messages, tool))
        try:
            response = self.decode(body)
        except MalformedProviderResponse:
            raise
        except Exception as err:
            raise MalformedProviderResponse(f"unexpected provider response shape: {err}") from err
        return ChatResponse(
            content=response.content,
            tool_call=response.tool_call,
            usage=response.usage,
            provider_latency_s=time.monotonic() - started,
        )

    def _request(self, binding, messages, tool):
        raise NotImplementedError


class OpenAICompatible(_HttpDialect):
    """POST {base}/chat/completions, OpenAI chat-completions shape."""

    def encode(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> dict:
        encoded = []
        for message in messages:
            if message.role == "assistant" and message.tool_call is not None:
                call = message.tool_call
                encoded.append(
                    {
                        "role": "assistant",
                        "content": message.content or None,
                        "tool_calls": [
                            {
                                "id": call.call_id or "call_1",
                                "type": "function",
                                "function": {"name": call.name, "arguments": json.dumps(call.arguments)},
                            }
                        ],
                    }
                )
            elif message.role == "tool":
                encoded.append(
                    {
                        "role": "tool",
                        "tool_call_id": message.tool_result_for,
                        "content": message.content,
                    }
                )
            else:
                encoded.append({"role": message.role, "content": message.content})
        payload = {
            "model": binding.model,
            "messages": encoded,
            "temperature": binding.temperature,
            "max_tokens": binding.max_tokens,
        }
        if binding.seed is not None:
            payload["seed"] = binding.seed
        if tool is not None:
            payload["tools"] = [
                {
                    "type": "function",
                    "function": {
                        "name": tool.name,
                        "description": tool.description,
                        "parameters": tool_parameters_schema(tool),
                    },
                }
            ]
        return payload

    def decode(self, body: dict) -> ChatResponse:
        message = body["choices"][0]["message"]
        usage_doc = body.get("usage", {})
        usage = Usage(
            prompt_tokens=int(usage_doc.get("prompt_tokens", 0)),
            completion_tokens=int(usage_doc.get("completion_tokens", 0)),
        )
        calls = message.get("tool_calls")
        if calls:
            fn = calls[0]["function"]
            call = ToolCall(name=fn["name"], arguments=json.loads(fn["arguments"]), call_id=calls[0].get("id"))
            return ChatResponse(tool_call=call, usage=usage)
        return ChatResponse(content=message.get("content") or "", usage=usage)

    def _request(self, binding, messages, tool):
        headers = {"Authorization": f"Bearer {self.api_key}"} if self.api_key else {}
        return f"{self.base_url}/chat/completions", self.encode(binding, messages, tool), headers


class GeminiCompatible(_HttpDialect):
    """POST {base}/models/{model}:generateContent, Gemini REST shape."""

    def encode(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> dict:
        call_names = _tool_call_names(messages)
        system_parts = []
        contents = []
        for message in messages:
            if message.role == "system":
                system_parts.append({"text": message.content})
            elif message.role == "assistant":
                if message.tool_call is not None:
                    part = {"functionCall": {"name": message.tool_call.name, "args": message.tool_call.arguments}}
                else:
                    part = {"text": message.content}
                contents.append({"role": "model", "parts": [part]})
            elif message.role == "tool":
                name = call_names.get(message.tool_result_for, "tool")
                contents.append(
                    {
                        "role": "user",
                        "parts": [{"functionResponse": {"name": name, "response": {"content": message.content}}}],
                    }
                )
            else:
                contents.append({"role": "user", "parts": [{"text": message.content}]})
        generation = {"temperature": binding.temperature, "maxOutputTokens": binding.max_tokens}
        if binding.seed is not None:
            generation["seed"] = binding.seed
        payload = {"contents": contents, "generationConfig": generation}
        if system_parts:
            payload["systemInstruction"] = {"parts": system_parts}
        if tool is not None:
            payload["tools"] = [
                {
                    "functionDeclarations": [
                        {
                            "name": tool.name,
                            "description": tool.description,
                            "parameters": tool_parameters_schema(tool),
                        }
                    ]
                }
            ]
        return payload

    def decode(self, body: dict) -> ChatResponse:
        usage_doc = body.get("usageMetadata", {})
        usage = Usage(
            prompt_tokens=int(usage_doc.get("promptTokenCount", 0)),
            completion_tokens=int(usage_doc.get("candidatesTokenCount", 0)),
        )
        parts = body["candidates"][0]["content"]["parts"]
        for part in parts:
            if "functionCall" in part:
                call = part["functionCall"]
                return ChatResponse(tool_call=ToolCall(name=call["name"], arguments=dict(call.get("args", {}))), usage=usage)
        text = "".join(part.get("text", "") for part in parts)
        return ChatResponse(content=text, usage=usage)

    def _request(self, binding, messages, tool):
        headers = {"x-goog-api-key": self.api_key} if self.api_key else {}
        url = f"{self.base_url}/models/{binding.model}:generateContent"
        return url, self.encode(binding, messages, tool), headers


class AnthropicCompatible(_HttpDialect):
    """POST {base}/messages, Anthropic messages shape."""

    anthropic_version = "2023-06-01"

    def encode(self, binding: ModelBinding, messages: Sequence[ChatMessage], tool=None) -> dict:
        system_texts = []
        encoded = []
        for message in messages:
            if message.role == "system":
                system_texts.append(message.content)
            elif message.role == "assistant":
                if message.tool_call is not None:
                    call = message.tool_call
                    block = {
                        "type": "tool_use",
                        "id": call.call_id or "call_1",
                        "name": call.name,
                        "input": call.arguments,
                    }
                else:
                    block = {"type": "text", "text": message.content}
                encoded.append({"role": "assistant", "content": [block]})
            elif message.role == "tool":
                encoded.append(
                    {
                        "role": "user",
                        "content": [
                            {
                                "type": "tool_result",
                                "tool_use_id": message.tool_result_for,
                                "content": message.content,
                            }
                        ],
                    }
                )
            else:
                encoded.append({"role": "user", "content": [{"type": "text", "text": message.content}]})
        payload = {
            "model": binding.model,
            "max_tokens": binding.max_tokens,
            "temperature": binding.temperature,
            "messages": encoded,
        }
        if system_texts:
            payload["system"] = "\n".join(system_texts)
        if tool is not None:
            payload["tools"] = [
                {
                    "name": tool.name,
                    "description": tool.description,
                    "input_schema": tool_parameters_schema(tool),
                }
            ]
        return payload

    def decode(self, body: dict) -> ChatResponse:
        usage_doc = body.get("usage", {})
        usage = Usage(
            prompt_tokens=int(usage_doc.get("input_tokens", 0)),
            completion_tokens=int(usage_doc.get("output_tokens", 0)),
        )
        for block in body["content"]:
            if block.get("type") == "tool_use":
                call = ToolCall(name=block["name"], arguments=dict(block.get("input", {})), call_id=block.get("id"))
                return ChatResponse(tool_call=call, usage=usage)
        text = "".join(block.get("text", "") for block in body["content"] if block.get("type") == "text")
        return ChatResponse(content=text, usage=usage)

    def _request(self, binding, messages, tool):
        headers = {"anthropic-version": self.anthropic_version}
        if self.api_key:
            headers["x-api-key"] = self.api_key
        return f"{self.base_url}/messages", self.encode(binding, messages, tool), headers


_DIALECT_CLASSES = {
    "openai-compatible": OpenAICompatible,
    "gemini-compatible": GeminiCompatible,
    "anthropic-compatible": AnthropicCompatible,
}


def env_var_prefix(provider_id: str) -> str:
    return "PROVIDER_" + provider_id.upper().replace("-", "_")


def registry_from_env(env) -> dict:
    """Build provider adapters for every dialect configured in ``env``."""
    providers = {}
    for provider_id, cls in _DIALECT_CLASSES.items():
        prefix = env_var_prefix(provider_id)
        base_url = env.get(f"{prefix}_BASE_URL")
        if not base_url:
            continue
        providers[provider_id] = cls(base_url, api_key=env.get(f"{prefix}_API_KEY", ""))
    return providers
