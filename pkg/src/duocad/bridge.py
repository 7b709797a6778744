"""Maker agent backed by a chat-completions endpoint with tool calling.

The bridge renders the interaction as interleaved text and images, asks the
model for edit actions as tool calls, and parses the reply leniently:
unknown tools and malformed arguments are skipped and logged, never fatal.
A transport can be injected, so recorded transcripts drive evaluation
without any network.
"""
from __future__ import annotations

import base64
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import httpx

from .core import Action, CadError, Design, action_to_obj, design_to_obj, parse_action
from .engine import Round
from .message import Message
from .render import RenderStyle, Scene, png_bytes, rasterize

log = logging.getLogger(__name__)


class TransportError(CadError):
    """Endpoint unreachable or persistently failing after bounded retries."""


class MalformedToolCall(CadError):
    """A tool call that cannot be mapped to an action."""


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "http://localhost:8080/v1"
    model: str = "local-model"
    api_key_env: str = "DUOCAD_API_KEY"  # name only; the value is never logged
    temperature: float = 1.0
    top_p: float = 1.0
    max_tokens: int = 2048
    timeout: float = 60.0
    max_attempts: int = 3
    backoff: float = 1.0


@dataclass(frozen=True)
class PromptConfig:
    system_text: str = (
        "You are the maker in a two-player CAD editing game. A designer, who "
        "can see a target design that you cannot, sends you instructions each "
        "round. Instructions may include text, freehand drawing, or both; the "
        "drawing appears as red strokes over the canvas, while the current "
        "design appears as black strokes. Edit the current design by calling "
        "the provided tools. Every control point is a pair of numbers, each "
        "between -20 and 20, giving its coordinates on the canvas."
    )
    round_header: str = "Round {index}."
    directive: str = (
        "Edit the design with the provided tools so it follows the designer's "
        "instructions."
    )
    feedback_prefix: str = "The resulting design is:"
    include_images: bool = True
    style: RenderStyle = field(default_factory=RenderStyle)


_POINT_SCHEMA = {
    "type": "array",
    "items": {"type": "number"},
    "minItems": 2,
    "maxItems": 2,
}
_CURVE_ARGS = {
    "type": {"type": "string", "enum": ["line", "circle", "arc"]},
    "control_points": {"type": "array", "items": _POINT_SCHEMA},
}

TOOL_SCHEMAS = [
    {
        "type": "function",
        "function": {
            "name": "make_curve",
            "description": "Add a curve to the design.",
            "parameters": {
                "type": "object",
                "properties": _CURVE_ARGS,
                "required": ["type", "control_points"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "remove_curve",
            "description": "Remove the matching curve from the design.",
            "parameters": {
                "type": "object",
                "properties": _CURVE_ARGS,
                "required": ["type", "control_points"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "move_curve",
            "description": "Translate a curve (and the points it shares) by delta.",
            "parameters": {
                "type": "object",
                "properties": {**_CURVE_ARGS, "delta": _POINT_SCHEMA},
                "required": ["type", "control_points", "delta"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "move_point",
            "description": "Move a control point, reshaping every curve that uses it.",
            "parameters": {
                "type": "object",
                "properties": {"point": _POINT_SCHEMA, "new_point": _POINT_SCHEMA},
                "required": ["point", "new_point"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "delete_point",
            "description": "Delete a control point and every curve that uses it.",
            "parameters": {
                "type": "object",
                "properties": {"point": _POINT_SCHEMA},
                "required": ["point"],
            },
        },
    },
]


def parse_tool_call(obj: dict) -> Action:
    """Map one tool call to an action.  Arguments may be a JSON string or object."""
    if not isinstance(obj, dict):
        raise MalformedToolCall(f"tool call must be an object, got {obj!r}")
    name = obj.get("name")
    args = obj.get("arguments", {})
    if isinstance(args, str):
        try:
            args = json.loads(args)
        except json.JSONDecodeError as exc:
            raise MalformedToolCall(f"arguments of {name!r} are not JSON: {exc}") from exc
    try:
        return parse_action({"name": name, "arguments": args})
    except ValueError as exc:
        raise MalformedToolCall(str(exc)) from exc


def parse_tool_calls(calls: Sequence[dict]) -> tuple[list[Action], list[str]]:
    """Lenient batch parse: bad calls are skipped, logged, and reported."""
    actions: list[Action] = []
    skipped: list[str] = []
    for call in calls:
        inner = call.get("function", call) if isinstance(call, dict) else call
        try:
            actions.append(parse_tool_call(inner))
        except MalformedToolCall as exc:
            log.warning("skipping tool call: %s", exc)
            skipped.append(str(exc))
    return actions, skipped


class ReplayTransport(httpx.BaseTransport):
    """Serves a recorded list of chat responses in order (no network)."""

    def __init__(self, responses: Sequence[dict]):
        self.responses = list(responses)
        self.requests: list[dict] = []
        self._cursor = 0

    @classmethod
    def from_file(cls, path: str | Path) -> "ReplayTransport":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return cls(data["responses"] if isinstance(data, dict) else data)

    def handle_request(self, request: httpx.Request) -> httpx.Response:
        self.requests.append(json.loads(request.content.decode("utf-8")))
        if self._cursor >= len(self.responses):
            return httpx.Response(500, json={"error": "transcript exhausted"})
        body = self.responses[self._cursor]
        self._cursor += 1
        return httpx.Response(200, json=body)


class ChatMaker:
    """MakerAgent that prompts a vision chat model for tool-call edits."""

    def __init__(
        self,
        endpoint: EndpointConfig = EndpointConfig(),
        prompt: PromptConfig = PromptConfig(),
        transport: httpx.BaseTransport | None = None,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.endpoint = endpoint
        self.prompt = prompt
        self._sleep = sleep
        headers = {}
        key = os.environ.get(endpoint.api_key_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._client = httpx.Client(
            base_url=endpoint.base_url,
            headers=headers,
            timeout=endpoint.timeout,
            transport=transport,
        )

    # -- prompt assembly ----------------------------------------------------

    def _image_part(self, design: Design, overlay) -> dict:
        bitmap = rasterize(Scene(design, overlay, self.prompt.style))
        data = base64.b64encode(png_bytes(bitmap)).decode("ascii")
        return {
            "type": "image_url",
            "image_url": {"url": f"data:image/png;base64,{data}"},
        }

    def _round_content(self, index: int, message: Message, design: Design) -> list[dict]:
        content: list[dict] = [
            {"type": "text", "text": self.prompt.round_header.format(index=index)}
        ]
        if self.prompt.include_images:
            content.append(self._image_part(design, message.drawing))
        if message.text:
            content.append({"type": "text", "text": message.text})
        content.append({"type": "text", "text": self.prompt.directive})
        return content

    def build_messages(
        self, message: Message, current: Design, history: Sequence[Round]
    ) -> list[dict]:
        msgs: list[dict] = [{"role": "system", "content": self.prompt.system_text}]
        msgs.append({"role": "user", "content": [{"type": "text", "text": "New game:"}]})
        for i, rnd in enumerate(history, start=1):
            msgs.append(
                {"role": "user", "content": self._round_content(i, rnd.message, rnd.design_before)}
            )
            calls = [
                {
                    "id": f"call_{i}_{j}",
                    "type": "function",
                    "function": {
                        "name": action_to_obj(a)["name"],
                        "arguments": json.dumps(action_to_obj(a)["arguments"]),
                    },
                }
                for j, a in enumerate(rnd.actions)
            ]
            msgs.append({"role": "assistant", "content": None, "tool_calls": calls})
            for call in calls:
                msgs.append(
                    {"role": "tool", "tool_call_id": call["id"], "content": "applied"}
                )
            feedback: list[dict] = [
                {"type": "text", "text": self.prompt.feedback_prefix},
                {"type": "text", "text": json.dumps(design_to_obj(rnd.design_after))},
            ]
            if self.prompt.include_images:
                feedback.insert(1, self._image_part(rnd.design_after, None))
            msgs.append({"role": "user", "content": feedback})
        msgs.append(
            {"role": "user", "content": self._round_content(len(history) + 1, message, current)}
        )
        return msgs

    # -- transport ----------------------------------------------------------

    def _post(self, payload: dict) -> dict:
        last_error: Exception | None = None
        for attempt in range(self.endpoint.max_attempts):
            if attempt:
                self._sleep(self.endpoint.backoff * 2 ** (attempt - 1))
            try:
                response = self._client.post("/chat/completions", json=payload)
            except httpx.HTTPError as exc:
                last_error = exc
                continue
            if response.status_code >= 500:
                last_error = TransportError(f"server error {response.status_code}")
                continue
            if response.status_code != 200:
                raise TransportError(f"endpoint returned {response.status_code}")
            return response.json()
        raise TransportError(f"endpoint failed after {self.endpoint.max_attempts} attempts: {last_error}")

    # -- MakerAgent ----------------------------------------------------------

    def propose_actions(
        self, message: Message, current: Design, history: Sequence[Round]
    ) -> list[Action]:
        payload = {
            "model": self.endpoint.model,
            "messages": self.build_messages(message, current, history),
            "tools": TOOL_SCHEMAS,
            "temperature": self.endpoint.temperature,
            "top_p": self.endpoint.top_p,
            "max_tokens": self.endpoint.max_tokens,
        }
        data = self._post(payload)
        try:
            reply = data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat response: {exc}") from exc
        calls = reply.get("tool_calls") or []
        actions, _ = parse_tool_calls(calls)
        return actions

    def close(self) -> None:
        self._client.close()
