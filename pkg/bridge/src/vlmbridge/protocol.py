"""Line-delimited wire protocol between the bridge and the controller.

One JSON object per line, UTF-8, shaped ``{"type", "step", "payload"}``.
Message types:

  hello          first message on each side; payload carries capabilities
  step_begin     bridge -> controller; the pipeline starts denoising step N
  preview_ready  bridge -> controller; the clean-sample preview was decoded
  answers        bridge -> controller; the VLM's replies to the questions
  negatives      controller -> bridge; negative prompt for subsequent steps
  done           last message of a successful session, on each side
  error          last message of a failed session

Invariants enforced by StreamValidator: ``hello`` first, ``done`` or
``error`` last, step numbers non-decreasing within a direction.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ProtocolViolation

MESSAGE_TYPES = frozenset(
    {"hello", "step_begin", "preview_ready", "answers", "negatives", "done", "error"}
)

PROTOCOL_VERSION = 1


@dataclass(frozen=True)
class BridgeMessage:
    type: str
    step: int
    payload: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.type not in MESSAGE_TYPES:
            raise ProtocolViolation(f"unknown message type {self.type!r}")
        if not isinstance(self.step, int) or isinstance(self.step, bool):
            raise ProtocolViolation(f"step must be an integer, got {self.step!r}")
        if self.step < 0:
            raise ProtocolViolation(f"step must be >= 0, got {self.step}")
        if not isinstance(self.payload, dict):
            raise ProtocolViolation("payload must be an object")


def encode(msg: BridgeMessage) -> str:
    """One deterministic line per message (sorted keys, no whitespace)."""
    doc = {"type": msg.type, "step": msg.step, "payload": msg.payload}
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def decode(line: str) -> BridgeMessage:
    """Parse one wire line; any malformation is a ProtocolViolation."""
    try:
        doc = json.loads(line)
    except json.JSONDecodeError as e:
        raise ProtocolViolation(f"not valid JSON: {line[:80]!r}") from e
    if not isinstance(doc, dict):
        raise ProtocolViolation("message must be a JSON object")
    extra = set(doc) - {"type", "step", "payload"}
    if extra:
        raise ProtocolViolation(f"unexpected fields {sorted(extra)}")
    missing = {"type", "step"} - set(doc)
    if missing:
        raise ProtocolViolation(f"missing fields {sorted(missing)}")
    return BridgeMessage(doc["type"], doc["step"], doc.get("payload", {}))


class StreamValidator:
    """Enforces per-direction ordering: hello first, done/error last,
    non-decreasing step numbers."""

    def __init__(self, direction: str):
        self.direction = direction
        self._last_step: int | None = None
        self._finished = False

    def check(self, msg: BridgeMessage) -> BridgeMessage:
        if self._finished:
            raise ProtocolViolation(
                f"{self.direction}: message after session end: {msg.type}"
            )
        if self._last_step is None:
            if msg.type != "hello":
                raise ProtocolViolation(
                    f"{self.direction}: first message must be hello, got {msg.type}"
                )
        elif msg.type == "hello":
            raise ProtocolViolation(f"{self.direction}: duplicate hello")
        if self._last_step is not None and msg.step < self._last_step:
            raise ProtocolViolation(
                f"{self.direction}: step went backwards "
                f"({self._last_step} -> {msg.step})"
            )
        self._last_step = msg.step
        if msg.type in ("done", "error"):
            self._finished = True
        return msg

    @property
    def finished(self) -> bool:
        return self._finished
