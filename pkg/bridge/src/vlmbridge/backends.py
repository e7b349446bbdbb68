"""Pluggable VLM backends.

A backend answers one question about one preview image and returns the
raw text. Two backends ship: a fixture-echo stub for tests and an HTTP
client for a hosted model. New backends register by id in BACKENDS.

Environment defaults for the HTTP backend:
  VLMBRIDGE_ENDPOINT   endpoint URL
  VLMBRIDGE_TIMEOUT_S  request timeout in seconds (default 30)
"""

from __future__ import annotations

import base64
import json
import os
import socket
import time
import urllib.error
import urllib.request

import numpy as np

from .errors import BackendTimeout, BackendUnavailable, ConfigError


def format_question(category: str) -> str:
    """The standard subcategory question for a broad category."""
    return f"What type of {category} is this?"


class FixtureEchoBackend:
    """Returns canned answers verbatim, in call order. Running out of
    fixtures is a BackendUnavailable: a session must budget one fixture
    per (step, question)."""

    def __init__(self, fixtures):
        self._fixtures = list(fixtures)
        self._cursor = 0

    def query(self, image: np.ndarray, question: str) -> str:
        if self._cursor >= len(self._fixtures):
            raise BackendUnavailable(
                f"fixture backend exhausted after {self._cursor} calls"
            )
        answer = self._fixtures[self._cursor]
        self._cursor += 1
        return answer


class HTTPBackend:
    """POSTs {question, image shape, raw image bytes (base64)} as JSON and
    returns the endpoint's ``answer`` field."""

    def __init__(self, endpoint: str | None = None, timeout_s: float | None = None):
        self.endpoint = endpoint or os.environ.get("VLMBRIDGE_ENDPOINT")
        if not self.endpoint:
            raise ConfigError("HTTP backend needs an endpoint (VLMBRIDGE_ENDPOINT)")
        if timeout_s is None:
            timeout_s = float(os.environ.get("VLMBRIDGE_TIMEOUT_S", "30"))
        self.timeout_s = timeout_s

    def query(self, image: np.ndarray, question: str) -> str:
        image = np.asarray(image, dtype=np.float32)
        body = json.dumps(
            {
                "question": question,
                "shape": list(image.shape),
                "image_f32": base64.b64encode(image.tobytes()).decode("ascii"),
            }
        ).encode("utf-8")
        req = urllib.request.Request(
            self.endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout_s) as resp:
                doc = json.loads(resp.read().decode("utf-8"))
        except socket.timeout as e:
            raise BackendTimeout(f"{self.endpoint}: no answer in {self.timeout_s}s") from e
        except urllib.error.URLError as e:
            if isinstance(e.reason, socket.timeout):
                raise BackendTimeout(
                    f"{self.endpoint}: no answer in {self.timeout_s}s"
                ) from e
            raise BackendUnavailable(f"{self.endpoint}: {e.reason}") from e
        if not isinstance(doc, dict) or "answer" not in doc:
            raise BackendUnavailable(f"{self.endpoint}: response missing 'answer'")
        return str(doc["answer"])


BACKENDS = {"fixture": FixtureEchoBackend, "http": HTTPBackend}


def make_backend(spec: dict):
    """Build a backend from its config mapping, e.g.
    {"kind": "fixture", "fixtures": [...]} or
    {"kind": "http", "endpoint": "...", "timeout_s": 10}."""
    spec = dict(spec)
    kind = spec.pop("kind", None)
    if kind == "fixture":
        if "fixtures" not in spec:
            raise ConfigError("fixture backend needs 'fixtures'")
        return FixtureEchoBackend(spec["fixtures"])
    if kind == "http":
        return HTTPBackend(spec.get("endpoint"), spec.get("timeout_s"))
    raise ConfigError(f"unknown backend kind {kind!r} (have {sorted(BACKENDS)})")


class TimedBackend:
    """Wraps a backend, accumulating per-call latency for the runtime
    report."""

    def __init__(self, inner):
        self._inner = inner
        self.calls: list[dict] = []

    def query(self, image: np.ndarray, question: str) -> str:
        start = time.perf_counter()
        answer = self._inner.query(image, question)
        self.calls.append(
            {"question": question, "latency_s": time.perf_counter() - start}
        )
        return answer

    def runtime_report(self) -> dict:
        latencies = [c["latency_s"] for c in self.calls]
        total = float(sum(latencies))
        return {
            "vlm_calls": len(latencies),
            "vlm_total_s": total,
            "vlm_mean_s": total / len(latencies) if latencies else 0.0,
            "per_call": self.calls,
        }
