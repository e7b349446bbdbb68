"""One bridge session: pipeline steps in, negative prompts back.

The bridge owns the pipeline and the VLM backend; the controller (a
subprocess speaking the wire protocol on its stdio) owns the negative
ledger. Per denoising step the bridge decodes a preview of the current
clean-sample estimate, asks the configured questions, sends the answers,
and waits for the controller's ``negatives`` message, which becomes the
pipeline's negative prompt from the next step on. The bridge keeps no
state between steps except the session transcript and timing report.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .backends import TimedBackend, format_question, make_backend
from .decode import SDXL_PREVIEW_MATRIX, linear_decode
from .errors import BridgeError, ConfigError, ProtocolViolation
from .pipeline import make_pipeline
from .protocol import PROTOCOL_VERSION, BridgeMessage, StreamValidator, decode, encode

EXIT_OK = 0
EXIT_SESSION = 1
EXIT_CONFIG = 2


@dataclass
class SessionConfig:
    pipeline: dict
    backend: dict
    questions: tuple[str, ...]
    matrix: np.ndarray
    transcript: Path | None = None
    report: Path | None = None

    @classmethod
    def from_file(cls, path: str | Path) -> "SessionConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except OSError as e:
            raise ConfigError(f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise ConfigError(f"malformed config {path}: {e}") from e
        return cls.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "SessionConfig":
        doc = dict(doc)
        for key in ("pipeline", "backend"):
            if key not in doc or not isinstance(doc[key], dict):
                raise ConfigError(f"config needs a {key!r} mapping")
        questions = doc.get("questions")
        if questions is None:
            category = doc.get("category")
            if not category:
                raise ConfigError("config needs 'questions' or 'category'")
            questions = [format_question(category)]
        if not questions:
            raise ConfigError("questions must be non-empty")
        matrix = doc.get("matrix", "sdxl")
        if isinstance(matrix, str):
            if matrix != "sdxl":
                raise ConfigError(f"unknown preset matrix {matrix!r}")
            matrix = SDXL_PREVIEW_MATRIX
        else:
            matrix = np.asarray(matrix, dtype=float)
        return cls(
            pipeline=doc["pipeline"],
            backend=doc["backend"],
            questions=tuple(str(q) for q in questions),
            matrix=matrix,
            transcript=Path(doc["transcript"]) if doc.get("transcript") else None,
            report=Path(doc["report"]) if doc.get("report") else None,
        )


@dataclass
class Transcript:
    """Ordered record of every wire line, sent ('>') and received ('<')."""

    lines: list[str] = field(default_factory=list)

    def sent(self, line: str) -> None:
        self.lines.append(f"> {line}")

    def received(self, line: str) -> None:
        self.lines.append(f"< {line}")

    def save(self, path: Path) -> None:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{ln}\n" for ln in self.lines))


class Session:
    """Drives one protocol session over a pair of line streams."""

    def __init__(self, config: SessionConfig):
        self.config = config
        self.pipeline = make_pipeline(config.pipeline)
        self.backend = TimedBackend(make_backend(config.backend))
        self.transcript = Transcript()
        self._outv = StreamValidator("bridge->controller")
        self._inv = StreamValidator("controller->bridge")

    # -- wire helpers ---------------------------------------------------
    def _send(self, out, msg: BridgeMessage) -> None:
        line = encode(self._outv.check(msg))
        self.transcript.sent(line)
        out.write(line + "\n")
        out.flush()

    def _recv(self, inp) -> BridgeMessage:
        line = inp.readline()
        if not line:
            raise ProtocolViolation("controller stream ended mid-session")
        line = line.rstrip("\n")
        self.transcript.received(line)
        return self._inv.check(decode(line))

    def _expect(self, inp, type_: str, step: int) -> BridgeMessage:
        msg = self._recv(inp)
        if msg.type != type_ or msg.step != step:
            raise ProtocolViolation(
                f"expected {type_}@{step}, got {msg.type}@{msg.step}"
            )
        return msg

    # -- main loop ------------------------------------------------------
    def run(self, inp, out) -> int:
        """Returns a process exit code; never raises for protocol or
        backend failures — those end the session with an  ``error``
        message instead."""
        step = 0
        try:
            steps = self.pipeline.steps
            self._send(out, BridgeMessage("hello", 0, {
                "protocol": PROTOCOL_VERSION,
                "steps": steps,
                "questions": list(self.config.questions),
            }))
            self._expect(inp, "hello", 0)

            negative_prompt = ""
            for step in range(1, steps + 1):
                latent = self.pipeline.step(step, negative_prompt)
                preview = linear_decode(latent, self.config.matrix)
                self._send(out, BridgeMessage("step_begin", step, {
                    "negative_prompt": negative_prompt,
                }))
                self._send(out, BridgeMessage("preview_ready", step, {
                    "shape": list(preview.shape),
                    "mean": round(float(preview.mean()), 6),
                    "min": round(float(preview.min()), 6),
                    "max": round(float(preview.max()), 6),
                }))
                answers = [
                    {"question": q, "answer": self.backend.query(preview, q)}
                    for q in self.config.questions
                ]
                self._send(out, BridgeMessage("answers", step, {"answers": answers}))
                reply = self._expect(inp, "negatives", step)
                negative_prompt = reply.payload.get("negative_prompt")
                if not isinstance(negative_prompt, str):
                    raise ProtocolViolation(
                        f"negatives@{step} payload needs a string negative_prompt"
                    )

            self._send(out, BridgeMessage("done", steps, {}))
            self._expect(inp, "done", steps)
            code = EXIT_OK
        except BridgeError as e:
            self._fail(out, step, f"{type(e).__name__}: {e}")
            code = EXIT_SESSION
        except BrokenPipeError:
            code = EXIT_SESSION
        finally:
            self._persist()
        return code

    def _fail(self, out, step: int, message: str) -> None:
        try:
            self._send(out, BridgeMessage("error", step, {"message": message}))
        except (BridgeError, OSError, ValueError):
            pass  # controller already gone; the transcript still records why

    def _persist(self) -> None:
        if self.config.transcript:
            self.transcript.save(self.config.transcript)
        if self.config.report:
            self.config.report.parent.mkdir(parents=True, exist_ok=True)
            self.config.report.write_text(
                json.dumps(self.backend.runtime_report(), indent=2) + "\n"
            )


def serve(config: SessionConfig, controller_cmd: list[str]) -> int:
    """Spawn the controller subprocess and run one session over its stdio."""
    import subprocess

    if not controller_cmd:
        raise ConfigError("controller command must be non-empty")
    proc = subprocess.Popen(
        controller_cmd,
        stdin=subprocess.PIPE,
        stdout=subprocess.PIPE,
        text=True,
        bufsize=1,
    )
    try:
        code = Session(config).run(proc.stdout, proc.stdin)
    finally:
        try:
            proc.stdin.close()
        except OSError:
            pass
        proc.wait(timeout=30)
    return code
