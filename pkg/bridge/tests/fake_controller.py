"""Scripted controller for session tests.

Speaks the wire protocol on stdio: accumulates a negative ledger from the
bridge's answers using the primary package's public API and replies with
the rendered negative prompt after every step. Deterministic, so sessions
against it can be compared to a committed golden transcript.
"""

import json
import sys

from negsteer.guidance import NegativeLedger, ledger_update, render_negative_prompt


def send(type_: str, step: int, payload: dict | None = None) -> None:
    doc = {"type": type_, "step": step, "payload": payload or {}}
    sys.stdout.write(json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n")
    sys.stdout.flush()


def main() -> None:
    ledger = NegativeLedger()
    for line in sys.stdin:
        msg = json.loads(line)
        kind, step = msg["type"], msg["step"]
        if kind == "hello":
            send("hello", 0)
        elif kind == "answers":
            raw = [a["answer"] for a in msg["payload"]["answers"]]
            ledger = ledger_update(ledger, raw, step)
            send("negatives", step, {"negative_prompt": render_negative_prompt(ledger)})
        elif kind == "done":
            send("done", step)
            return
        elif kind == "error":
            return


if __name__ == "__main__":
    main()
