"""Negative-prompt controller: answer normalization, the growing ledger,
query scheduling, and per-step prompt rendering under every controller mode.

All state here is plain immutable values; one run owns one ledger.
"""

from __future__ import annotations

import re
import string
from dataclasses import dataclass
from typing import Callable, Sequence, Union

from .errors import DomainError, MissingReplaySource

# Filler prefixes stripped from oracle answers. Extensible per call.
FILLER_PREFIXES = ("it looks like", "it is", "this is", "looks like", "probably")
ARTICLES = ("a", "an", "the")
MAX_TOKEN_LEN = 64

_EDGE_PUNCT = string.punctuation + string.whitespace
_WS = re.compile(r"\s+")


def normalize_answer(raw: str, extra_prefixes: Sequence[str] = ()) -> str:
    """Reduce a free-form oracle answer to a concept token.

    Lowercases, strips filler prefixes and a leading article, trims
    punctuation, collapses whitespace, and caps length at a word boundary.
    Returns "" when nothing remains; the empty string means "discard".
    """
    text = raw.lower().replace(",", " ")
    text = _WS.sub(" ", text).strip(_EDGE_PUNCT)
    prefixes = tuple(p.lower() for p in FILLER_PREFIXES + tuple(extra_prefixes))
    changed = True
    while changed and text:
        changed = False
        for p in prefixes:
            if text == p:
                text = ""
                changed = True
            elif text.startswith(p + " "):
                text = text[len(p) + 1 :]
                changed = True
        for a in ARTICLES:
            if text == a:
                text = ""
                changed = True
            elif text.startswith(a + " "):
                text = text[len(a) + 1 :]
                changed = True
        if changed:
            text = text.strip(_EDGE_PUNCT)
            text = _WS.sub(" ", text)
    if len(text) > MAX_TOKEN_LEN:
        cut = text.rfind(" ", 0, MAX_TOKEN_LEN + 1)
        text = text[: cut if cut > 0 else MAX_TOKEN_LEN]
        text = text.strip(_EDGE_PUNCT)
    return text


@dataclass(frozen=True)
class LedgerEntry:
    token: str
    added_at_step: int


@dataclass(frozen=True)
class NegativeLedger:
    """Ordered, case-insensitively deduplicated concept tokens."""

    entries: tuple[LedgerEntry, ...] = ()

    def tokens(self) -> list[str]:
        return [e.token for e in self.entries]

    def __len__(self) -> int:
        return len(self.entries)

    def __contains__(self, token: str) -> bool:
        needle = token.casefold()
        return any(e.token.casefold() == needle for e in self.entries)


def ledger_update(
    ledger: NegativeLedger, answers: Sequence[str], step: int
) -> NegativeLedger:
    """Append normalized, previously unseen answers with ``added_at_step=step``.

    Pure: returns a new ledger; prior entries are never touched.
    """
    if ledger.entries and step < ledger.entries[-1].added_at_step:
        raise DomainError(
            f"step {step} precedes last ledger step {ledger.entries[-1].added_at_step}"
        )
    entries = list(ledger.entries)
    seen = {e.token.casefold() for e in entries}
    for raw in answers:
        token = normalize_answer(raw)
        if not token or token.casefold() in seen:
            continue
        entries.append(LedgerEntry(token, step))
        seen.add(token.casefold())
    return NegativeLedger(tuple(entries))


def render_negative_prompt(ledger: NegativeLedger) -> str:
    """Comma-join the ledger tokens in insertion order."""
    return ", ".join(ledger.tokens())


@dataclass(frozen=True)
class QuerySchedule:
    """Step window and cadence at which the oracle is consulted."""

    t_start: int
    t_stop: int
    frequency: int = 1

    def __post_init__(self):
        if not (0 <= self.t_start <= self.t_stop):
            raise DomainError(f"bad window [{self.t_start}, {self.t_stop}]")
        if self.frequency < 1:
            raise DomainError(f"frequency must be >= 1, got {self.frequency}")


def should_query(schedule: QuerySchedule, step: int) -> bool:
    return (
        schedule.t_start <= step <= schedule.t_stop
        and (step - schedule.t_start) % schedule.frequency == 0
    )


# -- controller modes ---------------------------------------------------------


@dataclass(frozen=True)
class Adaptive:
    pass


@dataclass(frozen=True)
class StaticList:
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class ReplayPerSeed:
    source_run: str


@dataclass(frozen=True)
class ReplayCrossSeed:
    source_run: str


@dataclass(frozen=True)
class NoAccumulation:
    pass


ControllerMode = Union[Adaptive, StaticList, ReplayPerSeed, ReplayCrossSeed, NoAccumulation]

# Resolves a stored run id to its final ledger; raises KeyError when absent.
ReplayStore = Callable[[str], NegativeLedger]


def _render_static(tokens: Sequence[str]) -> str:
    ledger = ledger_update(NegativeLedger(), tokens, 0)
    return render_negative_prompt(ledger)


def negatives_for_step(
    mode: ControllerMode,
    ledger: NegativeLedger,
    step: int,
    schedule: QuerySchedule,
    current_answers: Sequence[str] = (),
    store: ReplayStore | None = None,
) -> str:
    """Render the negative prompt to apply at ``step`` under ``mode``.

    Past the window end every mode clears the prompt to the empty string.
    Static and replay modes render one fixed list at every in-window step;
    NoAccumulation uses only the latest answers.
    """
    if step > schedule.t_stop:
        return ""
    if isinstance(mode, Adaptive):
        return render_negative_prompt(ledger)
    if isinstance(mode, StaticList):
        return _render_static(mode.tokens)
    if isinstance(mode, (ReplayPerSeed, ReplayCrossSeed)):
        if store is None:
            raise MissingReplaySource(f"no store to resolve run {mode.source_run!r}")
        try:
            source = store(mode.source_run)
        except KeyError as e:
            raise MissingReplaySource(f"run {mode.source_run!r} not found") from e
        return render_negative_prompt(source)
    if isinstance(mode, NoAccumulation):
        return ", ".join(t for t in current_answers if t)
    raise TypeError(f"unknown controller mode {mode!r}")
