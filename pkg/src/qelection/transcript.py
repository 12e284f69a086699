"""Seeding helpers and structured event transcripts."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .primitives import bits_str


def make_rng(seed: int, *counter: int) -> np.random.Generator:
    """Generator for ``seed``; extra counters give independent, order-free substreams."""
    return np.random.default_rng(np.random.SeedSequence([int(seed) & (2**64 - 1), *counter]))


def trial_rng(master_seed: int, index: int) -> np.random.Generator:
    return make_rng(master_seed, 0x7472, index)


def _canonical(obj: Any) -> Any:
    if isinstance(obj, np.ndarray):
        if obj.dtype == np.uint8 and obj.ndim == 1:
            return bits_str(obj)
        return obj.tolist()
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def digest(payload: Any) -> str:
    blob = json.dumps(_canonical(payload), sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


@dataclass
class Event:
    run: str
    seq: int
    phase: str
    actor: str
    event: str
    digest: str

    def to_json(self) -> str:
        return json.dumps(
            {"run": self.run, "seq": self.seq, "phase": self.phase, "actor": self.actor,
             "event": self.event, "digest": self.digest},
            sort_keys=True,
            separators=(",", ":"),
        )


@dataclass
class Transcript:
    run: str = "run"
    events: list[Event] = field(default_factory=list)

    def emit(self, phase: str, actor: str, event: str, payload: Any = None) -> Event:
        ev = Event(self.run, len(self.events), phase, actor, event, digest(payload))
        self.events.append(ev)
        return ev

    def extend(self, other: "Transcript") -> None:
        for ev in other.events:
            self.emit_raw(ev.phase, ev.actor, ev.event, ev.digest)

    def emit_raw(self, phase: str, actor: str, event: str, dig: str) -> None:
        self.events.append(Event(self.run, len(self.events), phase, actor, event, dig))

    def to_jsonl(self) -> str:
        return "".join(ev.to_json() + "\n" for ev in self.events)

    def __len__(self) -> int:
        return len(self.events)

    def filter(self, **kw) -> list[Event]:
        return [ev for ev in self.events if all(getattr(ev, k) == v for k, v in kw.items())]
