"""Append-only event log backing the annotation engine.

One JSON object per line: ``{"seq": int, "timestamp": str, "kind": str,
"payload": {...}}``. Sequence numbers start at 1 and must be contiguous;
loading a log with a gap, a duplicate, or an unparseable line raises
CorruptEventLog naming the offending sequence number. Replaying a log through
the engine reducers rebuilds state deterministically, so snapshots are
byte-identical across replays.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterator

from .errors import CorruptEventLog


@dataclass(frozen=True)
class Event:
    seq: int
    timestamp: str
    kind: str
    payload: dict

    def to_json(self) -> str:
        return json.dumps(
            {
                "seq": self.seq,
                "timestamp": self.timestamp,
                "kind": self.kind,
                "payload": self.payload,
            },
            ensure_ascii=False,
            sort_keys=True,
        )


def read_events(path: str | Path) -> list[Event]:
    """Load and verify a log file."""
    events: list[Event] = []
    expected_seq = 1
    with open(path, "r", encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            try:
                record = json.loads(line)
                event = Event(
                    seq=record["seq"],
                    timestamp=record["timestamp"],
                    kind=record["kind"],
                    payload=record["payload"],
                )
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise CorruptEventLog(
                    f"unreadable event at seq {expected_seq} "
                    f"(line {line_no}): {exc}",
                    seq=expected_seq,
                ) from exc
            if event.seq != expected_seq:
                raise CorruptEventLog(
                    f"expected seq {expected_seq} but found {event.seq} "
                    f"(line {line_no})",
                    seq=expected_seq,
                )
            events.append(event)
            expected_seq += 1
    return events


class EventLog:
    """Writable log. Appends are serialized and flushed immediately."""

    def __init__(self, path: str | Path, clock: Callable[[], str]):
        self.path = Path(path)
        self._clock = clock
        self._lock = threading.Lock()
        self._events: list[Event] = []
        if self.path.exists():
            self._events = read_events(self.path)
        else:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.touch()
        self._handle = open(self.path, "a", encoding="utf-8")

    @property
    def next_seq(self) -> int:
        return len(self._events) + 1

    def append(self, kind: str, payload: dict) -> Event:
        with self._lock:
            event = Event(
                seq=len(self._events) + 1,
                timestamp=self._clock(),
                kind=kind,
                payload=payload,
            )
            self._handle.write(event.to_json() + "\n")
            self._handle.flush()
            self._events.append(event)
            return event

    def events(self) -> Iterator[Event]:
        with self._lock:
            snapshot = list(self._events)
        return iter(snapshot)

    def close(self) -> None:
        with self._lock:
            self._handle.flush()
            self._handle.close()
