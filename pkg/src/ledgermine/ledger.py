"""Event data model, type taxonomy and the append-only event ledger."""
from __future__ import annotations

import bisect
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import Iterable, Iterator

import numpy as np

from .errors import (
    DuplicateId,
    InvalidRange,
    LedgerMineError,
    MalformedEvent,
    ParseError,
    UnknownEventType,
)

log = logging.getLogger(__name__)

PATH_RE = re.compile(r"[a-z0-9_]+(?:\.[a-z0-9_]+)*")
SECONDS_PER_HOUR = 3600


def parse_instant(text: str) -> int:
    """ISO-8601 string -> integer seconds since the Unix epoch (UTC)."""
    if not isinstance(text, str):
        raise MalformedEvent(f"timestamp must be a string, got {text!r}")
    s = text.strip()
    if s.endswith(("Z", "z")):
        s = s[:-1] + "+00:00"
    try:
        dt = datetime.fromisoformat(s)
    except ValueError as exc:
        raise MalformedEvent(f"bad timestamp {text!r}") from exc
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    if dt.microsecond:
        raise MalformedEvent(f"sub-second timestamp not supported: {text!r}")
    return int(dt.timestamp())


def format_instant(ts: int) -> str:
    return datetime.fromtimestamp(int(ts), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")


def is_descendant_or_self(path: str, ancestor: str) -> bool:
    return path == ancestor or path.startswith(ancestor + ".")


def _check_path(path, what="event_type"):
    if not isinstance(path, str) or not PATH_RE.fullmatch(path):
        raise MalformedEvent(f"invalid {what} {path!r}")


@dataclass(frozen=True)
class Event:
    id: str
    event_type: str
    timestamp: int
    duration: int = 0
    attributes: dict = field(default_factory=dict)
    source: str = ""

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise MalformedEvent(f"event id must be a non-empty string, got {self.id!r}")
        _check_path(self.event_type)
        if isinstance(self.timestamp, bool) or not isinstance(self.timestamp, (int, np.integer)):
            raise MalformedEvent(f"timestamp must be integer seconds, got {self.timestamp!r}")
        if isinstance(self.duration, bool) or not isinstance(self.duration, (int, np.integer)):
            raise MalformedEvent(f"duration must be integer seconds, got {self.duration!r}")
        if self.duration < 0:
            raise MalformedEvent(f"negative duration {self.duration} on event {self.id!r}")
        if not isinstance(self.attributes, dict):
            raise MalformedEvent("attributes must be a mapping")
        for k, v in self.attributes.items():
            if not isinstance(k, str) or not isinstance(v, (str, int, float, bool)):
                raise MalformedEvent(f"attribute {k!r} must map a string to a scalar")
        if not isinstance(self.source, str):
            raise MalformedEvent("source must be a string")
        object.__setattr__(self, "timestamp", int(self.timestamp))
        object.__setattr__(self, "duration", int(self.duration))

    @property
    def sort_key(self):
        return (self.timestamp, self.id)

    def to_record(self) -> dict:
        return {
            "id": self.id,
            "type": self.event_type,
            "ts": format_instant(self.timestamp),
            "dur_s": self.duration,
            "attrs": dict(self.attributes),
            "source": self.source,
        }

    @classmethod
    def from_record(cls, rec) -> "Event":
        if not isinstance(rec, dict):
            raise MalformedEvent("event record must be a JSON object")
        missing = [k for k in ("id", "type", "ts", "source") if k not in rec]
        if missing:
            raise MalformedEvent("missing field(s): " + ", ".join(missing))
        return cls(
            id=rec["id"],
            event_type=rec["type"],
            timestamp=parse_instant(rec["ts"]),
            duration=rec.get("dur_s", 0),
            attributes=rec.get("attrs") or {},
            source=rec["source"],
        )


class Taxonomy:
    """Tree of dotted type paths plus the actionable and media subsets.

    Ancestors of every listed path are implied, so ``exercise.bike`` also
    registers ``exercise``.
    """

    def __init__(self, types: Iterable[str], actionable: Iterable[str] = (), media: Iterable[str] = ()):
        types = list(types)
        seen = set()
        for t in types:
            _check_path(t, "taxonomy path")
            if t in seen:
                raise ParseError(f"duplicate taxonomy path {t!r}")
            seen.add(t)
        paths = set()
        for t in types:
            parts = t.split(".")
            for i in range(1, len(parts) + 1):
                paths.add(".".join(parts[:i]))
        self.paths = frozenset(paths)
        self.actionable = frozenset(actionable)
        self.media = frozenset(media)
        bad = sorted((self.actionable | self.media) - self.paths)
        if bad:
            raise UnknownEventType(bad, "actionable/media entries absent from the type tree: " + ", ".join(bad))
        parents = {p.rsplit(".", 1)[0] for p in self.paths if "." in p}
        self.leaves = frozenset(self.paths - parents)

    def __contains__(self, path) -> bool:
        return path in self.paths

    def __eq__(self, other):
        return (
            isinstance(other, Taxonomy)
            and self.paths == other.paths
            and self.actionable == other.actionable
            and self.media == other.media
        )

    def __hash__(self):
        return hash(self.identity)

    def children(self, path: str) -> list[str]:
        depth = path.count(".") + 1
        return sorted(p for p in self.paths if p.startswith(path + ".") and p.count(".") == depth)

    def roots(self) -> list[str]:
        return sorted(p for p in self.paths if "." not in p)

    def require(self, *paths: str) -> None:
        bad = [p for p in paths if p not in self.paths]
        if bad:
            raise UnknownEventType(bad)

    def to_dict(self) -> dict:
        return {
            "types": sorted(self.paths),
            "actionable": sorted(self.actionable),
            "media": sorted(self.media),
        }

    @property
    def identity(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(blob.encode()).hexdigest()[:16]

    @classmethod
    def from_dict(cls, data) -> "Taxonomy":
        if not isinstance(data, dict) or "types" not in data:
            raise ParseError("taxonomy must be a JSON object with a 'types' list")
        try:
            return cls(data["types"], data.get("actionable", ()), data.get("media", ()))
        except MalformedEvent as exc:
            raise ParseError(str(exc)) from exc


def load_taxonomy(path) -> Taxonomy:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"taxonomy is not valid JSON: {exc}") from exc
    return Taxonomy.from_dict(data)


def save_taxonomy(taxonomy: Taxonomy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(taxonomy.to_dict(), fh, indent=2)
        fh.write("\n")


def type_matches(event_type: str, pattern_atom: str, taxonomy: Taxonomy) -> bool:
    """True iff ``event_type`` is ``pattern_atom`` or one of its descendants."""
    taxonomy.require(event_type, pattern_atom)
    return is_descendant_or_self(event_type, pattern_atom)


class Ledger:
    """Events kept sorted ascending by ``(timestamp, id)``.

    Readers treat a ledger as an immutable snapshot; ``append`` is for the
    single writer building it. Numpy views used by the miner are cached and
    dropped on mutation.
    """

    def __init__(self, events: Iterable[Event] = ()):
        self._events: list[Event] = sorted(events, key=lambda e: e.sort_key)
        self._ids = set()
        for e in self._events:
            if e.id in self._ids:
                raise DuplicateId(f"duplicate event id {e.id!r}")
            self._ids.add(e.id)
        self._cache: dict = {}

    def __len__(self):
        return len(self._events)

    def __iter__(self) -> Iterator[Event]:
        return iter(self._events)

    def __getitem__(self, i):
        return self._events[i]

    def __eq__(self, other):
        return isinstance(other, Ledger) and self._events == other._events

    def __repr__(self):
        return f"Ledger({len(self)} events)"

    @property
    def events(self) -> list[Event]:
        return list(self._events)

    @property
    def span(self):
        if not self._events:
            return None
        return (self._events[0].timestamp, self._events[-1].timestamp)

    def __contains__(self, event_id) -> bool:
        return event_id in self._ids

    def append(self, event: Event, taxonomy: Taxonomy) -> "Ledger":
        if event.event_type not in taxonomy:
            raise UnknownEventType(event.event_type)
        if event.id in self._ids:
            raise DuplicateId(f"duplicate event id {event.id!r}")
        bisect.insort(self._events, event, key=lambda e: e.sort_key)
        self._ids.add(event.id)
        self._cache.clear()
        return self

    def slice(self, start: int, end: int) -> "Ledger":
        """Events with ``start <= timestamp < end``."""
        if start > end:
            raise InvalidRange(f"from {start} > to {end}")
        lo = bisect.bisect_left(self._events, start, key=lambda e: e.timestamp)
        hi = bisect.bisect_left(self._events, end, key=lambda e: e.timestamp)
        out = Ledger.__new__(Ledger)
        out._events = self._events[lo:hi]
        out._ids = {e.id for e in out._events}
        out._cache = {}
        return out

    # --- numpy views -----------------------------------------------------

    @property
    def timestamps(self) -> np.ndarray:
        ts = self._cache.get("ts")
        if ts is None:
            ts = np.fromiter((e.timestamp for e in self._events), dtype=np.int64, count=len(self._events))
            self._cache["ts"] = ts
        return ts

    def _type_groups(self) -> dict:
        groups = self._cache.get("groups")
        if groups is None:
            acc: dict[str, list[int]] = {}
            for i, e in enumerate(self._events):
                acc.setdefault(e.event_type, []).append(i)
            groups = {t: np.asarray(ix, dtype=np.int64) for t, ix in acc.items()}
            self._cache["groups"] = groups
        return groups

    def event_types(self) -> list[str]:
        """Distinct concrete types present, sorted."""
        return sorted(self._type_groups())

    def indices_of(self, path: str) -> np.ndarray:
        """Ledger positions of events whose type is ``path`` or a descendant, ascending."""
        key = ("idx", path)
        idx = self._cache.get(key)
        if idx is None:
            parts = [ix for t, ix in self._type_groups().items() if is_descendant_or_self(t, path)]
            if not parts:
                idx = np.empty(0, dtype=np.int64)
            elif len(parts) == 1:
                idx = parts[0]
            else:
                idx = np.sort(np.concatenate(parts))
            self._cache[key] = idx
        return idx

    def times_of(self, path: str) -> np.ndarray:
        return self.timestamps[self.indices_of(path)]


def append_event(ledger: Ledger, event: Event, taxonomy: Taxonomy) -> Ledger:
    return ledger.append(event, taxonomy)


def slice_ledger(ledger: Ledger, start: int, end: int) -> Ledger:
    return ledger.slice(start, end)


def load_ledger(path, taxonomy: Taxonomy, strict: bool = True, skipped: list | None = None) -> Ledger:
    """Read a JSON Lines ledger file.

    With ``strict=False`` invalid lines are logged and skipped; ``(line, message)``
    pairs are appended to ``skipped`` when a list is supplied.
    """
    events = []
    ids = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise ParseError(f"invalid JSON: {exc.msg}", lineno) from exc
                try:
                    ev = Event.from_record(rec)
                    if ev.event_type not in taxonomy:
                        raise UnknownEventType(ev.event_type)
                    if ev.id in ids:
                        raise DuplicateId(f"duplicate event id {ev.id!r}")
                except LedgerMineError as exc:
                    exc.args = (f"line {lineno}: {exc}",)
                    exc.line = lineno
                    raise
            except LedgerMineError as exc:
                if strict:
                    raise
                log.warning("skipping %s", exc)
                if skipped is not None:
                    skipped.append((lineno, str(exc)))
                continue
            ids.add(ev.id)
            events.append(ev)
    return Ledger(events)


def save_ledger(ledger: Ledger, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for e in ledger:
            fh.write(json.dumps(e.to_record(), separators=(",", ":")))
            fh.write("\n")
