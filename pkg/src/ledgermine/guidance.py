"""Context-sensitive recommendations and guidance-medium selection."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

from .errors import ConfigError, ParseError, UnknownEventType, UnknownGoal
from .kgraph import KnowledgeGraph
from .ledger import Event, Taxonomy, is_descendant_or_self, parse_instant


@dataclass
class Context:
    now: int
    goal: str
    recent: list = field(default_factory=list)
    attributes: dict = field(default_factory=dict)

    def __post_init__(self):
        self.recent = sorted(self.recent, key=lambda e: e.sort_key)

    @classmethod
    def from_dict(cls, d, taxonomy: Taxonomy | None = None) -> "Context":
        try:
            now = d["now"]
            now = parse_instant(now) if isinstance(now, str) else int(now)
            recent = [Event.from_record(r) for r in d.get("recent", [])]
            ctx = cls(now=now, goal=d["goal"], recent=recent, attributes=dict(d.get("attributes", {})))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed context: {exc!r}") from exc
        if taxonomy is not None:
            bad = sorted({e.event_type for e in ctx.recent if e.event_type not in taxonomy})
            if bad:
                raise UnknownEventType(bad)
        return ctx


def load_context(path, taxonomy: Taxonomy | None = None) -> Context:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"context is not valid JSON: {exc}") from exc
    return Context.from_dict(data, taxonomy)


@dataclass(frozen=True)
class Recommendation:
    action: str
    window: tuple
    score: float
    confidence: float
    weight: float
    channel: str | None
    rationale: tuple  # key of the edge the recommendation comes from

    def to_dict(self) -> dict:
        s, t, w = self.rationale
        return {
            "action": self.action,
            "window_s": list(self.window),
            "score": self.score,
            "confidence": self.confidence,
            "weight": self.weight,
            "channel": self.channel,
            "rationale": {"source": s, "target": t, "window_s": list(w)},
        }


def _already_done(recent, action, window, now) -> bool:
    # an action done within the last b seconds still has its effect pending
    _, b = window
    for e in recent:
        if is_descendant_or_self(e.event_type, action) and 0 <= now - e.timestamp <= b:
            return True
    return False


def recommend(
    graph: KnowledgeGraph,
    context: Context,
    taxonomy: Taxonomy,
    theta: float = 0.0,
    media_defaults=None,
) -> list[Recommendation]:
    """Rank actionable causes of ``context.goal`` by ``weight * confidence``.

    Edges with non-positive weight are skipped, as are actions already taken
    recently enough that their effect window has not closed.
    """
    if context.goal not in taxonomy:
        raise UnknownGoal(f"goal {context.goal!r} is not in the taxonomy")
    out = []
    for e in graph.query_edges(target=context.goal, min_confidence=theta):
        if e.source not in taxonomy.actionable or e.weight <= 0:
            continue
        if _already_done(context.recent, e.source, e.window, context.now):
            continue
        channel = select_medium(graph, e.source, taxonomy, media_defaults) if media_defaults else None
        out.append(Recommendation(e.source, e.window, e.weight * e.confidence, e.confidence, e.weight, channel, e.key))
    out.sort(key=lambda r: (-r.score, -r.confidence, r.action, r.rationale))
    return out


def select_medium(graph: KnowledgeGraph, action: str, taxonomy: Taxonomy, defaults) -> str:
    """Media channel with the most confident edge toward ``action`` (or an
    ancestor of it); ``defaults[0]`` when no such edge exists."""
    defaults = list(defaults or [])
    if not defaults:
        raise ConfigError("media defaults must be non-empty")
    bad = [m for m in defaults if m not in taxonomy.media]
    if bad:
        raise ConfigError("media defaults not in taxonomy media set: " + ", ".join(bad))
    best = None
    for e in graph.edges.values():
        if e.source in taxonomy.media and is_descendant_or_self(action, e.target):
            cand = (-e.confidence, e.source)
            if best is None or cand < best:
                best = cand
    return defaults[0] if best is None else best[1]
