"""Knowledge graph of tested causal relationships.

Edges are keyed by ``(source, target, window)``. Re-inserting a key keeps the
edge with the higher confidence (newer ``updated_at`` on ties) and appends the
incoming edge to the key's audit trail either way.
"""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field

from .algebra import hours_to_seconds, seconds_to_hours_text
from .errors import GraphValidationError, LedgerMineError, ParseError, UnknownEventType
from .ledger import Taxonomy, is_descendant_or_self

log = logging.getLogger(__name__)

PROVENANCES = ("mined", "expert")


@dataclass(frozen=True)
class CausalEdge:
    source: str
    target: str
    window: tuple
    weight: float
    confidence: float
    provenance: str = "mined"
    evidence: dict | None = None
    updated_at: int = 0

    def __post_init__(self):
        a, b = self.window
        object.__setattr__(self, "window", (int(a), int(b)))
        if not 0 <= a <= b:
            raise GraphValidationError(f"edge {self.key}: bad window [{a},{b}]s")
        if not (isinstance(self.confidence, (int, float)) and 0.0 <= self.confidence <= 1.0):
            raise GraphValidationError(f"edge {self.key}: confidence {self.confidence!r} outside [0,1]")
        if not (isinstance(self.weight, (int, float)) and math.isfinite(self.weight)):
            raise GraphValidationError(f"edge {self.key}: weight {self.weight!r} is not a finite number")
        if self.provenance not in PROVENANCES:
            raise GraphValidationError(f"edge {self.key}: provenance must be one of {PROVENANCES}")

    @property
    def key(self):
        return (self.source, self.target, tuple(self.window))

    def record(self) -> dict:
        d = {
            "provenance": self.provenance,
            "weight": self.weight,
            "confidence": self.confidence,
            "updated_at": self.updated_at,
        }
        if self.evidence is not None:
            d["evidence"] = self.evidence
        return d

    def to_dict(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "window_s": list(self.window),
            "weight": self.weight,
            "confidence": self.confidence,
            "provenance": self.provenance,
            "evidence": self.evidence,
            "updated_at": self.updated_at,
        }


def _wins(new: CausalEdge, old: CausalEdge) -> bool:
    if new.confidence != old.confidence:
        return new.confidence > old.confidence
    return new.updated_at > old.updated_at


@dataclass
class KnowledgeGraph:
    taxonomy: Taxonomy
    edges: dict = field(default_factory=dict)  # key -> CausalEdge
    audit: dict = field(default_factory=dict)  # key -> list of records

    @property
    def nodes(self) -> set:
        out = set()
        for s, t, _ in self.edges:
            out.add(s)
            out.add(t)
        return out

    def __len__(self):
        return len(self.edges)

    def __eq__(self, other):
        return (
            isinstance(other, KnowledgeGraph)
            and self.taxonomy.identity == other.taxonomy.identity
            and self.edges == other.edges
            and self.audit == other.audit
        )

    def upsert_edge(self, edge: CausalEdge) -> "KnowledgeGraph":
        self.taxonomy.require(edge.source, edge.target)
        key = edge.key
        old = self.edges.get(key)
        if old is None or _wins(edge, old):
            self.edges[key] = edge
        self.audit.setdefault(key, []).append(edge.record())
        return self

    def query_edges(self, target=None, source=None, min_confidence=None, provenance=None) -> list[CausalEdge]:
        """Edges passing every given filter; source/target match descendants too."""
        out = []
        for e in self.edges.values():
            if target is not None and not is_descendant_or_self(e.target, target):
                continue
            if source is not None and not is_descendant_or_self(e.source, source):
                continue
            if min_confidence is not None and e.confidence < min_confidence:
                continue
            if provenance is not None and e.provenance != provenance:
                continue
            out.append(e)
        out.sort(key=lambda e: (-e.confidence, -e.weight, e.key))
        return out

    def sorted_edges(self) -> list[CausalEdge]:
        return [self.edges[k] for k in sorted(self.edges)]

    def to_dict(self) -> dict:
        edges = []
        for e in self.sorted_edges():
            d = e.to_dict()
            d["audit"] = list(self.audit.get(e.key, []))
            edges.append(d)
        return {"taxonomy_id": self.taxonomy.identity, "nodes": sorted(self.nodes), "edges": edges}


def upsert_edge(graph: KnowledgeGraph, edge: CausalEdge) -> KnowledgeGraph:
    return graph.upsert_edge(edge)


def query_edges(graph: KnowledgeGraph, **filters) -> list[CausalEdge]:
    return graph.query_edges(**filters)


def seed_expert_rules(graph: KnowledgeGraph, rules_path, updated_at: int = 0) -> KnowledgeGraph:
    """Insert one expert edge per line of a JSON Lines rules file."""
    with open(rules_path, encoding="utf-8") as fh:
        lines = list(enumerate(fh, 1))
    parsed = []
    for lineno, line in lines:
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            window = tuple(hours_to_seconds(x) for x in rec["window_h"])
            if len(window) != 2:
                raise ValueError("window_h must have two entries")
            edge = CausalEdge(
                source=rec["source"],
                target=rec["target"],
                window=window,
                weight=float(rec["weight"]),
                confidence=float(rec["confidence"]),
                provenance="expert",
                updated_at=updated_at,
            )
        except (json.JSONDecodeError, KeyError, TypeError, ValueError, ArithmeticError, LedgerMineError) as exc:
            raise ParseError(f"bad expert rule: {exc}", lineno) from exc
        missing = [p for p in (edge.source, edge.target) if p not in graph.taxonomy]
        if missing:
            raise UnknownEventType(missing, f"line {lineno}: unknown event type(s): " + ", ".join(missing))
        parsed.append(edge)
    for edge in parsed:
        graph.upsert_edge(edge)
    return graph


def save_graph(graph: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(graph.to_dict(), fh, indent=2, sort_keys=False)
        fh.write("\n")


def graph_from_dict(data, taxonomy: Taxonomy) -> KnowledgeGraph:
    if not isinstance(data, dict) or "edges" not in data or "nodes" not in data:
        raise ParseError("graph file must be an object with 'nodes' and 'edges'")
    tid = data.get("taxonomy_id")
    if tid is not None and tid != taxonomy.identity:
        log.warning("graph was built against taxonomy %s, loading with %s", tid, taxonomy.identity)
    nodes = set(data["nodes"])
    bad_nodes = sorted(n for n in nodes if n not in taxonomy)
    if bad_nodes:
        raise GraphValidationError("nodes absent from taxonomy: " + ", ".join(bad_nodes))
    graph = KnowledgeGraph(taxonomy)
    for i, d in enumerate(data["edges"]):
        try:
            edge = CausalEdge(
                source=d["source"],
                target=d["target"],
                window=tuple(d["window_s"]),
                weight=d["weight"],
                confidence=d["confidence"],
                provenance=d["provenance"],
                evidence=d.get("evidence"),
                updated_at=d.get("updated_at", 0),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"edge #{i} malformed: {exc!r}") from exc
        key = edge.key
        for end in (edge.source, edge.target):
            if end not in nodes:
                raise GraphValidationError(f"edge {key}: endpoint {end!r} is not a graph node")
            if end not in taxonomy:
                raise GraphValidationError(f"edge {key}: endpoint {end!r} absent from taxonomy")
        if key in graph.edges:
            raise GraphValidationError(f"duplicate edge key {key}")
        graph.edges[key] = edge
        graph.audit[key] = list(d.get("audit", []))
    extra = nodes - graph.nodes
    if extra:
        raise GraphValidationError("nodes without edges: " + ", ".join(sorted(extra)))
    return graph


def load_graph(path, taxonomy: Taxonomy) -> KnowledgeGraph:
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"graph is not valid JSON: {exc}") from exc
    return graph_from_dict(data, taxonomy)


def _dot_id(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(graph: KnowledgeGraph) -> str:
    lines = ["digraph knowledge_graph {"]
    for n in sorted(graph.nodes):
        lines.append(f"  {_dot_id(n)};")
    for e in graph.sorted_edges():
        a, b = e.window
        label = f"w={e.weight:.3f} c={e.confidence:.3f} [{seconds_to_hours_text(a)},{seconds_to_hours_text(b)}]h"
        lines.append(f"  {_dot_id(e.source)} -> {_dot_id(e.target)} [label={_dot_id(label)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(graph: KnowledgeGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(to_dot(graph))
