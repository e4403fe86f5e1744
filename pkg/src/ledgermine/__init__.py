"""Temporal event mining over a personal event ledger, observational causal
testing of mined associations, a confidence-weighted knowledge graph, and
context-sensitive guidance built on it."""

__version__ = "0.1.0"

from .algebra import Atom, Seq, format_pattern, parse_pattern, validate_pattern
from .causal import CausalConfig, CausalResult, FairDataset, build_fair_dataset, evaluate, test_hypothesis
from .guidance import Context, Recommendation, recommend, select_medium
from .kgraph import CausalEdge, KnowledgeGraph, export_dot, load_graph, save_graph, seed_expert_rules
from .ledger import Event, Ledger, Taxonomy, append_event, load_ledger, load_taxonomy, save_ledger, type_matches
from .miner import Hypothesis, MinerConfig, Occurrence, association_stats, match_pattern, mine_associations
from .synth import Scenario, generate

__all__ = [
    "Atom",
    "CausalConfig",
    "CausalEdge",
    "CausalResult",
    "Context",
    "Event",
    "FairDataset",
    "Hypothesis",
    "KnowledgeGraph",
    "Ledger",
    "MinerConfig",
    "Occurrence",
    "Recommendation",
    "Scenario",
    "Seq",
    "Taxonomy",
    "append_event",
    "association_stats",
    "build_fair_dataset",
    "evaluate",
    "export_dot",
    "format_pattern",
    "generate",
    "load_graph",
    "load_ledger",
    "load_taxonomy",
    "match_pattern",
    "mine_associations",
    "parse_pattern",
    "recommend",
    "save_graph",
    "save_ledger",
    "seed_expert_rules",
    "select_medium",
    "test_hypothesis",
    "type_matches",
    "validate_pattern",
]
