"""mine -> test -> graph, plus the scoring report against synthetic ground truth."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .causal import CausalConfig, CausalResult, evaluate
from .errors import ConfigError, LedgerMineError
from .kgraph import CausalEdge, KnowledgeGraph, seed_expert_rules
from .ledger import Ledger, Taxonomy
from .miner import MinerConfig, mine_associations
from .synth import GroundTruth

log = logging.getLogger(__name__)


@dataclass
class PipelineConfig:
    miner: MinerConfig = field(default_factory=MinerConfig)
    causal: CausalConfig = field(default_factory=CausalConfig)
    top_k: int = 10

    @classmethod
    def from_dict(cls, d) -> "PipelineConfig":
        d = dict(d or {})
        extra = set(d) - {"miner", "causal", "top_k"}
        if extra:
            raise ConfigError("unknown pipeline config key(s): " + ", ".join(sorted(extra)))
        top_k = d.get("top_k", 10)
        if not isinstance(top_k, int) or top_k < 0:
            raise ConfigError("top_k must be a non-negative integer")
        return cls(MinerConfig.from_dict(d.get("miner")), CausalConfig.from_dict(d.get("causal")), top_k)

    def to_dict(self) -> dict:
        return {"miner": self.miner.to_dict(), "causal": self.causal.to_dict(), "top_k": self.top_k}


def derive_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def edge_from_result(result: CausalResult, updated_at: int = 0) -> CausalEdge | None:
    """Mined edge for a single-atom hypothesis; None for composite antecedents."""
    hyp = result.hypothesis
    if hyp is None or hyp.antecedent_path is None:
        return None
    evidence = {
        "p_value": result.p_value,
        "pooled_effect": result.pooled_effect,
        "n_strata": result.n_strata,
        "permutations": result.permutations,
        "seed": result.seed,
    }
    return CausalEdge(
        source=hyp.antecedent_path,
        target=hyp.outcome,
        window=hyp.window,
        weight=max(-1.0, min(1.0, result.pooled_effect)),
        confidence=min(1.0, max(0.0, result.confidence)),
        provenance="mined",
        evidence=evidence,
        updated_at=updated_at,
    )


def build_graph(
    taxonomy: Taxonomy,
    results,
    alpha: float = 0.05,
    rules_path=None,
    graph: KnowledgeGraph | None = None,
    updated_at: int = 0,
) -> KnowledgeGraph:
    """Seed expert rules (if any), then add every significant result as an edge."""
    graph = graph if graph is not None else KnowledgeGraph(taxonomy)
    if rules_path is not None:
        seed_expert_rules(graph, rules_path, updated_at=0)
    for res in results:
        if not res.significant(alpha):
            continue
        edge = edge_from_result(res, updated_at)
        if edge is None:
            log.warning("skipping composite antecedent %s", res.hypothesis.dsl() if res.hypothesis else "?")
            continue
        graph.upsert_edge(edge)
    return graph


def score_against_truth(graph: KnowledgeGraph, truth: GroundTruth) -> dict:
    predicted = {(e.source, e.target) for e in graph.edges.values() if e.provenance == "mined" and e.weight > 0}
    true_pairs = truth.true_pairs()
    tp = sorted(predicted & true_pairs)
    fp = sorted(predicted - true_pairs)
    fn = sorted(true_pairs - predicted)
    return {
        "precision": len(tp) / len(predicted) if predicted else None,
        "recall": len(tp) / len(true_pairs) if true_pairs else None,
        "true_positives": [list(p) for p in tp],
        "false_positives": [list(p) for p in fp],
        "false_negatives": [list(p) for p in fn],
        "spurious_accepted": [list(p) for p in sorted(predicted & truth.spurious())],
    }


def run_pipeline(
    ledger: Ledger,
    taxonomy: Taxonomy,
    config: PipelineConfig | None = None,
    seed: int = 0,
    rules_path=None,
    truth: GroundTruth | None = None,
):
    """Return ``(hypotheses, results, graph, report)``."""
    config = config or PipelineConfig()
    hypotheses = mine_associations(ledger, taxonomy, config.miner)
    results = []
    tested = []
    for i, hyp in enumerate(hypotheses[: config.top_k]):
        entry = {"dsl": hyp.dsl(), "rank": i}
        try:
            res = evaluate(ledger, hyp, config.causal.confounders, config.causal, derive_seed(seed, i), taxonomy)
        except LedgerMineError as exc:
            log.warning("hypothesis %s not tested: %s", hyp.dsl(), exc)
            entry["error"] = f"{type(exc).__name__}: {exc}"
            tested.append(entry)
            continue
        results.append(res)
        entry.update(
            p_value=res.p_value,
            pooled_effect=res.pooled_effect,
            n_strata=res.n_strata,
            significant=res.significant(config.causal.alpha),
        )
        tested.append(entry)
    graph = build_graph(
        taxonomy, results, config.causal.alpha, rules_path=rules_path, updated_at=ledger.span[1]
    )
    report = {
        "n_events": len(ledger),
        "span": list(ledger.span),
        "n_hypotheses": len(hypotheses),
        "n_tested": len(results),
        "n_significant": sum(1 for r in results if r.significant(config.causal.alpha)),
        "n_edges": len(graph),
        "seed": seed,
        "config": config.to_dict(),
        "tested": tested,
    }
    if truth is not None:
        scored = score_against_truth(graph, truth)
        report["precision"] = scored["precision"]
        report["recall"] = scored["recall"]
        report["ground_truth"] = scored
    return hypotheses, results, graph, report
