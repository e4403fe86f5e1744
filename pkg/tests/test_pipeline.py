import pytest

from ledgermine.causal import CausalConfig, CausalResult
from ledgermine.errors import ConfigError
from ledgermine.kgraph import CausalEdge, KnowledgeGraph
from ledgermine.miner import Hypothesis, MinerConfig
from ledgermine.pipeline import PipelineConfig, build_graph, edge_from_result, run_pipeline, score_against_truth
from ledgermine.synth import GroundTruth, builtin_scenario, generate


def result(dsl, p, effect=0.3):
    return CausalResult(effect, p, 1, [], 100, 0, Hypothesis.from_dsl(dsl))


def test_edge_from_result(taxonomy):
    e = edge_from_result(result("exercise.bike W[0,2] work", 0.01))
    assert (e.source, e.target, e.window, e.weight, e.confidence) == ("exercise.bike", "work", (0, 7200), 0.3, 0.99)
    assert edge_from_result(result("sleep W[0,1] exercise.bike W[0,2] work", 0.01)) is None


def test_build_graph_keeps_significant_only(taxonomy):
    g = build_graph(taxonomy, [result("exercise.bike W[0,2] work", 0.01), result("sleep W[0,2] work", 0.2)], 0.05)
    assert [e.source for e in g.edges.values()] == ["exercise.bike"]


def test_scoring():
    tax_edges = [CausalEdge("a", "b", (0, 3600), 0.5, 0.99), CausalEdge("x", "y", (0, 3600), 0.2, 0.99),
                 CausalEdge("c", "d", (0, 3600), -0.2, 0.99)]
    from ledgermine.ledger import Taxonomy

    g = KnowledgeGraph(Taxonomy(["a", "b", "c", "d", "x", "y"]))
    for e in tax_edges:
        g.upsert_edge(e)
    truth = GroundTruth(
        [{"source": "a", "target": "b"}, {"source": "c", "target": "d"}], [{"source": "x", "target": "y"}]
    )
    s = score_against_truth(g, truth)
    assert s["precision"] == 0.5 and s["recall"] == 0.5
    assert s["spurious_accepted"] == [["x", "y"]]


def test_config_roundtrip():
    cfg = PipelineConfig(MinerConfig(min_count=3), CausalConfig(permutations=10), 4)
    assert PipelineConfig.from_dict(cfg.to_dict()) == cfg
    with pytest.raises(ConfigError):
        PipelineConfig.from_dict({"topk": 3})


def test_confounded_pair_rejected_when_stratified():
    sc = builtin_scenario("causal_vs_confounded")
    led, truth = generate(sc, seed=2)
    cfg = PipelineConfig(causal=CausalConfig(permutations=500, confounders=["recent:context.stress:0.5"]), top_k=6)
    _, _, graph, report = run_pipeline(led, sc.taxonomy(), cfg, seed=2, truth=truth)
    assert report["ground_truth"]["spurious_accepted"] == []
    assert ["exercise.walk", "wellbeing.mood"] in report["ground_truth"]["true_positives"]
    assert any("error" in t for t in report["tested"])  # the driver's own edges cannot be stratified on it
