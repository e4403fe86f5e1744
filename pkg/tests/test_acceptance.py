"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line.

Thresholds are the stated ones; scenario parameters are fixed up front
(see the scenario files under ``ledgermine/data``).
"""
import json
import random
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from gen import random_ledger, random_pattern
from oracles import brute_match

from ledgermine.algebra import Atom, Seq, format_pattern, hours_to_seconds, parse_pattern
from ledgermine.causal import CausalConfig, evaluate
from ledgermine.cli import main as cli_main
from ledgermine.guidance import Context, recommend, select_medium
from ledgermine.kgraph import CausalEdge, KnowledgeGraph, load_graph, save_graph, seed_expert_rules
from ledgermine.ledger import Event, Taxonomy
from ledgermine.miner import DEFAULT_WINDOWS_H, Hypothesis, MinerConfig, association_stats, match_pattern, mine_associations
from ledgermine.synth import builtin_scenario, generate

H = 3600


def report(n, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {n}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    assert ok, line


# 1 -------------------------------------------------------------------------

def test_matcher_matches_exhaustive_enumeration():
    types = ["a", "a.x", "b", "c", "d"]
    tax = Taxonomy(types)
    rng = random.Random(20240501)
    mismatches, impl_s, n_occ = 0, 0.0, 0
    t_all = time.perf_counter()
    for _ in range(200):
        led = random_ledger(rng, types, max_events=500, span_h=72)
        pat = random_pattern(rng, 3, atoms=types, window=lambda r: (r.randint(0, 8) * 900, r.randint(8, 24) * 900))
        t0 = time.perf_counter()
        got = match_pattern(led, pat, tax)
        impl_s += time.perf_counter() - t0
        want = brute_match(led.events, pat)
        got_set = {(o.anchor_time, o.event_ids) for o in got}
        want_set = {(t, tuple(led.events[i].id for i in idx)) for t, _, idx in want}
        mismatches += got_set != want_set or len(got) != len(want)
        n_occ += len(want)
    total = time.perf_counter() - t_all
    report(
        1,
        mismatches == 0 and total < 60,
        f"{200 - mismatches}/200 ledgers match the exhaustive oracle ({n_occ} occurrences); "
        f"matcher {impl_s:.2f}s, total with oracle {total:.1f}s (< 60s)",
    )


# 2 -------------------------------------------------------------------------

def test_parser_round_trip():
    rng = random.Random(7)
    bad = 0
    for _ in range(1000):
        p = random_pattern(rng, rng.randint(0, 5))
        bad += parse_pattern(format_pattern(p)) != p
    example = parse_pattern("exercise.bike W[2,4] work") == Seq(Atom("exercise.bike"), Atom("work"), (7200, 14400))
    report(2, bad == 0 and example, f"{1000 - bad}/1000 random ASTs round-trip; documented example parses: {example}")


# 3 -------------------------------------------------------------------------

def _planted_recovery(seed):
    sc = builtin_scenario("planted_rules")
    # the planted windows join the default grid so each rule is a candidate
    grid = sorted({tuple(r.window_h) for r in sc.rules} | set(DEFAULT_WINDOWS_H))
    led, _ = generate(sc, seed=seed)
    hyps = mine_associations(led, sc.taxonomy(), MinerConfig(windows_h=grid))
    top = {(h.antecedent.path, h.outcome, h.window): h for h in hyps[:5]}
    rows = []
    for r in sc.rules:
        h = top.get((r.cause, r.effect, r.window_s))
        rows.append((r, h))
    ok = all(h is not None and abs(h.confidence - r.prob) <= 0.05 for r, h in rows)
    return ok, rows


def test_planted_rule_recovery():
    sc = builtin_scenario("planted_rules")
    t0 = time.perf_counter()
    ok, rows = _planted_recovery(sc.seed)
    elapsed = time.perf_counter() - t0
    parts = [
        f"{r.cause}->{r.effect} p={r.prob}: " + ("not in top 5" if h is None else f"conf {h.confidence:.3f}")
        for r, h in rows
    ]
    report(3, ok and elapsed < 10, "; ".join(parts) + f"; {elapsed:.2f}s (< 10s)")


# 4 -------------------------------------------------------------------------

STRESS = ["recent:context.stress:0.5"]


def test_causal_vs_confounded():
    sc = builtin_scenario("causal_vs_confounded")
    tax = sc.taxonomy()
    cfg = CausalConfig(permutations=1000)
    true_h = Hypothesis.from_dsl("exercise.walk W[1,2] wellbeing.mood")
    conf_h = Hypothesis.from_dsl("food.snack W[0,1] sleep.poor")
    true_rej = conf_keep = 0
    lifts, confs = [], []
    for seed in range(20):
        led, truth = generate(sc, seed=seed)
        assert ("food.snack", "sleep.poor") in truth.spurious()
        true_rej += evaluate(led, true_h, STRESS, cfg, seed, tax).p_value <= 0.05
        conf_keep += evaluate(led, conf_h, STRESS, cfg, seed, tax).p_value > 0.05
        _, c, lift = association_stats(led, "food.snack", "sleep.poor", conf_h.window, tax)
        confs.append(c)
        lifts.append(lift)
    raw_high = min(lifts) >= 2.0
    report(
        4,
        true_rej >= 18 and conf_keep >= 18 and raw_high,
        f"true rule p<=0.05 in {true_rej}/20; confounded pair p>0.05 in {conf_keep}/20 "
        f"(stratified on {STRESS[0]}); unstratified confidence {np.mean(confs):.2f}, min lift {min(lifts):.1f} (>= 2)",
    )


# 5 -------------------------------------------------------------------------

def test_null_calibration():
    sc = builtin_scenario("pure_noise")
    tax = sc.taxonomy()
    hyp = Hypothesis.from_dsl("noise.n0 W[0,1] noise.n1")
    ps = []
    for seed in range(100):
        led, _ = generate(sc, seed=seed)
        ps.append(evaluate(led, hyp, ["hour_band"], CausalConfig(permutations=1000), seed, tax).p_value)
    ps = np.asarray(ps)
    rate = float(np.mean(ps <= 0.05))
    in_range = bool(np.all((ps > 0) & (ps <= 1)))
    report(
        5,
        0.01 <= rate <= 0.12 and in_range,
        f"rejection rate {rate:.2f} at alpha 0.05 over 100 seeds (in [0.01, 0.12]); all p in (0,1]: {in_range}",
    )


# 6 -------------------------------------------------------------------------

class ReferenceGraph:
    """Straightforward reading of the conflict rule, kept separate from the package."""

    def __init__(self):
        self.history = {}

    def upsert(self, e):
        self.history.setdefault((e.source, e.target, tuple(e.window)), []).append(e)

    def edges(self):
        out = {}
        for key, seq in self.history.items():
            best = seq[0]
            for e in seq[1:]:
                if e.confidence > best.confidence or (e.confidence == best.confidence and e.updated_at > best.updated_at):
                    best = e
            out[key] = best
        return out

    def audit_lengths(self):
        return {k: len(v) for k, v in self.history.items()}


def test_graph_integrity(tmp_path):
    types = ["exercise.bike", "exercise.run", "sleep", "work", "mood.good", "app.blog"]
    tax = Taxonomy(types, actionable=["exercise.bike", "exercise.run", "sleep"], media=["app.blog"])
    paths = sorted(tax.paths)
    rng = random.Random(99)
    failures = 0
    n_ops = 0
    for seq in range(500):
        g, ref = KnowledgeGraph(tax), ReferenceGraph()
        for _ in range(rng.randint(1, 12)):
            n_ops += 1
            op = rng.random()
            if op < 0.6:
                e = CausalEdge(
                    rng.choice(paths), rng.choice(paths), (0, rng.choice([1, 2]) * H),
                    round(rng.uniform(-1, 1), 3), rng.choice([0.1, 0.5, 0.5, 0.9]), "mined", None, rng.randint(0, 3),
                )
                g.upsert_edge(e)
                ref.upsert(e)
            elif op < 0.8:
                rules = []
                for _ in range(rng.randint(0, 3)):
                    rules.append({
                        "source": rng.choice(paths), "target": rng.choice(paths), "window_h": [0, rng.choice([1, 2])],
                        "weight": round(rng.uniform(-1, 1), 3), "confidence": rng.choice([0.1, 0.5, 0.9]),
                    })
                p = tmp_path / "rules.jsonl"
                p.write_text("".join(json.dumps(r) + "\n" for r in rules))
                seed_expert_rules(g, p, updated_at=0)
                for r in rules:
                    ref.upsert(CausalEdge(r["source"], r["target"], (0, hours_to_seconds(r["window_h"][1])),
                                          r["weight"], r["confidence"], "expert", None, 0))
            else:
                p = tmp_path / "g.json"
                save_graph(g, p)
                keys = [(d["source"], d["target"], tuple(d["window_s"])) for d in json.loads(p.read_text())["edges"]]
                loaded = load_graph(p, tax)
                failures += len(keys) != len(set(keys)) or loaded != g
                g = loaded
            if g.edges != ref.edges() or {k: len(v) for k, v in g.audit.items()} != ref.audit_lengths():
                failures += 1
    report(6, failures == 0, f"500 sequences, {n_ops} operations; {failures} deviations from the reference / round-trip")


# 7 -------------------------------------------------------------------------

def test_guidance_invariances():
    acts = ["exercise.bike", "exercise.run", "exercise.walk", "sleep"]
    media = ["app.podcast", "app.blog", "app.instagram"]
    tax = Taxonomy(acts + media + ["work", "health.goal.energy"], actionable=acts, media=media)
    rng = random.Random(5)
    order_bad = theta_bad = cold_bad = 0
    thetas = [0.0, 0.1, 0.3, 0.5, 0.7, 0.9, 1.0]
    for _ in range(200):
        edges = []
        for _ in range(rng.randint(0, 15)):
            src = rng.choice(acts + ["work"] + media)
            tgt = rng.choice(acts) if src in media else "health.goal.energy"
            edges.append(CausalEdge(src, tgt, (0, rng.randint(1, 6) * H), rng.uniform(-1, 1), rng.random()))
        g, scaled = KnowledgeGraph(tax), KnowledgeGraph(tax)
        for e in edges:
            g.upsert_edge(e)
            scaled.upsert_edge(CausalEdge(e.source, e.target, e.window, e.weight * 3.7, e.confidence))
        recent = [Event(f"r{i}", rng.choice(acts), -rng.randint(0, 6) * H) for i in range(rng.randint(0, 2))]
        ctx = Context(0, "health.goal.energy", recent)
        base = [r.rationale for r in recommend(g, ctx, tax, media_defaults=media)]
        order_bad += base != [r.rationale for r in recommend(scaled, ctx, tax, media_defaults=media)]
        prev = None
        for th in thetas:
            cur = {r.rationale for r in recommend(g, ctx, tax, theta=th)}
            theta_bad += prev is not None and not cur <= prev
            prev = cur
        defaults = rng.sample(media, len(media))
        cold_bad += select_medium(KnowledgeGraph(tax), rng.choice(acts), tax, defaults) != defaults[0]
    report(
        7,
        order_bad == theta_bad == cold_bad == 0,
        f"200 random graphs: order changes under x3.7 weights {order_bad}, "
        f"theta monotonicity violations {theta_bad}, cold-start fallbacks not defaults[0] {cold_bad}",
    )


# 8 -------------------------------------------------------------------------

@pytest.mark.slow
def test_desk_scale_pipeline(tmp_path):
    times = []
    for name in ("a", "b"):
        t0 = time.perf_counter()
        code = cli_main(["pipeline", "--scenario", "desk_scale", "--seed", "7", "--out", str(tmp_path / name)])
        times.append(time.perf_counter() - t0)
        assert code == 0
    rep = json.loads((tmp_path / "a" / "report.json").read_text())
    files = sorted(p.name for p in (tmp_path / "a").iterdir() if p.name != "manifest.json")
    same = all((tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes() for f in files)
    cfg = rep["config"]
    ok = (
        rep["n_events"] >= 100_000
        and max(times) < 60
        and same
        and cfg["causal"]["permutations"] == 1000
        and cfg["top_k"] == 10
    )
    report(
        8,
        ok,
        f"{rep['n_events']} events, {rep['n_tested']} hypotheses tested x 1000 permutations; "
        f"runs {times[0]:.1f}s and {times[1]:.1f}s (< 60s); byte-identical outputs: {same} "
        f"({len(files)} files); precision {rep['precision']:.2f}, recall {rep['recall']:.2f}",
    )
