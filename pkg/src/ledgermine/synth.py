"""Seeded synthetic ledgers with planted causal, confounded and noise structure.

Generation runs in three passes over a growing event table:

1. background types as independent homogeneous Poisson processes;
2. confounders: every driver event emits each target with its probability,
   after a uniform latency;
3. planted rules, in listed order: every cause event present at that point
   emits the effect with the rule probability at ``cause + Uniform[a, b]``.

Planted events carry ``synth_origin`` and ``synth_cause`` attributes so tests
can check ground truth exactly. Mining and causal code never read them.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .algebra import hours_to_seconds
from .errors import InvalidScenario, LedgerMineError
from .ledger import PATH_RE, Event, Ledger, Taxonomy, is_descendant_or_self, parse_instant

DEFAULT_START = "2018-10-08T00:00:00Z"
DAY_S = 86400


@dataclass
class PlantedRule:
    cause: str
    effect: str
    prob: float
    window_h: tuple

    @property
    def window_s(self):
        return tuple(hours_to_seconds(x) for x in self.window_h)


@dataclass
class ConfounderTarget:
    type: str
    prob: float
    latency_h: tuple = (0, 0.5)

    @property
    def latency_s(self):
        return tuple(hours_to_seconds(x) for x in self.latency_h)


@dataclass
class PlantedConfounder:
    driver: str
    targets: list


@dataclass
class Scenario:
    span_days: int
    background: list = field(default_factory=list)  # (type, rate per day)
    rules: list = field(default_factory=list)
    confounders: list = field(default_factory=list)
    seed: int = 0
    start: str = DEFAULT_START
    taxonomy_data: dict | None = None

    def __post_init__(self):
        self.background = [(t, float(r)) for t, r in self.background]
        self.validate()

    def validate(self):
        def bad(msg):
            raise InvalidScenario(msg)

        if isinstance(self.span_days, bool) or not isinstance(self.span_days, int) or self.span_days < 1:
            bad(f"span_days must be an integer >= 1, got {self.span_days!r}")
        try:
            parse_instant(self.start)
        except LedgerMineError as exc:
            raise InvalidScenario(f"bad start instant: {exc}") from exc
        for t, r in self.background:
            self._check_type(t)
            if not r >= 0:
                bad(f"negative background rate for {t}")
        for r in self.rules:
            self._check_type(r.cause)
            self._check_type(r.effect)
            self._check_prob(r.prob, f"rule {r.cause}->{r.effect}")
            self._check_window(r, "window_h")
        for c in self.confounders:
            self._check_type(c.driver)
            if not c.targets:
                bad(f"confounder {c.driver} has no targets")
            for tg in c.targets:
                self._check_type(tg.type)
                self._check_prob(tg.prob, f"confounder target {tg.type}")
                self._check_window(tg, "latency_h")

    @staticmethod
    def _check_type(t):
        if not isinstance(t, str) or not PATH_RE.fullmatch(t):
            raise InvalidScenario(f"invalid type path {t!r}")

    @staticmethod
    def _check_prob(p, what):
        if not 0.0 <= p <= 1.0:
            raise InvalidScenario(f"probability of {what} outside [0,1]: {p}")

    @staticmethod
    def _check_window(obj, attr):
        w = getattr(obj, attr)
        try:
            a, b = (hours_to_seconds(x) for x in w)
        except (LedgerMineError, ValueError, TypeError, ArithmeticError) as exc:
            raise InvalidScenario(f"bad {attr} {w!r}") from exc
        if a < 0 or a > b:
            raise InvalidScenario(f"bad {attr} {w!r}")

    def types(self) -> list[str]:
        out = {t for t, _ in self.background}
        for r in self.rules:
            out.update((r.cause, r.effect))
        for c in self.confounders:
            out.add(c.driver)
            out.update(tg.type for tg in c.targets)
        return sorted(out)

    def taxonomy(self) -> Taxonomy:
        if self.taxonomy_data is not None:
            tax = Taxonomy.from_dict(self.taxonomy_data)
            missing = [t for t in self.types() if t not in tax]
            if missing:
                raise InvalidScenario("scenario types missing from its taxonomy: " + ", ".join(missing))
            return tax
        return Taxonomy(self.types(), actionable=sorted({r.cause for r in self.rules}))

    @classmethod
    def from_dict(cls, d) -> "Scenario":
        try:
            bg = []
            for item in d.get("background", []):
                if isinstance(item, dict):
                    bg.append((item["type"], item["rate_per_day"]))
                else:
                    t, r = item
                    bg.append((t, r))
            rules = [
                PlantedRule(r["cause"], r["effect"], float(r["prob"]), tuple(r["window_h"])) for r in d.get("rules", [])
            ]
            confs = [
                PlantedConfounder(
                    c["driver"],
                    [
                        ConfounderTarget(tg["type"], float(tg["prob"]), tuple(tg.get("latency_h", (0, 0.5))))
                        for tg in c["targets"]
                    ],
                )
                for c in d.get("confounders", [])
            ]
            return cls(
                span_days=d["span_days"],
                background=bg,
                rules=rules,
                confounders=confs,
                seed=int(d.get("seed", 0)),
                start=d.get("start", DEFAULT_START),
                taxonomy_data=d.get("taxonomy"),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidScenario(f"malformed scenario: {exc!r}") from exc

    def to_dict(self) -> dict:
        d = {
            "span_days": self.span_days,
            "seed": self.seed,
            "start": self.start,
            "background": [{"type": t, "rate_per_day": r} for t, r in self.background],
            "rules": [
                {"cause": r.cause, "effect": r.effect, "prob": r.prob, "window_h": list(r.window_h)} for r in self.rules
            ],
            "confounders": [
                {
                    "driver": c.driver,
                    "targets": [{"type": tg.type, "prob": tg.prob, "latency_h": list(tg.latency_h)} for tg in c.targets],
                }
                for c in self.confounders
            ],
        }
        if self.taxonomy_data is not None:
            d["taxonomy"] = self.taxonomy_data
        return d


BUILTIN_SCENARIOS = ("planted_rules", "causal_vs_confounded", "pure_noise", "desk_scale")


def builtin_scenario(name: str) -> Scenario:
    if name not in BUILTIN_SCENARIOS:
        raise InvalidScenario(f"no built-in scenario {name!r}; choose from {', '.join(BUILTIN_SCENARIOS)}")
    text = resources.files("ledgermine").joinpath("data", f"{name}.json").read_text(encoding="utf-8")
    return Scenario.from_dict(json.loads(text))


def load_scenario(path) -> Scenario:
    """Load a scenario file; a bare built-in name is accepted when no such file exists."""
    if not os.path.exists(path) and str(path) in BUILTIN_SCENARIOS:
        return builtin_scenario(str(path))
    with open(path, encoding="utf-8") as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InvalidScenario(f"scenario is not valid JSON: {exc}") from exc
    return Scenario.from_dict(data)


@dataclass
class GroundTruth:
    true_edges: list
    spurious_pairs: list

    def true_pairs(self) -> set:
        return {(e["source"], e["target"]) for e in self.true_edges}

    def spurious(self) -> set:
        return {(e["source"], e["target"]) for e in self.spurious_pairs}

    def to_dict(self) -> dict:
        return {"true_edges": self.true_edges, "spurious_pairs": self.spurious_pairs}

    @classmethod
    def from_dict(cls, d) -> "GroundTruth":
        return cls(list(d["true_edges"]), list(d["spurious_pairs"]))


def ground_truth(scenario: Scenario) -> GroundTruth:
    true_edges = [
        {"source": r.cause, "target": r.effect, "window_s": list(r.window_s), "prob": r.prob, "kind": "rule"}
        for r in scenario.rules
    ]
    spurious = []
    for c in scenario.confounders:
        # the driver really does cause each of its targets
        for tg in c.targets:
            true_edges.append(
                {"source": c.driver, "target": tg.type, "window_s": list(tg.latency_s), "prob": tg.prob, "kind": "confounder"}
            )
        for x in c.targets:
            for y in c.targets:
                if x.type != y.type:
                    spurious.append({"source": x.type, "target": y.type, "driver": c.driver})
    return GroundTruth(true_edges, spurious)


def generate(scenario: Scenario, seed: int | None = None):
    """Return ``(Ledger, GroundTruth)``; ``seed`` overrides ``scenario.seed``."""
    scenario.validate()
    rng = np.random.default_rng(scenario.seed if seed is None else seed)
    names = scenario.types()
    code_of = {t: i for i, t in enumerate(names)}
    start = parse_instant(scenario.start)
    span_s = scenario.span_days * DAY_S

    ts_parts, code_parts, origin_parts, cause_parts = [], [], [], []
    n_total = 0

    def add(times, code, origin, causes):
        nonlocal n_total
        times = np.asarray(times, dtype=np.int64)
        ts_parts.append(times)
        code_parts.append(np.full(times.size, code, dtype=np.int64))
        origin_parts.append(np.full(times.size, origin, dtype=np.int64))
        cause_parts.append(np.asarray(causes, dtype=np.int64))
        n_total += times.size

    def table():
        if not ts_parts:
            empty = np.empty(0, dtype=np.int64)
            return empty, empty
        return np.concatenate(ts_parts), np.concatenate(code_parts)

    def matching(path, codes):
        ok = np.array([is_descendant_or_self(t, path) for t in names], dtype=bool)
        return np.flatnonzero(ok[codes]) if codes.size else codes

    origins = []  # origin code -> label
    for t, rate in scenario.background:
        n = int(rng.poisson(rate * scenario.span_days))
        add(start + rng.integers(0, span_s, size=n), code_of[t], -1, np.full(n, -1))

    for ci, c in enumerate(scenario.confounders):
        ts, codes = table()
        drivers = matching(c.driver, codes)
        for tg in c.targets:
            lo, hi = tg.latency_s
            hit = drivers[rng.random(drivers.size) < tg.prob]
            lat = rng.integers(lo, hi + 1, size=hit.size)
            origins.append(f"confounder:{ci}:{c.driver}")
            add(ts[hit] + lat, code_of[tg.type], len(origins) - 1, hit)

    for ri, r in enumerate(scenario.rules):
        ts, codes = table()
        causes = matching(r.cause, codes)
        lo, hi = r.window_s
        hit = causes[rng.random(causes.size) < r.prob]
        lat = rng.integers(lo, hi + 1, size=hit.size)
        origins.append(f"rule:{ri}:{r.cause}->{r.effect}")
        add(ts[hit] + lat, code_of[r.effect], len(origins) - 1, hit)

    if n_total == 0:
        return Ledger(), ground_truth(scenario)
    ts, codes = table()
    origin = np.concatenate(origin_parts)
    cause = np.concatenate(cause_parts)
    order = np.lexsort((np.arange(n_total), codes, ts))
    rank = np.empty(n_total, dtype=np.int64)
    rank[order] = np.arange(n_total)
    width = max(8, len(str(n_total)))
    ids = [f"e{i:0{width}d}" for i in range(n_total)]

    events = []
    for pos, k in enumerate(order.tolist()):
        attrs = {}
        if origin[k] >= 0:
            attrs = {"synth_origin": origins[origin[k]], "synth_cause": ids[rank[cause[k]]]}
        events.append(Event(ids[pos], names[codes[k]], int(ts[k]), 0, attrs, "synth"))
    return Ledger(events), ground_truth(scenario)
