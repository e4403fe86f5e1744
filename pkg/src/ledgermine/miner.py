"""Pattern matching over a ledger and association mining.

Window semantics: ``a W[lo,hi] b`` matches when the start of the ``b`` side
follows the anchor (final event) of the ``a`` side by ``lo..hi`` seconds,
both ends inclusive.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .algebra import Atom, Pattern, Seq, format_pattern, hours_to_seconds, parse_pattern, seconds_to_hours_text, validate_pattern
from .errors import ConfigError, DegenerateSpan, EmptyLedger, LedgerMineError, NoAntecedentEvents, WindowError
from .ledger import Ledger, Taxonomy, is_descendant_or_self

DEFAULT_WINDOWS_H = ((0, 1), (1, 2), (2, 4), (4, 8), (8, 24))
# guards the zero-width window in the Poisson baseline
BASELINE_EPS_S = 1


@dataclass(frozen=True)
class Occurrence:
    event_ids: tuple
    anchor_time: int


@dataclass
class Hypothesis:
    antecedent: Pattern
    outcome: str
    window: tuple
    support: int = 0
    confidence: float = 0.0
    lift: float = 0.0
    n_antecedent: int = 0

    def __post_init__(self):
        if isinstance(self.antecedent, str):
            self.antecedent = parse_pattern(self.antecedent)
        self.window = (int(self.window[0]), int(self.window[1]))

    @property
    def antecedent_path(self):
        """Type path for single-atom antecedents, else None."""
        return self.antecedent.path if isinstance(self.antecedent, Atom) else None

    def as_pattern(self) -> Seq:
        return Seq(self.antecedent, Atom(self.outcome), self.window)

    def dsl(self) -> str:
        return format_pattern(self.as_pattern())

    def to_dict(self) -> dict:
        a, b = self.window
        return {
            "antecedent": format_pattern(self.antecedent),
            "outcome": self.outcome,
            "window_s": [a, b],
            "window_h": [seconds_to_hours_text(a), seconds_to_hours_text(b)],
            "dsl": self.dsl(),
            "support": self.support,
            "n_antecedent": self.n_antecedent,
            "confidence": self.confidence,
            "lift": self.lift,
        }

    @classmethod
    def from_dict(cls, d) -> "Hypothesis":
        if "window_s" in d:
            window = tuple(d["window_s"])
        else:
            window = tuple(hours_to_seconds(x) for x in d["window_h"])
        return cls(
            antecedent=d["antecedent"],
            outcome=d["outcome"],
            window=window,
            support=d.get("support", 0),
            confidence=d.get("confidence", 0.0),
            lift=d.get("lift", 0.0),
            n_antecedent=d.get("n_antecedent", 0),
        )

    @classmethod
    def from_dsl(cls, text: str) -> "Hypothesis":
        """``"<antecedent> W[a,b] <outcome>"`` with an atomic outcome."""
        p = parse_pattern(text)
        if not isinstance(p, Seq) or not isinstance(p.right, Atom):
            raise ConfigError(f"hypothesis must have the form '<pattern> W[a,b] <type>': {text!r}")
        return cls(p.left, p.right.path, p.window)


@dataclass
class MinerConfig:
    min_count: int = 10
    min_support: int = 5
    min_lift: float = 1.5
    windows_h: list = field(default_factory=lambda: [list(w) for w in DEFAULT_WINDOWS_H])

    def __post_init__(self):
        if not self.windows_h:
            raise ConfigError("window grid is empty")
        if self.min_support < 1:
            raise ConfigError("min_support must be >= 1")
        if self.min_count < 0:
            raise ConfigError("min_count must be >= 0")
        try:
            for a, b in self.windows_s:
                if a < 0 or a > b:
                    raise WindowError(f"bad window [{a},{b}]s")
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed windows_h: {self.windows_h!r}") from exc

    @property
    def windows_s(self) -> list:
        return [(hours_to_seconds(a), hours_to_seconds(b)) for a, b in self.windows_h]

    @classmethod
    def from_dict(cls, d) -> "MinerConfig":
        d = dict(d or {})
        known = {"min_count", "min_support", "min_lift", "windows_h"}
        extra = set(d) - known
        if extra:
            raise ConfigError("unknown miner config key(s): " + ", ".join(sorted(extra)))
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "min_count": self.min_count,
            "min_support": self.min_support,
            "min_lift": self.min_lift,
            "windows_h": [list(w) for w in self.windows_h],
        }


# --- matching -----------------------------------------------------------------

def _lexsort_rows(primary, events, secondary=None):
    keys = [events[:, k] for k in range(events.shape[1] - 1, -1, -1)]
    if secondary is not None:
        keys.append(secondary)
    keys.append(primary)
    return np.lexsort(keys)


def _match(ledger: Ledger, p: Pattern):
    """(anchor, start, events) arrays sorted by (anchor, events)."""
    ts = ledger.timestamps
    if isinstance(p, Atom):
        idx = ledger.indices_of(p.path)
        t = ts[idx]
        return t, t, idx.reshape(-1, 1)
    l_anchor, l_start, l_events = _match(ledger, p.left)
    r_anchor, r_start, r_events = _match(ledger, p.right)
    k = l_events.shape[1] + r_events.shape[1]
    if l_anchor.size == 0 or r_anchor.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty, np.empty((0, k), dtype=np.int64)
    order = _lexsort_rows(r_start, r_events, secondary=r_anchor)
    r_anchor, r_start, r_events = r_anchor[order], r_start[order], r_events[order]
    lo, hi = p.window
    pair = _kernels.greedy_pair(
        l_anchor, np.ascontiguousarray(l_events), r_start, np.ascontiguousarray(r_events), np.int64(lo), np.int64(hi)
    )
    sel = np.flatnonzero(pair >= 0)
    j = pair[sel]
    anchor = r_anchor[j]
    start = l_start[sel]
    events = np.hstack([l_events[sel], r_events[j]])
    order = _lexsort_rows(anchor, events)
    return anchor[order], start[order], events[order]


def match_pattern(ledger: Ledger, pattern: Pattern, taxonomy: Taxonomy) -> list[Occurrence]:
    validate_pattern(pattern, taxonomy)
    anchor, _, events = _match(ledger, pattern)
    evs = ledger._events
    return [
        Occurrence(tuple(evs[i].id for i in row), int(t))
        for t, row in zip(anchor.tolist(), events.tolist())
    ]


# --- association statistics ---------------------------------------------------

def _as_pattern(antecedent) -> Pattern:
    return Atom(antecedent) if isinstance(antecedent, str) else antecedent


def _antecedent_anchors(ledger: Ledger, antecedent: Pattern):
    anchor, _, events = _match(ledger, antecedent)
    return anchor, events


def outcome_hits(ledger: Ledger, anchor, events, outcome: str, window) -> np.ndarray:
    """Per antecedent occurrence, number of outcome events in ``[t+lo, t+hi]``
    not belonging to the occurrence itself."""
    lo, hi = window
    out_idx = ledger.indices_of(outcome)
    out_t = ledger.timestamps[out_idx]
    counts = _kernels.window_counts(anchor, out_t, np.int64(lo), np.int64(hi))
    if events is not None and events.size and out_idx.size:
        ts = ledger.timestamps
        is_out = np.zeros(len(ledger), dtype=bool)
        is_out[out_idx] = True
        for k in range(events.shape[1]):
            col = events[:, k]
            tk = ts[col]
            counts = counts - (is_out[col] & (tk >= anchor + lo) & (tk <= anchor + hi)).astype(np.int64)
    return counts


def poisson_baseline(n_outcome: int, span_s: int, window) -> float:
    lo, hi = window
    rate = n_outcome / span_s
    return 1.0 - math.exp(-rate * (hi - lo + BASELINE_EPS_S))


def association_stats(ledger: Ledger, antecedent_type, outcome_type: str, window, taxonomy: Taxonomy):
    """Return ``(support, confidence, lift)`` for antecedent -> outcome within ``window`` seconds."""
    lo, hi = window
    if lo > hi:
        raise WindowError(f"window start {lo} exceeds end {hi}")
    antecedent = _as_pattern(antecedent_type)
    validate_pattern(antecedent, taxonomy)
    taxonomy.require(outcome_type)
    anchor, events = _antecedent_anchors(ledger, antecedent)
    if anchor.size == 0:
        raise NoAntecedentEvents(f"no occurrences of {format_pattern(antecedent)}")
    lo_t, hi_t = ledger.span
    span_s = hi_t - lo_t
    if span_s <= 0:
        raise DegenerateSpan("ledger span is zero")
    n_out = ledger.indices_of(outcome_type).size
    support = int(np.count_nonzero(outcome_hits(ledger, anchor, events, outcome_type, window) > 0))
    confidence = support / anchor.size
    if n_out == 0:
        return support, confidence, 0.0
    return support, confidence, confidence / poisson_baseline(n_out, span_s, window)


def mine_associations(ledger: Ledger, taxonomy: Taxonomy, config: MinerConfig | None = None) -> list[Hypothesis]:
    """Rank single-atom hypotheses over all ordered leaf-type pairs and windows."""
    config = config or MinerConfig()
    if len(ledger) == 0:
        raise EmptyLedger("ledger has no events")
    lo_t, hi_t = ledger.span
    span_s = hi_t - lo_t
    if span_s <= 0:
        raise DegenerateSpan("ledger span is zero")

    times = {}
    for leaf in sorted(taxonomy.leaves):
        t = ledger.times_of(leaf)
        if t.size and t.size >= config.min_count:
            times[leaf] = t
    windows = config.windows_s
    out = []
    for a_type, a_t in times.items():
        for b_type, b_t in times.items():
            if a_type == b_type:
                continue
            for w in windows:
                counts = _kernels.window_counts(a_t, b_t, np.int64(w[0]), np.int64(w[1]))
                support = int(np.count_nonzero(counts))
                if support < config.min_support:
                    continue
                confidence = support / a_t.size
                lift = confidence / poisson_baseline(b_t.size, span_s, w)
                if lift < config.min_lift:
                    continue
                out.append(Hypothesis(Atom(a_type), b_type, w, support, confidence, lift, int(a_t.size)))
    out.sort(key=lambda h: (-h.lift, -h.confidence, h.antecedent.path, h.outcome, h.window[0], h.window[1]))
    return out


def hypothesis_stats(ledger: Ledger, hyp: Hypothesis, taxonomy: Taxonomy) -> Hypothesis:
    """Fill in support/confidence/lift of ``hyp`` from ``ledger``."""
    support, confidence, lift = association_stats(ledger, hyp.antecedent, hyp.outcome, hyp.window, taxonomy)
    anchor, _ = _antecedent_anchors(ledger, hyp.antecedent)
    return Hypothesis(hyp.antecedent, hyp.outcome, hyp.window, support, confidence, lift, int(anchor.size))


__all__ = [
    "DEFAULT_WINDOWS_H",
    "Hypothesis",
    "LedgerMineError",
    "MinerConfig",
    "Occurrence",
    "association_stats",
    "hypothesis_stats",
    "match_pattern",
    "mine_associations",
]
