"""Observational do-operator.

A hypothesis ``A W[a,b] DE`` is tested by contrasting anchor times where the
antecedent occurred (treated) against uniformly sampled times far from any
antecedent occurrence (control). Anchors are grouped into strata by
confounder values; the per-stratum risk differences are pooled with weights
``n_t*n_c/(n_t+n_c)`` and the pooled effect is tested by permuting the
treated/control labels inside each stratum.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .algebra import format_pattern, hours_to_seconds, validate_pattern
from .errors import (
    AllStrataTooSmall,
    ConfigError,
    DegenerateStratum,
    ExclusionExhausted,
    NoTreatedAnchors,
    WindowError,
)
from .ledger import Ledger, Taxonomy
from .miner import Hypothesis, _antecedent_anchors, outcome_hits

log = logging.getLogger(__name__)

DERIVED_KEYS = ("day_of_week", "hour_band")
RECENT_PREFIX = "recent:"
DEFAULT_RECENT_LOOKBACK_H = 1
# stops rejection sampling for strata that are rare in the control region
DRAWS_PER_CONTROL = 200
MIN_DRAW_BUDGET = 100_000
_TIE_TOL = 1e-12


@dataclass
class CausalConfig:
    permutations: int = 1000
    alpha: float = 0.05
    control_ratio: float = 1.0
    min_stratum_size: int = 5
    confounders: list = field(default_factory=list)

    def __post_init__(self):
        if self.permutations < 1:
            raise ConfigError("permutations must be >= 1")
        if not 0 < self.alpha < 1:
            raise ConfigError("alpha must lie in (0, 1)")
        if self.control_ratio <= 0:
            raise ConfigError("control_ratio must be positive")
        if self.min_stratum_size < 1:
            raise ConfigError("min_stratum_size must be >= 1")
        self.confounders = list(self.confounders)

    @classmethod
    def from_dict(cls, d) -> "CausalConfig":
        d = dict(d or {})
        known = {"permutations", "alpha", "control_ratio", "min_stratum_size", "confounders"}
        extra = set(d) - known
        if extra:
            raise ConfigError("unknown causal config key(s): " + ", ".join(sorted(extra)))
        return cls(**d)

    def to_dict(self) -> dict:
        return {
            "permutations": self.permutations,
            "alpha": self.alpha,
            "control_ratio": self.control_ratio,
            "min_stratum_size": self.min_stratum_size,
            "confounders": list(self.confounders),
        }


@dataclass(frozen=True)
class Anchor:
    time: int
    treated: bool
    stratum_key: tuple
    outcome: bool


@dataclass
class Stratum:
    key: tuple
    treated_times: np.ndarray
    treated_outcomes: np.ndarray
    control_times: np.ndarray
    control_outcomes: np.ndarray

    @property
    def n_t(self) -> int:
        return int(self.treated_times.size)

    @property
    def n_c(self) -> int:
        return int(self.control_times.size)

    def anchors(self):
        for t, y in zip(self.treated_times.tolist(), self.treated_outcomes.tolist()):
            yield Anchor(t, True, self.key, bool(y))
        for t, y in zip(self.control_times.tolist(), self.control_outcomes.tolist()):
            yield Anchor(t, False, self.key, bool(y))

    def __eq__(self, other):
        return (
            isinstance(other, Stratum)
            and self.key == other.key
            and np.array_equal(self.treated_times, other.treated_times)
            and np.array_equal(self.treated_outcomes, other.treated_outcomes)
            and np.array_equal(self.control_times, other.control_times)
            and np.array_equal(self.control_outcomes, other.control_outcomes)
        )


@dataclass
class FairDataset:
    hypothesis: Hypothesis
    confounders: list
    strata: dict  # key -> Stratum, keys in sorted order
    seed: int | None = None
    warnings: list = field(default_factory=list)

    def anchors(self):
        for s in self.strata.values():
            yield from s.anchors()

    def counts(self) -> dict:
        return {k: (s.n_t, s.n_c) for k, s in self.strata.items()}


@dataclass
class CausalResult:
    pooled_effect: float
    p_value: float
    n_strata: int
    per_stratum: list  # (key, rd, n_t, n_c)
    permutations: int
    seed: int
    hypothesis: Hypothesis | None = None
    warnings: list = field(default_factory=list)

    def significant(self, alpha: float = 0.05) -> bool:
        return self.p_value <= alpha

    @property
    def confidence(self) -> float:
        return 1.0 - self.p_value

    def to_dict(self) -> dict:
        return {
            "hypothesis": self.hypothesis.to_dict() if self.hypothesis is not None else None,
            "pooled_effect": self.pooled_effect,
            "p_value": self.p_value,
            "n_strata": self.n_strata,
            "per_stratum": [
                {"key": list(k), "rd": rd, "n_t": nt, "n_c": nc} for k, rd, nt, nc in self.per_stratum
            ],
            "permutations": self.permutations,
            "seed": self.seed,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d) -> "CausalResult":
        hyp = d.get("hypothesis")
        return cls(
            pooled_effect=d["pooled_effect"],
            p_value=d["p_value"],
            n_strata=d["n_strata"],
            per_stratum=[(tuple(r["key"]), r["rd"], r["n_t"], r["n_c"]) for r in d["per_stratum"]],
            permutations=d["permutations"],
            seed=d["seed"],
            hypothesis=Hypothesis.from_dict(hyp) if hyp else None,
            warnings=list(d.get("warnings", [])),
        )


# --- confounder values ----------------------------------------------------------

def parse_recent_key(key: str, taxonomy: Taxonomy | None = None):
    """``recent:<type>[:<hours>]`` -> (type, lookback seconds)."""
    parts = key[len(RECENT_PREFIX):].split(":")
    if not parts[0] or len(parts) > 2:
        raise ConfigError(f"bad confounder key {key!r}; expected recent:<type>[:<hours>]")
    try:
        lookback = hours_to_seconds(parts[1]) if len(parts) == 2 else DEFAULT_RECENT_LOOKBACK_H * 3600
    except (ArithmeticError, ValueError, WindowError) as exc:
        raise ConfigError(f"bad lookback in confounder key {key!r}") from exc
    if taxonomy is not None:
        taxonomy.require(parts[0])
    return parts[0], lookback


def confounder_values(ledger: Ledger, key: str, times: np.ndarray) -> list:
    """Value of confounder ``key`` at each anchor time.

    ``day_of_week`` (Monday=0) and ``hour_band`` (0-6, 6-12, 12-18, 18-24 UTC)
    derive from the time itself; ``recent:<type>:<h>`` is whether an event of
    that type occurred in ``[t-h, t]``; any other key names an attribute and
    takes the value carried by the latest event at or before ``t`` that has it.
    """
    times = np.asarray(times, dtype=np.int64)
    if key == "day_of_week":
        return ((times // 86400 + 3) % 7).tolist()
    if key == "hour_band":
        return ((times % 86400) // 21600).tolist()
    if key.startswith(RECENT_PREFIX):
        path, lookback = parse_recent_key(key)
        order = np.argsort(times, kind="stable")
        counts = np.empty(times.size, dtype=np.int64)
        counts[order] = _kernels.recent_counts(times[order], ledger.times_of(path), np.int64(lookback))
        return (counts > 0).tolist()
    cache_key = ("attr", key)
    carried = ledger._cache.get(cache_key)
    if carried is None:
        ts, vals = [], []
        for e in ledger:
            if key in e.attributes:
                ts.append(e.timestamp)
                vals.append(e.attributes[key])
        carried = (np.asarray(ts, dtype=np.int64), vals)
        ledger._cache[cache_key] = carried
    ts, vals = carried
    pos = np.searchsorted(ts, times, side="right") - 1
    return [vals[p] if p >= 0 else None for p in pos.tolist()]


def stratum_keys(ledger: Ledger, confounders, times) -> list:
    if not confounders:
        return [()] * len(times)
    cols = [confounder_values(ledger, c, times) for c in confounders]
    return list(zip(*cols))


def _sort_key(key):
    # None and mixed scalar types must still order deterministically
    return tuple((v is None, type(v).__name__, v if v is not None else 0) for v in key)


# --- fair dataset -----------------------------------------------------------

def _allowed_pieces(lo_t, hi_t, centers, radius):
    """Inclusive integer ranges of ``[lo_t, hi_t]`` farther than ``radius`` from every center.

    ``centers`` must be sorted and unique.
    """
    starts = centers - radius
    ends = centers + radius
    if centers.size:
        brk = np.flatnonzero(starts[1:] > ends[:-1] + 1) + 1
        m_start = starts[np.concatenate([[0], brk])]
        m_end = ends[np.concatenate([brk - 1, [centers.size - 1]])]
        gap_lo = np.concatenate([[lo_t], m_end + 1])
        gap_hi = np.concatenate([m_start - 1, [hi_t]])
    else:
        gap_lo = np.array([lo_t])
        gap_hi = np.array([hi_t])
    gap_lo = np.maximum(gap_lo, lo_t).astype(np.int64)
    gap_hi = np.minimum(gap_hi, hi_t).astype(np.int64)
    keep = gap_lo <= gap_hi
    return gap_lo[keep], gap_hi[keep]


def _check_confounders(confounders, taxonomy):
    for c in confounders:
        if not isinstance(c, str) or not c:
            raise ConfigError(f"bad confounder {c!r}")
        if c.startswith(RECENT_PREFIX):
            parse_recent_key(c, taxonomy)


def build_fair_dataset(
    ledger: Ledger,
    hypothesis: Hypothesis,
    confounders,
    config: CausalConfig | None = None,
    seed: int = 0,
    taxonomy: Taxonomy | None = None,
) -> FairDataset:
    config = config or CausalConfig()
    confounders = list(confounders)
    lo, hi = hypothesis.window
    if lo > hi or lo < 0:
        raise WindowError(f"bad hypothesis window [{lo},{hi}]s")
    if taxonomy is not None:
        validate_pattern(hypothesis.antecedent, taxonomy)
        taxonomy.require(hypothesis.outcome)
    _check_confounders(confounders, taxonomy)
    if len(ledger) == 0:
        raise NoTreatedAnchors("empty ledger")
    treated_t, events = _antecedent_anchors(ledger, hypothesis.antecedent)
    if treated_t.size == 0:
        raise NoTreatedAnchors(f"no occurrences of {format_pattern(hypothesis.antecedent)}")
    treated_y = outcome_hits(ledger, treated_t, events, hypothesis.outcome, hypothesis.window) > 0
    treated_k = stratum_keys(ledger, confounders, treated_t)

    by_key: dict = {}
    for i, k in enumerate(treated_k):
        by_key.setdefault(k, []).append(i)
    quota = {k: max(1, math.ceil(config.control_ratio * len(ix))) for k, ix in by_key.items()}

    span_lo, span_hi = ledger.span
    # exclusion zones are built around antecedent events; anchors are already sorted
    piece_lo, piece_hi = _allowed_pieces(span_lo, span_hi, np.unique(treated_t), hi)
    lengths = piece_hi - piece_lo + 1
    total = int(lengths.sum())
    if total <= 0:
        raise ExclusionExhausted("exclusion zones cover the whole ledger span")
    cum = np.cumsum(lengths)

    rng = np.random.default_rng(seed)
    accepted: dict = {k: [] for k in quota}
    need = sum(quota.values())
    budget = max(MIN_DRAW_BUDGET, DRAWS_PER_CONTROL * need)
    drawn = 0
    while need > 0 and drawn < budget:
        batch = int(min(budget - drawn, max(1024, 4 * need)))
        u = rng.integers(0, total, size=batch)
        piece = np.searchsorted(cum, u, side="right")
        t = piece_lo[piece] + (u - (cum[piece] - lengths[piece]))
        drawn += batch
        for tt, k in zip(t.tolist(), stratum_keys(ledger, confounders, t)):
            bucket = accepted.get(k)
            if bucket is not None and len(bucket) < quota[k]:
                bucket.append(tt)
                need -= 1
                if need == 0:
                    break
    if not any(accepted.values()):
        raise ExclusionExhausted(f"no control anchor found in {drawn} draws")

    warnings = []
    strata = {}
    for k in sorted(by_key, key=_sort_key):
        ix = np.asarray(by_key[k], dtype=np.int64)
        ctl = np.sort(np.asarray(accepted[k], dtype=np.int64))
        if ix.size < config.min_stratum_size or ctl.size < config.min_stratum_size:
            msg = f"stratum {list(k)} dropped: n_t={ix.size}, n_c={ctl.size} < {config.min_stratum_size}"
            log.warning(msg)
            warnings.append(msg)
            continue
        ctl_y = _kernels.window_counts(ctl, ledger.times_of(hypothesis.outcome), np.int64(lo), np.int64(hi)) > 0
        strata[k] = Stratum(k, treated_t[ix], treated_y[ix], ctl, ctl_y)
    if not strata:
        raise AllStrataTooSmall("; ".join(warnings) or "no strata")
    return FairDataset(hypothesis, confounders, strata, seed, warnings)


# --- permutation test -------------------------------------------------------

def _pooled(rd, w):
    return (rd @ w) / w.sum()


def test_hypothesis(dataset: FairDataset, permutations: int = 1000, seed: int = 0) -> CausalResult:
    """Stratified permutation test of the pooled risk difference.

    Within a stratum the statistic depends on a label permutation only
    through the number of positive outcomes that land on the treated side,
    which is hypergeometric; the null is sampled from that directly.
    """
    if not dataset.strata:
        raise DegenerateStratum("dataset has no strata")
    if permutations < 1:
        raise ConfigError("permutations must be >= 1")
    keys, n_t, n_c, y_t, y_c = [], [], [], [], []
    for k, s in dataset.strata.items():
        if s.n_t == 0 or s.n_c == 0:
            raise DegenerateStratum(f"stratum {list(k)} has an empty side")
        keys.append(k)
        n_t.append(s.n_t)
        n_c.append(s.n_c)
        y_t.append(int(np.count_nonzero(s.treated_outcomes)))
        y_c.append(int(np.count_nonzero(s.control_outcomes)))
    n_t = np.asarray(n_t, dtype=np.int64)
    n_c = np.asarray(n_c, dtype=np.int64)
    y_t = np.asarray(y_t, dtype=np.int64)
    y_c = np.asarray(y_c, dtype=np.int64)
    w = n_t * n_c / (n_t + n_c)
    rd = y_t / n_t - y_c / n_c
    observed = float(_pooled(rd, w))

    rng = np.random.default_rng(seed)
    positives = y_t + y_c
    draws = rng.hypergeometric(positives, n_t + n_c - positives, n_t, size=(permutations, len(keys)))
    rd_perm = draws / n_t - (positives - draws) / n_c
    null = rd_perm @ w / w.sum()
    extreme = int(np.count_nonzero(np.abs(null) >= abs(observed) - _TIE_TOL))
    p_value = (1 + extreme) / (permutations + 1)

    per = [(k, float(r), int(a), int(b)) for k, r, a, b in zip(keys, rd, n_t, n_c)]
    return CausalResult(
        pooled_effect=observed,
        p_value=p_value,
        n_strata=len(keys),
        per_stratum=per,
        permutations=permutations,
        seed=seed,
        hypothesis=dataset.hypothesis,
        warnings=list(dataset.warnings),
    )


test_hypothesis.__test__ = False  # not a pytest test


def split_seed(seed: int) -> tuple[int, int]:
    """Independent seeds for dataset construction and the permutation null."""
    a, b = np.random.SeedSequence(seed).generate_state(2)
    return int(a), int(b)


def evaluate(
    ledger: Ledger,
    hypothesis: Hypothesis,
    confounders=None,
    config: CausalConfig | None = None,
    seed: int = 0,
    taxonomy: Taxonomy | None = None,
) -> CausalResult:
    config = config or CausalConfig()
    if confounders is None:
        confounders = config.confounders
    lo, hi = hypothesis.window
    if lo > hi:
        raise WindowError(f"hypothesis window start {lo}s exceeds end {hi}s")
    ds_seed, test_seed = split_seed(seed)
    ds = build_fair_dataset(ledger, hypothesis, confounders, config, ds_seed, taxonomy)
    res = test_hypothesis(ds, config.permutations, test_seed)
    res.seed = seed
    return res


def permute_labels(dataset: FairDataset, seed: int) -> FairDataset:
    """Copy of ``dataset`` with treated/control labels shuffled inside each stratum."""
    rng = np.random.default_rng(seed)
    strata = {}
    for k, s in dataset.strata.items():
        times = np.concatenate([s.treated_times, s.control_times])
        ys = np.concatenate([s.treated_outcomes, s.control_outcomes])
        perm = rng.permutation(times.size)
        ti, ci = perm[: s.n_t], perm[s.n_t:]
        strata[k] = Stratum(k, times[ti], ys[ti], times[ci], ys[ci])
    return FairDataset(dataset.hypothesis, list(dataset.confounders), strata, dataset.seed, list(dataset.warnings))
