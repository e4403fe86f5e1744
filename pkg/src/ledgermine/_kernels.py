"""Hot loops of the matcher and miner.

Each kernel has two implementations with identical results: a numba
``@njit`` loop and a numpy/pure-Python path. The numba path is used when
numba imports and ``LEDGERMINE_NO_NUMBA`` is unset (or ``0``). Both
implementations stay importable as ``numba_backend`` / ``numpy_backend``
for benchmarking and cross-checking.
"""
from __future__ import annotations

import os
import types

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and os.environ.get("LEDGERMINE_NO_NUMBA", "").strip().lower() in ("", "0", "false", "no")


# --- numpy / python ---------------------------------------------------------

def _np_window_counts(anchors, targets, lo, hi):
    """Per anchor t, number of ``targets`` in ``[t+lo, t+hi]``. ``targets`` sorted."""
    left = np.searchsorted(targets, anchors + lo, side="left")
    right = np.searchsorted(targets, anchors + hi, side="right")
    return (right - left).astype(np.int64)


def _np_recent_counts(anchors, targets, lookback):
    """Per anchor t, number of ``targets`` in ``[t-lookback, t]``."""
    left = np.searchsorted(targets, anchors - lookback, side="left")
    right = np.searchsorted(targets, anchors, side="right")
    return (right - left).astype(np.int64)


def _np_greedy_pair(l_anchor, l_events, r_start, r_events, lo, hi):
    """First-match pairing.

    Left occurrences are visited in the given order; each takes the first
    unconsumed right occurrence (in the given order, which must be sorted by
    start) whose start lies in ``[anchor+lo, anchor+hi]`` and which shares no
    event with it. Returns the chosen right index per left row, or -1.
    """
    n_l = l_anchor.shape[0]
    n_r = r_start.shape[0]
    out = np.full(n_l, -1, dtype=np.int64)
    consumed = np.zeros(n_r, dtype=np.bool_)
    first = np.searchsorted(r_start, l_anchor + lo, side="left")
    last = np.searchsorted(r_start, l_anchor + hi, side="right")
    for i in range(n_l):
        j0, j1 = first[i], last[i]
        if j0 >= j1:
            continue
        cand = np.flatnonzero(~consumed[j0:j1]) + j0
        if cand.size == 0:
            continue
        if l_events.shape[1] == 1 and r_events.shape[1] == 1:
            ok = r_events[cand, 0] != l_events[i, 0]
        else:
            ok = ~np.isin(r_events[cand], l_events[i]).any(axis=1)
        hits = cand[ok]
        if hits.size:
            j = hits[0]
            consumed[j] = True
            out[i] = j
    return out


numpy_backend = types.SimpleNamespace(
    name="numpy",
    window_counts=_np_window_counts,
    recent_counts=_np_recent_counts,
    greedy_pair=_np_greedy_pair,
)


# --- numba ------------------------------------------------------------------

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _nb_window_counts(anchors, targets, lo, hi):
        n = anchors.shape[0]
        m = targets.shape[0]
        out = np.zeros(n, dtype=np.int64)
        # anchors need not be sorted; restart the pointers when they step back
        left = 0
        right = 0
        prev = np.iinfo(np.int64).min
        for i in range(n):
            t = anchors[i]
            if t < prev:
                left = 0
                right = 0
            prev = t
            while left < m and targets[left] < t + lo:
                left += 1
            if right < left:
                right = left
            while right < m and targets[right] <= t + hi:
                right += 1
            out[i] = right - left
        return out

    @njit(cache=True, nogil=True)
    def _nb_recent_counts(anchors, targets, lookback):
        n = anchors.shape[0]
        m = targets.shape[0]
        out = np.zeros(n, dtype=np.int64)
        left = 0
        right = 0
        prev = np.iinfo(np.int64).min
        for i in range(n):
            t = anchors[i]
            if t < prev:
                left = 0
                right = 0
            prev = t
            while left < m and targets[left] < t - lookback:
                left += 1
            if right < left:
                right = left
            while right < m and targets[right] <= t:
                right += 1
            out[i] = right - left
        return out

    @njit(cache=True, nogil=True)
    def _nb_greedy_pair(l_anchor, l_events, r_start, r_events, lo, hi):
        n_l = l_anchor.shape[0]
        n_r = r_start.shape[0]
        k_l = l_events.shape[1]
        k_r = r_events.shape[1]
        out = np.full(n_l, -1, dtype=np.int64)
        consumed = np.zeros(n_r, dtype=np.bool_)
        for i in range(n_l):
            t0 = l_anchor[i] + lo
            t1 = l_anchor[i] + hi
            # binary search for the first start >= t0
            a = 0
            b = n_r
            while a < b:
                mid = (a + b) // 2
                if r_start[mid] < t0:
                    a = mid + 1
                else:
                    b = mid
            j = a
            while j < n_r and r_start[j] <= t1:
                if not consumed[j]:
                    clash = False
                    for x in range(k_l):
                        for y in range(k_r):
                            if l_events[i, x] == r_events[j, y]:
                                clash = True
                                break
                        if clash:
                            break
                    if not clash:
                        consumed[j] = True
                        out[i] = j
                        break
                j += 1
        return out

    numba_backend = types.SimpleNamespace(
        name="numba",
        window_counts=_nb_window_counts,
        recent_counts=_nb_recent_counts,
        greedy_pair=_nb_greedy_pair,
    )
else:  # pragma: no cover
    numba_backend = None

backend = numba_backend if USE_NUMBA else numpy_backend

window_counts = backend.window_counts
recent_counts = backend.recent_counts
greedy_pair = backend.greedy_pair
