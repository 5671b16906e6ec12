"""Cut an event chain into atomic action segments around the manipulator.

Every ``N -> T -> N`` stretch in a manipulator row is a candidate segment.
Candidates are filtered by the share of touching columns they contain,
containment is removed, strongly overlapping candidates are fused and any
remaining overlap is truncated.
"""

from __future__ import annotations

import bisect
import re
from dataclasses import replace
from typing import Iterable, Sequence

import numpy as np

from .model import O, T, ActionSegment, EventChain, InputError, Params, decode, project_touch

IDLE = "Idle"


# --------------------------------------------------------------------------
# low-pass filtering of relation runs
# --------------------------------------------------------------------------

def _runs(codes) -> list[list[int]]:
    runs = []
    for j, c in enumerate(codes):
        c = int(c)
        if runs and runs[-1][0] == c:
            runs[-1][2] = j + 1
        else:
            runs.append([c, j, j + 1])
    return runs


def smooth_row(codes, columns: Sequence[int], min_frames: int) -> np.ndarray:
    """Replace every run shorter than ``min_frames`` by its predecessor.

    A run's duration is measured between the timestamps of its first column
    and of the column after it; the final run has no end and is never
    touched.  A short leading run takes the value of its successor.
    """
    codes = np.array(codes, dtype=np.uint8)
    runs = _runs(codes)
    while len(runs) > 1:
        short = None
        for k in range(len(runs) - 1):
            _, lo, hi = runs[k]
            if columns[hi] - columns[lo] < min_frames:
                short = k
                break
        if short is None:
            break
        runs[short][0] = runs[short - 1][0] if short > 0 else runs[short + 1][0]
        merged = [runs[0]]
        for run in runs[1:]:
            if run[0] == merged[-1][0]:
                merged[-1][2] = run[2]
            else:
                merged.append(run)
        runs = merged
    for value, lo, hi in runs:
        codes[lo:hi] = value
    return codes


def smooth_rows(chain: EventChain, rows: Iterable[int], min_frames: int) -> EventChain:
    """Low-pass the given rows; columns are not collapsed here."""
    rows = list(rows)
    if min_frames <= 1 or not rows:
        return chain
    cells = np.array(chain.cells)
    for i in rows:
        cells[i] = smooth_row(cells[i], chain.columns, min_frames)
    return chain.with_cells(cells)


def denoise_manipulator_rows(chain: EventChain, manip: int, min_event_frames: int) -> EventChain:
    rows = chain.rows_with(manip)
    if not rows:
        raise InputError(f"manipulator {manip} does not occur in the chain")
    return smooth_rows(chain, rows, min_event_frames).collapse()


# --------------------------------------------------------------------------
# candidates and confidence
# --------------------------------------------------------------------------

_BLOCK = re.compile(r"(?=N(T+)N)")


def touch_confidence(codes, lo: int, hi: int) -> float:
    """Share of touching cells among the columns ``lo <= j < hi``."""
    if hi <= lo:
        raise ValueError("empty column window")
    window = np.asarray(codes)[lo:hi]
    return float(np.count_nonzero((window == T) | (window == O))) / (hi - lo)


def _columns_between(chain: EventChain, start: int, end: int) -> tuple[int, int]:
    lo = bisect.bisect_left(chain.columns, start)
    hi = bisect.bisect_left(chain.columns, end)
    return lo, hi


def segment_confidence(chain: EventChain, pair: tuple[int, int], start: int, end: int) -> float:
    """Touch share of ``pair`` over the chain columns stamped in ``[start, end)``."""
    i = chain.row_index(pair)
    if i is None:
        raise InputError(f"pair {pair} not in chain")
    lo, hi = _columns_between(chain, start, end)
    if hi <= lo:
        return 0.0
    return touch_confidence(chain.cells[i], lo, hi)


def candidate_segments(chain: EventChain, manip: int, raw: EventChain | None = None) -> list[ActionSegment]:
    """One candidate per ``N T+ N`` run in each row holding ``manip``.

    The candidate spans the touching columns: from the first ``T`` key frame
    up to (excluding) the releasing ``N`` key frame.  When ``raw`` is given,
    confidence is measured on that unfiltered chain over the same frame span,
    which is where flicker shows up after the rows were low-passed.
    """
    basis = raw if raw is not None else chain
    out = []
    for i in chain.rows_with(manip):
        text = decode(project_touch(chain.cells[i]))
        pair = chain.pairs[i]
        other = pair[1] if pair[0] == manip else pair[0]
        for match in _BLOCK.finditer(text):
            lo = match.start() + 1
            hi = lo + len(match.group(1))
            start, end = chain.columns[lo], chain.columns[hi]
            if basis is chain:
                conf = touch_confidence(chain.cells[i], lo, hi)
            else:
                conf = segment_confidence(basis, pair, start, end)
            out.append(ActionSegment(start, end, conf, manip, other))
    out.sort(key=lambda s: (s.start, s.end, s.primary))
    return out


# --------------------------------------------------------------------------
# decomposition
# --------------------------------------------------------------------------

def _overlap(a: ActionSegment, b: ActionSegment) -> int:
    return max(0, min(a.end, b.end) - max(a.start, b.start))


def merge_ratio(a: ActionSegment, b: ActionSegment) -> float:
    return _overlap(a, b) / min(len(a), len(b))


def _fuse(a: ActionSegment, b: ActionSegment) -> ActionSegment:
    la, lb = len(a), len(b)
    conf = (a.confidence * la + b.confidence * lb) / (la + lb)
    return ActionSegment(min(a.start, b.start), max(a.end, b.end), min(conf, 1.0), a.manipulator,
                         a.primary if a.primary == b.primary else None,
                         a.secondaries | b.secondaries)


def _drop_contained(segs: list[ActionSegment]) -> list[ActionSegment]:
    segs = sorted(segs, key=lambda s: (s.start, -s.end))
    kept: list[ActionSegment] = []
    for s in segs:
        if any(k.start <= s.start and s.end <= k.end for k in kept):
            continue
        kept.append(s)
    return kept


def decompose(candidates: Sequence[ActionSegment], params: Params = Params()) -> list[ActionSegment]:
    segs = [c for c in candidates if c.confidence >= params.tau_conf]
    segs = _drop_contained(segs)
    changed = True
    while changed:
        changed = False
        segs.sort(key=lambda s: (s.start, s.end))
        for i in range(len(segs)):
            for j in range(i + 1, len(segs)):
                if merge_ratio(segs[i], segs[j]) >= params.tau_merge:
                    fused = _fuse(segs[i], segs[j])
                    segs = segs[:i] + segs[i + 1:j] + segs[j + 1:] + [fused]
                    changed = True
                    break
            if changed:
                break
    segs.sort(key=lambda s: (s.start, s.end))
    out: list[ActionSegment] = []
    for s in segs:
        if out and s.start < out[-1].end:
            if s.end <= out[-1].end:
                continue
            s = replace(s, start=out[-1].end)
        out.append(s)
    return out


def segment_chain(chain: EventChain, manip: int, params: Params = Params()) -> tuple[EventChain, list[ActionSegment]]:
    """Denoise, collect candidates and decompose for one manipulator."""
    clean = denoise_manipulator_rows(chain, manip, params.min_event_frames)
    cands = candidate_segments(clean, manip, raw=chain)
    return clean, decompose(cands, params)


# --------------------------------------------------------------------------
# frame timelines
# --------------------------------------------------------------------------

def segment_window(chain: EventChain, seg: ActionSegment) -> tuple[int, int]:
    """Column index range ``[lo, hi)`` of the key frames inside the segment."""
    return _columns_between(chain, seg.start, seg.end)


def to_timeline(segments: Sequence[ActionSegment], chain: EventChain | None = None, contiguous: bool = False,
                frame_range: tuple[int, int] | None = None) -> list[frozenset[str]]:
    """Per-frame label sets over ``frame_range``; uncovered frames are Idle.

    Unlabelled segments contribute the label ``"Action"``.
    """
    segs = sorted(segments, key=lambda s: (s.start, s.end))
    if frame_range is None:
        lo = chain.columns[0] if chain is not None and chain.m else 0
        hi = chain.columns[-1] + 1 if chain is not None and chain.m else lo
        if segs:
            lo = min(lo, segs[0].start)
            hi = max(hi, max(s.end for s in segs))
        frame_range = (lo, hi)
    lo, hi = frame_range
    track: list[set[str]] = [set() for _ in range(hi - lo)]
    for k, s in enumerate(segs):
        end = s.end
        if contiguous and k + 1 < len(segs) and segs[k + 1].start > end:
            end = segs[k + 1].start
        labels = s.labels or ("Action",)
        for f in range(max(s.start, lo), min(end, hi)):
            track[f - lo].update(labels)
    return [frozenset(t) if t else frozenset({IDLE}) for t in track]


def merge_timelines(tracks: Sequence[Sequence[frozenset[str]]]) -> list[frozenset[str]]:
    """Union of per-hand tracks over the same frame range."""
    if not tracks:
        return []
    out = []
    for labels in zip(*tracks):
        union = frozenset().union(*labels) - {IDLE}
        out.append(union or frozenset({IDLE}))
    return out
