"""Label decomposed segments against a library of model chains.

Within a segment the manipulator handles one primary object; every object
touching the primary is a secondary.  Each way of splitting the secondaries
into parallel streams is a hypothesis, and the hypothesis whose streams match
the library best on average wins.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from itertools import combinations
from typing import Collection, Iterable, Mapping, Sequence

import numpy as np

from .learn import ModelSEC, representative_model
from .manipulator import NoManipulatorError, estimate_manipulators
from .model import O, T, ActionSegment, EventChain, InputError, Params
from .segment import merge_timelines, segment_chain, segment_window, smooth_rows, to_timeline
from .similarity import semantic_similarity

UNKNOWN = "Unknown"


# --------------------------------------------------------------------------
# object roles
# --------------------------------------------------------------------------

def _touching(codes) -> np.ndarray:
    codes = np.asarray(codes)
    return (codes == T) | (codes == O)


def _other(pair, obj):
    return pair[1] if pair[0] == obj else pair[0]


def assign_roles(chain: EventChain, segment: ActionSegment, manip: int) -> tuple[int, frozenset[int]]:
    """Primary and secondary objects of one segment.

    The primary is the object touching the manipulator in the most key frames
    of the segment (ties: longer touch duration, then lower id).  Secondaries
    are the other objects touching the primary at least once in the window.
    """
    lo, hi = segment_window(chain, segment)
    cols = chain.columns
    best = None
    for i in chain.rows_with(manip):
        touch = _touching(chain.cells[i, lo:hi])
        count = int(touch.sum())
        if not count:
            continue
        dur = 0
        for j in np.flatnonzero(touch) + lo:
            dur += (cols[j + 1] if j + 1 < len(cols) else cols[j] + 1) - cols[j]
        key = (-count, -dur, _other(chain.pairs[i], manip))
        if best is None or key < best:
            best = key
    if best is None:
        raise InputError(f"empty segment roles: nothing touches {manip} in [{segment.start}, {segment.end})")
    primary = best[2]
    secondaries = set()
    for i in chain.rows_with(primary):
        other = _other(chain.pairs[i], primary)
        if other != manip and _touching(chain.cells[i, lo:hi]).any():
            secondaries.add(other)
    return primary, frozenset(secondaries)


def noise_rows(chain: EventChain, manip: int, primary: int) -> list[int]:
    """Rows pairing the manipulator with anything but the primary."""
    return [i for i in chain.rows_with(manip) if _other(chain.pairs[i], manip) != primary]


# --------------------------------------------------------------------------
# hypothesis enumeration
# --------------------------------------------------------------------------

def enumerate_subsets(secondaries: Iterable[int]) -> list[frozenset[int]]:
    """All non-empty subsets, by size then lexicographically."""
    items = sorted(secondaries)
    return [frozenset(c) for k in range(1, len(items) + 1) for c in combinations(items, k)]


def _partitions(items: list):
    if not items:
        yield []
        return
    first, rest = items[0], items[1:]
    for smaller in _partitions(rest):
        for k in range(len(smaller)):
            yield smaller[:k] + [[first] + smaller[k]] + smaller[k + 1:]
        yield [[first]] + smaller


def enumerate_hypotheses(secondaries: Iterable[int]) -> list[tuple[frozenset[int], ...]]:
    """Every set partition of the secondaries (Bell-number many).

    Without secondaries there is a single one-stream hypothesis whose block
    is empty.
    """
    items = sorted(secondaries)
    if not items:
        return [(frozenset(),)]
    out = []
    for part in _partitions(items):
        blocks = sorted((frozenset(b) for b in part), key=lambda b: sorted(b))
        out.append(tuple(blocks))
    out.sort(key=lambda h: (len(h), [sorted(b) for b in h]))
    return out


# --------------------------------------------------------------------------
# stream extraction and scoring
# --------------------------------------------------------------------------

def stream_chain(chain: EventChain, segment: ActionSegment, manip: int, primary: int,
                 block: Collection[int], min_event_frames: int = 1) -> EventChain:
    """Sub-chain of one manipulation stream inside the segment.

    Keeps the manipulator-primary row plus rows among the primary and the
    block's objects, over the segment's key frames and the untouched key
    frame on either side.  Rows are low-passed before they are cut.
    """
    objs = {manip, primary, *block}
    rows = []
    for i, (a, b) in enumerate(chain.pairs):
        if a not in objs or b not in objs:
            continue
        if manip in (a, b) and _other((a, b), manip) != primary:
            continue
        rows.append(i)
    if not rows:
        return EventChain.empty()
    smoothed = smooth_rows(chain, rows, min_event_frames)
    lo, hi = segment_window(chain, segment)
    return smoothed.select_rows(rows).window(max(lo - 1, 0), hi + 1).normalized()


@dataclass(frozen=True)
class StreamResult:
    label: str
    delta: float
    manipulator: int
    primary: int | None
    secondaries: frozenset[int]

    def to_dict(self) -> dict:
        return {"label": self.label, "delta": round(self.delta, 6), "manipulator": self.manipulator,
                "primary": self.primary, "secondaries": sorted(self.secondaries)}


@dataclass(frozen=True)
class RecognitionResult:
    segment: ActionSegment
    streams: tuple[StreamResult, ...]
    score: float
    hypotheses: tuple[tuple[tuple[frozenset[int], ...], float], ...] = field(default=(), compare=False)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(s.label for s in self.streams)

    def to_dict(self) -> dict:
        return {"start_frame": self.segment.start, "end_frame": self.segment.end,
                "confidence": round(self.segment.confidence, 6),
                "score": round(self.score, 6),
                "hypothesis": [s.to_dict() for s in self.streams]}


Templates = Sequence[tuple[str, EventChain]]


def prepare_templates(models: Sequence[ModelSEC], w_min: float) -> list[tuple[str, EventChain]]:
    if not models:
        raise InputError("empty model library")
    return [(m.name, representative_model(m, w_min)) for m in models]


def best_match(stream: EventChain, templates: Templates, tau_sem: float) -> tuple[str, float]:
    """Best model label (first wins ties) or Unknown below ``tau_sem``."""
    if stream.is_empty():
        return UNKNOWN, 0.0
    best_name, best = UNKNOWN, -1.0
    for name, tpl in templates:
        d = semantic_similarity(stream, tpl).delta
        if d > best + 1e-9:
            best_name, best = name, d
    return (best_name if best >= tau_sem - 1e-9 else UNKNOWN), best


def recognize_segment(chain: EventChain, segment: ActionSegment, models: Sequence[ModelSEC],
                      params: Params = Params(), split_streams: bool = True,
                      templates: Templates | None = None) -> RecognitionResult:
    """Pick the hypothesis with the highest mean stream similarity.

    Ties prefer fewer streams.  ``split_streams=False`` keeps all
    secondaries in one stream (no parallel hypotheses).
    """
    if templates is None:
        templates = prepare_templates(models, params.w_min)
    manip = segment.manipulator
    try:
        primary, secondaries = assign_roles(chain, segment, manip)
    except InputError:
        stream = StreamResult(UNKNOWN, 0.0, manip, None, frozenset())
        return RecognitionResult(replace(segment, labels=(UNKNOWN,)), (stream,), 0.0)
    hyps = enumerate_hypotheses(secondaries) if split_streams else [(frozenset(secondaries),)]
    cache: dict[frozenset[int], tuple[str, float]] = {}
    scored = []
    for hyp in hyps:
        for block in hyp:
            if block not in cache:
                sc = stream_chain(chain, segment, manip, primary, block, params.min_event_frames)
                cache[block] = best_match(sc, templates, params.tau_sem)
        mean = float(np.mean([cache[b][1] for b in hyp]))
        scored.append((hyp, mean))
    win, score = min(scored, key=lambda hs: (-round(hs[1], 9), len(hs[0]), [sorted(b) for b in hs[0]]))
    streams = tuple(StreamResult(cache[b][0], cache[b][1], manip, primary, b) for b in win)
    seg = replace(segment, primary=primary, secondaries=secondaries, labels=tuple(s.label for s in streams))
    return RecognitionResult(seg, streams, score, tuple(scored))


# --------------------------------------------------------------------------
# depth-free fallback: sliding-window scan
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ScanDetection:
    label: str
    delta: float
    col_start: int
    col_end: int  # exclusive
    segment: ActionSegment


def scan_match(chain: EventChain, models: Sequence[ModelSEC], params: Params = Params(), slack: int = 2,
               objects: Mapping[str, Collection[int]] | None = None,
               templates: Templates | None = None) -> list[ScanDetection]:
    """Slide every model over the raw chain and keep non-overlapping hits.

    Window widths run from one column short of the model to ``slack``
    columns beyond it.  Per model, hits are suppressed greedily by similarity
    (ties: narrower, then earlier).  Across models, a hit whose columns are
    entirely covered by other hits scoring at least as high is dropped,
    weakest first; partially overlapping claims by different models stay.
    ``objects`` optionally restricts a model to rows among the given ids.
    """
    if templates is None:
        templates = prepare_templates(models, params.w_min)
    out = []
    if chain.is_empty():
        return out
    for name, tpl in templates:
        base = chain
        if objects and name in objects:
            allowed = set(objects[name])
            base = chain.select_rows([i for i, (a, b) in enumerate(chain.pairs) if a in allowed and b in allowed])
            if base.n == 0:
                continue
        hits = []
        for width in range(max(tpl.m - 1, 2), tpl.m + slack + 1):
            for a in range(0, chain.m - width + 1):
                sub = base.window(a, a + width).normalized()
                if sub.is_empty():
                    continue
                d = semantic_similarity(sub, tpl).delta
                if d >= params.tau_sem - 1e-9:
                    hits.append((d, width, a))
        hits.sort(key=lambda h: (-round(h[0], 9), h[1], h[2]))
        kept = []
        for d, width, a in hits:
            if any(a < ka + kw and ka < a + width for _, kw, ka in kept):
                continue
            kept.append((d, width, a))
        for d, width, a in kept:
            start = chain.columns[a + 1] if width > 1 else chain.columns[a]
            end = chain.columns[a + width - 1]
            if end <= start:
                end = start + 1
            seg = ActionSegment(start, end, 1.0, -1, labels=(name,))
            out.append(ScanDetection(name, d, a, a + width, seg))
    out = _drop_covered(out)
    out.sort(key=lambda h: (h.col_start, h.col_end, h.label))
    return out


def _drop_covered(hits: list[ScanDetection]) -> list[ScanDetection]:
    # weakest and narrowest go first; ties keep library order stable
    order = sorted(range(len(hits)), key=lambda k: (round(hits[k].delta, 9), hits[k].col_end - hits[k].col_start, -k))
    alive = set(range(len(hits)))
    for k in order:
        h = hits[k]
        cover = set()
        for o in alive:
            if o != k and hits[o].delta >= h.delta - 1e-9:
                cover.update(range(hits[o].col_start, hits[o].col_end))
        if cover.issuperset(range(h.col_start, h.col_end)):
            alive.discard(k)
    return [hits[k] for k in sorted(alive)]


# --------------------------------------------------------------------------
# whole-chain pipeline
# --------------------------------------------------------------------------

def find_manipulators(chain: EventChain, params: Params = Params()) -> tuple[int, ...]:
    """Manipulator estimation on a copy with every row low-passed.

    Single-frame flicker inside a long touch run would otherwise open
    spurious ``N T N`` blocks on passive objects.
    """
    smoothed = smooth_rows(chain, range(chain.n), params.min_event_frames).normalized()
    if smoothed.is_empty():
        raise NoManipulatorError("no manipulator pattern found")
    return estimate_manipulators(smoothed, params.hands)


def analyze(chain: EventChain, models: Sequence[ModelSEC], params: Params = Params(),
            split_streams: bool = True) -> list[RecognitionResult]:
    """Manipulator estimation, segmentation and recognition in one pass."""
    templates = prepare_templates(models, params.w_min)
    if chain.is_empty():
        return []
    results = []
    for manip in find_manipulators(chain, params):
        clean, segments = segment_chain(chain, manip, params)
        for seg in segments:
            results.append(recognize_segment(clean, seg, models, params, split_streams, templates))
    results.sort(key=lambda r: (r.segment.start, r.segment.manipulator))
    return results


def results_timeline(results: Sequence[RecognitionResult], frame_range: tuple[int, int],
                     contiguous: bool = False) -> list[frozenset[str]]:
    by_hand: dict[int, list[ActionSegment]] = {}
    for r in results:
        by_hand.setdefault(r.segment.manipulator, []).append(r.segment)
    if not by_hand:
        return to_timeline([], None, contiguous, frame_range)
    return merge_timelines([to_timeline(segs, None, contiguous, frame_range) for segs in by_hand.values()])
