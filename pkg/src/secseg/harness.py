"""Scripted synthetic manipulations, noise injection and evaluation metrics.

The archetype tables below are this package's canonical fixtures: each one
lists, per relational phase, the relation between the manipulator and the
primary object ("MP") and between the primary and its secondary ("PS").
Rendering a script produces scene-graph frames whose extracted chain holds
exactly those columns, together with per-frame ground-truth labels.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Collection, Iterable, Mapping, Sequence, TextIO

import numpy as np

from .extract import extract_event_chain
from .model import ActionSegment, EventChain, InputError, Node, SceneGraphFrame
from .segment import IDLE

# --------------------------------------------------------------------------
# archetypes
# --------------------------------------------------------------------------


@dataclass(frozen=True)
class Archetype:
    name: str
    label: str
    mp: str
    ps: str | None = None
    durations: tuple[int, int] = (4, 12)

    @property
    def phases(self) -> int:
        return len(self.mp)


ARCHETYPES: dict[str, Archetype] = {a.name: a for a in (
    Archetype("Putting", "Putting", "NTTTN", "NNTTT"),
    Archetype("Taking", "Taking", "NTTTN", "TTNNN"),
    Archetype("Hiding", "Hiding", "NTTTN", "NNTAA"),
    Archetype("Uncovering", "Uncovering", "NTTTN", "AATNN"),
    Archetype("Pushing", "Pushing", "NTTTN"),
    Archetype("Stirring", "Stirring", "NTTTTTTTN", "NNTNTNTNN"),
    # same relational columns, different dynamics
    Archetype("Cutting", "CutChop", "NTTTN", "NNTNN", (9, 12)),
    Archetype("Chopping", "CutChop", "NTTTN", "NNTNN", (4, 6)),
    # held out of every library: must come out as Unknown
    Archetype("Pouring", "Pouring", "NTTTN", "TTNTT"),
)}

TRAINED = ("Putting", "Taking", "Hiding", "Uncovering", "Pushing", "Stirring", "Cutting", "Chopping")
NOVEL = ("Pouring",)
# pairs that can share one manipulator and primary as parallel streams
PARALLEL_COMBOS = (("Taking", "Uncovering"), ("Putting", "Hiding"), ("Putting", "Uncovering"))


def canonical_chain(name: str) -> EventChain:
    """The archetype's columns as extracted: collapsed, static rows pruned."""
    arch = ARCHETYPES[name]
    rows = {(1, 2): arch.mp}
    if arch.ps is not None:
        rows[(2, 3)] = arch.ps
    return EventChain.from_rows(rows).normalized()


@dataclass(frozen=True)
class ActionScript:
    archetype: str
    manipulator: int
    primary: int
    secondaries: tuple[int, ...] = ()
    phases: tuple[int, ...] | None = None  # frames per relational phase

    def __post_init__(self):
        if self.archetype not in ARCHETYPES:
            raise InputError(f"unknown archetype {self.archetype!r}")
        arch = ARCHETYPES[self.archetype]
        want = 0 if arch.ps is None else 1
        object.__setattr__(self, "secondaries", tuple(int(s) for s in self.secondaries))
        if len(self.secondaries) != want:
            raise InputError(f"{self.archetype} takes {want} secondary object(s)")
        ids = [self.manipulator, self.primary, *self.secondaries]
        if len(set(ids)) != len(ids) or min(ids) < 1:
            raise InputError(f"{self.archetype}: actor ids must be distinct positive integers")
        if self.phases is not None:
            phases = tuple(int(p) for p in self.phases)
            if len(phases) != arch.phases or min(phases) < 1:
                raise InputError(f"{self.archetype} needs {arch.phases} positive phase lengths")
            object.__setattr__(self, "phases", phases)

    @property
    def label(self) -> str:
        return ARCHETYPES[self.archetype].label

    @property
    def objects(self) -> tuple[int, ...]:
        return (self.manipulator, self.primary, *self.secondaries)

    def to_dict(self) -> dict:
        out = {"archetype": self.archetype, "manipulator": self.manipulator, "primary": self.primary,
               "secondaries": list(self.secondaries)}
        if self.phases is not None:
            out["phases"] = list(self.phases)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActionScript":
        try:
            return cls(str(d["archetype"]), int(d["manipulator"]), int(d["primary"]),
                       tuple(d.get("secondaries", ())), tuple(d["phases"]) if d.get("phases") else None)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed action script: {exc!r}") from None


Step = Sequence[ActionScript]


# --------------------------------------------------------------------------
# ground truth
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class TruthInstance:
    label: str
    start: int
    end: int
    objects: tuple[int, ...] = ()

    def __len__(self) -> int:
        return self.end - self.start


@dataclass(frozen=True)
class GroundTruth:
    frame_range: tuple[int, int]
    instances: tuple[TruthInstance, ...] = ()

    def track(self, known_labels: Collection[str] | None = None) -> list[frozenset[str]]:
        lo, hi = self.frame_range
        track: list[set[str]] = [set() for _ in range(hi - lo)]
        for inst in self.instances:
            label = inst.label if known_labels is None or inst.label in known_labels else "Unknown"
            for f in range(max(inst.start, lo), min(inst.end, hi)):
                track[f - lo].add(label)
        return [frozenset(t) if t else frozenset({IDLE}) for t in track]

    def write_jsonl(self, stream: TextIO) -> None:
        lo, hi = self.frame_range
        per_frame: list[list[dict]] = [[] for _ in range(hi - lo)]
        for inst in sorted(self.instances, key=lambda i: (i.start, i.label, i.objects)):
            for f in range(inst.start, inst.end):
                per_frame[f - lo].append({"label": inst.label, "objects": list(inst.objects)})
        for k, actions in enumerate(per_frame):
            stream.write(json.dumps({"frame": lo + k, "actions": actions}, separators=(",", ":")) + "\n")

    @classmethod
    def read_jsonl(cls, stream: TextIO, name: str = "<truth>") -> "GroundTruth":
        frames = []
        for lineno, line in enumerate(stream, 1):
            if not line.strip():
                continue
            try:
                d = json.loads(line)
                if isinstance(d, dict) and "frame" not in d and "schema" in d:
                    continue
                frame = int(d["frame"])
                acts = [(str(a["label"]), tuple(int(o) for o in a.get("objects", ()))) for a in d["actions"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise InputError(f"{name}:{lineno}: {exc}") from None
            if frames and frame != frames[-1][0] + 1:
                raise InputError(f"{name}:{lineno}: frame {frame} does not follow {frames[-1][0]}")
            frames.append((frame, acts))
        if not frames:
            raise InputError(f"{name}: no frames")
        # one instance per maximal run of frames carrying the same action
        open_: dict[tuple, int] = {}
        out = []
        prev: set = set()
        for frame, acts in frames + [(frames[-1][0] + 1, [])]:
            cur = set(acts)
            for key in sorted(prev - cur):
                out.append(TruthInstance(key[0], open_.pop(key), frame, key[1]))
            for key in cur - prev:
                open_[key] = frame
            prev = cur
        out.sort(key=lambda i: (i.start, i.label, i.objects))
        return cls((frames[0][0], frames[-1][0] + 1), tuple(out))


# --------------------------------------------------------------------------
# synthesis
# --------------------------------------------------------------------------

_BACKGROUND = 0


def _normalize_steps(steps) -> list[list[ActionScript]]:
    out = []
    for step in steps:
        group = [step] if isinstance(step, ActionScript) else list(step)
        if not group:
            raise InputError("empty step")
        out.append(group)
    return out


def _check_steps(steps: list[list[ActionScript]]) -> None:
    seen: dict[int, int] = {}
    hands = set()
    for k, group in enumerate(steps):
        head = group[0]
        mp = ARCHETYPES[head.archetype].mp
        for s in group[1:]:
            if s.manipulator != head.manipulator or s.primary != head.primary:
                raise InputError(f"step {k}: parallel scripts must share manipulator and primary")
            if ARCHETYPES[s.archetype].mp != mp:
                raise InputError(f"step {k}: parallel scripts must share the manipulator pattern")
        hands.add(head.manipulator)
        for s in group:
            for obj in (s.primary, *s.secondaries):
                if seen.get(obj, k) != k:
                    raise InputError(f"step {k}: object {obj} already used in step {seen[obj]}")
                seen[obj] = k
        secs = [o for s in group for o in s.secondaries]
        if len(set(secs)) != len(secs):
            raise InputError(f"step {k}: parallel scripts need distinct secondaries")
    clash = hands & set(seen)
    if clash:
        raise InputError(f"objects {sorted(clash)} act both as manipulator and as object")


def _phase_value(pattern: str, bounds: Sequence[int], frame: int) -> str:
    # the first phase extends back to frame 0, the last one forward to the end
    k = int(np.searchsorted(bounds, frame, side="right")) - 1
    return pattern[min(max(k, 0), len(pattern) - 1)]


def synthesize(steps, seed: int = 0, idle: tuple[int, int] = (3, 10)) -> tuple[list[SceneGraphFrame], GroundTruth]:
    """Render scripted steps into frames plus ground truth.

    ``steps`` is a sequence of steps; a step is one script or a group of
    scripts that run in parallel on a shared manipulator and primary.  Steps
    of the same manipulator are serial, separated by idle gaps; different
    manipulators run concurrently.  Missing phase lengths are drawn from the
    archetype's duration range.
    """
    steps = _normalize_steps(steps)
    _check_steps(steps)
    rng = np.random.default_rng(seed)
    cursor: dict[int, int] = {}
    placed = []  # (script, phase bounds)
    instances = []
    for group in steps:
        head = group[0]
        arch = ARCHETYPES[head.archetype]
        phases = head.phases
        if phases is None:
            lo, hi = arch.durations
            phases = tuple(int(v) for v in rng.integers(lo, hi + 1, size=arch.phases))
        hand = head.manipulator
        t = cursor.get(hand, 0) + int(rng.integers(idle[0], idle[1] + 1))
        bounds = np.concatenate([[t], t + np.cumsum(phases)]).astype(int)
        cursor[hand] = int(bounds[-1])
        for s in group:
            placed.append((s, bounds))
            # the action runs from the first touch to the release
            instances.append(TruthInstance(s.label, int(bounds[1]), int(bounds[-2]), s.objects))
    end = max(cursor.values()) + int(rng.integers(idle[0], idle[1] + 1))

    objects = sorted({o for s, _ in placed for o in s.objects})
    frames = []
    for f in range(end):
        absent = set()
        edges = set()
        for s, bounds in placed:
            arch = ARCHETYPES[s.archetype]
            if _phase_value(arch.mp, bounds, f) == "T":
                edges.add((s.manipulator, s.primary))
            if arch.ps is not None:
                sec = s.secondaries[0]
                rel = _phase_value(arch.ps, bounds, f)
                if rel == "A":
                    absent.add(sec)
                elif rel == "T":
                    edges.add((s.primary, sec))
        nodes = (Node(_BACKGROUND, bg=True),) + tuple(Node(o) for o in objects if o not in absent)
        frames.append(SceneGraphFrame(f, nodes, frozenset(edges)))
    instances.sort(key=lambda i: (i.start, i.label, i.objects))
    return frames, GroundTruth((0, end), tuple(instances))


def steps_from_dict(data: Mapping) -> list[list[ActionScript]]:
    try:
        raw = data["steps"]
    except (KeyError, TypeError):
        raise InputError("script file needs a 'steps' list") from None
    out = []
    for step in raw:
        items = step if isinstance(step, list) else [step]
        out.append([ActionScript.from_dict(d) for d in items])
    return out


def steps_to_dict(steps) -> dict:
    return {"steps": [[s.to_dict() for s in group] for group in _normalize_steps(steps)]}


def random_activity(rng: np.random.Generator, n_actions: int, parallel: bool = False,
                    pool: Sequence[str] = TRAINED, hand: int = 1, first_id: int = 2) -> list[list[ActionScript]]:
    """A chain of single-hand steps over fresh objects.

    With ``parallel`` one randomly placed step becomes a two-stream step.
    """
    steps = []
    nxt = first_id
    par_at = int(rng.integers(n_actions)) if parallel else -1
    for k in range(n_actions):
        if k == par_at:
            names = PARALLEL_COMBOS[int(rng.integers(len(PARALLEL_COMBOS)))]
            primary, nxt = nxt, nxt + 1
            group = []
            for name in names:
                group.append(ActionScript(name, hand, primary, (nxt,)))
                nxt += 1
            steps.append(group)
            continue
        name = pool[int(rng.integers(len(pool)))]
        arch = ARCHETYPES[name]
        primary, nxt = nxt, nxt + 1
        secs = ()
        if arch.ps is not None:
            secs, nxt = (nxt,), nxt + 1
        steps.append([ActionScript(name, hand, primary, secs)])
    return steps


def training_samples(name: str, count: int, seed: int = 0) -> list[EventChain]:
    """Extracted chains of ``count`` single-step renderings of one archetype."""
    rng = np.random.default_rng(seed)
    arch = ARCHETYPES[name]
    out = []
    for _ in range(count):
        secs = (3,) if arch.ps is not None else ()
        frames, _ = synthesize([ActionScript(name, 1, 2, secs)], seed=int(rng.integers(2**31)))
        out.append(extract_event_chain(frames))
    return out


# --------------------------------------------------------------------------
# noise
# --------------------------------------------------------------------------

def inject_noise(frames: Sequence[SceneGraphFrame], p_flicker: float = 0.0, p_relabel: float = 0.0,
                 seed: int = 0, targets: Iterable[tuple[int, tuple[int, int]]] | None = None) -> list[SceneGraphFrame]:
    """Flip touching edges for single frames and relabel objects.

    Only pairs that touch somewhere in the sequence flicker, and only in
    frames where both objects are present.  ``targets`` forces a flip at the
    given ``(frame, pair)`` locations.  A relabelled object takes a fresh id
    from a random frame onward.
    """
    for p in (p_flicker, p_relabel):
        if not 0.0 <= p <= 1.0:
            raise InputError(f"probability {p} outside [0, 1]")
    frames = list(frames)
    rng = np.random.default_rng(seed)
    eligible = sorted({e for fr in frames for e in fr.edges})
    forced: dict[int, set] = {}
    for f, pair in targets or ():
        forced.setdefault(int(f), set()).add(tuple(sorted(pair)))
    out = []
    for fr in frames:
        present = fr.node_ids()
        edges = set(fr.edges)
        flips = rng.random(len(eligible)) < p_flicker if p_flicker > 0 else np.zeros(len(eligible), bool)
        for pair, flip in zip(eligible, flips):
            if (flip or pair in forced.get(fr.frame, ())) and pair[0] in present and pair[1] in present:
                edges ^= {pair}
        overlaps = fr.overlaps & edges
        out.append(SceneGraphFrame(fr.frame, fr.nodes, frozenset(edges), frozenset(overlaps)))
    if p_relabel > 0 and out:
        ids = sorted({n.id for fr in out for n in fr.nodes if not n.bg})
        fresh = max(n.id for fr in out for n in fr.nodes) + 1
        renames = []
        for obj in ids:
            if rng.random() < p_relabel:
                renames.append((obj, fresh, int(rng.integers(len(out)))))
                fresh += 1
        for obj, new, at in renames:
            for k in range(at, len(out)):
                out[k] = _rename(out[k], obj, new)
    return out


def _rename(fr: SceneGraphFrame, old: int, new: int) -> SceneGraphFrame:
    def sub(i):
        return new if i == old else i
    nodes = tuple(Node(sub(n.id), n.bg, n.bbox) for n in fr.nodes)
    edges = frozenset((sub(a), sub(b)) for a, b in fr.edges)
    overlaps = frozenset((sub(a), sub(b)) for a, b in fr.overlaps)
    return SceneGraphFrame(fr.frame, nodes, edges, overlaps)


# --------------------------------------------------------------------------
# metrics
# --------------------------------------------------------------------------

def framewise_accuracy(predicted: Sequence[frozenset[str]], truth: GroundTruth | Sequence[frozenset[str]],
                       per_label: bool = False, known_labels: Collection[str] | None = None) -> float:
    """Percentage of frames whose predicted label set equals the truth set.

    With ``per_label`` each frame scores the Jaccard overlap of the two
    sets instead of 0 or 1.
    """
    gold = truth.track(known_labels) if isinstance(truth, GroundTruth) else list(truth)
    if len(gold) != len(predicted):
        raise InputError(f"frame range mismatch: {len(predicted)} predicted vs {len(gold)} truth frames")
    if not gold:
        return 100.0
    score = 0.0
    for p, g in zip(predicted, gold):
        p, g = frozenset(p), frozenset(g)
        if per_label:
            score += len(p & g) / len(p | g)
        else:
            score += p == g
    return 100.0 * score / len(gold)


@dataclass(frozen=True)
class Detection:
    label: str
    start: int
    end: int

    def __len__(self) -> int:
        return self.end - self.start


def detections_from_segments(segments: Iterable[ActionSegment]) -> list[Detection]:
    """One detection per label of each labelled segment."""
    return [Detection(lab, s.start, s.end) for s in segments for lab in s.labels]


@dataclass
class EvalReport:
    labels: list[str]
    confusion: dict[str, dict[str, int]]
    tp: int
    fp: int
    misses: int
    truths: int
    detections: int
    matched: list[tuple[int, int]] = field(default_factory=list)  # truth index, detection index

    @property
    def tp_rate(self) -> float:
        return 100.0 * self.tp / self.truths if self.truths else 100.0

    @property
    def fp_rate(self) -> float:
        return 100.0 * self.fp / self.detections if self.detections else 0.0

    def to_dict(self) -> dict:
        return {"tp": self.tp, "fp": self.fp, "misses": self.misses, "truths": self.truths,
                "detections": self.detections, "tp_rate": round(self.tp_rate, 6),
                "fp_rate": round(self.fp_rate, 6), "labels": self.labels, "confusion": self.confusion}


MISSED = "Missed"


def _overlap(a, b) -> int:
    return max(0, min(a.end, b.end) - max(a.start, b.start))


def evaluate_recognition(detections: Sequence[Detection | ActionSegment], truth: GroundTruth,
                         known_labels: Collection[str] | None = None) -> EvalReport:
    """Match detections to truth instances and tabulate confusions.

    A detection is a true positive when its label equals the truth label
    and it overlaps more than half of the truth instance; each side is used
    at most once.  Truth labels outside ``known_labels`` count as Unknown.
    The confusion matrix pairs each truth with the detection covering most
    of it (``Missed`` when none covers more than half).
    """
    dets = [d for d in detections]
    dets = [d for x in dets for d in (detections_from_segments([x]) if isinstance(x, ActionSegment) else [x])]
    gold = []
    for inst in truth.instances:
        label = inst.label if known_labels is None or inst.label in known_labels else "Unknown"
        gold.append(TruthInstance(label, inst.start, inst.end, inst.objects))
    used = set()
    matched = []
    for ti, inst in enumerate(gold):
        best = None
        for di, d in enumerate(dets):
            if di in used or d.label != inst.label:
                continue
            ov = _overlap(d, inst)
            if 2 * ov > len(inst) and (best is None or ov > best[0]):
                best = (ov, di)
        if best is not None:
            used.add(best[1])
            matched.append((ti, best[1]))
    hit = {ti: di for ti, di in matched}
    labels = sorted({g.label for g in gold} | {d.label for d in dets})
    confusion = {a: {b: 0 for b in labels + [MISSED]} for a in labels}
    for ti, inst in enumerate(gold):
        if ti in hit:
            pred = inst.label
        else:
            cover = [(_overlap(d, inst), -di, d.label) for di, d in enumerate(dets)]
            cover = [c for c in cover if 2 * c[0] > len(inst)]
            pred = max(cover)[2] if cover else MISSED
        confusion[inst.label][pred] += 1
    tp = len(matched)
    return EvalReport(labels, confusion, tp, len(dets) - tp, len(gold) - tp, len(gold), len(dets), matched)


# --------------------------------------------------------------------------
# random chains for property tests
# --------------------------------------------------------------------------

def random_frames(rng: np.random.Generator, max_objects: int = 6, max_frames: int = 30,
                  p_touch: float = 0.35, p_absent: float = 0.1) -> list[SceneGraphFrame]:
    """Random scene-graph sequence with drifting presence and contacts."""
    k = int(rng.integers(2, max_objects + 1))
    ids = list(range(1, k + 1))
    present = {i: True for i in ids}
    edges: set = set()
    out = []
    for f in range(int(rng.integers(1, max_frames + 1))):
        for i in ids:
            if rng.random() < p_absent:
                present[i] = not present[i]
        for pair in combinations(ids, 2):
            if rng.random() < p_touch:
                edges ^= {pair}
        live = {i for i in ids if present[i]}
        cur = frozenset(p for p in edges if p[0] in live and p[1] in live)
        out.append(SceneGraphFrame(f, tuple(Node(i) for i in sorted(live)), cur))
    return out


def random_chain(rng: np.random.Generator, max_objects: int = 6, max_columns: int = 30) -> EventChain:
    """A valid normalized chain extracted from random frames."""
    return extract_event_chain(random_frames(rng, max_objects, max_columns))
