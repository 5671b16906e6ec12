"""Scene-graph streams to pruned event chains."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from itertools import combinations
from typing import Iterable, Sequence, TextIO

import numpy as np

from .model import A, N, O, T, EventChain, InputError, Node, SceneGraphFrame, canonical_pair


@dataclass(frozen=True)
class ExtractionOptions:
    extended_alphabet: bool = False
    exclude_background: bool = True


def _boxes_intersect(a, b) -> bool:
    ax, ay, aw, ah = a
    bx, by, bw, bh = b
    return min(ax + aw, bx + bw) - max(ax, bx) > 0 and min(ay + ah, by + bh) - max(ay, by) > 0


def _box_contains(outer, inner) -> bool:
    ox, oy, ow, oh = outer
    ix, iy, iw, ih = inner
    return ox <= ix and oy <= iy and ix + iw <= ox + ow and iy + ih <= oy + oh


def relations_from_boxes(frame: SceneGraphFrame, extended_alphabet: bool = False) -> SceneGraphFrame:
    """Derive touching edges from positive-area box intersection.

    With the extended alphabet, pairs where one box sits entirely inside the
    other are additionally marked as overlapping.  Background nodes take no
    part in box relations.
    """
    boxed = []
    for node in frame.nodes:
        if node.bg:
            continue
        if node.bbox is None:
            raise InputError(f"frame {frame.frame}: node {node.id} has no bbox")
        boxed.append(node)
    edges, overlaps = set(), set()
    for u, v in combinations(boxed, 2):
        if _boxes_intersect(u.bbox, v.bbox):
            pair = canonical_pair(u.id, v.id)
            edges.add(pair)
            if extended_alphabet and u.bbox != v.bbox and (
                    _box_contains(u.bbox, v.bbox) or _box_contains(v.bbox, u.bbox)):
                overlaps.add(pair)
    return replace(frame, edges=frozenset(edges), overlaps=frozenset(overlaps))


def _frame_state(frame: SceneGraphFrame, opts: ExtractionOptions):
    bg = frame.background_ids() if opts.exclude_background else frozenset()
    nodes = frame.node_ids() - bg
    edges = frozenset(e for e in frame.edges if e[0] not in bg and e[1] not in bg)
    overlaps = frozenset(e for e in frame.overlaps if e in edges) if opts.extended_alphabet else frozenset()
    return nodes, edges, overlaps


def _relation(pair, nodes, edges, overlaps) -> int:
    a, b = pair
    if a not in nodes or b not in nodes:
        return A
    if pair in edges:
        return O if pair in overlaps else T
    return N


def check_frames(frames: Sequence[SceneGraphFrame]) -> None:
    if not frames:
        raise InputError("empty frame sequence")
    for prev, cur in zip(frames, frames[1:]):
        if cur.frame <= prev.frame:
            raise InputError(f"frame indices must increase strictly: {prev.frame} then {cur.frame}")


def extract_event_chain(frames: Sequence[SceneGraphFrame], opts: ExtractionOptions = ExtractionOptions()) -> EventChain:
    """Key frames are the first frame plus every frame whose topology changed.

    Each key frame becomes one column; pairs that are never both present are
    left out, and the result is collapsed and stripped of static rows.
    """
    frames = list(frames)
    check_frames(frames)
    keys = []
    last = None
    for fr in frames:
        state = _frame_state(fr, opts)
        if state != last:
            keys.append((fr.frame, state))
            last = state
    pairs = set()
    for _, (nodes, _, _) in keys:
        pairs.update(combinations(sorted(nodes), 2))
    pairs = sorted(pairs)
    if not pairs:
        return EventChain.empty()
    cells = np.empty((len(pairs), len(keys)), dtype=np.uint8)
    for j, (_, (nodes, edges, overlaps)) in enumerate(keys):
        for i, pair in enumerate(pairs):
            cells[i, j] = _relation(pair, nodes, edges, overlaps)
    return EventChain(pairs, cells, [f for f, _ in keys]).normalized()


def chain_key_frames(chain: EventChain, frames: Sequence[SceneGraphFrame]) -> list[SceneGraphFrame]:
    """The input frames that became columns of ``chain``."""
    wanted = set(chain.columns)
    return [fr for fr in frames if fr.frame in wanted]


# --------------------------------------------------------------------------
# JSONL ingestion
# --------------------------------------------------------------------------

def frame_from_dict(d: dict, boxes: bool = False, extended_alphabet: bool = False) -> SceneGraphFrame:
    nodes = []
    for nd in d["nodes"]:
        bbox = nd.get("bbox")
        if bbox is not None:
            if len(bbox) != 4:
                raise InputError(f"node {nd['id']}: bbox must be [x, y, w, h]")
            bbox = tuple(float(v) for v in bbox)
        node_id = int(nd["id"])
        if node_id < 0:
            raise InputError(f"negative node id {node_id}")
        nodes.append(Node(node_id, bool(nd.get("bg", False)), bbox))
    frame = SceneGraphFrame(int(d["frame"]), tuple(nodes),
                            frozenset(tuple(e) for e in d.get("edges") or ()))
    has_boxes = any(n.bbox is not None for n in nodes)
    if boxes or ("edges" not in d and has_boxes):
        frame = relations_from_boxes(frame, extended_alphabet)
    return frame


def frame_to_dict(frame: SceneGraphFrame) -> dict:
    nodes = []
    for n in sorted(frame.nodes, key=lambda n: n.id):
        nd = {"id": n.id, "bg": n.bg}
        if n.bbox is not None:
            nd["bbox"] = list(n.bbox)
        nodes.append(nd)
    return {"frame": frame.frame, "nodes": nodes, "edges": [list(e) for e in sorted(frame.edges)]}


def read_frames(stream: TextIO, name: str = "<input>", boxes: bool = False,
                extended_alphabet: bool = False) -> list[SceneGraphFrame]:
    frames = []
    for lineno, line in enumerate(stream, 1):
        if not line.strip():
            continue
        try:
            d = json.loads(line)
            if isinstance(d, dict) and "frame" not in d and "schema" in d:
                continue  # header line carrying the generating config
            frames.append(frame_from_dict(d, boxes, extended_alphabet))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"{name}:{lineno}: {exc}") from None
        if len(frames) > 1 and frames[-1].frame <= frames[-2].frame:
            raise InputError(f"{name}:{lineno}: frame {frames[-1].frame} does not follow {frames[-2].frame}")
    if not frames:
        raise InputError(f"{name}: no frames")
    return frames


def write_frames(frames: Iterable[SceneGraphFrame], stream: TextIO) -> None:
    for fr in frames:
        stream.write(json.dumps(frame_to_dict(fr), separators=(",", ":")) + "\n")
