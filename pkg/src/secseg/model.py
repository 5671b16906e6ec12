"""Shared domain types: relations, scene-graph frames, event chains, segments."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

import numpy as np

CHAIN_SCHEMA = "secseg.chain/1"


class InputError(ValueError):
    """Malformed or inconsistent input data."""


class Relation(enum.IntEnum):
    """Spatial relation between two objects in one key frame.

    The integer values are the cell codes stored in :class:`EventChain`.
    """

    A = 0  # absence: at least one object is not in the scene
    N = 1  # not touching
    T = 2  # touching
    O = 3  # overlapping box (depth-free streams only)  # noqa: E741

    @property
    def symbol(self) -> str:
        return self.name

    @classmethod
    def parse(cls, symbol: str, extended: bool = False) -> "Relation":
        try:
            rel = cls[symbol]
        except KeyError:
            raise InputError(f"unknown relation symbol {symbol!r}") from None
        if rel is cls.O and not extended:
            raise InputError("relation 'O' requires the extended alphabet")
        return rel


A, N, T, O = Relation.A, Relation.N, Relation.T, Relation.O
_SYMBOLS = "ANTO"


def encode(cells: str | Iterable, extended: bool = True) -> np.ndarray:
    """Turn ``"NTTN"`` (or a sequence of relations) into a uint8 code array."""
    if isinstance(cells, str):
        out = [Relation.parse(c, extended) for c in cells]
    else:
        out = [Relation(int(c)) for c in cells]
    return np.asarray(out, dtype=np.uint8)


def decode(codes: Iterable[int]) -> str:
    return "".join(_SYMBOLS[int(c)] for c in codes)


def project_touch(codes: np.ndarray) -> np.ndarray:
    """Map O onto T; the segmentation machinery works over {A, N, T}."""
    codes = np.asarray(codes, dtype=np.uint8)
    return np.where(codes == O, np.uint8(T), codes).astype(np.uint8)


def canonical_pair(a: int, b: int) -> tuple[int, int]:
    a, b = int(a), int(b)
    return (a, b) if a <= b else (b, a)


@dataclass(frozen=True)
class Node:
    id: int
    bg: bool = False
    bbox: tuple[float, float, float, float] | None = None


@dataclass(frozen=True)
class SceneGraphFrame:
    """One tracked frame: object nodes plus undirected touching edges.

    ``overlaps`` is the subset of edges whose boxes fully contain one another;
    it is only consulted when the extended alphabet is on.
    """

    frame: int
    nodes: tuple[Node, ...]
    edges: frozenset[tuple[int, int]] = frozenset()
    overlaps: frozenset[tuple[int, int]] = frozenset()

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise InputError(f"frame {self.frame}: duplicate node ids")
        known = set(ids)
        edges = frozenset(canonical_pair(*e) for e in self.edges)
        for a, b in edges:
            if a == b:
                raise InputError(f"frame {self.frame}: self-edge on node {a}")
            if a not in known or b not in known:
                raise InputError(f"frame {self.frame}: edge ({a}, {b}) names a missing node")
        overlaps = frozenset(canonical_pair(*e) for e in self.overlaps)
        if not overlaps <= edges:
            raise InputError(f"frame {self.frame}: overlap marks must be edges")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "overlaps", overlaps)

    def node_ids(self, exclude_background: bool = False) -> frozenset[int]:
        return frozenset(n.id for n in self.nodes if not (exclude_background and n.bg))

    def background_ids(self) -> frozenset[int]:
        return frozenset(n.id for n in self.nodes if n.bg)


class EventChain:
    """The SEC matrix: one row per object pair, one column per key frame.

    Cells are stored as a read-only ``(n, m)`` uint8 array of
    :class:`Relation` codes; ``columns`` holds the frame index of every key
    frame so segment boundaries can be mapped back onto the video.
    """

    __slots__ = ("pairs", "cells", "columns")

    def __init__(self, pairs: Sequence[tuple[int, int]], cells, columns: Sequence[int]):
        pairs = tuple(canonical_pair(*p) for p in pairs)
        columns = tuple(int(c) for c in columns)
        arr = np.array(cells, dtype=np.uint8)
        if arr.size == 0:
            arr = arr.reshape(len(pairs), len(columns))
        if arr.ndim != 2 or arr.shape != (len(pairs), len(columns)):
            raise InputError(f"cell matrix shape {arr.shape} does not match {len(pairs)} rows x {len(columns)} columns")
        arr.setflags(write=False)
        object.__setattr__(self, "pairs", pairs)
        object.__setattr__(self, "cells", arr)
        object.__setattr__(self, "columns", columns)

    def __setattr__(self, name, value):
        raise AttributeError("EventChain is immutable")

    @classmethod
    def from_rows(cls, rows: Mapping[tuple[int, int], str] | Sequence[tuple[tuple[int, int], str]],
                  columns: Sequence[int] | None = None) -> "EventChain":
        """Build from ``{(a, b): "NTTN", ...}``; columns default to 0..m-1."""
        items = list(rows.items()) if isinstance(rows, Mapping) else list(rows)
        if not items:
            return cls((), np.zeros((0, 0 if columns is None else len(columns)), np.uint8), columns or ())
        lengths = {len(c) for _, c in items}
        if len(lengths) != 1:
            raise InputError("rows have differing cell counts")
        m = lengths.pop()
        if columns is None:
            columns = range(m)
        cells = np.stack([encode(c) for _, c in items]) if m else np.zeros((len(items), 0), np.uint8)
        return cls([p for p, _ in items], cells, columns)

    @classmethod
    def empty(cls) -> "EventChain":
        return cls((), np.zeros((0, 0), np.uint8), ())

    @property
    def n(self) -> int:
        return len(self.pairs)

    @property
    def m(self) -> int:
        return len(self.columns)

    def __len__(self) -> int:
        return self.n

    def is_empty(self) -> bool:
        return self.n == 0 or self.m == 0

    def __eq__(self, other):
        if not isinstance(other, EventChain):
            return NotImplemented
        return (self.pairs == other.pairs and self.columns == other.columns
                and np.array_equal(self.cells, other.cells))

    def __hash__(self):
        return hash((self.pairs, self.columns, self.cells.tobytes()))

    def __repr__(self):
        rows = ", ".join(f"{p}: {self.row_string(i)}" for i, p in enumerate(self.pairs))
        return f"EventChain({{{rows}}}, columns={list(self.columns)})"

    def row_string(self, i: int) -> str:
        return decode(self.cells[i])

    def rows(self) -> dict[tuple[int, int], str]:
        return {p: self.row_string(i) for i, p in enumerate(self.pairs)}

    def objects(self) -> list[int]:
        return sorted({o for p in self.pairs for o in p})

    def rows_with(self, obj: int) -> list[int]:
        return [i for i, p in enumerate(self.pairs) if obj in p]

    def row_index(self, pair: tuple[int, int]) -> int | None:
        pair = canonical_pair(*pair)
        try:
            return self.pairs.index(pair)
        except ValueError:
            return None

    # -- structural operations (all return new chains) --

    def with_cells(self, cells: np.ndarray) -> "EventChain":
        return EventChain(self.pairs, cells, self.columns)

    def select_rows(self, idx: Sequence[int]) -> "EventChain":
        idx = list(idx)
        if not idx:
            return EventChain((), np.zeros((0, self.m), np.uint8), self.columns)
        return EventChain([self.pairs[i] for i in idx], self.cells[idx], self.columns)

    def select_columns(self, idx: Sequence[int]) -> "EventChain":
        idx = list(idx)
        return EventChain(self.pairs, self.cells[:, idx], [self.columns[j] for j in idx])

    def window(self, lo: int, hi: int) -> "EventChain":
        """Columns ``lo <= j < hi``."""
        return self.select_columns(range(max(lo, 0), min(hi, self.m)))

    def collapse(self) -> "EventChain":
        """Drop every column identical to its predecessor (first occurrence kept)."""
        if self.m <= 1:
            return self
        if self.n == 0:
            return self.select_columns([0])
        keep = [0] + [j for j in range(1, self.m) if not np.array_equal(self.cells[:, j], self.cells[:, j - 1])]
        return self if len(keep) == self.m else self.select_columns(keep)

    def static_rows(self) -> list[int]:
        """Rows without any N<->T change (O counts as T)."""
        return [i for i in range(self.n) if not has_touch_change(self.cells[i])]

    def prune_static(self) -> "EventChain":
        static = set(self.static_rows())
        if not static:
            return self
        out = self.select_rows([i for i in range(self.n) if i not in static])
        if out.n == 0:
            return EventChain.empty()
        return out

    def normalized(self) -> "EventChain":
        """Collapse, drop static rows, collapse again; empty chains lose their columns."""
        out = self.collapse().prune_static().collapse()
        return EventChain.empty() if out.n == 0 else out

    def reverse_columns(self) -> "EventChain":
        """Time-reversed chain; timestamps are mirrored to stay increasing."""
        if self.m == 0:
            return self
        last = self.columns[-1]
        cols = [last - c for c in reversed(self.columns)]
        return EventChain(self.pairs, self.cells[:, ::-1], cols)

    def permute_rows(self, order: Sequence[int]) -> "EventChain":
        return self.select_rows(order)

    # -- serialization --

    def to_dict(self) -> dict:
        return {
            "schema": CHAIN_SCHEMA,
            "columns": list(self.columns),
            "rows": [{"pair": list(p), "cells": self.row_string(i)} for i, p in enumerate(self.pairs)],
        }

    @classmethod
    def from_dict(cls, data: Mapping, extended: bool = True) -> "EventChain":
        if not isinstance(data, Mapping):
            raise InputError("event chain must be a JSON object")
        try:
            columns = [int(c) for c in data["columns"]]
            rows = data["rows"]
            pairs, cells = [], []
            for k, row in enumerate(rows):
                pair = row["pair"]
                if len(pair) != 2:
                    raise InputError(f"row {k}: pair must have two ids")
                pairs.append((int(pair[0]), int(pair[1])))
                text = row["cells"]
                if len(text) != len(columns):
                    raise InputError(f"row {k}: {len(text)} cells for {len(columns)} columns")
                cells.append(encode(text, extended))
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed event chain: {exc!r}") from None
        if not pairs:
            return cls((), np.zeros((0, len(columns)), np.uint8), columns)
        return cls(pairs, np.stack(cells), columns)


def has_touch_change(codes: np.ndarray) -> bool:
    row = project_touch(codes)
    if row.size < 2:
        return False
    a, b = row[:-1], row[1:]
    return bool(np.any(((a == N) & (b == T)) | ((a == T) & (b == N))))


@dataclass(frozen=True)
class Violation:
    kind: str
    row: int | None = None
    column: int | None = None
    detail: str = ""


def validate_event_chain(chain: EventChain, extended_alphabet: bool = True) -> list[Violation]:
    """Check the well-formedness invariants; returns one entry per violation."""
    report: list[Violation] = []
    cols = chain.columns
    for j in range(1, len(cols)):
        if cols[j] <= cols[j - 1]:
            report.append(Violation("non-increasing timestamps", column=j,
                                    detail=f"{cols[j - 1]} -> {cols[j]}"))
    seen: dict[tuple[int, int], int] = {}
    for i, (a, b) in enumerate(chain.pairs):
        if a == b:
            report.append(Violation("self pair", row=i, detail=f"({a}, {b})"))
        if a < 0:
            report.append(Violation("negative object id", row=i, detail=str(a)))
        if (a, b) in seen:
            report.append(Violation("duplicate pair", row=i, detail=f"same pair as row {seen[(a, b)]}"))
        else:
            seen[(a, b)] = i
    if chain.cells.size and chain.cells.max() > O:
        bad = np.argwhere(chain.cells > O)[0]
        report.append(Violation("invalid relation code", row=int(bad[0]), column=int(bad[1])))
    if not extended_alphabet and np.any(chain.cells == O):
        bad = np.argwhere(chain.cells == O)[0]
        report.append(Violation("relation O outside extended alphabet", row=int(bad[0]), column=int(bad[1])))
    if chain.n:
        for j in range(1, chain.m):
            if np.array_equal(chain.cells[:, j], chain.cells[:, j - 1]):
                report.append(Violation("duplicate consecutive columns", column=j))
        for i in chain.static_rows():
            report.append(Violation("static row", row=i, detail=chain.row_string(i)))
    return report


@dataclass(frozen=True)
class ActionSegment:
    """A half-open frame interval ``[start, end)`` attributed to one manipulator."""

    start: int
    end: int
    confidence: float
    manipulator: int
    primary: int | None = None
    secondaries: frozenset[int] = frozenset()
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.start < self.end:
            raise InputError(f"segment start {self.start} must precede end {self.end}")
        if not 0.0 <= self.confidence <= 1.0:
            raise InputError(f"confidence {self.confidence} outside [0, 1]")
        object.__setattr__(self, "secondaries", frozenset(self.secondaries))

    def __len__(self) -> int:
        return self.end - self.start

    def to_dict(self) -> dict:
        out = {
            "start_frame": self.start,
            "end_frame": self.end,
            "confidence": round(self.confidence, 6),
            "manipulator": self.manipulator,
            "primary": self.primary,
            "secondaries": sorted(self.secondaries),
        }
        if self.labels:
            out["label"] = "+".join(self.labels)
        return out

    @classmethod
    def from_dict(cls, d: Mapping) -> "ActionSegment":
        try:
            labels = tuple(d["label"].split("+")) if d.get("label") else ()
            return cls(int(d["start_frame"]), int(d["end_frame"]), float(d["confidence"]),
                       int(d["manipulator"]), None if d.get("primary") is None else int(d["primary"]),
                       frozenset(int(s) for s in d.get("secondaries", ())), labels)
        except (KeyError, TypeError, ValueError) as exc:
            raise InputError(f"malformed segment: {exc}") from None


@dataclass(frozen=True)
class Params:
    tau_conf: float = 0.6
    tau_merge: float = 0.6
    tau_sem: float = 72.0
    hands: int = 1
    min_event_frames: int = 3
    w_min: float = 0.5
    extended_alphabet: bool = False

    def __post_init__(self):
        for name in ("tau_conf", "tau_merge", "w_min"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name}={v} must lie in (0, 1]")
        if not 0.0 < self.tau_sem <= 100.0:
            raise ValueError(f"tau_sem={self.tau_sem} must lie in (0, 100]")
        if int(self.hands) != self.hands or self.hands < 1:
            raise ValueError(f"hands={self.hands} must be a positive integer")
        if int(self.min_event_frames) != self.min_event_frames or self.min_event_frames < 1:
            raise ValueError(f"min_event_frames={self.min_event_frames} must be a positive integer")

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}
