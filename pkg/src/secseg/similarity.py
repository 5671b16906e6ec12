"""Semantic similarity between two event chains.

Rows are compared on their relational changes only (consecutive repeats
collapsed) by sliding one against the other and counting agreeing symbols.
Rows of the two chains are then put into one-to-one correspondence by an
optimal assignment, and the temporal order of the columns is scored as the
longest common subsequence of whole columns under that correspondence.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from . import kernels
from .model import A, EventChain, InputError, encode

_EPS = 1e-9
# enumeration cap for equally good row correspondences
MAX_TIED_ASSIGNMENTS = 20000


def compress(codes) -> np.ndarray:
    if isinstance(codes, str):
        codes = encode(codes)
    codes = np.asarray(codes, dtype=np.uint8)
    if codes.size == 0:
        return codes
    keep = np.ones(codes.size, dtype=bool)
    keep[1:] = codes[1:] != codes[:-1]
    return np.ascontiguousarray(codes[keep])


def row_similarity(a, b) -> float:
    """Percentage of agreeing relational changes at the best offset."""
    ca, cb = compress(a), compress(b)
    if ca.size == 0 or cb.size == 0:
        raise InputError("row similarity needs non-empty rows")
    return 100.0 * kernels.shift_match(ca, cb) / max(ca.size, cb.size)


def similarity_matrix(x: EventChain, y: EventChain) -> np.ndarray:
    cx = [compress(r) for r in x.cells]
    cy = [compress(r) for r in y.cells]
    sim = np.zeros((x.n, y.n))
    for i, a in enumerate(cx):
        for j, b in enumerate(cy):
            sim[i, j] = 100.0 * kernels.shift_match(a, b) / max(a.size, b.size)
    return sim


@dataclass(frozen=True)
class SimilarityResult:
    delta: float
    spatial: float
    temporal: float
    correspondence: dict[int, int] = field(default_factory=dict)  # x row -> y row


def _tied_assignments(sim: np.ndarray, rows_small: np.ndarray, rows_big: np.ndarray):
    """Yield every injective small->big row map reaching the optimal total."""
    ns, nb = sim.shape
    r, c = linear_sum_assignment(sim, maximize=True)
    target = sim[r, c].sum()
    row_max = sim.max(axis=1)
    suffix = np.concatenate([np.cumsum(row_max[::-1])[::-1], [0.0]])

    # identical rows are interchangeable; break the symmetry
    def classes(rows):
        seen, out = {}, []
        for row in rows:
            out.append(seen.setdefault(row.tobytes(), len(seen)))
        return out

    small_cls = classes(rows_small)
    big_cls = classes(rows_big)
    used = [False] * nb
    assign = [-1] * ns
    emitted = 0

    def dfs(i, total):
        nonlocal emitted
        if emitted >= MAX_TIED_ASSIGNMENTS:
            return
        if i == ns:
            if total >= target - _EPS:
                emitted += 1
                yield tuple(assign)
            return
        if total + suffix[i] < target - _EPS:
            return
        floor = -1
        for k in range(i):
            if small_cls[k] == small_cls[i]:
                floor = max(floor, assign[k])
        tried = set()
        for j in range(nb):
            if used[j] or j <= floor or big_cls[j] in tried:
                continue
            tried.add(big_cls[j])
            used[j] = True
            assign[i] = j
            yield from dfs(i + 1, total + sim[i, j])
            used[j] = False
        assign[i] = -1

    yield from dfs(0, 0.0)


def _aligned(small: np.ndarray, big: np.ndarray, assign) -> tuple[np.ndarray, np.ndarray]:
    nb = big.shape[0]
    rest = [j for j in range(nb) if j not in set(assign)]
    ys = big[list(assign) + rest]
    pad = np.full((len(rest), small.shape[1]), A, dtype=np.uint8)
    xs = np.vstack([small, pad]) if rest else small
    return np.ascontiguousarray(xs), np.ascontiguousarray(ys)


def semantic_similarity(x: EventChain, y: EventChain, combine: str = "min") -> SimilarityResult:
    """Similarity percentage of two chains plus the chosen row correspondence.

    ``combine`` joins the spatial (row) and temporal (column) scores:
    ``"min"`` (default), ``"mean"`` or ``"temporal"``.
    """
    if x.is_empty() or y.is_empty():
        both = x.is_empty() and y.is_empty()
        score = 100.0 if both else 0.0
        return SimilarityResult(score, score, score, {})
    swap = x.n > y.n
    small, big = (y, x) if swap else (x, y)
    sim = similarity_matrix(small, big)
    ns, nb = sim.shape
    best_t, best_assign, spatial = -1, None, None
    for assign in _tied_assignments(sim, small.cells, big.cells):
        if spatial is None:
            # fsum is exactly rounded, so the value does not depend on row order
            spatial = math.fsum(sim[i, j] for i, j in enumerate(assign)) / nb
        xs, ys = _aligned(small.cells, big.cells, assign)
        t = kernels.lcs_length(xs, ys)
        if t > best_t:
            best_t, best_assign = t, assign
            if t == min(x.m, y.m):
                break
    temporal = 100.0 * best_t / max(x.m, y.m)
    if swap:
        corr = {j: i for i, j in enumerate(best_assign)}
    else:
        corr = {i: j for i, j in enumerate(best_assign)}
    if combine == "min":
        delta = min(spatial, temporal)
    elif combine == "mean":
        delta = 0.5 * (spatial + temporal)
    elif combine == "temporal":
        delta = temporal
    else:
        raise ValueError(f"unknown combine mode {combine!r}")
    return SimilarityResult(delta, spatial, temporal, corr)


def aligned_columns(x: EventChain, y: EventChain, correspondence: dict[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Both cell matrices with y's rows ordered by ``correspondence`` (x row -> y row).

    Unmatched rows on either side face an all-A row on the other.
    """
    xr = list(range(x.n))
    yr = [correspondence.get(i) for i in xr]
    rest = [j for j in range(y.n) if j not in set(correspondence.values())]
    xs = [x.cells[i] for i in xr] + [np.full(x.m, A, np.uint8)] * len(rest)
    ys = [y.cells[j] if j is not None else np.full(y.m, A, np.uint8) for j in yr] + [y.cells[j] for j in rest]
    return np.array(xs, dtype=np.uint8).reshape(len(xs), x.m), np.array(ys, dtype=np.uint8).reshape(len(ys), y.m)
