"""Estimate the manipulating object(s) from an event chain alone.

An object's score is the fraction of key-frame columns covered by
``[N, T, ..., N]`` blocks in the rows it takes part in.  Blocks from
different rows are superimposed, so the hand that keeps grabbing different
objects accumulates the widest coverage.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import kernels
from .model import EventChain, InputError, project_touch


class NoManipulatorError(InputError):
    """No object shows a single touch/untouch block (e.g. broken tracks)."""


@dataclass(frozen=True)
class ManipulatorScore:
    object: int
    p: float
    covered_columns: frozenset[int]


def row_cover(codes) -> np.ndarray:
    """Boolean mask of the columns inside any block of one row."""
    row = np.ascontiguousarray(project_touch(codes))
    return np.asarray(kernels.block_cover(row), dtype=bool)


def coverage(chain: EventChain) -> dict[int, np.ndarray]:
    """Per-object union of block masks over all rows containing the object."""
    masks = {obj: np.zeros(chain.m, dtype=bool) for obj in chain.objects()}
    for i, (a, b) in enumerate(chain.pairs):
        cover = row_cover(chain.cells[i])
        if cover.any():
            masks[a] |= cover
            masks[b] |= cover
    return masks


def manipulator_probabilities(chain: EventChain) -> list[ManipulatorScore]:
    if chain.is_empty():
        return []
    out = []
    for obj, mask in coverage(chain).items():
        cols = frozenset(int(j) for j in np.flatnonzero(mask))
        out.append(ManipulatorScore(obj, len(cols) / chain.m, cols))
    return out


def estimate_manipulators(chain: EventChain, k: int = 1) -> tuple[int, ...]:
    """Best ``k``-combination of objects by joint column coverage.

    Ties go to the lexicographically smallest id tuple.
    """
    if k < 1:
        raise InputError(f"number of manipulators must be positive, got {k}")
    objects = chain.objects()
    if len(objects) < k:
        raise InputError(f"chain has {len(objects)} objects, fewer than {k} manipulators")
    masks = coverage(chain)
    best, best_count = None, 0
    for combo in combinations(objects, k):  # increasing lexicographic order
        joint = np.zeros(chain.m, dtype=bool)
        for obj in combo:
            joint |= masks[obj]
        count = int(joint.sum())
        if count > best_count:
            best, best_count = combo, count
    if best is None:
        raise NoManipulatorError("no manipulator pattern found: no [N, T, ..., T, N] block in any row")
    return best
