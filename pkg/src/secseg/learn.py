"""Batch learning of weighted model chains per action class."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .kernels import lcs_pairs
from .model import EventChain, InputError, Params, decode, encode
from .similarity import semantic_similarity, similarity_matrix

MODELS_SCHEMA = "secseg.models/1"


def _slot_pairs(n: int) -> list[tuple[int, int]]:
    # model rows are abstract slots, not object pairs
    return [(0, k + 1) for k in range(n)]


@dataclass(frozen=True)
class ModelSEC:
    name: str
    chain: EventChain
    row_weights: tuple[float, ...]
    col_weights: tuple[float, ...]
    samples: int

    def __post_init__(self):
        if len(self.row_weights) != self.chain.n or len(self.col_weights) != self.chain.m:
            raise InputError(f"model {self.name!r}: weight lengths do not match the chain")
        for w in (*self.row_weights, *self.col_weights):
            if not 0.0 < w <= 1.0:
                raise InputError(f"model {self.name!r}: weight {w} outside (0, 1]")

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "columns": list(self.chain.columns),
            "rows": [{"cells": self.chain.row_string(i)} for i in range(self.chain.n)],
            "row_weights": [round(w, 6) for w in self.row_weights],
            "col_weights": [round(w, 6) for w in self.col_weights],
            "samples": self.samples,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelSEC":
        try:
            rows = [r["cells"] for r in d["rows"]]
            cols = [int(c) for c in d["columns"]]
            if any(len(r) != len(cols) for r in rows):
                raise InputError(f"model {d.get('name')!r}: row length does not match columns")
            cells = np.stack([encode(r) for r in rows]) if rows else np.zeros((0, len(cols)), np.uint8)
            chain = EventChain(_slot_pairs(len(rows)), cells, cols)
            return cls(str(d["name"]), chain, tuple(float(w) for w in d["row_weights"]),
                       tuple(float(w) for w in d["col_weights"]), int(d["samples"]))
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, InputError):
                raise
            raise InputError(f"malformed model entry: {exc!r}") from None


def _merge_sample(cells: np.ndarray, row_counts: list[int], col_counts: list[int], sample: EventChain):
    n, m = cells.shape
    model = EventChain(_slot_pairs(n), cells, range(m))
    corr = semantic_similarity(model, sample).correspondence
    sim = similarity_matrix(model, sample)
    common = {i: j for i, j in corr.items() if sim[i, j] >= 100.0 - 1e-9}
    model_rows = sorted(common)
    if model_rows:
        matches = lcs_pairs(cells[model_rows], sample.cells[[common[i] for i in model_rows]])
    else:
        matches = []

    # merged column order: unmatched model columns, then unmatched sample
    # columns, then the next matched pair
    order = []
    pm = ps = 0
    for i, j in matches + [(m, sample.m)]:
        order += [("m", k, None) for k in range(pm, i)]
        order += [("s", None, k) for k in range(ps, j)]
        if i < m:
            order.append(("b", i, j))
        pm, ps = i + 1, j + 1

    new_rows = [j for j in range(sample.n) if j not in common.values()]
    out = np.zeros((n + len(new_rows), len(order)), dtype=np.uint8)
    counts = []
    last_m, last_s = 0, 0
    for c, (kind, i, j) in enumerate(order):
        if kind == "m":
            out[:n, c] = cells[:, i]
            fill_s = last_s
            counts.append(col_counts[i])
            last_m = i
        elif kind == "s":
            out[:n, c] = cells[:, last_m]
            for mi, sj in common.items():
                out[mi, c] = sample.cells[sj, j]
            fill_s = j
            counts.append(1)
            last_s = j
        else:
            out[:n, c] = cells[:, i]
            fill_s = j
            counts.append(col_counts[i] + 1)
            last_m, last_s = i, j
        for k, sj in enumerate(new_rows):
            out[n + k, c] = sample.cells[sj, fill_s]
    rows = [row_counts[i] + (1 if i in common else 0) for i in range(n)] + [1] * len(new_rows)
    return out, rows, counts


def learn_model(name: str, samples: Sequence[EventChain], params: Params | None = None) -> ModelSEC:
    """Fold the samples into one model in input order.

    Rows whose relational changes agree exactly with a model row are counted
    as common; columns are matched through the column LCS over those rows.
    Everything unmatched is added with a count of one.
    """
    samples = [s for s in samples]
    if not samples:
        raise InputError(f"no samples for class {name!r}")
    usable = [s for s in samples if not s.is_empty()]
    if not usable:
        raise InputError(f"all samples for class {name!r} are empty chains")
    first = usable[0]
    cells = np.array(first.cells)
    row_counts = [1] * first.n
    col_counts = [1] * first.m
    for s in usable[1:]:
        cells, row_counts, col_counts = _merge_sample(cells, row_counts, col_counts, s)
    k = len(usable)
    chain = EventChain(_slot_pairs(cells.shape[0]), cells, range(cells.shape[1]))
    return ModelSEC(name, chain, tuple(c / k for c in row_counts), tuple(c / k for c in col_counts), k)


def representative_model(model: ModelSEC, w_min: float = 0.5) -> EventChain:
    """Rows and columns observed in at least a ``w_min`` share of the samples."""
    eps = 1e-9
    rows = [i for i, w in enumerate(model.row_weights) if w >= w_min - eps]
    cols = [j for j, w in enumerate(model.col_weights) if w >= w_min - eps]
    if not rows or not cols:
        raise InputError(f"degenerate model {model.name!r} at w_min={w_min}")
    sub = model.chain.select_rows(rows).select_columns(cols).collapse()
    return EventChain(_slot_pairs(sub.n), sub.cells, range(sub.m))


# --------------------------------------------------------------------------
# library files
# --------------------------------------------------------------------------

def library_to_dict(models: Sequence[ModelSEC], w_min: float = 0.5, config: Mapping | None = None) -> dict:
    out = {"schema": MODELS_SCHEMA, "w_min": w_min, "models": [m.to_dict() for m in models]}
    if config is not None:
        out["config"] = dict(config)
    return out


def library_from_dict(data: Mapping) -> tuple[list[ModelSEC], float]:
    if not isinstance(data, Mapping) or "models" not in data:
        raise InputError("model library needs a 'models' list")
    schema = data.get("schema", MODELS_SCHEMA)
    if schema != MODELS_SCHEMA:
        raise InputError(f"unsupported model library schema {schema!r}")
    return [ModelSEC.from_dict(d) for d in data["models"]], float(data.get("w_min", 0.5))


def load_library(path) -> tuple[list[ModelSEC], float]:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise InputError(f"{path}:{exc.lineno}: {exc.msg}") from None
    return library_from_dict(data)


def describe(model: ModelSEC) -> str:
    lines = [f"{model.name} ({model.samples} samples)"]
    lines.append("      " + " ".join(f"{w:.2f}" for w in model.col_weights))
    for i in range(model.chain.n):
        lines.append(f"{model.row_weights[i]:.2f}  " + "    ".join(decode(model.chain.cells[i])))
    return "\n".join(lines)
