"""Inner loops used by manipulator estimation and chain similarity.

Each kernel has two implementations: an explicit-loop version compiled with
``numba.njit`` and a vectorised pure-numpy version.  The public names bind to
the compiled loops unless numba is missing or ``SECSEG_NO_JIT`` is set to a
non-empty value other than ``0``; both variants stay importable
(``*_loop`` / ``*_numpy``) so they can be cross-checked and benchmarked.

All kernels take uint8 relation codes (A=0, N=1, T=2, O=3).  Callers project
O onto T beforehand where the touch semantics require it.
"""

from __future__ import annotations

import os

import numpy as np

_CODE_N = 1
_CODE_T = 2


def _jit_requested() -> bool:
    flag = os.environ.get("SECSEG_NO_JIT", "")
    return flag in ("", "0")


try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

USE_JIT = HAVE_NUMBA and _jit_requested()
BACKEND = "numba" if USE_JIT else "numpy"


def _njit(fn):
    if HAVE_NUMBA:
        return numba.njit(cache=True, nogil=True)(fn)
    return fn


# --------------------------------------------------------------------------
# block cover: columns spanned by [N, T, ..., N] blocks of one row
# --------------------------------------------------------------------------

@_njit
def block_cover_loop(row):
    m = row.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    for c in range(m - 2):
        if row[c] == _CODE_N and row[c + 1] == _CODE_T:
            end = -1
            for f in range(c + 2, m):
                if row[f] == _CODE_N:
                    end = f
                    break
            if end > c:
                for j in range(c, end + 1):
                    out[j] = True
    return out


def block_cover_numpy(row):
    row = np.asarray(row)
    m = row.shape[0]
    out = np.zeros(m, dtype=bool)
    if m < 3:
        return out
    starts = np.flatnonzero((row[:-2] == _CODE_N) & (row[1:-1] == _CODE_T))
    if starts.size == 0:
        return out
    n_pos = np.flatnonzero(row == _CODE_N)
    k = np.searchsorted(n_pos, starts + 2)
    ok = k < n_pos.size
    starts, ends = starts[ok], n_pos[k[ok]]
    delta = np.zeros(m + 1, dtype=np.int64)
    np.add.at(delta, starts, 1)
    np.add.at(delta, ends + 1, -1)
    return np.cumsum(delta[:-1]) > 0


# --------------------------------------------------------------------------
# shift match: max over offsets of the number of equal aligned symbols
# --------------------------------------------------------------------------

@_njit
def shift_match_loop(a, b):
    la, lb = a.shape[0], b.shape[0]
    best = 0
    for s in range(-(la - 1), lb):
        count = 0
        for i in range(la):
            j = i + s
            if 0 <= j < lb and a[i] == b[j]:
                count += 1
        if count > best:
            best = count
    return best


def shift_match_numpy(a, b):
    a, b = np.asarray(a), np.asarray(b)
    if a.size == 0 or b.size == 0:
        return 0
    eq = a[:, None] == b[None, :]
    # offset s pairs a[i] with b[i + s]: the s-th diagonal of eq
    return int(max(np.trace(eq, offset=s) for s in range(-(a.size - 1), b.size)))


# --------------------------------------------------------------------------
# column LCS: longest common subsequence where a symbol is a whole column
# --------------------------------------------------------------------------

@_njit
def lcs_table_loop(x, y):
    n, mx = x.shape
    my = y.shape[1]
    table = np.zeros((mx + 1, my + 1), dtype=np.int32)
    for i in range(1, mx + 1):
        for j in range(1, my + 1):
            same = True
            for r in range(n):
                if x[r, i - 1] != y[r, j - 1]:
                    same = False
                    break
            if same:
                table[i, j] = table[i - 1, j - 1] + 1
            elif table[i - 1, j] >= table[i, j - 1]:
                table[i, j] = table[i - 1, j]
            else:
                table[i, j] = table[i, j - 1]
    return table


def lcs_table_numpy(x, y):
    x, y = np.asarray(x), np.asarray(y)
    mx, my = x.shape[1], y.shape[1]
    table = np.zeros((mx + 1, my + 1), dtype=np.int32)
    if mx == 0 or my == 0:
        return table
    eq = np.all(x[:, :, None] == y[:, None, :], axis=0)
    for i in range(1, mx + 1):
        prev = table[i - 1]
        # a match can never lose against prev[j] because prev[j] <= prev[j-1] + 1
        cand = np.where(eq[i - 1], prev[:-1] + 1, prev[1:])
        table[i, 1:] = np.maximum.accumulate(cand)
    return table


if USE_JIT:
    block_cover = block_cover_loop
    shift_match = shift_match_loop
    lcs_table = lcs_table_loop
else:
    block_cover = block_cover_numpy
    shift_match = shift_match_numpy
    lcs_table = lcs_table_numpy


def lcs_length(x, y) -> int:
    x = np.ascontiguousarray(x, dtype=np.uint8)
    y = np.ascontiguousarray(y, dtype=np.uint8)
    if x.shape[1] == 0 or y.shape[1] == 0:
        return 0
    return int(lcs_table(x, y)[-1, -1])


def lcs_pairs(x, y) -> list[tuple[int, int]]:
    """Matched ``(i, j)`` column index pairs of one longest common subsequence.

    Among equally long alignments, the one using the earliest columns of
    ``x`` is returned.
    """
    x = np.ascontiguousarray(x, dtype=np.uint8)
    y = np.ascontiguousarray(y, dtype=np.uint8)
    if x.shape[1] == 0 or y.shape[1] == 0:
        return []
    table = lcs_table(x, y)
    out = []
    i, j = x.shape[1], y.shape[1]
    while i > 0 and j > 0:
        if table[i - 1, j] == table[i, j]:
            i -= 1
        elif table[i, j - 1] == table[i, j]:
            j -= 1
        else:
            out.append((i - 1, j - 1))
            i -= 1
            j -= 1
    out.reverse()
    return out
