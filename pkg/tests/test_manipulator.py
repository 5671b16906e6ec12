from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from secseg.harness import random_chain
from secseg.manipulator import NoManipulatorError, estimate_manipulators, manipulator_probabilities
from secseg.model import EventChain, InputError

from . import oracles


def probs(chain):
    return {s.object: s.p for s in manipulator_probabilities(chain)}


def test_single_row_probability():
    chain = EventChain.from_rows({(1, 2): "NNTTTNNN"})
    score = {s.object: s for s in manipulator_probabilities(chain)}[1]
    assert score.p == pytest.approx(5 / 8)
    assert score.covered_columns == frozenset(range(1, 6))


def test_union_over_rows():
    chain = EventChain.from_rows({(1, 2): "ANTTTNAAAA", (1, 3): "AAAANTTTNA"})
    assert probs(chain)[1] == pytest.approx(0.8)


def test_boundary_blocks_do_not_count():
    chain = EventChain.from_rows({(1, 2): "TTN", (2, 3): "NTN"})
    assert probs(chain)[1] == 0.0
    assert estimate_manipulators(chain) == (2,)


def test_ties_go_to_smallest_id():
    chain = EventChain.from_rows({(3, 4): "NTN"})
    assert estimate_manipulators(chain) == (3,)


def test_errors():
    with pytest.raises(NoManipulatorError, match="no manipulator pattern found"):
        estimate_manipulators(EventChain.from_rows({(1, 2): "TN"}))
    with pytest.raises(InputError):
        estimate_manipulators(EventChain.from_rows({(1, 2): "NTN"}), k=3)
    assert manipulator_probabilities(EventChain.empty()) == []


def test_two_hands_against_exhaustive_combinations():
    # hands 1 and 2 handle objects 3..6 in turn, object 7 is moved once
    chain = EventChain.from_rows({
        (1, 3): "NTTNNNNNNNN", (2, 4): "NNNTTTNNNNN", (1, 5): "NNNNNNTTNNN",
        (2, 6): "NNNNNNNNTTN", (3, 7): "NNTNNNNNNNN"})
    got = estimate_manipulators(chain, 2)
    assert got == (1, 2)
    cover = {o: set() for o in chain.objects()}
    for i, p in enumerate(chain.pairs):
        for o in p:
            cover[o] |= oracles.block_cover(chain.row_string(i))
    best = max(combinations(chain.objects(), 2), key=lambda c: (len(cover[c[0]] | cover[c[1]]), [-x for x in c]))
    assert best == got


@given(st.integers(0, 2**32 - 1))
def test_matches_block_scan_oracle(seed):
    chain = random_chain(np.random.default_rng(seed))
    want = oracles.manipulator(chain)
    if want is None:
        with pytest.raises(InputError):
            estimate_manipulators(chain)
    else:
        assert estimate_manipulators(chain) == (want,)


@given(st.integers(0, 2**32 - 1), st.randoms())
def test_row_permutation_invariance(seed, rnd):
    chain = random_chain(np.random.default_rng(seed))
    order = list(range(chain.n))
    rnd.shuffle(order)
    assert probs(chain) == probs(chain.permute_rows(order))


@given(st.integers(0, 2**32 - 1))
def test_splitting_a_touch_column_never_lowers_p(seed):
    chain = random_chain(np.random.default_rng(seed))
    scores = [s for s in manipulator_probabilities(chain) if s.covered_columns]
    if not scores:
        return
    target = max(scores, key=lambda s: s.p)
    rows = chain.rows_with(target.object)
    # a T cell inside one of the object's own blocks
    cols = sorted(j for i in rows for j in oracles.block_cover(chain.row_string(i))
                  if chain.row_string(i)[j] in "TO")
    j = cols[0]
    idx = list(range(j + 1)) + list(range(j, chain.m))
    split = EventChain(chain.pairs, chain.cells[:, idx], range(len(idx)))
    after = {s.object: s for s in manipulator_probabilities(split)}[target.object]
    # compare covered/m as exact fractions
    assert len(after.covered_columns) * chain.m >= len(target.covered_columns) * split.m
