import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from secseg.extract import extract_event_chain
from secseg.harness import ActionScript, canonical_chain, random_chain, synthesize
from secseg.manipulator import NoManipulatorError
from secseg.model import ActionSegment, EventChain, InputError, Params
from secseg.recognize import (UNKNOWN, analyze, assign_roles, best_match, enumerate_hypotheses,
                              enumerate_subsets, noise_rows, prepare_templates, recognize_segment,
                              scan_match, stream_chain)
from secseg.segment import segment_chain, segment_window
from secseg.similarity import semantic_similarity

from . import oracles

seeds = st.integers(0, 2**32 - 1)
BELL = [1, 1, 2, 5, 15, 52, 203]


def whole(chain, manip=1):
    return ActionSegment(chain.columns[0], chain.columns[-1] + 1, 1.0, manip)


def parallel_chain(a="Taking", b="Uncovering", seed=0):
    frames, _ = synthesize([[ActionScript(a, 1, 2, (3,)), ActionScript(b, 1, 2, (4,))]], seed=seed)
    return extract_event_chain(frames)


# ---------------------------------------------------------------- roles

def test_single_touched_object_is_primary():
    chain = canonical_chain("Pushing")
    assert assign_roles(chain, whole(chain), 1) == (2, frozenset())


def test_secondaries_are_objects_touching_the_primary():
    chain = EventChain.from_rows({
        (1, 2): "NTTTTN", (1, 3): "NNTNNN", (2, 5): "NNTTNN",
        (2, 8): "NTTNNN", (3, 4): "TNNNNT", (4, 9): "NTTNNN"})
    primary, secs = assign_roles(chain, whole(chain), 1)
    assert (primary, secs) == (2, frozenset({5, 8}))
    assert [chain.pairs[i] for i in noise_rows(chain, 1, 2)] == [(1, 3)]


def test_roles_need_a_touch():
    chain = EventChain.from_rows({(1, 2): "NNN", (2, 3): "NTN"})
    with pytest.raises(InputError, match="empty segment roles"):
        assign_roles(chain, whole(chain), 1)


@given(seeds)
def test_roles_match_counting_oracle(seed):
    rng = np.random.default_rng(seed)
    chain = random_chain(rng)
    if chain.is_empty():
        return
    manip = int(rng.choice(sorted({o for p in chain.pairs for o in p})))
    a, b = sorted(int(v) for v in rng.integers(chain.columns[0], chain.columns[-1] + 2, size=2))
    seg = ActionSegment(a, max(b, a + 1), 1.0, manip)
    lo, hi = segment_window(chain, seg)
    want = oracles.roles(chain, lo, hi, manip)
    if want is None:
        with pytest.raises(InputError):
            assign_roles(chain, seg, manip)
    else:
        primary, secs = assign_roles(chain, seg, manip)
        assert (primary, set(secs)) == want


# ---------------------------------------------------------------- enumeration

@pytest.mark.parametrize("n", range(0, 11))
def test_subset_counts(n):
    subs = enumerate_subsets(range(n))
    assert len(subs) == 2**n - 1 == len(set(subs))
    assert all(subs)


@pytest.mark.parametrize("n", range(0, 7))
def test_hypotheses_are_all_partitions(n):
    hyps = enumerate_hypotheses(range(10, 10 + n))
    assert len(hyps) == BELL[n]
    if n:
        want = {frozenset(frozenset(b) for b in p) for p in oracles.partitions(list(range(10, 10 + n)))}
        assert {frozenset(h) for h in hyps} == want
    else:
        assert hyps == [(frozenset(),)]


def test_two_secondaries_give_two_hypotheses():
    assert enumerate_hypotheses({5, 8}) == [(frozenset({5, 8}),), (frozenset({5}), frozenset({8}))]
    assert len(enumerate_hypotheses({1, 2, 3})) == 5


# ---------------------------------------------------------------- streams

def test_stream_rows_follow_the_block():
    chain = parallel_chain()
    seg = whole(chain)
    full = stream_chain(chain, seg, 1, 2, {3, 4})
    assert set(full.pairs) == {(1, 2), (2, 3), (2, 4)}
    single = stream_chain(chain, seg, 1, 2, {3})
    assert set(single.pairs) == {(1, 2), (2, 3)}


def test_singleton_streams_reproduce_their_archetypes():
    chain = parallel_chain()
    seg = whole(chain)
    assert semantic_similarity(stream_chain(chain, seg, 1, 2, {3}), canonical_chain("Taking")).delta == 100
    assert semantic_similarity(stream_chain(chain, seg, 1, 2, {4}), canonical_chain("Uncovering")).delta == 100


def test_parallel_replica_splits_into_two_labels(library):
    chain = parallel_chain()
    res = analyze(chain, library)
    assert len(res) == 1
    assert sorted(res[0].labels) == ["Taking", "Uncovering"]
    assert res[0].score == 100.0
    scores = dict(res[0].hypotheses)
    assert scores[(frozenset({3, 4}),)] < 100.0
    fused = analyze(chain, library, split_streams=False)
    assert len(fused[0].streams) == 1


# ---------------------------------------------------------------- labels

def single(name, seed=0):
    secs = () if name == "Pushing" else (3,)
    frames, _ = synthesize([ActionScript(name, 1, 2, secs)], seed=seed)
    chain = extract_event_chain(frames)
    clean, segs = segment_chain(chain, 1)
    assert len(segs) == 1
    return clean, segs[0]


def test_exact_stream_gets_the_model_label(library):
    chain, seg = single("Hiding")
    res = recognize_segment(chain, seg, library)
    assert res.labels == ("Hiding",) and res.streams[0].delta == 100.0


def test_novel_stream_is_unknown(library):
    chain, seg = single("Pouring")
    res = recognize_segment(chain, seg, library)
    assert res.labels == (UNKNOWN,)
    assert res.streams[0].delta < 72


def test_best_match_threshold_and_ties(library):
    templates = prepare_templates(library, 0.5)
    label, d = best_match(canonical_chain("Putting"), templates, 72.0)
    assert (label, d) == ("Putting", 100.0)
    assert best_match(canonical_chain("Putting"), templates, 100.5)[0] == UNKNOWN
    twin = [("first", canonical_chain("Putting")), ("second", canonical_chain("Putting"))]
    assert best_match(canonical_chain("Putting"), twin, 72.0)[0] == "first"
    assert best_match(EventChain.empty(), templates, 72.0) == (UNKNOWN, 0.0)
    with pytest.raises(InputError):
        prepare_templates([], 0.5)


@given(seeds, st.sampled_from([50.0, 72.0, 90.0]))
def test_labels_never_below_threshold(library, seed, tau):
    chain = random_chain(np.random.default_rng(seed))
    try:
        results = analyze(chain, library, Params(tau_sem=tau))
    except NoManipulatorError:
        return
    for r in results:
        for s in r.streams:
            assert s.label == UNKNOWN or s.delta >= tau - 1e-9


@pytest.mark.parametrize("combo", [("Taking", "Uncovering"), ("Putting", "Hiding"), ("Putting", "Uncovering")])
def test_fused_hypothesis_detects_fewer_parallel_labels(library, combo):
    chain = parallel_chain(*combo, seed=3)
    split = [lab for r in analyze(chain, library) for lab in r.labels if lab != UNKNOWN]
    fused = [lab for r in analyze(chain, library, split_streams=False) for lab in r.labels if lab != UNKNOWN]
    assert sorted(split) == sorted(combo)
    assert len(fused) < len(split)


# ---------------------------------------------------------------- scan

def test_scan_self_detection(library):
    for name, tpl in prepare_templates(library, 0.5):
        hits = scan_match(tpl, library)
        assert [(h.label, h.delta, h.col_start, h.col_end) for h in hits] == [(name, 100.0, 0, tpl.m)]


def test_scan_concatenation(library):
    templates = prepare_templates(library, 0.5)
    for (na, a), (nb, b) in itertools.permutations(templates[:4], 2):
        hits = scan_match(oracles.concat(a, b), library, templates=templates)
        assert [(h.label, h.col_start, h.col_end) for h in hits] == [(na, 0, a.m), (nb, a.m, a.m + b.m)]


def test_scan_on_untouched_noise_finds_nothing(library):
    noise = EventChain.from_rows({(1, 2): "NNNNNN", (2, 3): "NNANNN", (1, 3): "ANNNAN"})
    assert scan_match(noise, library) == []
    assert scan_match(EventChain.empty(), library) == []


def test_scan_restricted_objects(library):
    chain = oracles.concat(canonical_chain("Putting"), canonical_chain("Stirring"))
    hits = scan_match(chain, library, objects={m.name: {2, 3, 4} for m in library})
    assert [h.label for h in hits] == ["Putting"]
