import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecocoast.mpc import (BinaryHistory, default_sequence, feasible_sequences, min_off_constraints)
from oracles import admissible_sequences, min_off_ok


def test_history_examples():
    c = min_off_constraints(BinaryHistory((1, 1, 1, 1)), 4, 4)
    ok = {s for s in itertools.product((0, 1), repeat=4) if c.satisfies(s)}
    assert (0, 1, 0, 0) not in ok
    assert (0, 0, 0, 0) in ok and (1, 1, 1, 1) in ok
    assert ok == set(admissible_sequences((1, 1, 1, 1), 4, 4))


def test_forced_zeros_from_history():
    c = min_off_constraints(BinaryHistory((1, 1, 0, 0)), 4, 4)
    lo, hi = c.propagate(np.zeros(4), np.ones(4))
    assert list(hi) == [0, 0, 1, 1] and list(lo) == [0, 0, 0, 0]
    assert all(s[:2] == (0, 0) for s in feasible_sequences(BinaryHistory((1, 1, 0, 0)), 4, 4))


@pytest.mark.parametrize("d", [1, 2, 3, 4, 5])
def test_exhaustive_against_verbal_rule(d):
    for hl in range(1, 5):
        for hist in itertools.product((0, 1), repeat=hl):
            h = BinaryHistory(hist)
            for n in range(0, 7):
                c = min_off_constraints(h, n, d)
                gen = list(feasible_sequences(h, n, d))
                assert len(set(gen)) == len(gen)
                expect = set(admissible_sequences(hist, n, d))
                assert set(gen) == expect
                for seq in itertools.product((0, 1), repeat=n):
                    assert c.satisfies(seq) == (seq in expect)
                if n:
                    assert c.satisfies(default_sequence(h, n, d))


@settings(max_examples=200, deadline=None)
@given(hist=st.lists(st.integers(0, 1), min_size=4, max_size=4),
       lo=st.lists(st.integers(0, 1), min_size=6, max_size=6),
       width=st.lists(st.integers(0, 1), min_size=6, max_size=6))
def test_propagation_keeps_every_admissible_completion(hist, lo, width):
    """Propagation may only remove values that no admissible completion uses."""
    lo = np.array(lo, float)
    hi = np.minimum(lo + np.array(width), 1.0)
    c = min_off_constraints(BinaryHistory(tuple(hist)), 6, 4)
    inside = [s for s in admissible_sequences(hist, 6, 4)
              if np.all(np.array(s) >= lo) and np.all(np.array(s) <= hi)]
    out = c.propagate(lo.copy(), hi.copy())
    if not inside:
        return  # propagation is allowed but not required to detect this
    assert out is not None
    plo, phi = out
    for s in inside:
        assert np.all(np.array(s) >= plo) and np.all(np.array(s) <= phi)


def test_history_push_and_validation():
    h = BinaryHistory.all_on(4)
    assert h.push(0).recent == (1, 1, 1, 0)
    assert h.push(0).last == 0
    with pytest.raises(ValueError):
        BinaryHistory((1, 2))


@settings(max_examples=200, deadline=None)
@given(seq=st.lists(st.integers(0, 1), min_size=1, max_size=12), d=st.integers(1, 5))
def test_rows_match_rule_on_long_sequences(seq, d):
    c = min_off_constraints(BinaryHistory.all_on(d), len(seq), d)
    assert c.satisfies(tuple(seq)) == min_off_ok(seq, (1,) * d, d)
