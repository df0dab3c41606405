import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spcl.errors import DegenerateInputError, EmptyQueueError, StructuralError
from spcl.protomem import (
    ClassQueue,
    compute_prototype,
    make_queues,
    prototypes_for_all,
    queue_push,
    sample_support_set,
)

A, B, C = np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([1.0, 1.0]) / math.sqrt(2)


def _same(entries, expected):
    return len(entries) == len(expected) and all(
        np.allclose(e, x, rtol=0, atol=1e-15) for e, x in zip(entries, expected))


def test_push_below_capacity():
    q = ClassQueue(0, capacity=2)
    queue_push(queue_push(q, A), B)
    assert _same(q.entries, [A, B])


def test_push_evicts_oldest():
    q = ClassQueue(0, capacity=2)
    for v in (A, B, C):
        q.push(v)
    assert _same(q.entries, [B, C])


def test_capacity_one():
    q = ClassQueue(0, capacity=1)
    q.push(A)
    q.push(B)
    assert _same(q.entries, [B])


def test_push_normalizes_and_checks():
    q = ClassQueue(0, capacity=4)
    q.push([3.0, 4.0])
    np.testing.assert_allclose(q.entries[0], [0.6, 0.8])
    with pytest.raises(StructuralError):
        q.push([1.0, 2.0, 3.0])
    with pytest.raises(DegenerateInputError):
        q.push([0.0, 0.0])


def test_snapshot_property():
    q = ClassQueue(0, capacity=3)
    v = np.array([0.6, 0.8])
    q.push(v)
    before = q.entries[0].copy()
    v[:] = [5.0, -1.0]
    assert np.array_equal(q.entries[0], before)


@given(st.integers(1, 6), st.lists(st.integers(0, 50), max_size=40))
def test_fifo_keeps_last_pushes(capacity, seeds):
    q = ClassQueue(0, capacity)
    pushed = []
    for s in seeds:
        v = np.random.default_rng(s).standard_normal(3) + 0.1
        q.push(v)
        pushed.append(v / np.linalg.norm(v))
    keep = pushed[len(pushed) - min(capacity, len(pushed)):]
    assert len(q) <= capacity
    assert len(q.entries) == len(keep)
    for e, x in zip(q.entries, keep):
        np.testing.assert_allclose(e, x, atol=1e-15)
        assert abs(np.linalg.norm(e) - 1) <= 1e-12


def _filled(n, dim=4, seed=0):
    q = ClassQueue(0, capacity=n)
    for v in np.random.default_rng(seed).standard_normal((n, dim)):
        q.push(v)
    return q


def test_support_exhaustive_and_clamped(rng):
    q = _filled(5)
    s = sample_support_set(q, 5, rng)
    assert sorted(map(tuple, s)) == sorted(map(tuple, q.entries))
    q3 = _filled(3)
    assert len(sample_support_set(q3, 8, rng)) == 3


def test_support_empty_queue_signal(rng):
    with pytest.raises(EmptyQueueError):
        sample_support_set(ClassQueue(0), 2, rng)


def test_support_does_not_mutate_or_duplicate(rng):
    q = _filled(6)
    before = [e.copy() for e in q.entries]
    for _ in range(50):
        s = sample_support_set(q, 4, rng)
        assert len({tuple(v) for v in s}) == 4
    assert _same(q.entries, before)


def test_support_draws_are_uniform(rng):
    # each of 4 entries lands in a 2-subset with probability 1/2
    q = _filled(4)
    keys = [tuple(e) for e in q.entries]
    hits = dict.fromkeys(keys, 0)
    n = 10_000
    for _ in range(n):
        for v in sample_support_set(q, 2, rng):
            hits[tuple(v)] += 1
    sigma = math.sqrt(n * 0.25)
    for h in hits.values():
        assert abs(h - n * 0.5) <= 3 * sigma


def test_prototype_examples():
    v = np.array([0.3, -0.2, 0.9])
    np.testing.assert_allclose(compute_prototype([v] * 5), v, atol=1e-15)
    np.testing.assert_allclose(compute_prototype([A, B]), [0.5, 0.5])
    with pytest.raises(StructuralError):
        compute_prototype([])


def test_prototype_enumeration_distinct():
    q = _filled(4, seed=3)
    protos = {tuple(np.round(compute_prototype(s), 12)) for s in itertools.combinations(q.entries, 2)}
    assert len(protos) == math.comb(4, 2)


def test_prototype_permutation_invariant(rng):
    s = list(rng.standard_normal((6, 5)))
    p1 = compute_prototype(s)
    p2 = compute_prototype([s[i] for i in rng.permutation(6)])
    np.testing.assert_allclose(p1, p2, atol=1e-15)


def test_prototypes_for_all():
    queues = make_queues(range(3), 8)
    assert prototypes_for_all(queues, 4, np.random.default_rng(0)) == {}
    v = np.array([0.6, 0.8])
    queues[1].push(v)
    protos = prototypes_for_all(queues, 16, np.random.default_rng(0))
    assert list(protos) == [1]
    np.testing.assert_allclose(protos[1], v)


def test_prototypes_for_all_deterministic():
    queues = make_queues(range(3), 10)
    g = np.random.default_rng(1)
    for k in range(3):
        for v in g.standard_normal((10, 4)):
            queues[k].push(v)
    p1 = prototypes_for_all(queues, 3, np.random.default_rng(7))
    p2 = prototypes_for_all(queues, 3, np.random.default_rng(7))
    assert p1.keys() == p2.keys()
    for k in p1:
        assert np.array_equal(p1[k], p2[k])
