"""Per-class representation queues and prototype sampling."""
from __future__ import annotations

from collections import deque
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, EmptyQueueError, StructuralError
from .numerics import l2_normalize

PrototypeSet = dict  # label -> prototype vector


class ClassQueue:
    """Fixed-capacity FIFO of unit-normalized, detached representations."""

    def __init__(self, label: int, capacity: int = 128, dim: int | None = None):
        if capacity < 1:
            raise ConfigError(f"queue capacity must be >= 1, got {capacity}")
        self.label = label
        self.capacity = capacity
        self.dim = dim
        self._entries: deque[np.ndarray] = deque(maxlen=capacity)

    def push(self, rep) -> None:
        v = l2_normalize(rep)  # always a fresh array: the snapshot
        if self.dim is None:
            self.dim = v.size
        elif v.size != self.dim:
            raise StructuralError(f"queue {self.label}: expected dim {self.dim}, got {v.size}")
        v.setflags(write=False)
        self._entries.append(v)  # deque(maxlen) evicts the oldest entry

    @property
    def entries(self) -> list[np.ndarray]:
        return list(self._entries)

    def clear(self) -> None:
        self._entries.clear()

    def __len__(self) -> int:
        return len(self._entries)

    def __repr__(self) -> str:
        return f"ClassQueue(label={self.label}, size={len(self)}/{self.capacity})"


def queue_push(queue: ClassQueue, rep) -> ClassQueue:
    queue.push(rep)
    return queue


def sample_support_set(queue: ClassQueue, k: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Draw ``min(k, len(queue))`` distinct entries uniformly without replacement."""
    if k < 1:
        raise ConfigError(f"support size must be >= 1, got {k}")
    n = len(queue)
    if n == 0:
        raise EmptyQueueError(f"queue for label {queue.label} is empty")
    entries = queue._entries
    idx = rng.choice(n, size=min(k, n), replace=False)
    return [entries[i] for i in idx]


def compute_prototype(support: Sequence) -> np.ndarray:
    if len(support) == 0:
        raise StructuralError("cannot average an empty support set")
    stacked = np.stack([np.asarray(s, dtype=np.float64) for s in support])
    if stacked.ndim != 2:
        raise StructuralError("support vectors must share one dimension")
    return stacked.mean(axis=0)


def prototypes_for_all(
    queues: Mapping[int, ClassQueue], k: int, rng: np.random.Generator
) -> PrototypeSet:
    """One prototype per non-empty queue, iterating labels in sorted order."""
    protos: PrototypeSet = {}
    for label in sorted(queues):
        q = queues[label]
        if len(q) == 0:
            continue
        protos[label] = compute_prototype(sample_support_set(q, k, rng))
    return protos


def make_queues(labels, capacity: int) -> dict[int, ClassQueue]:
    return {int(y): ClassQueue(int(y), capacity) for y in labels}
