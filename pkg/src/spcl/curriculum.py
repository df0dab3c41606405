"""Distance-based difficulty scoring and the Bernoulli curriculum schedule."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DegenerateInputError, StructuralError
from .numerics import normalize_rows

MAX_EMPTY_RETRIES = 16


@dataclass
class ClassCenters:
    centers: dict[int, np.ndarray]
    counts: dict[int, int] = field(default_factory=dict)

    @property
    def labels(self) -> list[int]:
        return sorted(self.centers)

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        labels = np.array(self.labels, dtype=np.int64)
        return labels, np.stack([self.centers[k] for k in labels])

    def __contains__(self, label) -> bool:
        return int(label) in self.centers

    def __len__(self) -> int:
        return len(self.centers)


def class_centers(reps, labels) -> ClassCenters:
    z = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    if z.shape[0] != y.size or y.size == 0:
        raise StructuralError(f"need matching non-empty reps/labels, got {z.shape[0]} and {y.size}")
    centers, counts = {}, {}
    for k in np.unique(y):
        sel = y == k
        centers[int(k)] = z[sel].mean(axis=0)
        counts[int(k)] = int(sel.sum())
    return ClassCenters(centers, counts)


def _difficulties(z: np.ndarray, y: np.ndarray, centers: ClassCenters) -> np.ndarray:
    if len(centers) < 2:
        raise StructuralError("difficulty needs at least 2 class centers")
    labels, cmat = centers.matrix()
    missing = sorted(set(np.unique(y).tolist()) - set(labels.tolist()))
    if missing:
        raise StructuralError(f"no class center for label(s) {missing}")
    u, _ = normalize_rows(z)
    cu, _ = normalize_rows(cmat)
    dist = 1.0 - np.clip(u @ cu.T, -1.0, 1.0)
    total = dist.sum(axis=1)
    if np.any(total == 0.0):
        bad = np.flatnonzero(total == 0.0).tolist()
        raise DegenerateInputError(f"sample(s) {bad} coincide with every class center")
    own = dist[np.arange(y.size), np.searchsorted(labels, y)]
    return own / total


def difficulty(z, y: int, centers: ClassCenters) -> float:
    """Cosine distance to the own-class center over the summed distance to all centers."""
    z = np.asarray(z, dtype=np.float64).reshape(1, -1)
    return float(_difficulties(z, np.array([y]), centers)[0])


def difficulties(reps, labels, centers: ClassCenters) -> np.ndarray:
    z = np.atleast_2d(np.asarray(reps, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    return _difficulties(z, y, centers)


def rank_by_difficulty(reps, labels, centers: ClassCenters) -> np.ndarray:
    """Indices sorted easiest-first; ties keep original order."""
    return np.argsort(difficulties(reps, labels, centers), kind="stable")


@dataclass
class CurriculumSchedule:
    epoch: int
    total_epochs: int
    size: int
    keep_probabilities: np.ndarray


def epoch_keep_probabilities(k: int, total_epochs: int, size: int) -> CurriculumSchedule:
    """Keep probabilities falling from ``1 - k/R`` (easiest) to ``k/R`` (hardest)."""
    if size < 2:
        raise ConfigError(f"curriculum needs at least 2 samples, got {size}")
    if total_epochs < 1 or not 0 <= k <= total_epochs:
        raise ConfigError(f"need 0 <= k <= R and R >= 1, got k={k}, R={total_epochs}")
    first = 1.0 - k / total_epochs
    last = k / total_epochs
    a = first + np.arange(size) * ((last - first) / (size - 1))
    return CurriculumSchedule(k, total_epochs, size, np.clip(a, 0.0, 1.0))


def sample_epoch_subset(sorted_indices, schedule: CurriculumSchedule, rng: np.random.Generator) -> np.ndarray:
    """Bernoulli draw per sorted position; returns the kept dataset indices in sorted order."""
    order = np.asarray(sorted_indices, dtype=np.int64)
    if order.size != schedule.size:
        raise StructuralError(f"{order.size} indices for a schedule of size {schedule.size}")
    a = schedule.keep_probabilities
    for _ in range(1 + MAX_EMPTY_RETRIES):
        keep = rng.random(a.size) < a
        if keep.any():
            return order[keep]
    return order[[int(np.argmax(a))]]
