"""Supervised contrastive (SupCon), supervised prototypical contrastive (SPCL)
and cross-entropy losses with closed-form gradients.

Scores are cosine similarities divided by a temperature. Both contrastive
losses keep the ``1/|positives|`` factor inside the logarithm:

    L_i = log(n_pos) - logsumexp(pos logits) + logsumexp(denominator logits)

For SPCL the denominator holds every other batch sample plus the prototypes of
the *other* classes, and the numerator holds the batch positives plus the
sample's own-class prototype. The own prototype is not part of the
denominator, so SPCL values can be negative.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import BatchTooSmallError, ConfigError, StructuralError
from .numerics import cosine_similarity, normalize_rows, tangent_part

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.1

    def __post_init__(self):
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")


@dataclass
class BatchView:
    reps: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.reps = np.atleast_2d(np.asarray(self.reps, dtype=np.float64))
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.reps.shape[0] != self.labels.size:
            raise StructuralError(
                f"{self.reps.shape[0]} representations but {self.labels.size} labels"
            )
        if not np.all(np.isfinite(self.reps)):
            raise StructuralError("batch contains non-finite representations")

    def __len__(self) -> int:
        return self.labels.size

    def others(self, i: int) -> list[int]:
        return [j for j in range(len(self)) if j != i]

    def positives(self, i: int) -> list[int]:
        return [j for j in self.others(i) if self.labels[j] == self.labels[i]]


@dataclass
class LossOutput:
    value: float
    grads: np.ndarray
    skipped: tuple = field(default=())


def pair_score(z_i, z_j, cfg: LossConfig = LossConfig()) -> float:
    return float(np.exp(cosine_similarity(z_i, z_j) / cfg.temperature))


def _proto_arrays(prototypes: Mapping[int, np.ndarray] | None, dim: int):
    if not prototypes:
        return np.zeros(0, dtype=np.int64), np.zeros((0, dim))
    labels = np.array(sorted(prototypes), dtype=np.int64)
    mat = np.stack([np.asarray(prototypes[k], dtype=np.float64) for k in labels])
    if mat.shape[1] != dim:
        raise StructuralError(f"prototype dim {mat.shape[1]} != representation dim {dim}")
    return labels, mat


def term_masks(labels, proto_labels):
    """Boolean masks over the concatenated [batch | prototype] term list.

    Returns (denominator, positive, negative) masks of shape (N, N + P).
    """
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    pl = np.asarray(proto_labels, dtype=np.int64).reshape(-1)
    n = y.size
    offdiag = ~np.eye(n, dtype=bool)
    same_b = y[:, None] == y[None, :]
    same_p = y[:, None] == pl[None, :]
    den = np.hstack([offdiag, ~same_p])
    pos = np.hstack([offdiag & same_b, same_p])
    neg = np.hstack([offdiag & ~same_b, ~same_p])
    return den, pos, neg


def term_counts(labels, proto_labels) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample number of positive and negative terms entering SPCL."""
    _, pos, neg = term_masks(labels, proto_labels)
    return pos.sum(axis=1), neg.sum(axis=1)


def _masked_lse(x: np.ndarray, mask: np.ndarray) -> np.ndarray:
    xm = np.where(mask, x, -np.inf)
    m = xm.max(axis=1)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return m + np.log(np.exp(xm - m[:, None]).sum(axis=1))


def _contrastive(batch: BatchView, prototypes, cfg: LossConfig) -> LossOutput:
    z, y = batch.reps, batch.labels
    n, d = z.shape
    tau = cfg.temperature
    u, norms = normalize_rows(z)
    pl, tmat = _proto_arrays(prototypes, d)
    t = normalize_rows(tmat)[0] if pl.size else tmat

    # logits over [batch | prototypes]
    cos = np.clip(np.hstack([u @ u.T, u @ t.T]), -1.0, 1.0)
    logits = cos / tau
    den, pos, _ = term_masks(y, pl)
    n_pos = pos.sum(axis=1)
    n_den = den.sum(axis=1)
    active = (n_pos > 0) & (n_den > 0)
    skipped = tuple(int(i) for i in np.flatnonzero(~active))
    if skipped:
        log.debug("samples %s have no positive or no denominator term; contributing 0", skipped)

    # inactive rows are zeroed out; keep their -inf sums out of the arithmetic
    lse_den = np.where(active, _masked_lse(logits, den), 0.0)
    lse_pos = np.where(active, _masked_lse(logits, pos), 0.0)
    # difference first: exact zero when the positive and denominator sets coincide
    per_sample = np.where(active, np.log(np.maximum(n_pos, 1)) + (lse_den - lse_pos), 0.0)
    value = float(per_sample.sum())

    # dL_i/dlogit_ij = softmax_den - softmax_pos over each term set
    w_den = np.where(den, np.exp(logits - lse_den[:, None]), 0.0)
    w_pos = np.where(pos, np.exp(logits - lse_pos[:, None]), 0.0)
    coef = np.where(active[:, None], w_den - w_pos, 0.0) / tau
    cb, cp = coef[:, :n], coef[:, n:]
    # a batch cosine (i, j) appears in both L_i and L_j
    g_u = (cb + cb.T) @ u + cp @ t
    grads = tangent_part(g_u, u) / norms[:, None]
    return LossOutput(value, grads, skipped)


def supcon_loss(batch: BatchView, cfg: LossConfig = LossConfig()) -> LossOutput:
    if len(batch) < 2:
        raise BatchTooSmallError(f"SupCon needs at least 2 samples, got {len(batch)}")
    return _contrastive(batch, None, cfg)


def spcl_loss(
    batch: BatchView, prototypes: Mapping[int, np.ndarray] | None, cfg: LossConfig = LossConfig()
) -> LossOutput:
    if len(batch) < 1:
        raise BatchTooSmallError("SPCL needs at least 1 sample")
    return _contrastive(batch, prototypes, cfg)


def cross_entropy_loss(logits, labels: Sequence[int]) -> LossOutput:
    """Mean negative log-likelihood; ``grads`` is the gradient w.r.t. ``logits``."""
    x = np.atleast_2d(np.asarray(logits, dtype=np.float64))
    y = np.asarray(labels, dtype=np.int64).reshape(-1)
    n, c = x.shape
    if y.size != n:
        raise StructuralError(f"{n} logit rows but {y.size} labels")
    if np.any((y < 0) | (y >= c)):
        raise StructuralError(f"label out of range [0, {c}): {y[(y < 0) | (y >= c)].tolist()}")
    shifted = x - x.max(axis=1, keepdims=True)
    logp = shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    value = float(-logp[np.arange(n), y].mean())
    grad = np.exp(logp)
    grad[np.arange(n), y] -= 1.0
    return LossOutput(value, grad / n)
