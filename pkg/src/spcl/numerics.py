"""Dense float64 primitives: cosine similarity, normalization, softmax and a
central-difference gradient oracle."""
from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import ConfigError, DegenerateInputError, EvaluationError, StructuralError


def as_vector(a) -> np.ndarray:
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1 or v.size == 0:
        raise StructuralError(f"expected a non-empty 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise DegenerateInputError("vector has non-finite entries")
    return v


def _norm(v: np.ndarray) -> float:
    n = float(np.linalg.norm(v))
    if n == 0.0:
        raise DegenerateInputError("zero-norm vector")
    return n


def cosine_similarity(a, b) -> float:
    a = as_vector(a)
    b = as_vector(b)
    if a.shape != b.shape:
        raise StructuralError(f"length mismatch: {a.size} vs {b.size}")
    # product of norms is commutative, so the result is exactly symmetric
    c = float(np.dot(a, b)) / (_norm(a) * _norm(b))
    return min(1.0, max(-1.0, c))


def cosine_similarity_grad(a, b) -> np.ndarray:
    """Gradient of ``cosine_similarity(a, b)`` with respect to ``a``."""
    a = as_vector(a)
    b = as_vector(b)
    na, nb = _norm(a), _norm(b)
    ua, ub = a / na, b / nb
    return tangent_part(ub[None, :], ua[None, :])[0] / na


def tangent_part(g: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Row-wise component of ``g`` orthogonal to the unit rows of ``u``.

    Components below rounding level of ``g`` are flushed to zero so the
    result is orthogonal to ``u`` to relative precision.
    """
    scale = np.linalg.norm(g, axis=1, keepdims=True)
    t = g - np.sum(g * u, axis=1, keepdims=True) * u
    t = t - np.sum(t * u, axis=1, keepdims=True) * u
    tiny = np.linalg.norm(t, axis=1, keepdims=True) <= 8 * np.finfo(np.float64).eps * scale
    return np.where(tiny, 0.0, t)


def l2_normalize(a) -> np.ndarray:
    a = as_vector(a)
    return a / _norm(a)


def normalize_rows(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Row-normalize a matrix. Returns (unit rows, row norms)."""
    m = np.asarray(m, dtype=np.float64)
    norms = np.linalg.norm(m, axis=1)
    if np.any(norms == 0.0):
        raise DegenerateInputError(f"zero-norm row(s) at {np.flatnonzero(norms == 0.0).tolist()}")
    return m / norms[:, None], norms


def logsumexp(x: np.ndarray) -> float:
    x = np.asarray(x, dtype=np.float64)
    m = float(np.max(x))
    return m + float(np.log(np.sum(np.exp(x - m))))


def softmax(scores, temperature: float = 1.0) -> np.ndarray:
    if not temperature > 0:
        raise ConfigError(f"temperature must be positive, got {temperature}")
    s = as_vector(scores) / temperature
    e = np.exp(s - np.max(s))
    return e / e.sum()


def finite_difference_gradient(
    f: Callable[[np.ndarray], float], x, eps: float = 1e-6
) -> np.ndarray:
    """Central-difference gradient of scalar ``f`` at ``x``."""
    if not 1e-7 <= eps <= 1e-3:
        raise ConfigError(f"eps must lie in [1e-7, 1e-3], got {eps}")
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    grad = np.empty_like(flat)
    for i in range(flat.size):
        old = flat[i]
        flat[i] = old + eps
        fp = f(x)
        flat[i] = old - eps
        fm = f(x)
        flat[i] = old
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise EvaluationError(f"f returned a non-finite value near coordinate {i}")
        grad[i] = (fp - fm) / (2.0 * eps)
    return grad.reshape(x.shape)
