"""Encoders mapping examples to representation vectors.

``ToyEncoder`` is a two-layer tanh perceptron with hand-written backprop; it
runs on hashed bag-of-token features for dialogue data, or directly on raw
feature vectors for synthetic data.
"""
from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ConfigError, DegenerateInputError, StructuralError
from .numerics import as_vector, l2_normalize

EMPTY_TOKEN = "\x00<empty>"
PARAM_NAMES = ("W1", "b1", "W2", "b2")


def _bucket(token: str, hash_dim: int) -> tuple[int, float]:
    # blake2b is stable across processes and platforms, unlike hash()
    h = int.from_bytes(hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest(), "little")
    return h % hash_dim, (1.0 if (h >> 63) & 1 else -1.0)


def featurize(tokens: Sequence[str], hash_dim: int = 1024) -> np.ndarray:
    if hash_dim < 16:
        raise ConfigError(f"hash_dim must be >= 16, got {hash_dim}")
    x = np.zeros(hash_dim)
    for tok in tokens or [EMPTY_TOKEN]:
        b, s = _bucket(tok, hash_dim)
        x[b] += s
    if not x.any():
        # every token cancelled out; fall back to the reserved bucket
        b, s = _bucket(EMPTY_TOKEN, hash_dim)
        x[b] = s
    return x / np.linalg.norm(x)


@dataclass
class ForwardCache:
    x: np.ndarray
    h: np.ndarray


class ToyEncoder:
    """tanh(W1 x + b1) -> W2 h + b2, applied row-wise to a feature matrix."""

    def __init__(self, in_dim: int, hidden_dim: int = 64, out_dim: int = 32, seed: int = 0,
                 params: dict | None = None):
        self.in_dim, self.hidden_dim, self.out_dim = in_dim, hidden_dim, out_dim
        if params is None:
            rng = np.random.default_rng(seed)
            b1 = 1.0 / np.sqrt(in_dim)
            b2 = 1.0 / np.sqrt(hidden_dim)
            params = {
                "W1": rng.uniform(-b1, b1, (hidden_dim, in_dim)),
                "b1": rng.uniform(-b1, b1, hidden_dim),
                "W2": rng.uniform(-b2, b2, (out_dim, hidden_dim)),
                "b2": rng.uniform(-b2, b2, out_dim),
            }
        self.params = {k: np.asarray(params[k], dtype=np.float64) for k in PARAM_NAMES}
        self._check_shapes()

    def _check_shapes(self):
        want = {
            "W1": (self.hidden_dim, self.in_dim),
            "b1": (self.hidden_dim,),
            "W2": (self.out_dim, self.hidden_dim),
            "b2": (self.out_dim,),
        }
        for k, shape in want.items():
            if self.params[k].shape != shape:
                raise StructuralError(f"{k} has shape {self.params[k].shape}, expected {shape}")

    def forward(self, x) -> tuple[np.ndarray, ForwardCache]:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != self.in_dim:
            raise StructuralError(f"expected {self.in_dim} input features, got {x.shape[1]}")
        p = self.params
        h = np.tanh(x @ p["W1"].T + p["b1"])
        return h @ p["W2"].T + p["b2"], ForwardCache(x, h)

    def encode(self, x) -> np.ndarray:
        return self.forward(x)[0]

    def backward(self, cache: ForwardCache, upstream, grads: dict | None = None) -> dict:
        """Parameter gradients given dL/d(output); accumulates into ``grads`` if given."""
        g = np.atleast_2d(np.asarray(upstream, dtype=np.float64))
        if g.shape != (cache.h.shape[0], self.out_dim):
            raise StructuralError(
                f"upstream shape {g.shape} does not match cache ({cache.h.shape[0]}, {self.out_dim})"
            )
        dh = (g @ self.params["W2"]) * (1.0 - cache.h**2)
        out = {
            "W1": dh.T @ cache.x,
            "b1": dh.sum(axis=0),
            "W2": g.T @ cache.h,
            "b2": g.sum(axis=0),
        }
        if grads is not None:
            for k in PARAM_NAMES:
                grads[k] = grads[k] + out[k]
            return grads
        return out

    def input_grad(self, cache: ForwardCache, upstream) -> np.ndarray:
        dh = (np.atleast_2d(upstream) @ self.params["W2"]) * (1.0 - cache.h**2)
        return dh @ self.params["W1"]

    def copy(self) -> "ToyEncoder":
        return ToyEncoder(self.in_dim, self.hidden_dim, self.out_dim,
                          params={k: v.copy() for k, v in self.params.items()})


def toy_forward(encoder: ToyEncoder, features) -> tuple[np.ndarray, ForwardCache]:
    z, cache = encoder.forward(features)
    return (z[0] if np.ndim(features) == 1 else z), cache


def toy_backward(encoder: ToyEncoder, cache: ForwardCache, upstream) -> dict:
    return encoder.backward(cache, upstream)


class PassthroughEncoder:
    """Returns raw feature vectors, optionally unit-normalized. Has no parameters."""

    params: dict = {}

    def __init__(self, in_dim: int | None = None, normalize: bool = False):
        self.in_dim = self.out_dim = in_dim
        self.normalize = normalize

    def encode(self, x) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        norms = np.linalg.norm(x, axis=1)
        if np.any(norms == 0.0):
            raise DegenerateInputError("zero feature vector")
        return x / norms[:, None] if self.normalize else x


def vector_passthrough_encoder(features, normalize: bool = False) -> np.ndarray:
    v = as_vector(features)
    if not v.any():
        raise DegenerateInputError("zero feature vector")
    return l2_normalize(v) if normalize else v.copy()
