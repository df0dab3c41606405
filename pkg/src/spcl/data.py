"""Dataset records, JSONL I/O, context/prompt assembly and synthetic generators."""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import StructuralError

MASK = "<mask>"
DEFAULT_MAX_LEN = 256
DEFAULT_WINDOW = 8

# class order: neutral, joy, surprise, anger, sadness, disgust, fear
MELD_IMBALANCE_COUNTS = (1024, 128, 64, 32, 32, 32, 32)
MELD_LABELS = ("neutral", "joy", "surprise", "anger", "sadness", "disgust", "fear")
# evaluation splits keep a milder skew than the training subset
MELD_DEV_COUNTS = (470, 163, 150, 153, 111, 22, 40)
MELD_TEST_COUNTS = (1256, 402, 281, 345, 208, 68, 50)


def tokenize(text: str) -> tuple[str, ...]:
    return tuple(text.lower().split())


def speaker_token(speaker: str) -> str:
    return "_".join(speaker.split()) or "_"


@dataclass(frozen=True)
class Turn:
    speaker: str
    text: tuple[str, ...]
    label: int


@dataclass(frozen=True)
class Conversation:
    id: str
    turns: tuple[Turn, ...]

    def __post_init__(self):
        if not self.turns:
            raise StructuralError(f"conversation {self.id!r} has no turns")


@dataclass(frozen=True)
class TrainingPair:
    input_tokens: tuple[str, ...]
    target_label: int
    origin: tuple[str, int, int]  # (conversation id, target turn, prompted turn)


@dataclass(frozen=True)
class VectorExample:
    features: np.ndarray
    label: int

    def __eq__(self, other):
        if not isinstance(other, VectorExample):
            return NotImplemented
        return self.label == other.label and np.array_equal(self.features, other.features)


# ---------------------------------------------------------------- file I/O

def _read_jsonl(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                yield lineno, json.loads(line)
            except json.JSONDecodeError as exc:
                raise StructuralError(f"{path}:{lineno}: malformed JSON ({exc.msg})") from None


def load_conversations(path, label_table: Sequence[str]) -> list[Conversation]:
    index = {name: i for i, name in enumerate(label_table)}
    convs = []
    for lineno, rec in _read_jsonl(path):
        try:
            turns = []
            for t in rec["turns"]:
                name = t["label"]
                if name not in index:
                    raise StructuralError(f"{path}:{lineno}: unknown label {name!r}")
                turns.append(Turn(str(t["speaker"]), tokenize(t["text"]), index[name]))
            if not turns:
                raise StructuralError(f"{path}:{lineno}: conversation has no turns")
            convs.append(Conversation(str(rec["id"]), tuple(turns)))
        except (KeyError, TypeError) as exc:
            raise StructuralError(f"{path}:{lineno}: malformed record ({exc!r})") from None
    return convs


def write_conversations(path, convs: Iterable[Conversation], label_table: Sequence[str]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for c in convs:
            rec = {
                "id": c.id,
                "turns": [
                    {"speaker": t.speaker, "text": " ".join(t.text), "label": label_table[t.label]}
                    for t in c.turns
                ],
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_vectors(path) -> list[VectorExample]:
    out = []
    for lineno, rec in _read_jsonl(path):
        try:
            feats = np.asarray(rec["features"], dtype=np.float64)
            label = rec["label"]
        except (KeyError, TypeError, ValueError) as exc:
            raise StructuralError(f"{path}:{lineno}: malformed record ({exc!r})") from None
        if not isinstance(label, int) or feats.ndim != 1 or not np.all(np.isfinite(feats)) or not feats.any():
            raise StructuralError(f"{path}:{lineno}: need a finite nonzero feature list and an integer label")
        out.append(VectorExample(feats, label))
    return out


def write_vectors(path, examples: Iterable[VectorExample]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for ex in examples:
            # float repr round-trips exactly
            fh.write(json.dumps({"features": [float(v) for v in ex.features], "label": int(ex.label)}) + "\n")


def sniff_format(path) -> str:
    """'vector' or 'conversation', judged from the first record."""
    for _, rec in _read_jsonl(path):
        if "features" in rec:
            return "vector"
        if "turns" in rec:
            return "conversation"
        break
    raise StructuralError(f"{path}: cannot tell dataset format (empty or unrecognised)")


# ------------------------------------------------------ context and prompts

def build_prompt(turn: Turn, max_len: int | None = None) -> list[str]:
    text = list(turn.text)
    if max_len is not None and len(text) + 5 > max_len:
        # prompt alone overflows: keep the most recent utterance tokens
        text = text[len(text) - max(0, max_len - 5):]
    return ["for", *text, ",", speaker_token(turn.speaker), "fells", MASK]


def assemble_context(conv: Conversation, t: int, window: int = DEFAULT_WINDOW,
                     budget: int | None = None) -> list[str]:
    if not 0 <= t < len(conv.turns):
        raise StructuralError(f"turn {t} out of range for conversation {conv.id!r}")
    w = min(max(window, 0), t)
    toks: list[str] = []
    for turn in conv.turns[t - w: t + 1]:
        toks.append(speaker_token(turn.speaker))
        toks.extend(turn.text)
    if budget is not None and len(toks) > budget:
        toks = toks[len(toks) - max(budget, 0):]
    return toks


def make_training_pairs(conv: Conversation, t: int, window: int = DEFAULT_WINDOW,
                        rng: np.random.Generator | None = None, max_len: int = DEFAULT_MAX_LEN,
                        aux_prob: float = 1.0) -> list[TrainingPair]:
    """Primary pair for turn ``t`` plus, when history exists, one auxiliary pair
    prompting a random earlier in-window turn over the same context."""
    rng = rng if rng is not None else np.random.default_rng(0)
    w = min(window, t)
    h = None
    if w > 0 and aux_prob > 0 and (aux_prob >= 1 or rng.random() < aux_prob):
        h = int(rng.integers(t - w, t))
    prompts = {t: build_prompt(conv.turns[t], max_len)}
    if h is not None:
        prompts[h] = build_prompt(conv.turns[h], max_len)
    budget = max_len - max(len(p) for p in prompts.values())
    ctx = assemble_context(conv, t, window, budget)
    return [
        TrainingPair(tuple(ctx + p), conv.turns[j].label, (conv.id, t, j))
        for j, p in prompts.items()
    ]


def conversation_pairs(convs: Sequence[Conversation], window: int = DEFAULT_WINDOW,
                       rng: np.random.Generator | None = None, max_len: int = DEFAULT_MAX_LEN,
                       aux_prob: float = 1.0) -> list[TrainingPair]:
    rng = rng if rng is not None else np.random.default_rng(0)
    out = []
    for c in convs:
        for t in range(len(c.turns)):
            out.extend(make_training_pairs(c, t, window, rng, max_len, aux_prob))
    return out


def evaluation_pairs(convs: Sequence[Conversation], window: int = DEFAULT_WINDOW,
                     max_len: int = DEFAULT_MAX_LEN) -> list[TrainingPair]:
    """Primary pairs only (one per turn), for dev/test scoring."""
    return conversation_pairs(convs, window, None, max_len, aux_prob=0.0)


# -------------------------------------------------------------- synthetic

@dataclass(frozen=True)
class ClusterSpec:
    count: int
    center: np.ndarray
    spread: float


def generate_synthetic_clusters(specs: Sequence[ClusterSpec], dim: int,
                                rng: np.random.Generator) -> list[VectorExample]:
    """Points ``normalize(center + spread * N(0, I))``, labelled by cluster position."""
    if dim < 2:
        raise StructuralError(f"dim must be >= 2, got {dim}")
    out = []
    for label, spec in enumerate(specs):
        if spec.count < 0:
            raise StructuralError(f"negative count for class {label}")
        c = np.asarray(spec.center, dtype=np.float64)
        if c.shape != (dim,):
            raise StructuralError(f"center {label} has shape {c.shape}, expected ({dim},)")
        c = c / np.linalg.norm(c)
        pts = c + spec.spread * rng.standard_normal((spec.count, dim))
        pts /= np.linalg.norm(pts, axis=1, keepdims=True)
        out.extend(VectorExample(p, label) for p in pts)
    return out


def random_centers(n_classes: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    c = rng.standard_normal((n_classes, dim))
    return c / np.linalg.norm(c, axis=1, keepdims=True)


def imbalanced_subset(dataset: Sequence, counts: Sequence[int], rng: np.random.Generator) -> list:
    """Draw exactly ``counts[k]`` examples of each label ``k`` without replacement, shuffled."""
    labels = np.array([_label_of(ex) for ex in dataset], dtype=np.int64)
    picked = []
    for k, want in enumerate(counts):
        pool = np.flatnonzero(labels == k)
        if want > pool.size:
            raise StructuralError(f"class {k}: requested {want} but only {pool.size} available "
                                  f"(short by {want - pool.size})")
        picked.extend(rng.choice(pool, size=want, replace=False).tolist())
    order = rng.permutation(len(picked))
    return [dataset[picked[i]] for i in order]


def _label_of(ex) -> int:
    for attr in ("label", "target_label"):
        if hasattr(ex, attr):
            return int(getattr(ex, attr))
    raise StructuralError(f"example {ex!r} carries no label")


def synthetic_conversations(n_dialogues: int, label_counts_weights: Sequence[float],
                            rng: np.random.Generator, turns: tuple[int, int] = (3, 8),
                            cue_prob: float = 0.8) -> list[Conversation]:
    """Toy dialogues whose utterances mix shared filler words with label cue words."""
    n_classes = len(label_counts_weights)
    p = np.asarray(label_counts_weights, dtype=np.float64)
    p = p / p.sum()
    filler = [f"w{i}" for i in range(40)]
    speakers = ["ann", "bob", "cat", "dan"]
    convs = []
    for d in range(n_dialogues):
        n_turns = int(rng.integers(turns[0], turns[1] + 1))
        tlist = []
        for _ in range(n_turns):
            y = int(rng.choice(n_classes, p=p))
            words = [filler[i] for i in rng.integers(0, len(filler), int(rng.integers(2, 6)))]
            cue_class = y if rng.random() < cue_prob else int(rng.integers(n_classes))
            words.insert(int(rng.integers(0, len(words) + 1)), f"cue{cue_class}_{int(rng.integers(3))}")
            tlist.append(Turn(speakers[int(rng.integers(len(speakers)))], tuple(words), y))
        convs.append(Conversation(f"d{d}", tuple(tlist)))
    return convs
