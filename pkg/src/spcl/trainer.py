"""Curriculum training loop, center-matching and linear-probe evaluation."""
from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Sequence

import numpy as np

from .curriculum import (
    ClassCenters,
    class_centers,
    difficulties,
    epoch_keep_probabilities,
    sample_epoch_subset,
)
from .data import TrainingPair, VectorExample
from .encoder import ToyEncoder, featurize
from .errors import ConfigError, SPCLError, StructuralError
from .losses import BatchView, LossConfig, cross_entropy_loss, spcl_loss, supcon_loss
from .metrics import confusion_matrix, weighted_f1
from .numerics import normalize_rows, softmax
from .optim import AdamW
from .protomem import make_queues, prototypes_for_all

log = logging.getLogger(__name__)

LOSSES = ("ce", "supcon", "spcl")


@dataclass
class TrainConfig:
    loss: str = "spcl"
    curriculum: bool = True
    epochs: int = 30
    batch_size: int = 16
    temperature: float = 0.1
    queue_capacity: int = 128
    support_size: int = 16
    lr: float = 3e-3
    weight_decay: float = 0.01
    lr_floor: float = 3e-5
    seed: int = 0
    hidden_dim: int = 64
    out_dim: int = 32
    hash_dim: int = 1024
    context_window: int = 8
    max_len: int = 256
    aux_prob: float = 1.0
    probe_steps: int = 200
    probe_lr: float = 1e-2

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if self.loss not in LOSSES:
            raise ConfigError(f"loss must be one of {LOSSES}, got {self.loss!r}")
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1 or (self.loss == "supcon" and self.batch_size < 2):
            raise ConfigError(f"batch_size {self.batch_size} too small for loss {self.loss!r}")
        if self.queue_capacity < 1 or self.support_size < 1:
            raise ConfigError("queue_capacity and support_size must be >= 1")
        if not self.temperature > 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.support_size > self.queue_capacity:
            log.info("support_size %d exceeds queue_capacity %d; supports will clamp",
                     self.support_size, self.queue_capacity)

    @classmethod
    def field_types(cls) -> dict:
        return {f.name: f.type for f in fields(cls)}


@dataclass
class TrainedModel:
    encoder: ToyEncoder
    centers: ClassCenters
    n_classes: int
    loss: str
    temperature: float
    probe: tuple[np.ndarray, np.ndarray] | None = None

    def represent(self, x) -> np.ndarray:
        return self.encoder.encode(x)

    def predict(self, x) -> np.ndarray:
        z = self.represent(x)
        if self.loss == "ce":
            w, b = self.probe
            return np.argmax(z @ w.T + b, axis=1)
        return predict_center_match_batch(z, self.centers)


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    subset_size: int
    dev_f1: float
    test_f1: float | None = None
    mean_dif: float | None = None


@dataclass
class MetricsReport:
    epochs: list[EpochRecord] = field(default_factory=list)
    best_epoch: int = -1
    best_dev_f1: float = float("nan")
    best_test_f1: float | None = None
    train_f1: float = float("nan")
    confusion: np.ndarray | None = None
    subsets: list[np.ndarray] = field(default_factory=list)


@dataclass
class EvalResult:
    weighted_f1: float
    confusion: np.ndarray
    predictions: np.ndarray
    unknown_gold: int = 0


# ------------------------------------------------------------------ inputs

def encode_inputs(examples: Sequence, config: TrainConfig) -> tuple[np.ndarray, np.ndarray]:
    """Feature matrix and label vector from VectorExamples or TrainingPairs."""
    if len(examples) == 0:
        raise StructuralError("empty dataset")
    if isinstance(examples[0], VectorExample):
        x = np.stack([ex.features for ex in examples])
        y = np.array([ex.label for ex in examples], dtype=np.int64)
    elif isinstance(examples[0], TrainingPair):
        x = np.stack([featurize(ex.input_tokens, config.hash_dim) for ex in examples])
        y = np.array([ex.target_label for ex in examples], dtype=np.int64)
    else:
        x, y = examples
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.int64)
    return x, y


def _as_xy(dataset, config):
    if dataset is None:
        return None
    if isinstance(dataset, tuple) and len(dataset) == 2 and isinstance(dataset[0], np.ndarray):
        return np.asarray(dataset[0], dtype=np.float64), np.asarray(dataset[1], dtype=np.int64)
    return encode_inputs(dataset, config)


# -------------------------------------------------------------- prediction

def predict_center_match(z, centers: ClassCenters, temperature: float = 0.1) -> tuple[int, np.ndarray]:
    """Label of the most cosine-similar center (lowest label on ties) and a
    temperature softmax over the similarities, ordered by sorted label."""
    if len(centers) == 0:
        raise StructuralError("no class centers")
    labels, cmat = centers.matrix()
    u, _ = normalize_rows(np.asarray(z, dtype=np.float64).reshape(1, -1))
    sims = (u @ normalize_rows(cmat)[0].T)[0]
    return int(labels[int(np.argmax(sims))]), softmax(sims, temperature)


def predict_center_match_batch(z, centers: ClassCenters) -> np.ndarray:
    labels, cmat = centers.matrix()
    u, _ = normalize_rows(np.atleast_2d(z))
    return labels[np.argmax(u @ normalize_rows(cmat)[0].T, axis=1)]


# ------------------------------------------------------------ linear probe

def init_probe(n_classes: int, dim: int, rng: np.random.Generator) -> dict:
    bound = 1.0 / math.sqrt(dim)
    return {"W": rng.uniform(-bound, bound, (n_classes, dim)),
            "b": rng.uniform(-bound, bound, n_classes)}


def probe_gradients(params: dict, z: np.ndarray, y: np.ndarray):
    out = cross_entropy_loss(z @ params["W"].T + params["b"], y)
    return out.value, {"W": out.grads.T @ z, "b": out.grads.sum(axis=0)}, out.grads @ params["W"]


def train_linear_probe(representations, labels, config: TrainConfig, n_classes: int | None = None,
                       steps: int | None = None, rng: np.random.Generator | None = None):
    """Full-batch AdamW on cross-entropy over frozen representations. Returns (W, b)."""
    z = np.array(representations, dtype=np.float64)  # copy: nothing flows back
    y = np.asarray(labels, dtype=np.int64)
    n_classes = n_classes or int(y.max()) + 1
    steps = config.probe_steps if steps is None else steps
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    params = init_probe(n_classes, z.shape[1], rng)
    opt = AdamW(params, lr=config.probe_lr, weight_decay=config.weight_decay,
                lr_floor=config.lr_floor, total_steps=steps)
    for _ in range(steps):
        _, grads, _ = probe_gradients(params, z, y)
        opt.step(grads)
    return params["W"], params["b"]


# -------------------------------------------------------------- evaluation

def evaluate(model: TrainedModel, dataset, config: TrainConfig | None = None) -> EvalResult:
    config = config or TrainConfig(loss=model.loss)
    xy = _as_xy(dataset, config)
    if xy is None or xy[1].size == 0:
        raise StructuralError("cannot evaluate on an empty dataset")
    x, y = xy
    pred = model.predict(x)
    unknown = int(np.sum((y < 0) | (y >= model.n_classes) | ~np.isin(y, model.centers.labels)))
    return EvalResult(weighted_f1(pred, y), confusion_matrix(pred, y, model.n_classes), pred, unknown)


# ---------------------------------------------------------------- training

def _batches(subset: np.ndarray, batch_size: int, min_size: int) -> list[np.ndarray]:
    out = [subset[i:i + batch_size] for i in range(0, subset.size, batch_size)]
    if len(out) > 1 and out[-1].size < min_size:
        out[-2] = np.concatenate([out[-2], out.pop()])
    return out


def planned_steps(n_train: int, config: TrainConfig) -> int:
    per_epoch = n_train / 2 if config.curriculum else n_train
    return (config.epochs + 1) * max(1, math.ceil(per_epoch / config.batch_size))


def train(config: TrainConfig, train_set, dev_set=None, test_set=None):
    """Run the curriculum training loop; returns (TrainedModel, MetricsReport)."""
    config.validate()
    x, y = _as_xy(train_set, config)
    if y.size == 0:
        raise StructuralError("empty training set")
    dev = _as_xy(dev_set, config)
    test = _as_xy(test_set, config)
    if dev is None:
        dev = (x, y)
    n_classes = int(y.max()) + 1
    if y.min() < 0:
        raise StructuralError("labels must be non-negative integers")

    rng = np.random.default_rng(config.seed)
    encoder = ToyEncoder(x.shape[1], config.hidden_dim, config.out_dim, seed=config.seed)
    params = encoder.params
    if config.loss == "ce":
        params.update({"head_" + k: v for k, v in init_probe(n_classes, config.out_dim, rng).items()})
    opt = AdamW(params, lr=config.lr, weight_decay=config.weight_decay,
                lr_floor=config.lr_floor, total_steps=planned_steps(y.size, config))
    loss_cfg = LossConfig(config.temperature)
    queues = make_queues(range(n_classes), config.queue_capacity)
    min_batch = 2 if config.loss == "supcon" else 1
    use_cl = config.curriculum and y.size >= 2 and np.unique(y).size >= 2

    report = MetricsReport()
    best = None
    for k in range(config.epochs + 1):
        try:
            mean_dif = None
            if use_cl:
                z_all = encoder.encode(x)
                dif = difficulties(z_all, y, class_centers(z_all, y))
                order = np.argsort(dif, kind="stable")
                schedule = epoch_keep_probabilities(k, config.epochs, y.size)
                subset = sample_epoch_subset(order, schedule, rng)
                mean_dif = float(dif[subset].mean())
            else:
                subset = np.arange(y.size)
            report.subsets.append(np.sort(subset))
            subset = rng.permutation(subset)
            for q in queues.values():
                q.clear()

            losses = []
            for bi, idx in enumerate(_batches(subset, config.batch_size, min_batch)):
                zb, cache = encoder.forward(x[idx])
                yb = y[idx]
                if config.loss == "ce":
                    w, b = params["head_W"], params["head_b"]
                    value, head_grads, g_z = probe_gradients({"W": w, "b": b}, zb, yb)
                    grads = encoder.backward(cache, g_z)
                    grads["head_W"], grads["head_b"] = head_grads["W"], head_grads["b"]
                else:
                    batch = BatchView(zb, yb)
                    if config.loss == "supcon":
                        if len(batch) < 2:
                            continue
                        out = supcon_loss(batch, loss_cfg)
                    else:
                        protos = prototypes_for_all(queues, config.support_size, rng)
                        out = spcl_loss(batch, protos, loss_cfg)
                        # push only after the loss so no sample supports its own prototype
                        for z_row, label in zip(zb, yb):
                            queues[int(label)].push(z_row)
                    value = out.value
                    grads = encoder.backward(cache, out.grads)
                opt.step(grads)
                losses.append(value)
        except SPCLError as exc:
            raise type(exc)(f"epoch {k}: {exc}") from exc

        model = _snapshot(encoder, params, x, y, n_classes, config)
        dev_f1 = evaluate(model, dev, config).weighted_f1
        test_f1 = evaluate(model, test, config).weighted_f1 if test is not None else None
        epoch_loss = float(np.mean(losses)) if losses else float("nan")
        report.epochs.append(EpochRecord(k, epoch_loss, int(subset.size), dev_f1, test_f1, mean_dif))
        log.info("epoch %d loss %.5f subset %d dev_f1 %.4f", k, epoch_loss, subset.size, dev_f1)
        if best is None or dev_f1 > report.best_dev_f1:
            best = model
            report.best_epoch, report.best_dev_f1, report.best_test_f1 = k, dev_f1, test_f1

    if best.probe is None:
        z_best = best.represent(x)
        best.probe = train_linear_probe(z_best, y, config, n_classes, rng=np.random.default_rng(config.seed))
    train_eval = evaluate(best, (x, y), config)
    report.train_f1 = train_eval.weighted_f1
    report.confusion = evaluate(best, test if test is not None else dev, config).confusion
    return best, report


def _snapshot(encoder: ToyEncoder, params: dict, x, y, n_classes: int, config: TrainConfig) -> TrainedModel:
    enc = encoder.copy()
    z = enc.encode(x)
    centers = class_centers(z, y)
    probe = None
    if config.loss == "ce":
        probe = (params["head_W"].copy(), params["head_b"].copy())
    return TrainedModel(enc, centers, n_classes, config.loss, config.temperature, probe)


def config_dict(config: TrainConfig) -> dict:
    return asdict(config)
