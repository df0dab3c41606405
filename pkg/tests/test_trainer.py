import math

import numpy as np
import pytest
from sklearn.metrics import f1_score

from oracles import naive_weighted_f1
from spcl.curriculum import ClassCenters, class_centers
from spcl.data import ClusterSpec, generate_synthetic_clusters, random_centers
from spcl.errors import EvaluationError, StructuralError
from spcl.metrics import confusion_matrix, weighted_f1
from spcl.numerics import finite_difference_gradient
from spcl.optim import AdamW, AdamWState, cosine_lr, optimizer_step
from spcl.trainer import (
    TrainConfig,
    evaluate,
    predict_center_match,
    predict_center_match_batch,
    probe_gradients,
    train,
    train_linear_probe,
)


def clusters(rng, n=60, k=3, dim=8, spread=0.05):
    c = random_centers(k, dim, rng)
    return generate_synthetic_clusters([ClusterSpec(n, ci, spread) for ci in c], dim, rng), c


# ------------------------------------------------------------------ optim

def test_zero_grad_no_decay_is_identity():
    p = {"w": np.array([1.0, -2.0])}
    optimizer_step(p, {"w": np.zeros(2)}, AdamWState(), 0.1, weight_decay=0.0)
    np.testing.assert_array_equal(p["w"], [1.0, -2.0])


def test_cosine_schedule_endpoints():
    assert cosine_lr(0, 100, 1e-2, 1e-4) == 1e-2
    assert cosine_lr(100, 100, 1e-2, 1e-4) == pytest.approx(1e-4, abs=1e-18)
    assert cosine_lr(50, 100, 1e-2, 0.0) == pytest.approx(5e-3)


def test_adamw_converges_on_quadratic():
    p = {"x": np.array([5.0])}
    opt = AdamW(p, lr=0.5, weight_decay=0.0, lr_floor=1e-4, total_steps=200)
    for _ in range(200):
        opt.step({"x": 2.0 * (p["x"] - 1.5)})
    assert abs(p["x"][0] - 1.5) <= 1e-3


def test_non_finite_gradient_names_block():
    p = {"W1": np.ones(2)}
    with pytest.raises(EvaluationError, match="W1"):
        optimizer_step(p, {"W1": np.array([np.nan, 0.0])}, AdamWState(), 0.1)


# -------------------------------------------------------------- prediction

def test_center_match_examples():
    cc = ClassCenters({0: np.array([1.0, 0.0, 0.0]), 1: np.array([0.0, 1.0, 0.0]), 2: np.array([0.0, 0.0, 1.0])})
    label, probs = predict_center_match([0.0, 2.0, 0.0], cc)
    assert label == 1 and probs.argmax() == 1 and abs(probs.sum() - 1) <= 1e-12
    two = ClassCenters({0: np.array([1.0, 0.0]), 1: np.array([0.0, 1.0])})
    assert predict_center_match([1.0, 1.0], two)[0] == 0


def test_center_match_vs_exhaustive_argmax(rng):
    cc = class_centers(rng.standard_normal((12, 5)), np.arange(12) % 4)
    for _ in range(1000):
        z = rng.standard_normal(5)
        best, best_s = None, -np.inf
        for k in sorted(cc.centers):
            c = cc.centers[k]
            s = float(z @ c / (np.linalg.norm(z) * np.linalg.norm(c)))
            if s > best_s:
                best, best_s = k, s
        assert predict_center_match(z, cc)[0] == best
    zs = rng.standard_normal((50, 5))
    assert predict_center_match_batch(zs, cc).tolist() == [predict_center_match(z, cc)[0] for z in zs]


# ------------------------------------------------------------------- probe

def test_probe_separable(rng):
    x = np.vstack([rng.standard_normal((20, 2)) * 0.2 + [2, 0], rng.standard_normal((20, 2)) * 0.2 - [2, 0]])
    y = np.array([0] * 20 + [1] * 20)
    w, b = train_linear_probe(x, y, TrainConfig(), steps=300)
    assert np.mean(np.argmax(x @ w.T + b, axis=1) == y) == 1.0


def test_probe_zero_steps_returns_init(rng):
    x, y = rng.standard_normal((5, 3)), np.array([0, 1, 0, 1, 1])
    w, b = train_linear_probe(x, y, TrainConfig(), steps=0, rng=np.random.default_rng(4))
    bound = 1 / math.sqrt(3)
    assert np.all(np.abs(w) <= bound) and np.all(np.abs(b) <= bound)
    w2, b2 = train_linear_probe(x, y, TrainConfig(), steps=0, rng=np.random.default_rng(4))
    assert np.array_equal(w, w2) and np.array_equal(b, b2)


def test_probe_gradients(rng):
    z, y = rng.standard_normal((6, 4)), rng.integers(0, 3, 6)
    params = {"W": rng.standard_normal((3, 4)), "b": rng.standard_normal(3)}
    _, grads, _ = probe_gradients(params, z, y)
    for name in ("W", "b"):
        def f(v, name=name):
            return probe_gradients({**params, name: v}, z, y)[0]
        fd = finite_difference_gradient(f, params[name].copy(), 1e-6)
        assert np.max(np.abs(fd - grads[name])) / max(np.linalg.norm(grads[name]), 1e-8) <= 1e-6


# ----------------------------------------------------------------- metrics

def test_weighted_f1_examples():
    assert weighted_f1([0, 1, 2, 1], [0, 1, 2, 1]) == 1.0
    assert abs(weighted_f1([0, 1, 1, 1], [0, 0, 1, 1]) - 11 / 15) <= 1e-12
    assert weighted_f1([3, 3, 3], [3, 3, 3]) == 1.0
    with pytest.raises(StructuralError):
        weighted_f1([], [])


def test_weighted_f1_against_oracles(rng):
    for _ in range(100):
        n = int(rng.integers(1, 40))
        g, p = rng.integers(0, 5, n), rng.integers(0, 6, n)
        ours = weighted_f1(p, g)
        assert ours == pytest.approx(naive_weighted_f1(p.tolist(), g.tolist()), abs=1e-12)
        assert ours == pytest.approx(f1_score(g, p, average="weighted", zero_division=0), abs=1e-12)
        assert 0.0 <= ours <= 1.0


def test_confusion_matrix_recount(rng):
    g, p = rng.integers(0, 4, 50), rng.integers(0, 4, 50)
    cm = confusion_matrix(p, g)
    for i in range(4):
        for j in range(4):
            assert cm[i, j] == sum(1 for a, b in zip(g, p) if a == i and b == j)


# ------------------------------------------------------------------ train

def test_ce_without_curriculum_uses_full_set(rng):
    exs, _ = clusters(rng, n=20)
    model, rep = train(TrainConfig(loss="ce", curriculum=False, epochs=3, batch_size=8), exs)
    assert all(e.subset_size == 60 for e in rep.epochs)
    assert len(rep.epochs) == 4
    assert model.probe is not None


@pytest.mark.parametrize("loss", ["supcon", "spcl"])
def test_train_fits_separable_clusters(rng, loss):
    exs, _ = clusters(rng)
    dev, _ = clusters(np.random.default_rng(0), n=10)
    model, rep = train(TrainConfig(loss=loss, epochs=8), exs)
    assert rep.train_f1 == 1.0
    assert evaluate(model, exs).weighted_f1 == 1.0


def test_train_is_deterministic(rng):
    exs, _ = clusters(rng, n=30)
    cfg = TrainConfig(epochs=4, seed=11)
    _, a = train(cfg, exs)
    _, b = train(TrainConfig(epochs=4, seed=11), exs)
    assert [vars(e) for e in a.epochs] == [vars(e) for e in b.epochs]
    assert all(np.array_equal(x, y) for x, y in zip(a.subsets, b.subsets))


def test_best_checkpoint_rule(rng):
    exs, _ = clusters(rng, n=30, spread=0.6)
    dev, _ = clusters(np.random.default_rng(2), n=30, spread=0.6)
    model, rep = train(TrainConfig(epochs=6), exs, dev, dev)
    best = max(rep.epochs, key=lambda e: e.dev_f1)
    assert rep.best_dev_f1 == best.dev_f1
    first_best = next(e for e in rep.epochs if e.dev_f1 == best.dev_f1)
    assert rep.best_epoch == first_best.epoch
    assert rep.best_test_f1 == first_best.test_f1
    assert evaluate(model, dev).weighted_f1 == pytest.approx(rep.best_dev_f1, abs=1e-12)


def test_evaluate_unknown_labels_and_empty(rng):
    exs, _ = clusters(rng, n=10)
    model, _ = train(TrainConfig(epochs=1), exs)
    x = np.stack([e.features for e in exs[:4]])
    res = evaluate(model, (x, np.array([0, 1, 2, 9])))
    assert res.unknown_gold == 1
    assert res.confusion[9].sum() == 1 and res.confusion[9, 9] == 0
    with pytest.raises(StructuralError):
        evaluate(model, (x[:0], np.array([], dtype=np.int64)))


def test_evaluate_matches_recount(rng):
    exs, _ = clusters(rng, n=20, spread=0.8)
    model, _ = train(TrainConfig(epochs=2), exs)
    res = evaluate(model, exs)
    golds = [e.label for e in exs]
    assert res.weighted_f1 == pytest.approx(naive_weighted_f1(res.predictions.tolist(), golds), abs=1e-12)
    assert res.confusion.sum() == len(exs)


def test_push_after_loss_ordering(monkeypatch, rng):
    # queues must not contain the current batch when its prototypes are drawn
    import spcl.trainer as tr
    seen = []
    real = tr.prototypes_for_all

    def spy(queues, k, g):
        seen.append(sum(len(q) for q in queues.values()))
        return real(queues, k, g)

    monkeypatch.setattr(tr, "prototypes_for_all", spy)
    exs, _ = clusters(rng, n=10)
    train(TrainConfig(epochs=1, batch_size=5, curriculum=False, queue_capacity=1000), exs)
    # each epoch starts empty and grows by one batch per step
    assert seen[:6] == [0, 5, 10, 15, 20, 25]
    assert seen[6] == 0


def test_curriculum_epoch0_easier_than_last():
    wins = 0
    for seed in range(20):
        g = np.random.default_rng(100 + seed)
        exs, _ = clusters(g, n=40, spread=0.5)
        _, rep = train(TrainConfig(epochs=2, seed=seed), exs)
        wins += rep.epochs[0].mean_dif < rep.epochs[-1].mean_dif
    assert wins >= 19


def test_curriculum_off_has_no_difficulty(rng):
    exs, _ = clusters(rng, n=10)
    _, rep = train(TrainConfig(epochs=1, curriculum=False), exs)
    assert all(e.mean_dif is None for e in rep.epochs)
