"""Independent reference implementations used only by the tests.

Everything here is written term-by-term with the ``math`` module, so it shares
no code path with the vectorised implementations under test.
"""
import math


def cos(a, b):
    dot = sum(x * y for x, y in zip(a, b))
    na = math.sqrt(sum(x * x for x in a))
    nb = math.sqrt(sum(x * x for x in b))
    return dot / (na * nb)


def score(a, b, tau):
    return math.exp(cos(a, b) / tau)


def naive_supcon(reps, labels, tau):
    total = 0.0
    n = len(reps)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        pos = [j for j in others if labels[j] == labels[i]]
        if not pos:
            continue
        n_sup = sum(score(reps[i], reps[j], tau) for j in others)
        p_sup = sum(score(reps[i], reps[j], tau) for j in pos)
        total += -math.log((1.0 / len(pos)) * p_sup / n_sup)
    return total


def naive_spcl(reps, labels, prototypes, tau):
    total = 0.0
    n = len(reps)
    for i in range(n):
        others = [j for j in range(n) if j != i]
        pos = [j for j in others if labels[j] == labels[i]]
        n_spcl = sum(score(reps[i], reps[j], tau) for j in others)
        n_spcl += sum(score(reps[i], t, tau) for k, t in prototypes.items() if k != labels[i])
        p_spcl = sum(score(reps[i], reps[j], tau) for j in pos)
        n_terms = len(pos)
        if labels[i] in prototypes:
            p_spcl += score(reps[i], prototypes[labels[i]], tau)
            n_terms += 1
        if n_terms == 0 or n_spcl == 0.0:
            continue
        total += -math.log((1.0 / n_terms) * p_spcl / n_spcl)
    return total


def naive_centers(reps, labels):
    sums, counts = {}, {}
    for z, y in zip(reps, labels):
        acc = sums.setdefault(y, [0.0] * len(z))
        for d, v in enumerate(z):
            acc[d] += v
        counts[y] = counts.get(y, 0) + 1
    return {y: [v / counts[y] for v in s] for y, s in sums.items()}


def naive_dif(z, y, centers):
    dists = {k: 1.0 - cos(z, c) for k, c in centers.items()}
    return dists[y] / sum(dists.values())


def naive_weighted_f1(preds, golds):
    classes = sorted(set(golds))
    total = 0.0
    for c in classes:
        tp = sum(1 for p, g in zip(preds, golds) if p == c and g == c)
        fp = sum(1 for p, g in zip(preds, golds) if p == c and g != c)
        fn = sum(1 for p, g in zip(preds, golds) if p != c and g == c)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        total += f1 * (tp + fn)
    return total / len(golds)
