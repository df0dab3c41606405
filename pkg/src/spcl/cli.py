"""Command-line front end: gen-data, train, rank, sweep, report."""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import statistics
import sys
from collections import Counter, defaultdict
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import checkpoint
from .config import RunConfig, dump_config, load_run_config, parse_bool
from .curriculum import class_centers, difficulties
from .data import (
    MELD_DEV_COUNTS,
    MELD_IMBALANCE_COUNTS,
    MELD_LABELS,
    MELD_TEST_COUNTS,
    ClusterSpec,
    conversation_pairs,
    evaluation_pairs,
    generate_synthetic_clusters,
    load_conversations,
    load_vectors,
    random_centers,
    sniff_format,
    synthetic_conversations,
    write_conversations,
    write_vectors,
)
from .encoder import PassthroughEncoder
from .errors import SPCLError
from .trainer import MetricsReport, encode_inputs, train

log = logging.getLogger("spcl")

PRESETS = {
    # name: (train counts, dev counts, test counts, spread, label names)
    "meld-imbalance": (MELD_IMBALANCE_COUNTS, MELD_DEV_COUNTS, MELD_TEST_COUNTS, 0.35, MELD_LABELS),
    "three-cluster": ((200, 200, 200), (50, 50, 50), (50, 50, 50), 0.05, ("a", "b", "c")),
}
METRIC_FIELDS = ("epoch", "loss", "subset_size", "dev_f1", "test_f1")
CELL_FIELDS = ("loss", "batch_size", "seed", "best_epoch", "dev_f1", "test_f1", "train_f1", "status")


class CLIError(Exception):
    pass


def _ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(p) for p in text.split(",") if p.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    os.replace(tmp, path)


# ---------------------------------------------------------------- gen-data

def cmd_gen_data(args) -> int:
    preset = PRESETS.get(args.preset) if args.preset else None
    if args.preset and preset is None:
        raise CLIError(f"unknown preset {args.preset!r} (choose from {', '.join(PRESETS)})")
    counts = args.counts or (preset[0] if preset else None)
    if not counts:
        raise CLIError("give --preset or --counts")
    dev_counts = args.dev_counts or (preset[1] if preset else ())
    test_counts = args.test_counts or (preset[2] if preset else ())
    spread = args.spread if args.spread is not None else (preset[3] if preset else 0.3)
    names = preset[4] if preset and len(preset[4]) == len(counts) else tuple(f"c{i}" for i in range(len(counts)))

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    splits = {"train": counts, "dev": dev_counts, "test": test_counts}
    hist = {}
    try:
        if args.kind == "vector":
            centers = random_centers(len(counts), args.dim, rng)
            for split, cnt in splits.items():
                if not cnt:
                    continue
                if len(cnt) != len(counts):
                    raise CLIError(f"{split} counts need {len(counts)} entries, got {len(cnt)}")
                exs = generate_synthetic_clusters(
                    [ClusterSpec(n, c, spread) for n, c in zip(cnt, centers)], args.dim, rng)
                order = rng.permutation(len(exs))
                write_vectors(out / f"{split}.jsonl", [exs[i] for i in order])
                hist[split] = Counter(int(e.label) for e in exs)
        else:
            for split, cnt in splits.items():
                if not cnt:
                    continue
                convs = synthetic_conversations(args.dialogues if split == "train" else max(1, args.dialogues // 4),
                                                cnt, rng)
                write_conversations(out / f"{split}.jsonl", convs, names)
                hist[split] = Counter(t.label for c in convs for t in c.turns)
    except OSError as exc:
        raise CLIError(f"cannot write to {exc.filename}: {exc.strerror}") from None

    cfg = RunConfig(train_path="train.jsonl",
                    dev_path="dev.jsonl" if dev_counts else "",
                    test_path="test.jsonl" if test_counts else "",
                    labels=tuple(names), seed=args.seed)
    _write_atomic(out / "run.cfg", dump_config(cfg))
    for split, h in hist.items():
        print(f"{split}: " + " ".join(f"{names[k]}={h.get(k, 0)}" for k in range(len(counts)))
              + f" total={sum(h.values())}")
    return 0


# ------------------------------------------------------------------- train

def _load_split(path: str, cfg: RunConfig, training: bool):
    fmt = sniff_format(path)
    if fmt == "vector":
        return load_vectors(path)
    if not cfg.labels:
        raise CLIError("conversation data needs a label table (labels = a,b,c)")
    convs = load_conversations(path, cfg.labels)
    if training:
        return conversation_pairs(convs, cfg.context_window, np.random.default_rng(cfg.seed),
                                  cfg.max_len, cfg.aux_prob)
    return evaluation_pairs(convs, cfg.context_window, cfg.max_len)


def _check_paths(cfg: RunConfig) -> None:
    if not cfg.train_path:
        raise CLIError("no training data path (train_path / --train)")
    for p in (cfg.train_path, cfg.dev_path, cfg.test_path):
        if p and not Path(p).is_file():
            raise CLIError(f"dataset not found: {p}")


def _load_sets(cfg: RunConfig):
    tc = cfg.train_config()
    tr = encode_inputs(_load_split(cfg.train_path, cfg, True), tc)
    dv = encode_inputs(_load_split(cfg.dev_path, cfg, False), tc) if cfg.dev_path else None
    te = encode_inputs(_load_split(cfg.test_path, cfg, False), tc) if cfg.test_path else None
    return tr, dv, te


def metrics_csv(report: MetricsReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(METRIC_FIELDS)
    for e in report.epochs:
        w.writerow([_fmt(getattr(e, f)) for f in METRIC_FIELDS])
    return buf.getvalue()


def metrics_jsonl(report: MetricsReport) -> str:
    lines = [json.dumps({f: getattr(e, f) for f in (*METRIC_FIELDS, "mean_dif")}) for e in report.epochs]
    lines.append(json.dumps({"best_epoch": report.best_epoch, "best_dev_f1": report.best_dev_f1,
                             "best_test_f1": report.best_test_f1, "train_f1": report.train_f1,
                             "confusion": report.confusion.tolist() if report.confusion is not None else None}))
    return "\n".join(lines) + "\n"


def _config_from_args(args) -> RunConfig:
    overrides = {
        "train_path": getattr(args, "train", None),
        "dev_path": getattr(args, "dev", None),
        "test_path": getattr(args, "test", None),
        "labels": tuple(args.labels.split(",")) if getattr(args, "labels", None) else None,
        "loss": getattr(args, "loss", None),
        "curriculum": parse_bool(args.curriculum) if getattr(args, "curriculum", None) else None,
        "batch_size": getattr(args, "batch_size", None),
        "epochs": getattr(args, "epochs", None),
        "seed": getattr(args, "seed", None),
        "out": getattr(args, "out", None),
        "seeds": getattr(args, "seeds", None),
        "batch_sizes": getattr(args, "batch_sizes", None),
    }
    return load_run_config(args.config, **overrides)


def cmd_train(args) -> int:
    cfg = _config_from_args(args)
    _check_paths(cfg)
    tr, dv, te = _load_sets(cfg)
    model, report = train(cfg.train_config(), tr, dv, te)
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "checkpoint.txt", checkpoint.dumps(model, cfg.labels))
    _write_atomic(out / "metrics.csv", metrics_csv(report))
    _write_atomic(out / "metrics.jsonl", metrics_jsonl(report))
    print(f"best epoch {report.best_epoch}: dev_f1={report.best_dev_f1:.4f}"
          + (f" test_f1={report.best_test_f1:.4f}" if report.best_test_f1 is not None else "")
          + f" train_f1={report.train_f1:.4f}")
    return 0


# -------------------------------------------------------------------- rank

def cmd_rank(args) -> int:
    cfg = _config_from_args(args)
    data_path = args.data or cfg.train_path
    if not data_path or not Path(data_path).is_file():
        raise CLIError(f"dataset not found: {data_path or '(none given)'}")
    label_table = cfg.labels
    if args.checkpoint:
        model, ck_labels = checkpoint.load(args.checkpoint)
        label_table = label_table or tuple(ck_labels)
        cfg.hash_dim = model.encoder.in_dim
        encode = model.represent
    else:
        encode = PassthroughEncoder(normalize=True).encode
    cfg.labels = label_table
    x, y = encode_inputs(_load_split(data_path, cfg, False), cfg.train_config())
    z = encode(x)
    dif = difficulties(z, y, class_centers(z, y))
    order = np.argsort(dif, kind="stable")

    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("index", "label", "dif", "rank"))
    for r, i in enumerate(order):
        w.writerow((int(i), int(y[i]), repr(float(dif[i])), r))
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "rank.csv", buf.getvalue())

    n = y.size
    q = max(1, n // 5)
    easy, hard = order[:q], order[n - q:]
    summary = io.StringIO()
    sw = csv.writer(summary, lineterminator="\n")
    sw.writerow(("group", "count", "mean_dif", *[f"label_{k}" for k in np.unique(y)]))
    for name, idx in (("easiest_quintile", easy), ("all", order), ("hardest_quintile", hard)):
        counts = Counter(int(v) for v in y[idx])
        sw.writerow((name, idx.size, repr(float(dif[idx].mean())), *[counts.get(int(k), 0) for k in np.unique(y)]))
    _write_atomic(out / "rank_summary.csv", summary.getvalue())
    print(summary.getvalue(), end="")
    return 0


# ------------------------------------------------------------------- sweep

def _run_cell(cfg: RunConfig, sets, loss: str, batch_size: int, seed: int) -> dict:
    cell = {"loss": loss, "batch_size": batch_size, "seed": seed}
    try:
        _, report = train(cfg.train_config(loss=loss, batch_size=batch_size, seed=seed), *sets)
    except SPCLError as exc:
        return {**cell, "best_epoch": "", "dev_f1": "", "test_f1": "", "train_f1": "",
                "status": f"error: {exc}".replace("\n", " ")}
    return {**cell, "best_epoch": report.best_epoch, "dev_f1": report.best_dev_f1,
            "test_f1": report.best_test_f1, "train_f1": report.train_f1, "status": "ok"}


def _cell_f1(cell: dict) -> float:
    v = cell["test_f1"] if cell["test_f1"] not in ("", None) else cell["dev_f1"]
    return float(v)


def drop_rows(cells: list[dict]) -> list[dict]:
    """Per loss: mean F1 at the largest and smallest batch size, and their difference."""
    by = defaultdict(list)
    for c in cells:
        if c["status"] == "ok":
            by[(c["loss"], int(c["batch_size"]))].append(_cell_f1(c))
    rows = []
    for loss in sorted({k[0] for k in by}):
        sizes = sorted(b for l, b in by if l == loss)
        small, large = statistics.fmean(by[(loss, sizes[0])]), statistics.fmean(by[(loss, sizes[-1])])
        rows.append({"loss": loss, "small_batch": sizes[0], "large_batch": sizes[-1],
                     "f1_small": small, "f1_large": large, "drop": large - small})
    return rows


def _csv_text(fieldnames, rows) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: _fmt(r[k]) for k in fieldnames})
    return buf.getvalue()


def cmd_sweep(args) -> int:
    cfg = _config_from_args(args)
    if args.losses:
        cfg.losses = tuple(args.losses.split(","))
    _check_paths(cfg)
    sets = _load_sets(cfg)
    grid = [(l, b, s) for s in cfg.seeds for l in cfg.losses for b in cfg.batch_sizes]
    if args.workers > 1:
        with ProcessPoolExecutor(args.workers) as ex:
            cells = list(ex.map(_run_cell, *zip(*[(cfg, sets, *g) for g in grid])))
    else:
        cells = [_run_cell(cfg, sets, *g) for g in grid]
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    _write_atomic(out / "cells.csv", _csv_text(CELL_FIELDS, cells))
    drops = drop_rows(cells)
    _write_atomic(out / "drops.csv", _csv_text(("loss", "small_batch", "large_batch", "f1_small", "f1_large", "drop"), drops))
    for d in drops:
        print(f"{d['loss']}: F1({d['large_batch']})={d['f1_large']:.4f} F1({d['small_batch']})={d['f1_small']:.4f} drop={d['drop']:.4f}")
    failed = [c for c in cells if c["status"] != "ok"]
    for c in failed:
        print(f"cell {c['loss']}/bs{c['batch_size']}/seed{c['seed']} failed: {c['status']}", file=sys.stderr)
    return 1 if failed else 0


# ------------------------------------------------------------------ report

def summarize_cells(cells: list[dict]) -> list[dict]:
    by = defaultdict(list)
    for c in cells:
        if c.get("status", "ok") == "ok":
            by[(c["loss"], int(c["batch_size"]))].append(_cell_f1(c))
    rows = []
    for (loss, bs), vals in sorted(by.items()):
        sd = statistics.stdev(vals) if len(vals) > 1 else 0.0
        rows.append({"loss": loss, "batch_size": bs, "n": len(vals), "mean": statistics.fmean(vals), "std": sd})
    return rows


def cmd_report(args) -> int:
    root = Path(args.input)
    if not root.exists():
        raise CLIError(f"no such directory: {root}")
    files = sorted(root.rglob("cells.csv"))
    cells = []
    for f in files:
        with open(f, encoding="utf-8") as fh:
            cells.extend(csv.DictReader(fh))
    if not cells:
        raise CLIError(f"no metrics found under {root}")
    for r in summarize_cells(cells):
        print(f"{r['loss']:>8} bs={r['batch_size']:<4} n={r['n']}  weighted-F1 {r['mean']:.4f} ± {r['std']:.4f}")
    drops = drop_rows([{**c, "status": c.get("status", "ok")} for c in cells])
    for d in drops:
        print(f"{d['loss']:>8} drop F1({d['large_batch']}) - F1({d['small_batch']}) = {d['drop']:.4f}")
    if len(drops) > 1:
        best = min(drops, key=lambda d: d["drop"])
        print(f"least degradation at small batch size: {best['loss']}")
    return 0


# ------------------------------------------------------------------ parser

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spcl", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="write synthetic datasets")
    g.add_argument("--kind", choices=("vector", "conversation"), default="vector")
    g.add_argument("--preset", help=f"one of: {', '.join(PRESETS)}")
    g.add_argument("--counts", type=_ints, help="per-class training counts, e.g. 5,5")
    g.add_argument("--dev-counts", type=_ints)
    g.add_argument("--test-counts", type=_ints)
    g.add_argument("--dim", type=int, default=16)
    g.add_argument("--spread", type=float)
    g.add_argument("--dialogues", type=int, default=200, help="conversation kind: training dialogues")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_gen_data)

    def common(sp, data=True):
        sp.add_argument("--config")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out")
        sp.add_argument("--labels", help="comma-separated label table for conversation data")
        if data:
            sp.add_argument("--train")
            sp.add_argument("--dev")
            sp.add_argument("--test")
            sp.add_argument("--curriculum", choices=("on", "off"))
            sp.add_argument("--epochs", type=int)

    t = sub.add_parser("train", help="train one model")
    common(t)
    t.add_argument("--loss", choices=("ce", "supcon", "spcl"))
    t.add_argument("--batch-size", type=int)
    t.set_defaults(func=cmd_train)

    r = sub.add_parser("rank", help="difficulty ranking as CSV")
    common(r, data=False)
    r.add_argument("--data")
    r.add_argument("--checkpoint")
    r.set_defaults(func=cmd_rank)

    s = sub.add_parser("sweep", help="loss x batch size x seed grid")
    common(s)
    s.add_argument("--losses", help="comma-separated, e.g. supcon,spcl")
    s.add_argument("--loss", dest="losses")
    s.add_argument("--batch-sizes", type=_ints)
    s.add_argument("--batch-size", dest="batch_sizes", type=_ints)
    s.add_argument("--seeds", type=_ints)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_sweep)

    rep = sub.add_parser("report", help="summarize sweep outputs")
    rep.add_argument("--in", dest="input", required=True)
    rep.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except (CLIError, SPCLError, OSError) as exc:
        msg = str(exc).splitlines()[0] if str(exc) else type(exc).__name__
        print(f"spcl {args.command}: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
