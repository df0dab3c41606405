"""Text checkpoint format.

Layout: a header line ``spcl-checkpoint <version>``, then ``key value`` header
lines, then named numeric blocks. Every number is written with ``float.hex`` so
a save/load round trip is bit-exact on any platform.
"""
from __future__ import annotations

import json

import numpy as np

from .curriculum import ClassCenters
from .encoder import PARAM_NAMES, ToyEncoder
from .errors import StructuralError
from .trainer import TrainedModel

MAGIC = "spcl-checkpoint"
VERSION = 1


def _block(name: str, arr: np.ndarray) -> list[str]:
    a = np.atleast_2d(np.asarray(arr, dtype=np.float64))
    lines = [f"block {name} {a.shape[0]} {a.shape[1]} {np.ndim(arr)}"]
    lines.extend(" ".join(float(v).hex() for v in row) for row in a)
    return lines


def dumps(model: TrainedModel, label_table=()) -> str:
    enc = model.encoder
    lines = [
        f"{MAGIC} {VERSION}",
        f"loss {model.loss}",
        f"temperature {float(model.temperature).hex()}",
        f"n_classes {model.n_classes}",
        f"dims {enc.in_dim} {enc.hidden_dim} {enc.out_dim}",
        f"labels {json.dumps(list(label_table))}",
        f"center_counts {json.dumps({str(k): v for k, v in sorted(model.centers.counts.items())})}",
    ]
    for name in PARAM_NAMES:
        lines += _block(name, enc.params[name])
    for label in model.centers.labels:
        lines += _block(f"center:{label}", model.centers.centers[label])
    if model.probe is not None:
        lines += _block("probe:W", model.probe[0])
        lines += _block("probe:b", model.probe[1])
    return "\n".join(lines) + "\n"


def loads(text: str) -> tuple[TrainedModel, list[str]]:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(MAGIC + " "):
        raise StructuralError("not an spcl checkpoint")
    version = int(lines[0].split()[1])
    if version != VERSION:
        raise StructuralError(f"unsupported checkpoint version {version}")
    header, blocks = {}, {}
    i = 1
    while i < len(lines):
        key, _, rest = lines[i].partition(" ")
        if key == "block":
            name, rows, cols, ndim = rest.split()
            rows, cols, ndim = int(rows), int(cols), int(ndim)
            data = [[float.fromhex(t) for t in lines[i + 1 + r].split()] for r in range(rows)]
            arr = np.array(data, dtype=np.float64).reshape(rows, cols)
            blocks[name] = arr if ndim == 2 else arr.reshape(-1)
            i += 1 + rows
        else:
            header[key] = rest
            i += 1
    in_dim, hidden, out = (int(v) for v in header["dims"].split())
    enc = ToyEncoder(in_dim, hidden, out, params={k: blocks[k] for k in PARAM_NAMES})
    counts = {int(k): v for k, v in json.loads(header["center_counts"]).items()}
    centers = {int(n.split(":", 1)[1]): v for n, v in blocks.items() if n.startswith("center:")}
    probe = None
    if "probe:W" in blocks:
        probe = (blocks["probe:W"], blocks["probe:b"])
    model = TrainedModel(enc, ClassCenters(centers, counts), int(header["n_classes"]),
                         header["loss"], float.fromhex(header["temperature"]), probe)
    return model, json.loads(header["labels"])


def save(path, model: TrainedModel, label_table=()) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps(model, label_table))


def load(path) -> tuple[TrainedModel, list[str]]:
    with open(path, encoding="utf-8") as fh:
        return loads(fh.read())
