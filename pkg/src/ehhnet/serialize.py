"""JSON model files.

Floats are written with ``repr`` (shortest round-trip decimal), so loading a
saved model gives bit-identical normalization, offsets and weights.
"""
from __future__ import annotations

import hashlib
import json

import numpy as np

from .network import EhhNetwork, NormalizationParams, SourceNode

FORMAT = "ehhnet-model"
VERSION = 1


def _floats(a):
    return [float(v) for v in np.asarray(a, dtype=float).reshape(-1)]


def offsets_by_variable(net):
    """Source offsets grouped per input dimension, in node order."""
    out = [[] for _ in range(net.n_inputs)]
    for s in net.sources:
        out[s.var].append(float(s.offset))
    return out


def model_to_dict(net):
    d = {
        "format": FORMAT,
        "version": VERSION,
        "n": net.n_inputs,
        "normalization": {"min": _floats(net.normalizer.lo),
                          "max": _floats(net.normalizer.hi)},
        "q_offsets": offsets_by_variable(net),
        "sources": [[s.var, float(s.offset)] for s in net.sources],
        "intermediates": [list(p) for p in net.parents],
        "weights": _floats(net.weights),
    }
    if net.meta:
        d["meta"] = net.meta
    return d


def model_from_dict(d):
    if d.get("format", FORMAT) != FORMAT:
        raise ValueError(f"not a model file (format {d.get('format')!r})")
    if d.get("version") != VERSION:
        raise ValueError(f"unsupported model version {d.get('version')!r}")
    norm = NormalizationParams(d["normalization"]["min"], d["normalization"]["max"])
    if norm.n != d["n"]:
        raise ValueError(f"normalization has {norm.n} dimensions, header says {d['n']}")
    sources = [SourceNode(int(v), float(b)) for v, b in d["sources"]]
    parents = [(int(a), int(b)) for a, b in d["intermediates"]]
    return EhhNetwork(norm, sources, parents, d["weights"], dict(d.get("meta", {})))


def dumps(net):
    return json.dumps(model_to_dict(net), indent=1, allow_nan=False) + "\n"


def loads(text):
    return model_from_dict(json.loads(text))


def save_model(net, path):
    with open(path, "w") as fh:
        fh.write(dumps(net))


def load_model(path):
    with open(path) as fh:
        return loads(fh.read())


def model_hash(net):
    """SHA-256 of the model's canonical JSON (structure, floats and meta)."""
    text = json.dumps(model_to_dict(net), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode()).hexdigest()
