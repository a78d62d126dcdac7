"""Two-party fixed-point inference with reduced-ring ReLU.

Thin wrappers over the C++ core; JSON results come back as dicts.
"""

import json
import os

from . import _core
from ._core import (
    ConfigError,
    FormatError,
    RedringError,
    TransportError,
    TripleExhaustedError,
    decode_fixed,
    encode_fixed,
    gen_triples,
    pack_words,
    packed_size_bytes,
    unpack_words,
)

__all__ = [
    "ConfigError",
    "FormatError",
    "RedringError",
    "TransportError",
    "TripleExhaustedError",
    "compare_reports",
    "decode_fixed",
    "encode_fixed",
    "gen_model",
    "gen_triples",
    "pack_words",
    "packed_size_bytes",
    "run_local",
    "search",
    "unpack_words",
]


def gen_model(arch, out, seed=1, epochs=8):
    """Train a desk model and write it with its synthetic train/val IDX files."""
    return json.loads(_core.gen_model(arch, seed, os.fspath(out), epochs))


def search(model, val, mode="eco", budget="8/64", threshold=None, widths=(), samples=1024, seed=1):
    """Per-group bit windows. `val` is an IDX prefix such as 'dir/val'."""
    return json.loads(
        _core.search(os.fspath(model), os.fspath(val), mode, str(budget), threshold, list(widths), samples, seed)
    )


def run_local(model, data, config="full", batch=64, samples=0, seed=1, with_logits=False):
    """Both parties in-process. `config` is 'full', a dict, or a path to a JSON file."""
    if isinstance(config, dict):
        text = json.dumps(config)
    elif config == "full":
        text = "full"
    else:
        with open(config) as f:
            text = f.read()
    return json.loads(_core.run_local(os.fspath(model), text, os.fspath(data), batch, samples, seed, with_logits))


def compare_reports(full, reduced):
    """full / reduced ratios per tag; arguments are report dicts."""
    return json.loads(_core.compare_reports(json.dumps(full), json.dumps(reduced)))
