"""Self-describing JSON checkpoints: config, tensors, optimizer state.

Values are stored as base-10 doubles via repr, which round-trips every
float64 bit-exactly, so load(save(model)) reproduces the tape including
AdaGrad accumulators. Writing is deterministic (fixed key order), so two
identical training runs produce byte-identical files.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np

from .config import RunConfig, model_config_from
from .data import Vocabulary
from .models import Model

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    run_config: RunConfig
    seed: int
    step: int
    source_tokens: list[str]
    target_tokens: list[str]
    tensors: dict[str, np.ndarray]
    adagrad: dict[str, np.ndarray]

    @property
    def source_vocab(self):
        return Vocabulary(self.source_tokens)

    @property
    def target_vocab(self):
        return Vocabulary(self.target_tokens)


def save_checkpoint(path, model, run_config, seed, step, src_vocab, tgt_vocab):
    payload = {
        "format_version": FORMAT_VERSION,
        "run_config": dataclasses.asdict(run_config),
        "seed": seed,
        "step": step,
        "source_vocab": src_vocab.to_list(),
        "target_vocab": tgt_vocab.to_list(),
        "tensors": {
            name: {
                "shape": list(entry.value.shape),
                "values": entry.value.reshape(-1).tolist(),
            }
            for name, entry in model.tape.entries.items()
        },
        "adagrad": {
            name: entry.accum.reshape(-1).tolist()
            for name, entry in model.tape.entries.items()
        },
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=1)
        fh.write("\n")


def load_checkpoint(path):
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format version {version!r}")
    tensors = {}
    adagrad = {}
    for name, spec in payload["tensors"].items():
        shape = tuple(spec["shape"])
        tensors[name] = np.array(spec["values"], dtype=np.float64).reshape(shape)
        adagrad[name] = np.array(
            payload["adagrad"][name], dtype=np.float64
        ).reshape(shape)
    return Checkpoint(
        run_config=RunConfig(**payload["run_config"]),
        seed=payload["seed"],
        step=payload["step"],
        source_tokens=payload["source_vocab"],
        target_tokens=payload["target_vocab"],
        tensors=tensors,
        adagrad=adagrad,
    )


def restore_model(ckpt):
    """Rebuild the model a checkpoint describes and load its tape."""
    src_vocab = ckpt.source_vocab
    tgt_vocab = ckpt.target_vocab
    model_cfg = model_config_from(ckpt.run_config, len(src_vocab), len(tgt_vocab))
    model = Model(model_cfg, seed=ckpt.seed)
    expected = set(model.tape.names())
    stored = set(ckpt.tensors)
    if expected != stored:
        raise ValueError(
            f"checkpoint tensors do not match the model: "
            f"missing {sorted(expected - stored)}, extra {sorted(stored - expected)}"
        )
    for name, entry in model.tape.entries.items():
        value = ckpt.tensors[name]
        if value.shape != entry.value.shape:
            raise ValueError(
                f"shape mismatch for {name!r}: checkpoint {value.shape}, "
                f"model {entry.value.shape}"
            )
        entry.value[...] = value
        entry.accum[...] = ckpt.adagrad[name]
    return model, src_vocab, tgt_vocab
