"""Run configuration: flat key=value files, task presets, validation.

A config file holds `key = value` lines ('#' starts a comment). Presets
carry the published defaults for each task family:

* ``toy``  embedding 2, 1 hidden cell, batch 5 — the detect-"A" experiment
* ``lm``   embedding 5, 5 cells, batch 50, scaling period 3
* ``pos``  embedding 512, 512 cells, batch 20, scaling period 1
           (100 for the encoder-decoder models)
* ``dp``   embedding 512, 512 cells, batch 20, scaling period 100,
           two target symbols per input token

All presets share learning rate 0.5 (AdaGrad), 11 epochs, one RNN layer.
``scale_period = 0`` means "resolve automatically": the full sequence
length for the toy task, the preset rule otherwise.

Precedence when assembling a run: explicit CLI flags > config file >
preset > dataclass defaults. Validation failures are collected and
reported together before any work starts.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .cells import CellKind, InputMode
from .models import ModelConfig, ModelKind

INPUT_MODE_NAMES = {
    "concat": InputMode.CONCAT_PREV_OUTPUT,
    "input-only": InputMode.INPUT_ONLY,
}

TASKS = ("toy", "lm", "pos", "dp")


@dataclass
class RunConfig:
    task: str = "toy"
    model: str = "basic"
    cell: str = "lstm"
    input_mode: str = "concat"
    embedding_dim: int = 2
    hidden_dim: int = 1
    batch_size: int = 5
    epochs: int = 11
    learning_rate: float = 0.5
    scale_period: int = 0  # 0 = auto-resolve per task/model
    clip_norm: float = 5.0  # 0 disables clipping
    seed: int = 0
    toy_length: int = 10
    data_path: str = ""
    max_decode_len: int = 50
    w_f: float = 1.0
    w_b: float = 1.0
    w_comb: float = 1.0
    dbrnn_feedback: bool = False


PRESETS = {
    "toy": dict(
        task="toy",
        embedding_dim=2,
        hidden_dim=1,
        batch_size=5,
        learning_rate=0.5,
        epochs=300,
        scale_period=0,
        toy_length=10,
    ),
    "lm": dict(
        task="lm",
        embedding_dim=5,
        hidden_dim=5,
        batch_size=50,
        learning_rate=0.5,
        epochs=11,
        scale_period=3,
    ),
    "pos": dict(
        task="pos",
        embedding_dim=512,
        hidden_dim=512,
        batch_size=20,
        learning_rate=0.5,
        epochs=11,
        scale_period=0,
    ),
    "dp": dict(
        task="dp",
        embedding_dim=512,
        hidden_dim=512,
        batch_size=20,
        learning_rate=0.5,
        epochs=11,
        scale_period=100,
    ),
}

_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}


def apply_preset(name, cfg=None):
    """Overlay a named preset onto a RunConfig (fresh one by default)."""
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}")
    cfg = cfg or RunConfig()
    return dataclasses.replace(cfg, **PRESETS[name])


def _parse_value(field, raw, errors, where):
    typ = field.type
    try:
        if typ in ("int", int):
            return int(raw)
        if typ in ("float", float):
            return float(raw)
        if typ in ("bool", bool):
            low = raw.lower()
            if low in ("true", "yes", "1"):
                return True
            if low in ("false", "no", "0"):
                return False
            raise ValueError(raw)
        return raw
    except ValueError:
        errors.append(f"{where}: cannot parse {raw!r} as {typ} for key {field.name!r}")
        return None


def load_config(path, cfg=None):
    """Parse a key=value file over an existing RunConfig."""
    cfg = cfg or RunConfig()
    updates = {}
    errors = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            text = line.split("#", 1)[0].strip()
            if not text:
                continue
            if "=" not in text:
                errors.append(f"{path}:{lineno}: expected 'key = value', got {text!r}")
                continue
            key, raw = (part.strip() for part in text.split("=", 1))
            if key not in _FIELDS:
                errors.append(
                    f"{path}:{lineno}: unknown key {key!r} "
                    f"(valid: {', '.join(sorted(_FIELDS))})"
                )
                continue
            value = _parse_value(_FIELDS[key], raw, errors, f"{path}:{lineno}")
            if value is not None:
                updates[key] = value
    if errors:
        raise ValueError("\n".join(errors))
    return dataclasses.replace(cfg, **updates)


def validate(cfg):
    """Collect every validation failure, then raise once if any."""
    errors = []
    if cfg.task not in TASKS:
        errors.append(f"task must be one of {TASKS}, got {cfg.task!r}")
    try:
        ModelKind(cfg.model)
    except ValueError:
        errors.append(
            f"model must be one of {[k.value for k in ModelKind]}, got {cfg.model!r}"
        )
    try:
        CellKind(cfg.cell)
    except ValueError:
        errors.append(
            f"cell must be one of {[k.value for k in CellKind]}, got {cfg.cell!r}"
        )
    if cfg.input_mode not in INPUT_MODE_NAMES:
        errors.append(
            f"input_mode must be one of {sorted(INPUT_MODE_NAMES)}, "
            f"got {cfg.input_mode!r}"
        )
    for key, minimum in (
        ("embedding_dim", 1),
        ("hidden_dim", 1),
        ("batch_size", 1),
        ("epochs", 1),
        ("toy_length", 1),
        ("max_decode_len", 1),
    ):
        if getattr(cfg, key) < minimum:
            errors.append(f"{key} must be >= {minimum}, got {getattr(cfg, key)}")
    if cfg.learning_rate <= 0:
        errors.append(f"learning_rate must be > 0, got {cfg.learning_rate}")
    if cfg.scale_period < 0:
        errors.append(f"scale_period must be >= 0, got {cfg.scale_period}")
    if cfg.clip_norm < 0:
        errors.append(f"clip_norm must be >= 0 (0 disables), got {cfg.clip_norm}")
    if errors:
        raise ValueError("\n".join(errors))
    return cfg


def resolve_scale_period(cfg):
    """Concrete scaling period for scale_period = 0 (auto)."""
    if cfg.scale_period > 0:
        return cfg.scale_period
    if cfg.task == "toy":
        return cfg.toy_length
    if cfg.task == "pos":
        is_seq2seq = ModelKind(cfg.model) in (
            ModelKind.SEQ2SEQ,
            ModelKind.SEQ2SEQ_ATTN,
        )
        return 100 if is_seq2seq else 1
    if cfg.task == "lm":
        return 3
    if cfg.task == "dp":
        return 100
    return 1


def model_config_from(cfg, source_vocab_size, target_vocab_size):
    """Build the architecture config for a run, given vocabulary sizes."""
    per_step_models = (ModelKind.BASIC_RNN, ModelKind.BRNN, ModelKind.DBRNN)
    targets_per_step = (
        2 if cfg.task == "dp" and ModelKind(cfg.model) in per_step_models else 1
    )
    return ModelConfig(
        kind=ModelKind(cfg.model),
        cell=CellKind(cfg.cell),
        source_vocab=source_vocab_size,
        target_vocab=target_vocab_size,
        embedding_dim=cfg.embedding_dim,
        hidden_dim=cfg.hidden_dim,
        input_mode=INPUT_MODE_NAMES[cfg.input_mode],
        scale_period=resolve_scale_period(cfg),
        targets_per_step=targets_per_step,
        max_decode_len=cfg.max_decode_len,
        w_f=cfg.w_f,
        w_b=cfg.w_b,
        w_comb=cfg.w_comb,
        dbrnn_feedback=cfg.dbrnn_feedback,
    )
