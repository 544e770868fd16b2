"""Training loop, evaluation metrics, and the toy-task length sweep.

One epoch = seeded shuffle into padded batches, then per batch: zero
grads, backprop, optional global-norm clip, AdaGrad step. Per-epoch rows
(epoch, per-token loss, perplexity, accuracy) go to an in-memory history
and optionally a CSV. Everything is deterministic given (config, seed).
"""

from __future__ import annotations

import dataclasses
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .autodiff import adagrad_step, backprop_sequence, clip_global_norm, no_grad
from .config import apply_preset, model_config_from, validate
from .data import detect_a_task, dp_task, lm_task, make_batches, pos_task
from .models import Model, perplexity
from .numkernel import make_rng


@dataclass
class EpochMetrics:
    epoch: int
    loss: float  # per-token cross-entropy
    perplexity: float
    accuracy: float


@dataclass
class TrainResult:
    history: list[EpochMetrics] = field(default_factory=list)
    step: int = 0

    @property
    def final(self):
        return self.history[-1]


METRICS_HEADER = "epoch,loss,perplexity,accuracy"


def metrics_csv(history):
    lines = [METRICS_HEADER]
    for row in history:
        lines.append(
            f"{row.epoch},{row.loss!r},{row.perplexity!r},{row.accuracy!r}"
        )
    return "\n".join(lines) + "\n"


def load_task(cfg, src_vocab=None, tgt_vocab=None):
    """(pairs, source vocab, target vocab) for the configured task.

    Pass stored vocabularies to re-encode a dataset for a trained model
    (unseen tokens map to unk); otherwise vocabularies are built here.
    """
    if cfg.task == "toy":
        return detect_a_task(cfg.toy_length)
    if not cfg.data_path:
        raise ValueError(f"task {cfg.task!r} requires data_path")
    if cfg.task == "lm":
        pairs, vocab = lm_task(cfg.data_path, vocab=src_vocab)
        return pairs, vocab, vocab
    if cfg.task == "pos":
        return pos_task(cfg.data_path, src_vocab=src_vocab, tgt_vocab=tgt_vocab)
    if cfg.task == "dp":
        return dp_task(cfg.data_path, src_vocab=src_vocab, tgt_vocab=tgt_vocab)
    raise ValueError(f"unknown task {cfg.task!r}")


def build_model(cfg, source_vocab, target_vocab):
    return Model(
        model_config_from(cfg, len(source_vocab), len(target_vocab)),
        seed=cfg.seed,
    )


def dataset_metrics(model, pairs, batch_size):
    """Loss/perplexity/accuracy over a dataset without updating anything."""
    ce_sum, tokens, hits = 0.0, 0, 0
    for batch in make_batches(pairs, batch_size):
        with no_grad():
            _, rec = model.build_loss(model.tape.leaf_vars(), batch)
        ce_sum += rec.e * rec.token_count
        tokens += rec.token_count
        preds = model.step_predictions(batch)
        hits += int(((preds == batch.targets) & batch.target_mask).sum())
    loss = ce_sum / max(tokens, 1)
    return {
        "loss": loss,
        "perplexity": perplexity(loss),
        "accuracy": hits / max(tokens, 1),
        "tokens": tokens,
    }


def dp_proxy_metrics(model, pairs, batch_size):
    """Per-token accuracies over interleaved (relation, head) targets.

    Head-position accuracy stands in for UAS; joint relation+head accuracy
    stands in for LAS. Both are per-token proxies, not tree-scored.
    """
    head_hits = head_total = joint_hits = joint_total = 0
    for batch in make_batches(pairs, batch_size):
        preds = model.step_predictions(batch)
        ok = (preds == batch.targets) & batch.target_mask
        rel_ok, head_ok = ok[:, 0::2], ok[:, 1::2]
        head_mask = batch.target_mask[:, 1::2]
        head_hits += int(head_ok.sum())
        head_total += int(head_mask.sum())
        joint_hits += int((rel_ok & head_ok).sum())
        joint_total += int(head_mask.sum())
    return {
        "uas_proxy": head_hits / max(head_total, 1),
        "las_proxy": joint_hits / max(joint_total, 1),
    }


def train_model(model, pairs, cfg, metrics_path=None, start_step=0):
    """Run the configured number of epochs; returns per-epoch history."""
    shuffle_rng = make_rng([cfg.seed, 1])
    result = TrainResult(step=start_step)
    for epoch in range(1, cfg.epochs + 1):
        for batch in make_batches(pairs, cfg.batch_size, shuffle_rng):
            model.tape.zero_grads()
            backprop_sequence(model, batch, model.tape)
            if cfg.clip_norm > 0:
                clip_global_norm(model.tape, cfg.clip_norm)
            adagrad_step(model.tape, cfg.learning_rate)
            result.step += 1
        stats = dataset_metrics(model, pairs, cfg.batch_size)
        result.history.append(
            EpochMetrics(
                epoch=epoch,
                loss=stats["loss"],
                perplexity=stats["perplexity"],
                accuracy=stats["accuracy"],
            )
        )
    if metrics_path is not None:
        with open(metrics_path, "w", encoding="utf-8") as fh:
            fh.write(metrics_csv(result.history))
    return result


# ---------------------------------------------------------------------------
# toy-task sweep


def toy_run_config(cell, T, seed, epochs):
    cfg = apply_preset("toy")
    return validate(
        dataclasses.replace(
            cfg, cell=cell, toy_length=T, seed=seed, epochs=epochs, model="basic"
        )
    )


def run_toy_cell(cell, T, seed, epochs):
    """Train one (cell, T, seed) toy model; returns (final loss, accuracy, model)."""
    cfg = toy_run_config(cell, T, seed, epochs)
    pairs, src_vocab, tgt_vocab = detect_a_task(T)
    model = build_model(cfg, src_vocab, tgt_vocab)
    result = train_model(model, pairs, cfg)
    return result.final.loss, result.final.accuracy, model


def transfer_toy_model(src_model, cfg, src_vocab, tgt_vocab):
    """Rebuild a toy model at a new sequence length, carrying training state.

    Weights and AdaGrad accumulators copy over unchanged; the per-position
    scale table is tiled cyclically up to the new period.  Tiling a period-p
    schedule to a longer period computes the identical forward function at
    the moment of the copy, so the hand-off is exact.
    """
    dst = build_model(cfg, src_vocab, tgt_vocab)
    for name, entry in dst.tape.entries.items():
        src = src_model.tape.entries[name]
        if src.value.shape != entry.value.shape:
            reps = -(-entry.value.shape[0] // src.value.shape[0])
            entry.value[:] = np.tile(src.value, (reps, 1))[: entry.value.shape[0]]
            entry.accum[:] = np.tile(src.accum, (reps, 1))[: entry.value.shape[0]]
        else:
            entry.value[:] = src.value
            entry.accum[:] = src.accum
    return dst


def run_toy_growth(cell, seed, stages, input_mode="input-only", learning_rate=0.5):
    """Train one cell on detect-A at increasing lengths, carrying the model.

    ``stages`` is a list of (toy_length, epochs).  Direct training at long T
    never leaves the predict-the-class-prior plateau (the lone negative
    sample is 1/(T+1) of the data, and its coupling gradient loses the race
    against AdaGrad's shrinking steps), so the experiment grows T instead:
    solve short sequences first, then hand the trained cell longer ones.
    Returns a list of per-stage final EpochMetrics plus the final model.
    """
    model = None
    out = []
    for toy_length, epochs in stages:
        cfg = dataclasses.replace(
            toy_run_config(cell, toy_length, seed, epochs),
            input_mode=input_mode,
            learning_rate=learning_rate,
        )
        cfg = validate(cfg)
        pairs, src_vocab, tgt_vocab = detect_a_task(toy_length)
        if model is None:
            model = build_model(cfg, src_vocab, tgt_vocab)
        else:
            model = transfer_toy_model(model, cfg, src_vocab, tgt_vocab)
        result = train_model(model, pairs, cfg)
        out.append(result.final)
    return out, model


def _sweep_job(args):
    T, cell, seed, epochs = args
    loss, accuracy, _ = run_toy_cell(cell, T, seed, epochs)
    return T, cell, seed, loss, accuracy


SWEEP_HEADER = "T,cell,seed,final_loss,accuracy"


def toy_sweep(t_min, t_max, cells, seeds, epochs, max_workers=None):
    """Sweep sequence lengths x cells x seeds; rows sorted, not run-ordered."""
    if t_min > t_max:
        raise ValueError(f"t_min {t_min} exceeds t_max {t_max}")
    if max_workers is None:
        max_workers = int(os.environ.get("ELSTM_LAB_THREADS", "1"))
    jobs = [
        (T, cell, seed, epochs)
        for T in range(t_min, t_max + 1)
        for cell in cells
        for seed in seeds
    ]
    if max_workers > 1:
        with ProcessPoolExecutor(max_workers=max_workers) as pool:
            rows = list(pool.map(_sweep_job, jobs))
    else:
        rows = [_sweep_job(job) for job in jobs]
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    return rows


def sweep_csv(rows):
    lines = [SWEEP_HEADER]
    for T, cell, seed, loss, accuracy in rows:
        lines.append(f"{T},{cell},{seed},{loss!r},{accuracy!r}")
    return "\n".join(lines) + "\n"
