"""Macro-models built from recurrent cells, with loss assembly and decoding.

Five architectures share one interface (`Model.build_loss` produces the
training objective and a `LossRecord`):

* ``basic``         embed -> cell left-to-right -> per-step class logits
* ``brnn``          forward + backward cells; branch logits are combined by
                    trainable K×K heads, trained on the combined prediction
* ``seq2seq``       encoder/decoder pair; the decoder starts from the
                    encoder's final state and consumes the previous target
                    token (teacher forcing) or its own argmax (free-running)
* ``seq2seq-attn``  seq2seq plus additive attention over encoder outputs:
                    score(d, h) = v^T tanh(W_a [d; h] + b_a), context
                    concatenated with the decoder input
* ``dbrnn``         a bidirectional lower stage feeds [h_f; h_b] to upper
                    forward/backward cells; three objectives (forward branch,
                    backward branch on the reversed targets, combined) are
                    weighted by (w_f, w_b, w_comb)

Loss reduction everywhere: mean over batch elements, sum over unmasked time
steps; `LossRecord` additionally reports per-token cross-entropies, so
perplexity = exp(per-token loss). Sequence-labeling models can emit several
target symbols per input step through a widened output projection
(``targets_per_step``), which is how interleaved relation/head targets of
length 2T are trained.

The combination heads operate on branch logits for training stability. The
literal convex combination of probability vectors (the form used to argue
the combined branch can dominate both single branches) is exposed by
`combination_dominance_check`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import softmax as np_softmax

from . import autodiff as ad
from .cells import CellKind, CellSpec, InputMode, make_cell
from .numkernel import make_rng

PROB_CLAMP = 1e-12

_clamp_warnings = 0


def clamp_warning_count():
    return _clamp_warnings


def reset_clamp_warnings():
    global _clamp_warnings
    _clamp_warnings = 0


class ModelKind(str, Enum):
    BASIC_RNN = "basic"
    BRNN = "brnn"
    SEQ2SEQ = "seq2seq"
    SEQ2SEQ_ATTN = "seq2seq-attn"
    DBRNN = "dbrnn"


SEQ2SEQ_KINDS = (ModelKind.SEQ2SEQ, ModelKind.SEQ2SEQ_ATTN)
BRANCHED_KINDS = (ModelKind.BRNN, ModelKind.DBRNN)


@dataclass
class ModelConfig:
    """Architecture, sizes, special ids, and loss weights for one model."""

    kind: ModelKind
    cell: CellKind
    source_vocab: int
    target_vocab: int
    embedding_dim: int
    hidden_dim: int
    input_mode: InputMode = InputMode.CONCAT_PREV_OUTPUT
    scale_period: int = 1
    targets_per_step: int = 1
    max_decode_len: int = 50
    pad_id: int = 0
    start_id: int = 1
    stop_id: int = 2
    w_f: float = 1.0
    w_b: float = 1.0
    w_comb: float = 1.0
    dbrnn_feedback: bool = False

    def __post_init__(self):
        self.kind = ModelKind(self.kind)
        self.cell = CellKind(self.cell)
        self.input_mode = InputMode(self.input_mode)
        ids = (self.pad_id, self.start_id, self.stop_id)
        if len(set(ids)) != 3:
            raise ValueError(f"pad/start/stop ids must be distinct, got {ids}")
        if not all(0 <= i < self.target_vocab for i in ids):
            raise ValueError(
                f"special ids {ids} must lie within target vocab "
                f"of size {self.target_vocab}"
            )
        if self.scale_period < 1:
            raise ValueError(f"scale_period must be >= 1, got {self.scale_period}")
        if self.targets_per_step < 1:
            raise ValueError(
                f"targets_per_step must be >= 1, got {self.targets_per_step}"
            )
        if self.kind in SEQ2SEQ_KINDS and self.targets_per_step != 1:
            raise ValueError(
                "encoder-decoder models emit one symbol per decode step; "
                "widened projections apply to sequence-labeling models only"
            )


@dataclass
class LossRecord:
    """Per-token cross-entropies of one forward pass.

    Branch entries e_f/e_b are populated only by the dual-branch model;
    `total` is the weighted per-token sum w_f*e_f + w_b*e_b + w_comb*e for
    that model and equals `e` otherwise. `objective` is the quantity the
    optimizer sees (mean over batch, summed over time).
    """

    e: float
    total: float
    objective: float
    token_count: int
    e_f: float | None = None
    e_b: float | None = None


def cross_entropy(true_label, p_hat):
    """-log p_hat[true_label] for a probability vector (sums to 1 ± 1e-6).

    Non-positive probabilities are clamped at 1e-12 and counted in a
    module-level warning counter instead of raising.
    """
    global _clamp_warnings
    p_hat = np.asarray(p_hat, dtype=np.float64)
    total = float(p_hat.sum())
    if abs(total - 1.0) > 1e-6:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    p = float(p_hat[true_label])
    if p <= 0.0:
        _clamp_warnings += 1
        p = PROB_CLAMP
    return -math.log(p)


def perplexity(mean_per_token_ce):
    """exp of the per-token cross-entropy (inf when it overflows float64)."""
    if mean_per_token_ce < 0:
        raise ValueError(f"cross-entropy must be >= 0, got {mean_per_token_ce}")
    try:
        return math.exp(mean_per_token_ce)
    except OverflowError:
        return math.inf


def combination_dominance_check(p_f, p_b, true_label):
    """Best convex scalar combination of two predicted distributions.

    Maximizing the combined true-label probability alpha_f*p_f[k'] +
    alpha_b*p_b[k'] over alpha_f + alpha_b = 1, alpha >= 0 puts all weight
    on the stronger branch, so the combined loss can never exceed the
    better single-branch loss; that inequality is asserted here.
    """
    p_f = np.asarray(p_f, dtype=np.float64)
    p_b = np.asarray(p_b, dtype=np.float64)
    if p_f[true_label] >= p_b[true_label]:
        alpha_f, alpha_b = 1.0, 0.0
    else:
        alpha_f, alpha_b = 0.0, 1.0
    combined = alpha_f * p_f + alpha_b * p_b
    loss_combined = cross_entropy(true_label, combined)
    loss_f = cross_entropy(true_label, p_f)
    loss_b = cross_entropy(true_label, p_b)
    assert loss_combined <= min(loss_f, loss_b) + 1e-12
    return alpha_f, alpha_b, loss_combined


# ---------------------------------------------------------------------------
# the model


def _identity_pair(k):
    return 0.5 * np.eye(k)


class Model:
    """One macro-model instance owning its parameter tape.

    Construction registers every tensor on a fresh `ParamTape` in a fixed
    order from the seeded generator, so identical (config, seed) pairs are
    bit-identical.
    """

    def __init__(self, config, seed=0):
        self.config = config
        self.tape = ad.ParamTape()
        self.cells = {}
        rng = make_rng(seed)
        self._build(rng)

    # -- construction -------------------------------------------------------

    def _uniform(self, rng, shape, fan_in):
        bound = 1.0 / math.sqrt(fan_in)
        return rng.uniform(-bound, bound, size=shape)

    def _add_cell(self, name, input_size, rng, input_mode=None):
        cfg = self.config
        spec = CellSpec(
            kind=cfg.cell,
            input_size=input_size,
            hidden_size=cfg.hidden_dim,
            input_mode=cfg.input_mode if input_mode is None else input_mode,
            scale_period=cfg.scale_period,
        )
        self.cells[name] = make_cell(spec, self.tape, name, rng)

    def _add_projection(self, name, rng):
        cfg = self.config
        width = cfg.targets_per_step * cfg.target_vocab
        self.tape.register(
            f"{name}.W", self._uniform(rng, (width, cfg.hidden_dim), cfg.hidden_dim)
        )
        self.tape.register(f"{name}.b", np.zeros(width))

    def _add_combination_head(self, rng):
        width = self.config.targets_per_step * self.config.target_vocab
        self.tape.register("comb.W_f", _identity_pair(width))
        self.tape.register("comb.W_b", _identity_pair(width))

    def _build(self, rng):
        cfg = self.config
        m, n = cfg.embedding_dim, cfg.hidden_dim
        self.tape.register(
            "embed.src", self._uniform(rng, (cfg.source_vocab, m), m)
        )
        if cfg.kind in SEQ2SEQ_KINDS or (
            cfg.kind is ModelKind.DBRNN and cfg.dbrnn_feedback
        ):
            self.tape.register(
                "embed.tgt", self._uniform(rng, (cfg.target_vocab, m), m)
            )
        if cfg.kind is ModelKind.BASIC_RNN:
            self._add_cell("cell", m, rng)
            self._add_projection("proj", rng)
        elif cfg.kind is ModelKind.BRNN:
            self._add_cell("fwd", m, rng)
            self._add_cell("bwd", m, rng)
            self._add_projection("proj_f", rng)
            self._add_projection("proj_b", rng)
            self._add_combination_head(rng)
        elif cfg.kind is ModelKind.SEQ2SEQ:
            self._add_cell("enc", m, rng)
            self._add_cell("dec", m, rng)
            self._add_projection("proj", rng)
        elif cfg.kind is ModelKind.SEQ2SEQ_ATTN:
            self._add_cell("enc", m, rng)
            self._add_cell("dec", m + n, rng)
            self.tape.register("att.W", self._uniform(rng, (n, 2 * n), 2 * n))
            self.tape.register("att.b", np.zeros(n))
            self.tape.register("att.v", self._uniform(rng, (n,), n))
            self._add_projection("proj", rng)
        elif cfg.kind is ModelKind.DBRNN:
            self._add_cell("lower_f", m, rng)
            self._add_cell("lower_b", m, rng)
            upper_in = 2 * n + (m if cfg.dbrnn_feedback else 0)
            self._add_cell("upper_f", upper_in, rng)
            self._add_cell("upper_b", upper_in, rng)
            self._add_projection("proj_f", rng)
            self._add_projection("proj_b", rng)
            self._add_combination_head(rng)
        else:
            raise ValueError(f"unknown model kind {cfg.kind!r}")

    # -- shared forward machinery ------------------------------------------

    def _embed_steps(self, leaves, table, ids):
        return [ad.embed(leaves[table], ids[:, t]) for t in range(ids.shape[1])]

    def _run_cell(self, name, leaves, xs, mask=None, reverse=False, init_state=None):
        """Unroll one cell over a list of (B, dim) inputs.

        Returns (outputs aligned to input positions, final state). With a
        mask, padded steps carry the previous state through unchanged, so
        each row's final state is the state at its true length (in reverse
        runs, leading pad steps leave the zero state untouched).
        """
        cell = self.cells[name]
        state = cell.init_state(xs[0].data.shape[0]) if init_state is None else init_state
        order = range(len(xs) - 1, -1, -1) if reverse else range(len(xs))
        gated = mask is not None and not bool(mask.all())
        outputs = [None] * len(xs)
        for step, pos in enumerate(order, start=1):
            new_state = cell.step(leaves, xs[pos], state, step)
            if gated:
                keep = mask[:, pos].astype(np.float64).reshape(-1, 1)
                drop = ad.const(1.0 - keep)
                keep = ad.const(keep)
                new_state = tuple(
                    ad.add(ad.mul(ns, keep), ad.mul(os, drop))
                    for ns, os in zip(new_state, state)
                )
            state = new_state
            outputs[pos] = cell.output(state)
        return outputs, state

    def _project(self, leaves, name, h):
        return ad.affine(h, leaves[f"{name}.W"], leaves[f"{name}.b"])

    def _split_sublogits(self, logits_per_step):
        """Expand per-step logits into per-target-position K-wide logits."""
        k = self.config.target_vocab
        per_pos = []
        for logits in logits_per_step:
            for j in range(self.config.targets_per_step):
                per_pos.append(ad.slice_cols(logits, j * k, (j + 1) * k))
        return per_pos

    def _masked_objective(self, logits_per_pos, targets, mask):
        """Mean-over-batch, sum-over-time masked cross-entropy.

        Returns (objective Var, summed masked CE as float, token count).
        """
        batch = targets.shape[0]
        pieces = []
        ce_sum = 0.0
        count = 0
        for t, logits in enumerate(logits_per_pos):
            nll_t = ad.nll(logits, targets[:, t])
            m = mask[:, t].astype(np.float64)
            pieces.append(ad.dot_const(nll_t, m / batch))
            ce_sum += float(nll_t.data @ m)
            count += int(m.sum())
        return ad.add_scalars(pieces), ce_sum, count

    @staticmethod
    def _combine(leaves, logits_f, logits_b):
        return ad.add(
            ad.linear(logits_f, leaves["comb.W_f"]),
            ad.linear(logits_b, leaves["comb.W_b"]),
        )

    def _teacher_inputs(self, targets):
        """Decoder input ids: start symbol followed by targets[:-1]."""
        prev = np.full_like(targets, self.config.start_id)
        prev[:, 1:] = targets[:, :-1]
        return prev

    # -- per-kind losses ----------------------------------------------------

    def build_loss(self, leaves, batch):
        kind = self.config.kind
        if kind is ModelKind.BASIC_RNN:
            return self._loss_basic(leaves, batch)
        if kind is ModelKind.BRNN:
            return self._loss_brnn(leaves, batch)
        if kind is ModelKind.SEQ2SEQ:
            return self._loss_seq2seq(leaves, batch, attention=False)
        if kind is ModelKind.SEQ2SEQ_ATTN:
            return self._loss_seq2seq(leaves, batch, attention=True)
        return self._loss_dbrnn(leaves, batch)

    def _labeling_lengths(self, batch):
        t_in = batch.inputs.shape[1]
        t_out = batch.targets.shape[1]
        if t_out != t_in * self.config.targets_per_step:
            raise ValueError(
                f"target length {t_out} must be {self.config.targets_per_step}x "
                f"input length {t_in} for per-step models"
            )

    def _loss_basic(self, leaves, batch):
        self._labeling_lengths(batch)
        xs = self._embed_steps(leaves, "embed.src", batch.inputs)
        outs, _ = self._run_cell("cell", leaves, xs, mask=batch.input_mask)
        logits = self._split_sublogits(
            [self._project(leaves, "proj", h) for h in outs]
        )
        obj, ce_sum, count = self._masked_objective(
            logits, batch.targets, batch.target_mask
        )
        e = ce_sum / max(count, 1)
        rec = LossRecord(e=e, total=e, objective=obj.data, token_count=count)
        return obj, rec

    def _branch_logit_steps(self, leaves, batch):
        """Per-step (forward, backward, combined) logits for dual-cell models."""
        cfg = self.config
        xs = self._embed_steps(leaves, "embed.src", batch.inputs)
        if cfg.kind is ModelKind.BRNN:
            outs_f, _ = self._run_cell("fwd", leaves, xs, mask=batch.input_mask)
            outs_b, _ = self._run_cell(
                "bwd", leaves, xs, mask=batch.input_mask, reverse=True
            )
        else:
            low_f, _ = self._run_cell("lower_f", leaves, xs, mask=batch.input_mask)
            low_b, _ = self._run_cell(
                "lower_b", leaves, xs, mask=batch.input_mask, reverse=True
            )
            hs = [ad.concat_cols(f, b) for f, b in zip(low_f, low_b)]
            if cfg.dbrnn_feedback:
                prev = self._teacher_inputs(self._per_step_targets(batch))
                emb_prev = [
                    ad.embed(leaves["embed.tgt"], prev[:, t])
                    for t in range(prev.shape[1])
                ]
                hs = [ad.concat_cols(h, e) for h, e in zip(hs, emb_prev)]
            outs_f, _ = self._run_cell("upper_f", leaves, hs, mask=batch.input_mask)
            outs_b, _ = self._run_cell(
                "upper_b", leaves, hs, mask=batch.input_mask, reverse=True
            )
        logits_f = [self._project(leaves, "proj_f", h) for h in outs_f]
        logits_b = [self._project(leaves, "proj_b", h) for h in outs_b]
        return logits_f, logits_b

    def _per_step_targets(self, batch):
        """First target symbol of each input step (feedback conditioning)."""
        return batch.targets[:, :: self.config.targets_per_step]

    def _loss_brnn(self, leaves, batch):
        self._labeling_lengths(batch)
        logits_f, logits_b = self._branch_logit_steps(leaves, batch)
        combined = self._split_sublogits(
            [self._combine(leaves, lf, lb) for lf, lb in zip(logits_f, logits_b)]
        )
        obj, ce_sum, count = self._masked_objective(
            combined, batch.targets, batch.target_mask
        )
        e = ce_sum / max(count, 1)
        rec = LossRecord(e=e, total=e, objective=obj.data, token_count=count)
        return obj, rec

    def _loss_dbrnn(self, leaves, batch):
        self._labeling_lengths(batch)
        cfg = self.config
        logits_f, logits_b = self._branch_logit_steps(leaves, batch)
        combined = [
            self._combine(leaves, lf, lb) for lf, lb in zip(logits_f, logits_b)
        ]
        targets, mask = batch.targets, batch.target_mask
        obj_f, sum_f, count = self._masked_objective(
            self._split_sublogits(logits_f), targets, mask
        )
        obj_b, sum_b, _ = self._masked_objective(
            self._split_sublogits(logits_b), targets, mask
        )
        obj_c, sum_c, _ = self._masked_objective(
            self._split_sublogits(combined), targets, mask
        )
        # zero-weight branches are left out of the graph entirely so their
        # parameters receive no gradient at all
        terms = []
        for w, obj in ((cfg.w_f, obj_f), (cfg.w_b, obj_b), (cfg.w_comb, obj_c)):
            if w != 0.0:
                terms.append(ad.scale(obj, w))
        objective = ad.add_scalars(terms) if terms else ad.const(0.0)
        denom = max(count, 1)
        e_f, e_b, e = sum_f / denom, sum_b / denom, sum_c / denom
        rec = LossRecord(
            e=e,
            e_f=e_f,
            e_b=e_b,
            total=cfg.w_f * e_f + cfg.w_b * e_b + cfg.w_comb * e,
            objective=objective.data,
            token_count=count,
        )
        return objective, rec

    def _encode(self, leaves, batch):
        xs = self._embed_steps(leaves, "embed.src", batch.inputs)
        return self._run_cell("enc", leaves, xs, mask=batch.input_mask)

    def _attention_context(self, leaves, d, enc_outs, stacked, pad_offsets):
        scores = []
        for h_i in enc_outs:
            joint = ad.concat_cols(d, h_i)
            hidden = ad.tanh(ad.affine(joint, leaves["att.W"], leaves["att.b"]))
            scores.append(ad.matvec_cols(hidden, leaves["att.v"]))
        score_mat = ad.stack_cols(scores)
        if pad_offsets is not None:
            score_mat = ad.add(score_mat, ad.const(pad_offsets))
        weights = ad.softmax_rows(score_mat)
        return ad.attend(weights, stacked), weights

    def _pad_offsets(self, batch):
        """Large negative additive bias on padded encoder positions."""
        if bool(batch.input_mask.all()):
            return None
        return np.where(batch.input_mask, 0.0, -1e30)

    def _loss_seq2seq(self, leaves, batch, attention):
        enc_outs, enc_state = self._encode(leaves, batch)
        prev_ids = self._teacher_inputs(batch.targets)
        dec_cell = self.cells["dec"]
        state = enc_state
        logits = []
        if attention:
            stacked = ad.stack_seq(enc_outs)
            offsets = self._pad_offsets(batch)
        for t in range(batch.targets.shape[1]):
            x = ad.embed(leaves["embed.tgt"], prev_ids[:, t])
            if attention:
                context, _ = self._attention_context(
                    leaves, dec_cell.output(state), enc_outs, stacked, offsets
                )
                x = ad.concat_cols(x, context)
            state = dec_cell.step(leaves, x, state, t + 1)
            logits.append(self._project(leaves, "proj", dec_cell.output(state)))
        obj, ce_sum, count = self._masked_objective(
            logits, batch.targets, batch.target_mask
        )
        e = ce_sum / max(count, 1)
        rec = LossRecord(e=e, total=e, objective=obj.data, token_count=count)
        return obj, rec

    # -- inference ----------------------------------------------------------

    def encoder_final_state(self, batch):
        """Final encoder state as plain arrays (memory component first)."""
        with ad.no_grad():
            _, state = self._encode(self.tape.leaf_vars(), batch)
        return tuple(s.data for s in state)

    def step_predictions(self, batch):
        """Greedy per-position predictions (B, T') for labeling models.

        Seq2seq variants are scored teacher-forced here; use `decode` for
        free-running generation.
        """
        with ad.no_grad():
            leaves = self.tape.leaf_vars()
            kind = self.config.kind
            if kind is ModelKind.BASIC_RNN:
                xs = self._embed_steps(leaves, "embed.src", batch.inputs)
                outs, _ = self._run_cell("cell", leaves, xs, mask=batch.input_mask)
                logits = self._split_sublogits(
                    [self._project(leaves, "proj", h) for h in outs]
                )
            elif kind in BRANCHED_KINDS:
                logits_f, logits_b = self._branch_logit_steps(leaves, batch)
                logits = self._split_sublogits(
                    [
                        self._combine(leaves, lf, lb)
                        for lf, lb in zip(logits_f, logits_b)
                    ]
                )
            else:
                obj_logits = []
                enc_outs, state = self._encode(leaves, batch)
                prev_ids = self._teacher_inputs(batch.targets)
                dec_cell = self.cells["dec"]
                attention = kind is ModelKind.SEQ2SEQ_ATTN
                if attention:
                    stacked = ad.stack_seq(enc_outs)
                    offsets = self._pad_offsets(batch)
                for t in range(batch.targets.shape[1]):
                    x = ad.embed(leaves["embed.tgt"], prev_ids[:, t])
                    if attention:
                        context, _ = self._attention_context(
                            leaves, dec_cell.output(state), enc_outs, stacked, offsets
                        )
                        x = ad.concat_cols(x, context)
                    state = dec_cell.step(leaves, x, state, t + 1)
                    obj_logits.append(
                        self._project(leaves, "proj", dec_cell.output(state))
                    )
                logits = obj_logits
            return np.stack([l.data.argmax(axis=1) for l in logits], axis=1)

    def branch_distributions(self, batch):
        """Per-step (p_f, p_b, p) distributions for the dual-cell models.

        Arrays of shape (T', B, K); p is the softmax of the head-combined
        logits.
        """
        if self.config.kind not in BRANCHED_KINDS:
            raise ValueError("branch distributions require a dual-branch model")
        with ad.no_grad():
            leaves = self.tape.leaf_vars()
            logits_f, logits_b = self._branch_logit_steps(leaves, batch)
            combined = [
                self._combine(leaves, lf, lb)
                for lf, lb in zip(logits_f, logits_b)
            ]
            take = lambda seq: np.stack(
                [np_softmax(l.data, axis=1) for l in self._split_sublogits(seq)]
            )
            return take(logits_f), take(logits_b), take(combined)

    def decode(self, batch):
        """Free-running greedy generation for encoder-decoder models.

        Returns (token lists without the stop symbol, truncated flags); a
        row is truncated when max_decode_len is reached before its stop
        symbol. Ties in the argmax resolve to the lowest token id.
        """
        cfg = self.config
        if cfg.kind not in SEQ2SEQ_KINDS:
            raise ValueError("free-running decode requires an encoder-decoder model")
        with ad.no_grad():
            leaves = self.tape.leaf_vars()
            enc_outs, state = self._encode(leaves, batch)
            dec_cell = self.cells["dec"]
            attention = cfg.kind is ModelKind.SEQ2SEQ_ATTN
            if attention:
                stacked = ad.stack_seq(enc_outs)
                offsets = self._pad_offsets(batch)
            b = batch.inputs.shape[0]
            prev = np.full(b, cfg.start_id, dtype=np.int64)
            done = np.zeros(b, dtype=bool)
            outputs = [[] for _ in range(b)]
            truncated = [False] * b
            for t in range(cfg.max_decode_len):
                x = ad.embed(leaves["embed.tgt"], prev)
                if attention:
                    context, _ = self._attention_context(
                        leaves, dec_cell.output(state), enc_outs, stacked, offsets
                    )
                    x = ad.concat_cols(x, context)
                state = dec_cell.step(leaves, x, state, t + 1)
                logits = self._project(leaves, "proj", dec_cell.output(state))
                pred = logits.data.argmax(axis=1)
                for row in range(b):
                    if not done[row]:
                        if pred[row] == cfg.stop_id:
                            done[row] = True
                        else:
                            outputs[row].append(int(pred[row]))
                if done.all():
                    break
                prev = pred
            else:
                for row in range(b):
                    if not done[row]:
                        truncated[row] = True
            return outputs, truncated

    def accuracy(self, batch):
        """Fraction of unmasked target positions predicted correctly."""
        preds = self.step_predictions(batch)
        mask = batch.target_mask
        hits = (preds == batch.targets) & mask
        total = int(mask.sum())
        return float(hits.sum()) / max(total, 1)
