"""Reverse-mode gradient accumulation for unrolled recurrent computation.

A forward pass builds a graph of `Var` nodes over float64 numpy arrays;
`backward` walks it once in reverse topological order. Trainable tensors
live on a `ParamTape` which also carries accumulated gradients and the
AdaGrad statistics. Gradient correctness is established by central finite
differences (`grad_check`), which is the contract every cell and model
configuration must satisfy.

States and activations are batch-first matrices of shape (B, dim); losses
are python-float scalars. Inside `no_grad()` the same ops run without
recording the graph, which is what the finite-difference loop and greedy
decoding use.
"""

from __future__ import annotations

import math
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .numkernel import NumericError

_grad_enabled = True


@contextmanager
def no_grad():
    """Run forward passes without recording the backward graph."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


class Var:
    """One node of the backward graph: a value plus how to push grads back."""

    __slots__ = ("data", "grad", "parents", "bw")

    def __init__(self, data, parents=None, bw=None):
        self.data = data
        self.grad = None
        if _grad_enabled:
            self.parents = parents
            self.bw = bw
        else:
            self.parents = None
            self.bw = None


def const(data):
    """Wrap an array (or float) as a graph node with no parents."""
    return Var(data)


def backward(root, seed=1.0):
    """Accumulate d(root)/d(node) into .grad over the whole graph.

    Iterative topological sort; recursion would overflow on long unrolls.
    """
    topo = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        if node.parents is not None:
            for p in node.parents:
                if id(p) not in visited:
                    stack.append((p, False))
    root.grad = seed
    for node in reversed(topo):
        if node.bw is None or node.grad is None:
            continue
        for parent, g in zip(node.parents, node.bw(node.grad)):
            if g is None:
                continue
            # never mutate grads in place: parents may share returned arrays
            parent.grad = g if parent.grad is None else parent.grad + g


# ---------------------------------------------------------------------------
# graph ops


def add(a, b):
    if not _grad_enabled:
        return Var(a.data + b.data)
    return Var(a.data + b.data, (a, b), lambda g: (g, g))


def sub_const(c, x):
    """c - x for a plain constant c."""
    if not _grad_enabled:
        return Var(c - x.data)
    return Var(c - x.data, (x,), lambda g: (-g,))


def mul(a, b):
    if not _grad_enabled:
        return Var(a.data * b.data)
    ad, bd = a.data, b.data
    return Var(ad * bd, (a, b), lambda g: (g * bd, g * ad))


def scale(x, c):
    """x * c for a plain float constant c."""
    if not _grad_enabled:
        return Var(x.data * c)
    return Var(x.data * c, (x,), lambda g: (g * c,))


def mul_row(x, r):
    """Broadcast-multiply a (B, N) matrix by an (N,) row vector node."""
    if not _grad_enabled:
        return Var(x.data * r.data)
    xd, rd = x.data, r.data
    return Var(xd * rd, (x, r), lambda g: (g * rd, (g * xd).sum(axis=0)))


def add_row(x, r):
    """Broadcast-add an (N,) row vector node onto a (B, N) matrix."""
    if not _grad_enabled:
        return Var(x.data + r.data)
    return Var(x.data + r.data, (x, r), lambda g: (g, g.sum(axis=0)))


def table_row(tab, i):
    """Select row i of a (R, N) table node; grads scatter back to that row."""
    if not _grad_enabled:
        return Var(tab.data[i])

    def bw(g):
        gt = np.zeros_like(tab.data)
        gt[i] = g
        return (gt,)

    return Var(tab.data[i], (tab,), bw)


def linear(x, W):
    """x @ W.T for x of shape (B, D) and W of shape (N, D)."""
    if not _grad_enabled:
        return Var(x.data @ W.data.T)
    xd, Wd = x.data, W.data
    return Var(xd @ Wd.T, (x, W), lambda g: (g @ Wd, g.T @ xd))


def affine(x, W, b):
    """x @ W.T + b with bias b of shape (N,)."""
    if not _grad_enabled:
        return Var(x.data @ W.data.T + b.data)
    xd, Wd = x.data, W.data
    return Var(
        xd @ Wd.T + b.data, (x, W, b), lambda g: (g @ Wd, g.T @ xd, g.sum(axis=0))
    )


def matvec_cols(x, v):
    """x @ v reducing (B, D) by a (D,) vector node to (B,)."""
    if not _grad_enabled:
        return Var(x.data @ v.data)
    xd, vd = x.data, v.data
    return Var(xd @ vd, (x, v), lambda g: (g[:, None] * vd[None, :], g @ xd))


def sigmoid(x):
    out = expit(x.data)
    if not _grad_enabled:
        return Var(out)
    return Var(out, (x,), lambda g: (g * out * (1.0 - out),))


def tanh(x):
    out = np.tanh(x.data)
    if not _grad_enabled:
        return Var(out)
    return Var(out, (x,), lambda g: (g * (1.0 - out * out),))


def concat_cols(a, b):
    """Concatenate (B, D1) and (B, D2) into (B, D1+D2)."""
    d1 = a.data.shape[1]
    out = np.concatenate([a.data, b.data], axis=1)
    if not _grad_enabled:
        return Var(out)
    return Var(out, (a, b), lambda g: (g[:, :d1], g[:, d1:]))


def slice_cols(x, start, stop):
    """Column slice x[:, start:stop] of a (B, D) node."""
    out = x.data[:, start:stop]
    if not _grad_enabled:
        return Var(out)

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[:, start:stop] = g
        return (gx,)

    return Var(out, (x,), bw)


def embed(table, ids):
    """Row lookup table[ids] for an int array ids of shape (B,)."""
    ids = np.asarray(ids)
    if not _grad_enabled:
        return Var(table.data[ids])

    def bw(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, ids, g)
        return (gt,)

    return Var(table.data[ids], (table,), bw)


def nll(logits, ids):
    """Per-row negative log-softmax likelihood of the given class ids.

    logits (B, K), ids (B,) -> (B,). Log-sum-exp is max-shifted so saturated
    logits stay finite.
    """
    ids = np.asarray(ids)
    z = logits.data
    m = z.max(axis=1, keepdims=True)
    shifted = z - m
    lse = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    out = (lse - shifted[np.arange(z.shape[0]), ids].reshape(-1, 1)).ravel()
    if not _grad_enabled:
        return Var(out)

    def bw(g):
        p = np.exp(shifted - lse)
        p[np.arange(z.shape[0]), ids] -= 1.0
        return (p * g[:, None],)

    return Var(out, (logits,), bw)


def softmax_rows(x):
    """Row-wise softmax of (B, T)."""
    z = x.data
    m = z.max(axis=1, keepdims=True)
    e = np.exp(z - m)
    p = e / e.sum(axis=1, keepdims=True)
    if not _grad_enabled:
        return Var(p)
    return Var(p, (x,), lambda g: (p * (g - (g * p).sum(axis=1, keepdims=True)),))


def stack_seq(items):
    """Stack T nodes of shape (B, N) into one (T, B, N) node."""
    out = np.stack([v.data for v in items])
    if not _grad_enabled:
        return Var(out)
    return Var(out, tuple(items), lambda g: tuple(g[t] for t in range(len(items))))


def stack_cols(items):
    """Stack T nodes of shape (B,) into one (B, T) node."""
    out = np.stack([v.data for v in items], axis=1)
    if not _grad_enabled:
        return Var(out)
    return Var(out, tuple(items), lambda g: tuple(g[:, t] for t in range(len(items))))


def attend(weights, stacked):
    """Weighted sum over positions: (B, T) x (T, B, N) -> (B, N)."""
    wd, hd = weights.data, stacked.data
    out = np.einsum("bt,tbn->bn", wd, hd)
    if not _grad_enabled:
        return Var(out)
    return Var(
        out,
        (weights, stacked),
        lambda g: (np.einsum("bn,tbn->bt", g, hd), np.einsum("bt,bn->tbn", wd, g)),
    )


def dot_const(v, w):
    """Scalar <v, w> against a plain constant vector w (masks, 1/B weights)."""
    out = float(v.data @ w)
    if not _grad_enabled:
        return Var(out)
    return Var(out, (v,), lambda g: (g * w,))


def add_scalars(items):
    """Sum of python-float scalar nodes."""
    out = math.fsum(v.data for v in items)
    if not _grad_enabled:
        return Var(out)
    return Var(out, tuple(items), lambda g: (g,) * len(items))


# ---------------------------------------------------------------------------
# parameter tape


class TapeEntry:
    __slots__ = ("value", "grad", "accum")

    def __init__(self, value):
        self.value = value
        self.grad = np.zeros_like(value)
        self.accum = np.zeros_like(value)


class ParamTape:
    """Registry of named trainable tensors with grads and AdaGrad statistics."""

    def __init__(self, dtype=np.float64):
        self.dtype = np.dtype(dtype)
        self.entries: dict[str, TapeEntry] = {}

    def register(self, name, value):
        if name in self.entries:
            raise ValueError(f"parameter {name!r} already registered")
        arr = np.array(value, dtype=self.dtype)
        self.entries[name] = TapeEntry(arr)
        return arr

    def __contains__(self, name):
        return name in self.entries

    def names(self):
        return list(self.entries)

    def value(self, name):
        return self.entries[name].value

    def zero_grads(self):
        for e in self.entries.values():
            e.grad[...] = 0.0

    def leaf_vars(self):
        """Fresh leaf nodes sharing storage with the tape values."""
        return {name: Var(e.value) for name, e in self.entries.items()}

    def accumulate_from(self, leaves):
        """Fold leaf grads into the tape, rejecting NaN per parameter."""
        for name, var in leaves.items():
            if var.grad is None:
                continue
            if not np.all(np.isfinite(var.grad)):
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            self.entries[name].grad += var.grad

    def global_grad_norm(self):
        total = 0.0
        for e in self.entries.values():
            total += float(np.sum(e.grad * e.grad))
        return math.sqrt(total)

    def total_size(self, prefix=""):
        return sum(
            e.value.size for name, e in self.entries.items() if name.startswith(prefix)
        )

    def state_dict(self):
        return {name: e.value.copy() for name, e in self.entries.items()}


def backprop_sequence(model, batch, tape):
    """Forward + reverse pass; grads land on the tape, the record is returned.

    Loss reduction contract: mean over batch elements, sum over unmasked
    time steps. Raises NumericError on NaN in the loss or any gradient.
    """
    leaves = tape.leaf_vars()
    objective, record = model.build_loss(leaves, batch)
    if not math.isfinite(objective.data):
        raise NumericError("non-finite training loss")
    backward(objective)
    tape.accumulate_from(leaves)
    return record


def sequence_loss(model, batch, tape):
    """Forward-only objective value (used by the finite-difference loop)."""
    with no_grad():
        objective, _ = model.build_loss(tape.leaf_vars(), batch)
    return objective.data


def adagrad_step(tape, lr, epsilon=1e-8):
    """AdaGrad update: accum += g^2; value -= lr * g / (sqrt(accum) + eps).

    Grads are zeroed afterwards. Entries where sqrt(accum) + eps == 0 (only
    possible with eps=0 and a zero grad history) are left untouched.
    """
    for e in tape.entries.values():
        np.add(e.accum, e.grad * e.grad, out=e.accum)
        denom = np.sqrt(e.accum) + epsilon
        update = np.divide(
            e.grad, denom, out=np.zeros_like(e.grad), where=denom > 0.0
        )
        e.value -= lr * update
        e.grad[...] = 0.0


def clip_global_norm(tape, max_norm):
    """Scale all grads by max_norm/||g|| when the global norm exceeds it."""
    if max_norm <= 0:
        raise ValueError("max_norm must be positive")
    norm = tape.global_grad_norm()
    if norm > max_norm:
        factor = max_norm / norm
        for e in tape.entries.values():
            e.grad *= factor
    return norm


# ---------------------------------------------------------------------------
# finite-difference verification


@dataclass
class GradCheckReport:
    """Central-difference agreement per parameter tensor."""

    step: float
    threshold: float
    per_param: dict[str, float] = field(default_factory=dict)

    @property
    def max_rel_error(self):
        return max(self.per_param.values(), default=0.0)

    @property
    def passing(self):
        return self.max_rel_error < self.threshold

    def summary(self):
        lines = [
            f"grad check: step={self.step:g} threshold={self.threshold:g} "
            f"-> {'PASS' if self.passing else 'FAIL'} "
            f"(max rel err {self.max_rel_error:.3e})"
        ]
        for name, err in self.per_param.items():
            flag = "ok " if err < self.threshold else "BAD"
            lines.append(f"  {flag} {name:<28} {err:.3e}")
        return "\n".join(lines)


def _sample_indices(size, cap):
    if size <= cap:
        return range(size)
    stride = size / cap
    return sorted({int(i * stride) for i in range(cap)})


def grad_check(model, batch, step=1e-5, threshold=1e-4, names=None, entry_cap=200):
    """Compare tape gradients against central finite differences.

    For every scalar parameter p (capped at `entry_cap` sampled entries per
    tensor): numeric = (L(p+h) - L(p-h)) / 2h, relative error with
    denominator max(|analytic|, |numeric|, 1e-8). Parameters excluded via
    `names` do not appear in the report.
    """
    if not (1e-7 <= step <= 1e-4):
        raise ValueError(f"step {step:g} outside [1e-7, 1e-4]")
    tape = model.tape
    tape.zero_grads()
    backprop_sequence(model, batch, tape)
    report = GradCheckReport(step=step, threshold=threshold)
    check_names = tape.names() if names is None else [n for n in tape.names() if n in names]
    for name in check_names:
        entry = tape.entries[name]
        flat_value = entry.value.reshape(-1)
        flat_grad = entry.grad.reshape(-1)
        worst = 0.0
        for idx in _sample_indices(flat_value.size, entry_cap):
            saved = flat_value[idx]
            flat_value[idx] = saved + step
            loss_plus = sequence_loss(model, batch, tape)
            flat_value[idx] = saved - step
            loss_minus = sequence_loss(model, batch, tape)
            flat_value[idx] = saved
            numeric = (loss_plus - loss_minus) / (2.0 * step)
            analytic = flat_grad[idx]
            denom = max(abs(analytic), abs(numeric), 1e-8)
            worst = max(worst, abs(analytic - numeric) / denom)
        report.per_param[name] = worst
    tape.zero_grads()
    return report
