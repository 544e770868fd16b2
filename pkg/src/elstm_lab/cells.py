"""Recurrent cell zoo: plain recurrence, gated cells, and a scaled variant.

Every cell maps (input x_t, previous state) -> new state, batch-first, with
`Var` nodes so gradients flow through the unroll. The cells implemented:

* ``srn``             c_t = W_c c_{t-1} + W_in x_t,  h_t = tanh(c_t)
* ``lstm``            forget/input/output gates over a joint input I_t
* ``gru``             update/reset gates mixing h_{t-1} into a candidate
* ``simplified-gru``  gru with the recurrent U matrices removed
* ``elstm``           lstm plus a trainable per-position scaling vector
                      s_{t_s} (periodic with period T_s) and a cell bias b:
                      c_t = f ⊙ c_{t-1} + s_{t_s} ⊙ i ⊙ tanh(W_in I_t) + b

Gated cells that consume a joint input support two wirings: the joint input
is either [x_t; h_{t-1}] (``concat-prev-output``, width M+N) or just x_t
(``input-only``, width M). The GRU family mixes h_{t-1} through dedicated
U matrices instead and rejects ``input-only``; the plain recurrence carries
its state through W_c and is inherently input-only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import autodiff as ad


class CellKind(str, Enum):
    SRN = "srn"
    LSTM = "lstm"
    GRU = "gru"
    SIMPLIFIED_GRU = "simplified-gru"
    ELSTM = "elstm"


class InputMode(str, Enum):
    CONCAT_PREV_OUTPUT = "concat-prev-output"
    INPUT_ONLY = "input-only"


@dataclass
class CellSpec:
    """Sizes and wiring of one recurrent cell.

    input_size M is the width of x_t, hidden_size N the width of the state,
    scale_period T_s the length of the periodic scaling table (elstm only).
    """

    kind: CellKind
    input_size: int
    hidden_size: int
    input_mode: InputMode = InputMode.CONCAT_PREV_OUTPUT
    scale_period: int = 1

    def __post_init__(self):
        self.kind = CellKind(self.kind)
        self.input_mode = InputMode(self.input_mode)
        if self.input_size < 1 or self.hidden_size < 1:
            raise ValueError(
                f"cell sizes must be positive, got M={self.input_size} "
                f"N={self.hidden_size}"
            )
        if self.scale_period < 1:
            raise ValueError(f"scale_period must be >= 1, got {self.scale_period}")
        if self.kind is CellKind.SRN:
            # the plain recurrence consumes x_t only; its memory is W_c
            self.input_mode = InputMode.INPUT_ONLY
        if (
            self.kind in (CellKind.GRU, CellKind.SIMPLIFIED_GRU)
            and self.input_mode is InputMode.INPUT_ONLY
        ):
            raise ValueError(
                f"{self.kind.value} mixes the previous state through its own "
                "U matrices; input-only wiring does not apply"
            )

    @property
    def joint_input_size(self):
        """Width D of the joint input seen by the gate matrices."""
        if self.input_mode is InputMode.CONCAT_PREV_OUTPUT and self.kind in (
            CellKind.LSTM,
            CellKind.ELSTM,
        ):
            return self.input_size + self.hidden_size
        return self.input_size

    def parameter_count(self):
        """Exact number of scalar parameters the cell registers."""
        m, n, d = self.input_size, self.hidden_size, self.joint_input_size
        if self.kind is CellKind.SRN:
            return n * n + n * m
        if self.kind is CellKind.LSTM:
            return 4 * n * (d + 1)
        if self.kind is CellKind.GRU:
            return 3 * n * (m + n + 1)
        if self.kind is CellKind.SIMPLIFIED_GRU:
            return 2 * n * (m + 1)
        if self.kind is CellKind.ELSTM:
            return 4 * n * (d + 1) + n * self.scale_period + n
        raise ValueError(f"unknown cell kind {self.kind!r}")


def _uniform_init(rng, shape, fan_in):
    bound = 1.0 / math.sqrt(fan_in)
    return rng.uniform(-bound, bound, size=shape)


class _CellBase:
    """Shared plumbing: parameter registration and leaf lookup."""

    def __init__(self, spec, tape, prefix, rng):
        self.spec = spec
        self.prefix = prefix
        self.tape = tape
        self._register(tape, rng)

    def _add(self, tape, name, value):
        tape.register(f"{self.prefix}.{name}", value)

    def p(self, leaves, name):
        return leaves[f"{self.prefix}.{name}"]

    def value(self, name):
        return self.tape.value(f"{self.prefix}.{name}")

    def _joint(self, x, h_prev):
        if self.spec.input_mode is InputMode.CONCAT_PREV_OUTPUT:
            return ad.concat_cols(x, h_prev)
        return x

    def init_state(self, batch_size):
        zeros = np.zeros((batch_size, self.spec.hidden_size))
        return tuple(ad.const(zeros.copy()) for _ in range(self.state_width))

    def numpy_params(self):
        """Plain-array view of the cell parameters (shared storage)."""
        return {
            name: self.value(name)
            for name in self.param_names
        }


class SRNCell(_CellBase):
    """c_t = W_c c_{t-1} + W_in x_t with h_t = tanh(c_t)."""

    param_names = ("W_c", "W_in")
    state_width = 2  # (c, h)

    def _register(self, tape, rng):
        m, n = self.spec.input_size, self.spec.hidden_size
        self._add(tape, "W_c", _uniform_init(rng, (n, n), n))
        self._add(tape, "W_in", _uniform_init(rng, (n, m), m))

    def step(self, leaves, x, state, t):
        c_prev, _ = state
        c = ad.add(
            ad.linear(c_prev, self.p(leaves, "W_c")),
            ad.linear(x, self.p(leaves, "W_in")),
        )
        return c, ad.tanh(c)

    def output(self, state):
        return state[1]

    def memory(self, state):
        return state[0]


class LSTMCell(_CellBase):
    """Forget/input/output-gated cell over the joint input I_t.

    c_t = σ(W_f I_t + b_f) ⊙ c_{t-1} + σ(W_i I_t + b_i) ⊙ tanh(W_in I_t + b_in)
    h_t = σ(W_o I_t + b_o) ⊙ tanh(c_t)
    """

    param_names = ("W_f", "W_i", "W_o", "W_in", "b_f", "b_i", "b_o", "b_in")
    state_width = 2  # (c, h)

    def _register(self, tape, rng):
        n, d = self.spec.hidden_size, self.spec.joint_input_size
        for name in ("W_f", "W_i", "W_o", "W_in"):
            self._add(tape, name, _uniform_init(rng, (n, d), d))
        for name in ("b_f", "b_i", "b_o", "b_in"):
            self._add(tape, name, np.zeros(n))

    def _gates(self, leaves, joint):
        f = ad.sigmoid(ad.affine(joint, self.p(leaves, "W_f"), self.p(leaves, "b_f")))
        i = ad.sigmoid(ad.affine(joint, self.p(leaves, "W_i"), self.p(leaves, "b_i")))
        o = ad.sigmoid(ad.affine(joint, self.p(leaves, "W_o"), self.p(leaves, "b_o")))
        g = ad.tanh(ad.affine(joint, self.p(leaves, "W_in"), self.p(leaves, "b_in")))
        return f, i, o, g

    def step(self, leaves, x, state, t):
        c_prev, h_prev = state
        f, i, o, g = self._gates(leaves, self._joint(x, h_prev))
        c = ad.add(ad.mul(f, c_prev), ad.mul(i, g))
        return c, ad.mul(o, ad.tanh(c))

    def output(self, state):
        return state[1]

    def memory(self, state):
        return state[0]


class ELSTMCell(LSTMCell):
    """Gated cell with a periodic, trainable scaling of the write path.

    The write term i_t ⊙ tanh(W_in I_t + b_in) is scaled element-wise by row
    t_s = ((t - 1) mod T_s) of the table s before entering the cell, and a
    free bias b is added each step:

        c_t = f_t ⊙ c_{t-1} + s_{t_s} ⊙ i_t ⊙ tanh(W_in I_t + b_in) + b

    With s ≡ 1 and b ≡ 0 (the initial values) the cell reproduces the plain
    gated recurrence exactly.
    """

    param_names = LSTMCell.param_names + ("s", "b")

    def _register(self, tape, rng):
        super()._register(tape, rng)
        n = self.spec.hidden_size
        self._add(tape, "s", np.ones((self.spec.scale_period, n)))
        self._add(tape, "b", np.zeros(n))

    def step(self, leaves, x, state, t):
        if t < 1:
            raise ValueError(f"positions are 1-based, got t={t}")
        c_prev, h_prev = state
        f, i, o, g = self._gates(leaves, self._joint(x, h_prev))
        s_row = ad.table_row(self.p(leaves, "s"), (t - 1) % self.spec.scale_period)
        write = ad.mul_row(ad.mul(i, g), s_row)
        c = ad.add_row(ad.add(ad.mul(f, c_prev), write), self.p(leaves, "b"))
        return c, ad.mul(o, ad.tanh(c))


class GRUCell(_CellBase):
    """Update/reset-gated cell mixing h_{t-1} through U matrices.

    z_t = σ(W_z x_t + U_z h_{t-1} + b_z)
    r_t = σ(W_r x_t + U_r h_{t-1} + b_r)
    h̃_t = tanh(W x_t + U (r_t ⊙ h_{t-1}) + b)
    h_t = z_t ⊙ h_{t-1} + (1 - z_t) ⊙ h̃_t
    """

    param_names = ("W_z", "U_z", "b_z", "W_r", "U_r", "b_r", "W", "U", "b")
    state_width = 1  # (h,)

    def _register(self, tape, rng):
        m, n = self.spec.input_size, self.spec.hidden_size
        for name in ("W_z", "W_r", "W"):
            self._add(tape, name, _uniform_init(rng, (n, m), m))
        for name in ("U_z", "U_r", "U"):
            self._add(tape, name, _uniform_init(rng, (n, n), n))
        for name in ("b_z", "b_r", "b"):
            self._add(tape, name, np.zeros(n))

    def step(self, leaves, x, state, t):
        (h_prev,) = state
        z = ad.sigmoid(
            ad.add(
                ad.affine(x, self.p(leaves, "W_z"), self.p(leaves, "b_z")),
                ad.linear(h_prev, self.p(leaves, "U_z")),
            )
        )
        r = ad.sigmoid(
            ad.add(
                ad.affine(x, self.p(leaves, "W_r"), self.p(leaves, "b_r")),
                ad.linear(h_prev, self.p(leaves, "U_r")),
            )
        )
        cand = ad.tanh(
            ad.add(
                ad.affine(x, self.p(leaves, "W"), self.p(leaves, "b")),
                ad.linear(ad.mul(r, h_prev), self.p(leaves, "U")),
            )
        )
        h = ad.add(ad.mul(z, h_prev), ad.mul(ad.sub_const(1.0, z), cand))
        return (h,)

    def output(self, state):
        return state[0]

    def memory(self, state):
        return state[0]


class SimplifiedGRUCell(_CellBase):
    """GRU with the recurrent U matrices removed (set to zero).

    The reset gate becomes inert and is dropped; what remains is a learned
    convex interpolation between the previous state and an input-driven
    candidate:

        z_t = σ(W_z x_t + b_z),  h̃_t = tanh(W x_t + b)
        h_t = z_t ⊙ h_{t-1} + (1 - z_t) ⊙ h̃_t
    """

    param_names = ("W_z", "b_z", "W", "b")
    state_width = 1  # (h,)

    def _register(self, tape, rng):
        m, n = self.spec.input_size, self.spec.hidden_size
        self._add(tape, "W_z", _uniform_init(rng, (n, m), m))
        self._add(tape, "b_z", np.zeros(n))
        self._add(tape, "W", _uniform_init(rng, (n, m), m))
        self._add(tape, "b", np.zeros(n))

    def step(self, leaves, x, state, t):
        (h_prev,) = state
        z = ad.sigmoid(ad.affine(x, self.p(leaves, "W_z"), self.p(leaves, "b_z")))
        cand = ad.tanh(ad.affine(x, self.p(leaves, "W"), self.p(leaves, "b")))
        h = ad.add(ad.mul(z, h_prev), ad.mul(ad.sub_const(1.0, z), cand))
        return (h,)

    def output(self, state):
        return state[0]

    def memory(self, state):
        return state[0]


_CELL_CLASSES = {
    CellKind.SRN: SRNCell,
    CellKind.LSTM: LSTMCell,
    CellKind.GRU: GRUCell,
    CellKind.SIMPLIFIED_GRU: SimplifiedGRUCell,
    CellKind.ELSTM: ELSTMCell,
}


def make_cell(spec, tape, prefix, rng):
    """Instantiate the cell for `spec`, registering its parameters on `tape`."""
    return _CELL_CLASSES[CellKind(spec.kind)](spec, tape, prefix, rng)
