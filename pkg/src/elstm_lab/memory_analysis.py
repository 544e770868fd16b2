"""Closed-form state expansions, decay bounds, and memory-response profiles.

The recurrences in `cells` accumulate state step by step. This module
computes the same final states by independent summation formulas, which
makes each position's contribution to the final memory explicit:

* plain recurrence:   c_T = Σ_k W_c^{T-k} W_in x_k, each term bounded by
                      σ_max(W_c)^{T-k} · |W_in x_k| — at-least-exponential
                      decay in the lag T-k.
* gated cell:         c_T = Σ_k [∏_{j>k} f_j] ⊙ i_k ⊙ tanh(W_in I_k + b_in),
                      the k-th term being that position's memory response m_k.
* scaled gated cell:  same with m_k additionally multiplied by the periodic
                      scaling row s_k (cell bias b assumed zero — the
                      expansion is exact only then).
* gateless gru:       h_T = Σ_k [∏_{j>k} z_j] ⊙ (1-z_k) ⊙ tanh(W x_k + b)
                      (derived by the same induction; h_0 = 0 drops the
                      carry term).

All functions here are pure numpy over single (unbatched) vectors; joint
inputs I_k are taken as given so that recurrent wirings where I_k contains
h_{k-1} can be analyzed from a recorded forward run.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .cells import CellKind, InputMode
from .numkernel import DimensionError, l2_norm, matpow, spectral_norm


def _as_matrix_list(xs):
    xs = [np.asarray(x, dtype=np.float64) for x in xs]
    if not xs:
        raise DimensionError("need at least one input vector")
    return xs


# ---------------------------------------------------------------------------
# plain recurrence


def srn_closed_form(W_c, W_in, xs):
    """Final state c_T = Σ_{k=1..T} W_c^{T-k} W_in x_k (c_0 = 0)."""
    xs = _as_matrix_list(xs)
    W_c = np.asarray(W_c, dtype=np.float64)
    W_in = np.asarray(W_in, dtype=np.float64)
    T = len(xs)
    total = np.zeros(W_c.shape[0])
    for k, x in enumerate(xs, start=1):
        total += matpow(W_c, T - k) @ (W_in @ x)
    return total


def srn_decay_bound(W_c, W_in, x_k, lag, rng=None):
    """Norm of one position's contribution and its spectral decay bound.

    Returns (|W_c^lag W_in x_k|, σ_max(W_c)^lag · |W_in x_k|); the first
    never exceeds the second (up to 1e-9 numerical slack).
    """
    if lag < 0:
        raise ValueError(f"lag must be >= 0, got {lag}")
    W_c = np.asarray(W_c, dtype=np.float64)
    W_in = np.asarray(W_in, dtype=np.float64)
    pushed = W_in @ np.asarray(x_k, dtype=np.float64)
    contribution = l2_norm(matpow(W_c, lag) @ pushed)
    bound = spectral_norm(W_c, rng=rng) ** lag * l2_norm(pushed)
    return contribution, bound


# ---------------------------------------------------------------------------
# gated cells


def _gate_sequences(params, inputs):
    """Per-step forget/input/candidate activations from the joint inputs."""
    fs, is_, gs = [], [], []
    for joint in inputs:
        fs.append(expit(params["W_f"] @ joint + params["b_f"]))
        is_.append(expit(params["W_i"] @ joint + params["b_i"]))
        gs.append(np.tanh(params["W_in"] @ joint + params["b_in"]))
    return fs, is_, gs


def _scale_rows(params, T):
    """Periodic scaling rows s_1..s_T resolved from the table, or None."""
    if "s" not in params:
        return None
    table = np.asarray(params["s"])
    period = table.shape[0]
    return [table[(k - 1) % period] for k in range(1, T + 1)]


def _response_terms(params, inputs, scaled):
    """m_k = [∏_{j>k} f_j] ⊙ (s_k ⊙) i_k ⊙ tanh(W_in I_k + b_in), k=1..T."""
    inputs = _as_matrix_list(inputs)
    fs, is_, gs = _gate_sequences(params, inputs)
    T = len(inputs)
    scales = _scale_rows(params, T) if scaled else None
    terms = []
    suffix = np.ones_like(fs[0])
    for k in range(T, 0, -1):
        term = suffix * is_[k - 1] * gs[k - 1]
        if scales is not None:
            term = term * scales[k - 1]
        terms.append(term)
        suffix = suffix * fs[k - 1]
    terms.reverse()
    return terms


def lstm_closed_form(params, inputs):
    """(c_T, h_T) by summation instead of recurrence.

    c_T = Σ_k [∏_{j=k+1..T} f_j] ⊙ i_k ⊙ tanh(W_in I_k + b_in), with the
    empty product for k = T equal to 1; h_T = o_T ⊙ tanh(c_T).
    """
    terms = _response_terms(params, inputs, scaled=False)
    c_T = np.sum(terms, axis=0)
    o_T = expit(params["W_o"] @ np.asarray(inputs[-1], dtype=np.float64) + params["b_o"])
    return c_T, o_T * np.tanh(c_T)


def elstm_closed_form(params, inputs):
    """As lstm_closed_form with each term scaled by its periodic row s_k.

    Exact only for cell bias b = 0; the bias, if present in `params`, is
    deliberately ignored so the expansion isolates input contributions.
    """
    terms = _response_terms(params, inputs, scaled=True)
    c_T = np.sum(terms, axis=0)
    o_T = expit(params["W_o"] @ np.asarray(inputs[-1], dtype=np.float64) + params["b_o"])
    return c_T, o_T * np.tanh(c_T)


def simplified_gru_closed_form(params, xs):
    """h_T = Σ_k [∏_{j=k+1..T} z_j] ⊙ (1-z_k) ⊙ tanh(W x_k + b), h_0 = 0.

    z_k = σ(W_z x_k + b_z). The carry term ∏_j z_j ⊙ h_0 vanishes under the
    rest condition. (Derived by the same induction as the gated-cell form
    and pinned against the recurrence by tests.)
    """
    xs = _as_matrix_list(xs)
    zs = [expit(params["W_z"] @ x + params["b_z"]) for x in xs]
    cands = [np.tanh(params["W"] @ x + params["b"]) for x in xs]
    total = np.zeros_like(zs[0])
    suffix = np.ones_like(zs[0])
    for k in range(len(xs), 0, -1):
        total += suffix * (1.0 - zs[k - 1]) * cands[k - 1]
        suffix = suffix * zs[k - 1]
    return total


# ---------------------------------------------------------------------------
# memory responses


@dataclass
class MemoryResponseProfile:
    """Per-position contributions m_k to the final memory state.

    responses has shape (T, N): row k-1 is position k's contribution. With
    zero cell bias the rows sum to c_T exactly.
    """

    kind: CellKind
    responses: np.ndarray

    @property
    def length(self):
        return self.responses.shape[0]

    @property
    def norms(self):
        return np.sqrt((self.responses**2).sum(axis=1))

    def total(self):
        return self.responses.sum(axis=0)

    def strength_ratio(self, position):
        """|m_position| / max_k |m_k| for a 1-based position."""
        norms = self.norms
        peak = norms.max()
        if peak == 0.0:
            return 0.0
        return float(norms[position - 1] / peak)

    def to_csv(self):
        n = self.responses.shape[1]
        buf = io.StringIO()
        header = ",".join(
            ["position"] + [f"component_{j}" for j in range(n)] + ["norm"]
        )
        buf.write(header + "\n")
        norms = self.norms
        for k in range(self.length):
            row = [str(k + 1)]
            row += [repr(float(v)) for v in self.responses[k]]
            row.append(repr(float(norms[k])))
            buf.write(",".join(row) + "\n")
        return buf.getvalue()


def memory_response(params, inputs, kind):
    """Profile of each position's contribution to the final memory state."""
    kind = CellKind(kind)
    if kind not in (CellKind.LSTM, CellKind.ELSTM):
        raise ValueError(f"memory responses are defined for gated cells, got {kind}")
    terms = _response_terms(params, inputs, scaled=kind is CellKind.ELSTM)
    return MemoryResponseProfile(kind=kind, responses=np.stack(terms))


# ---------------------------------------------------------------------------
# reference forward runs (for recording joint inputs of trained cells)


def record_gated_run(params, xs, input_mode, use_bias_b=True):
    """Unroll a gated cell on one unbatched sequence, recording everything.

    Returns a dict with lists `joint`, `c`, `h` (length T each). Used to
    obtain the I_k sequence that the closed forms and response profiles
    take as given, and as the recurrence oracle they are checked against.
    """
    xs = _as_matrix_list(xs)
    input_mode = InputMode(input_mode)
    n = params["W_f"].shape[0]
    scales = _scale_rows(params, len(xs))
    bias = params.get("b") if use_bias_b else None
    c = np.zeros(n)
    h = np.zeros(n)
    rec = {"joint": [], "c": [], "h": []}
    for t, x in enumerate(xs, start=1):
        joint = (
            np.concatenate([x, h])
            if input_mode is InputMode.CONCAT_PREV_OUTPUT
            else x
        )
        f = expit(params["W_f"] @ joint + params["b_f"])
        i = expit(params["W_i"] @ joint + params["b_i"])
        o = expit(params["W_o"] @ joint + params["b_o"])
        g = np.tanh(params["W_in"] @ joint + params["b_in"])
        write = i * g
        if scales is not None:
            write = write * scales[t - 1]
        c = f * c + write
        if scales is not None and bias is not None:
            c = c + bias
        h = o * np.tanh(c)
        rec["joint"].append(joint)
        rec["c"].append(c)
        rec["h"].append(h)
    return rec


def recurrence_from_joints(params, joints, scaled, include_bias=False):
    """c_T by stepping the gated recurrence over given joint inputs.

    Independent of the suffix-product summation in `_response_terms`; used
    to cross-check that a response profile sums back to the final state.
    """
    joints = _as_matrix_list(joints)
    fs, is_, gs = _gate_sequences(params, joints)
    scales = _scale_rows(params, len(joints)) if scaled else None
    c = np.zeros_like(fs[0])
    for k in range(len(joints)):
        write = is_[k] * gs[k]
        if scales is not None:
            write = write * scales[k]
        c = fs[k] * c + write
        if include_bias and "b" in params:
            c = c + params["b"]
    return c


def record_simplified_gru_run(params, xs):
    """Unroll the gateless interpolation cell, recording h_t (h_0 = 0)."""
    xs = _as_matrix_list(xs)
    h = np.zeros(params["W_z"].shape[0])
    hs = []
    for x in xs:
        z = expit(params["W_z"] @ x + params["b_z"])
        cand = np.tanh(params["W"] @ x + params["b"])
        h = z * h + (1.0 - z) * cand
        hs.append(h)
    return hs


def record_srn_run(W_c, W_in, xs):
    """Unroll the plain recurrence, recording c_t (c_0 = 0)."""
    xs = _as_matrix_list(xs)
    c = np.zeros(W_c.shape[0])
    cs = []
    for x in xs:
        c = W_c @ c + np.asarray(W_in) @ x
        cs.append(c)
    return cs
