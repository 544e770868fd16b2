"""Cell semantics: one hand-evaluated step per cell, wiring rules, inits."""

import numpy as np
import pytest

from elstm_lab import autodiff as ad
from elstm_lab.cells import CellKind, CellSpec, InputMode, make_cell
from elstm_lab.numkernel import make_rng


def sigma(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def build(kind, m=2, n=3, mode=InputMode.CONCAT_PREV_OUTPUT, ts=1, seed=0):
    spec = CellSpec(
        kind=kind, input_size=m, hidden_size=n, input_mode=mode, scale_period=ts
    )
    tape = ad.ParamTape()
    cell = make_cell(spec, tape, "cell", make_rng(seed))
    return cell, tape


def set_params(cell, rng):
    """Overwrite cell parameters with dense random values; returns the dict."""
    out = {}
    for name in cell.param_names:
        arr = cell.value(name)
        arr[...] = rng.normal(scale=0.7, size=arr.shape)
        out[name] = arr.copy()
    return out


class TestCellSpec:
    def test_rejects_nonpositive_sizes(self):
        with pytest.raises(ValueError):
            CellSpec(kind="lstm", input_size=0, hidden_size=3)
        with pytest.raises(ValueError):
            CellSpec(kind="lstm", input_size=2, hidden_size=-1)
        with pytest.raises(ValueError):
            CellSpec(kind="elstm", input_size=2, hidden_size=3, scale_period=0)

    def test_srn_is_always_input_only(self):
        spec = CellSpec(
            kind="srn",
            input_size=2,
            hidden_size=3,
            input_mode=InputMode.CONCAT_PREV_OUTPUT,
        )
        assert spec.input_mode is InputMode.INPUT_ONLY
        assert spec.joint_input_size == 2

    @pytest.mark.parametrize("kind", ["gru", "simplified-gru"])
    def test_gru_family_rejects_input_only(self, kind):
        with pytest.raises(ValueError, match="input-only"):
            CellSpec(
                kind=kind,
                input_size=2,
                hidden_size=3,
                input_mode=InputMode.INPUT_ONLY,
            )

    def test_joint_input_width(self):
        concat = CellSpec(kind="lstm", input_size=4, hidden_size=3)
        assert concat.joint_input_size == 7
        alone = CellSpec(
            kind="lstm", input_size=4, hidden_size=3, input_mode=InputMode.INPUT_ONLY
        )
        assert alone.joint_input_size == 4
        gru = CellSpec(kind="gru", input_size=4, hidden_size=3)
        assert gru.joint_input_size == 4  # state mixes through U, not the joint

    def test_parameter_count_formulas(self):
        m, n = 2, 3
        assert CellSpec(kind="srn", input_size=m, hidden_size=n).parameter_count() == (
            n * n + n * m
        )
        lstm = CellSpec(kind="lstm", input_size=m, hidden_size=n)
        assert lstm.parameter_count() == 4 * n * (m + n + 1)
        gru = CellSpec(kind="gru", input_size=m, hidden_size=n)
        assert gru.parameter_count() == 3 * n * (m + n + 1)
        sgru = CellSpec(kind="simplified-gru", input_size=m, hidden_size=n)
        assert sgru.parameter_count() == 2 * n * (m + 1)
        elstm = CellSpec(kind="elstm", input_size=m, hidden_size=n, scale_period=4)
        assert elstm.parameter_count() == 4 * n * (m + n + 1) + 4 * n + n


class TestInitialization:
    @pytest.mark.parametrize("kind", list(CellKind))
    def test_registered_count_matches_formula(self, kind):
        cell, tape = build(kind, m=3, n=4, ts=5)
        assert tape.total_size("cell") == cell.spec.parameter_count()

    def test_uniform_bounds_and_zero_biases(self):
        cell, _ = build(CellKind.LSTM, m=2, n=3)
        d = cell.spec.joint_input_size
        for name in ("W_f", "W_i", "W_o", "W_in"):
            w = cell.value(name)
            assert w.shape == (3, d)
            assert np.all(np.abs(w) <= 1.0 / np.sqrt(d))
            assert not np.allclose(w, 0.0)
        for name in ("b_f", "b_i", "b_o", "b_in"):
            assert np.array_equal(cell.value(name), np.zeros(3))

    def test_elstm_scale_table_starts_at_identity(self):
        cell, _ = build(CellKind.ELSTM, ts=6)
        assert np.array_equal(cell.value("s"), np.ones((6, 3)))
        assert np.array_equal(cell.value("b"), np.zeros(3))

    def test_init_state_zero_and_width(self):
        for kind, width in [
            (CellKind.SRN, 2),
            (CellKind.LSTM, 2),
            (CellKind.ELSTM, 2),
            (CellKind.GRU, 1),
            (CellKind.SIMPLIFIED_GRU, 1),
        ]:
            cell, _ = build(kind)
            state = cell.init_state(4)
            assert len(state) == width
            for part in state:
                assert part.data.shape == (4, 3)
                assert np.all(part.data == 0.0)

    def test_numpy_params_share_storage(self):
        cell, tape = build(CellKind.LSTM)
        view = cell.numpy_params()
        view["b_f"][0] = 42.0
        assert tape.value("cell.b_f")[0] == 42.0


def run_steps(cell, tape, xs_list, steps=None):
    """Drive cell.step through a list of (B, M) inputs; returns h history."""
    leaves = tape.leaf_vars()
    state = cell.init_state(xs_list[0].shape[0])
    hs = []
    for t, x in enumerate(xs_list, start=1):
        state = cell.step(leaves, ad.const(x), state, t)
        hs.append(cell.output(state).data.copy())
    return hs, state


class TestHandSteps:
    def test_srn_step(self, rng):
        cell, tape = build(CellKind.SRN, m=2, n=3)
        p = set_params(cell, rng)
        x1, x2 = rng.normal(size=(1, 2)), rng.normal(size=(1, 2))
        hs, state = run_steps(cell, tape, [x1, x2])
        c1 = x1 @ p["W_in"].T
        c2 = c1 @ p["W_c"].T + x2 @ p["W_in"].T
        assert np.allclose(hs[0], np.tanh(c1), atol=1e-12)
        assert np.allclose(hs[1], np.tanh(c2), atol=1e-12)
        assert np.allclose(cell.memory(state).data, c2, atol=1e-12)

    def test_lstm_step_concat(self, rng):
        cell, tape = build(CellKind.LSTM, m=2, n=3)
        p = set_params(cell, rng)
        x = rng.normal(size=(2, 2))
        hs, state = run_steps(cell, tape, [x])
        joint = np.concatenate([x, np.zeros((2, 3))], axis=1)
        f = sigma(joint @ p["W_f"].T + p["b_f"])
        i = sigma(joint @ p["W_i"].T + p["b_i"])
        o = sigma(joint @ p["W_o"].T + p["b_o"])
        g = np.tanh(joint @ p["W_in"].T + p["b_in"])
        c = i * g  # c_prev is zero
        assert np.allclose(cell.memory(state).data, c, atol=1e-12)
        assert np.allclose(hs[0], o * np.tanh(c), atol=1e-12)
        # second step sees [x; h_1]
        hs2, state2 = run_steps(cell, tape, [x, x])
        joint2 = np.concatenate([x, hs[0]], axis=1)
        f2 = sigma(joint2 @ p["W_f"].T + p["b_f"])
        i2 = sigma(joint2 @ p["W_i"].T + p["b_i"])
        g2 = np.tanh(joint2 @ p["W_in"].T + p["b_in"])
        c2 = f2 * c + i2 * g2
        assert np.allclose(cell.memory(state2).data, c2, atol=1e-12)

    def test_lstm_step_input_only(self, rng):
        cell, tape = build(CellKind.LSTM, m=2, n=3, mode=InputMode.INPUT_ONLY)
        p = set_params(cell, rng)
        x = rng.normal(size=(1, 2))
        hs, state = run_steps(cell, tape, [x])
        f = sigma(x @ p["W_f"].T + p["b_f"])
        i = sigma(x @ p["W_i"].T + p["b_i"])
        o = sigma(x @ p["W_o"].T + p["b_o"])
        g = np.tanh(x @ p["W_in"].T + p["b_in"])
        assert np.allclose(hs[0], o * np.tanh(i * g), atol=1e-12)

    def test_elstm_step_uses_periodic_row_and_bias(self, rng):
        cell, tape = build(CellKind.ELSTM, m=2, n=3, ts=3)
        p = set_params(cell, rng)
        xs = [rng.normal(size=(1, 2)) for _ in range(5)]
        hs, state = run_steps(cell, tape, xs)
        # independent replay: positions 1..5 use scale rows 0,1,2,0,1
        c = np.zeros((1, 3))
        h = np.zeros((1, 3))
        for t, x in enumerate(xs, start=1):
            joint = np.concatenate([x, h], axis=1)
            f = sigma(joint @ p["W_f"].T + p["b_f"])
            i = sigma(joint @ p["W_i"].T + p["b_i"])
            o = sigma(joint @ p["W_o"].T + p["b_o"])
            g = np.tanh(joint @ p["W_in"].T + p["b_in"])
            c = f * c + p["s"][(t - 1) % 3] * (i * g) + p["b"]
            h = o * np.tanh(c)
        assert np.allclose(cell.memory(state).data, c, atol=1e-12)
        assert np.allclose(hs[-1], h, atol=1e-12)

    def test_elstm_rejects_zero_position(self, rng):
        cell, tape = build(CellKind.ELSTM)
        leaves = tape.leaf_vars()
        state = cell.init_state(1)
        with pytest.raises(ValueError, match="1-based"):
            cell.step(leaves, ad.const(np.zeros((1, 2))), state, 0)

    def test_gru_step(self, rng):
        cell, tape = build(CellKind.GRU, m=2, n=3)
        p = set_params(cell, rng)
        xs = [rng.normal(size=(1, 2)) for _ in range(2)]
        hs, _ = run_steps(cell, tape, xs)
        h = np.zeros((1, 3))
        for x in xs:
            z = sigma(x @ p["W_z"].T + h @ p["U_z"].T + p["b_z"])
            r = sigma(x @ p["W_r"].T + h @ p["U_r"].T + p["b_r"])
            cand = np.tanh(x @ p["W"].T + (r * h) @ p["U"].T + p["b"])
            h = z * h + (1.0 - z) * cand
        assert np.allclose(hs[-1], h, atol=1e-12)

    def test_simplified_gru_step(self, rng):
        cell, tape = build(CellKind.SIMPLIFIED_GRU, m=2, n=3)
        p = set_params(cell, rng)
        xs = [rng.normal(size=(2, 2)) for _ in range(3)]
        hs, _ = run_steps(cell, tape, xs)
        h = np.zeros((2, 3))
        for x in xs:
            z = sigma(x @ p["W_z"].T + p["b_z"])
            cand = np.tanh(x @ p["W"].T + p["b"])
            h = z * h + (1.0 - z) * cand
        assert np.allclose(hs[-1], h, atol=1e-12)


class TestReductions:
    def test_gru_with_zero_u_matrices_is_simplified_gru(self, rng):
        gru, gtape = build(CellKind.GRU, m=2, n=3)
        set_params(gru, rng)
        for name in ("U_z", "U_r", "U"):
            gru.value(name)[...] = 0.0
        sgru, stape = build(CellKind.SIMPLIFIED_GRU, m=2, n=3)
        for name in ("W_z", "b_z", "W", "b"):
            sgru.value(name)[...] = gru.value(name)
        xs = [rng.normal(size=(2, 2)) for _ in range(6)]
        hs_g, _ = run_steps(gru, gtape, xs)
        hs_s, _ = run_steps(sgru, stape, xs)
        for a, b in zip(hs_g, hs_s):
            assert np.allclose(a, b, atol=1e-14)

    def test_elstm_with_identity_scale_is_lstm(self, rng):
        # same seed -> identical shared weights; s stays 1 and b stays 0
        lstm, ltape = build(CellKind.LSTM, m=2, n=3, seed=11)
        elstm, etape = build(CellKind.ELSTM, m=2, n=3, ts=4, seed=11)
        for name in ("W_f", "W_i", "W_o", "W_in"):
            assert np.array_equal(lstm.value(name), elstm.value(name))
        xs = [rng.normal(size=(2, 2)) for _ in range(9)]
        hs_l, state_l = run_steps(lstm, ltape, xs)
        hs_e, state_e = run_steps(elstm, etape, xs)
        for a, b in zip(hs_l, hs_e):
            assert np.max(np.abs(a - b)) < 1e-12
        assert np.max(np.abs(state_l[0].data - state_e[0].data)) < 1e-12


def test_make_cell_prefixes_parameters():
    cell, tape = build(CellKind.LSTM)
    assert all(name.startswith("cell.") for name in tape.names())
    with pytest.raises(KeyError):
        tape.entries["W_f"]
