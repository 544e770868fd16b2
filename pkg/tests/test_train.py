"""Training loop, dataset metrics, toy growth/transfer, and the sweep."""

import dataclasses
import math

import numpy as np
import pytest

from elstm_lab.config import apply_preset, validate
from elstm_lab.data import detect_a_task, make_batch
from elstm_lab.models import Model, ModelConfig
from elstm_lab.train import (
    SWEEP_HEADER,
    dataset_metrics,
    dp_proxy_metrics,
    load_task,
    metrics_csv,
    run_toy_cell,
    run_toy_growth,
    sweep_csv,
    toy_run_config,
    toy_sweep,
    train_model,
    transfer_toy_model,
)


def toy_cfg(cell="lstm", T=4, seed=0, epochs=3, **kw):
    cfg = toy_run_config(cell, T, seed, epochs)
    return validate(dataclasses.replace(cfg, **kw)) if kw else cfg


class TestTrainModel:
    def test_history_and_metrics_file(self, tmp_path):
        cfg = toy_cfg(epochs=4)
        pairs, src, tgt = detect_a_task(4)
        from elstm_lab.train import build_model

        model = build_model(cfg, src, tgt)
        path = tmp_path / "metrics.csv"
        result = train_model(model, pairs, cfg, metrics_path=path)
        assert [m.epoch for m in result.history] == [1, 2, 3, 4]
        assert result.final is result.history[-1]
        assert all(math.isfinite(m.loss) for m in result.history)
        text = path.read_text()
        lines = text.strip().split("\n")
        assert lines[0] == "epoch,loss,perplexity,accuracy"
        assert len(lines) == 5
        first = lines[1].split(",")
        assert float(first[1]) == result.history[0].loss  # repr round-trips

    def test_step_counter_resumes(self):
        cfg = toy_cfg(epochs=2)
        pairs, src, tgt = detect_a_task(4)
        from elstm_lab.train import build_model

        model = build_model(cfg, src, tgt)
        batches_per_epoch = math.ceil(len(pairs) / cfg.batch_size)
        result = train_model(model, pairs, cfg, start_step=10)
        assert result.step == 10 + 2 * batches_per_epoch

    def test_training_solves_short_toy_task(self):
        loss, accuracy, model = run_toy_cell("lstm", 4, seed=1, epochs=100)
        assert loss < 0.05
        assert accuracy == 1.0
        assert model.config.scale_period == 4  # toy preset: period follows T

    def test_identical_runs_are_bit_identical(self):
        results = []
        for _ in range(2):
            cfg = toy_cfg(epochs=3, seed=5)
            pairs, src, tgt = detect_a_task(4)
            from elstm_lab.train import build_model

            model = build_model(cfg, src, tgt)
            train_model(model, pairs, cfg)
            results.append(model.tape.state_dict())
        a, b = results
        assert a.keys() == b.keys()
        for name in a:
            assert np.array_equal(a[name], b[name]), name


class TestDatasetMetrics:
    def test_uniform_model_scores_class_count(self):
        pairs, src, tgt = detect_a_task(5)
        cfg = toy_cfg(T=5)
        from elstm_lab.train import build_model

        model = build_model(cfg, src, tgt)
        for entry in model.tape.entries.values():
            entry.value[...] = 0.0
        stats = dataset_metrics(model, pairs, batch_size=3)
        assert stats["tokens"] == 6  # one decision per sample
        assert stats["loss"] == pytest.approx(math.log(len(tgt)), rel=1e-12)
        assert stats["perplexity"] == pytest.approx(len(tgt), rel=1e-12)
        assert stats["accuracy"] == 0.0  # argmax ties at pad, never a label

    def test_dp_proxy_metrics(self):
        cfg = ModelConfig(
            kind="basic",
            cell="lstm",
            source_vocab=8,
            target_vocab=6,
            embedding_dim=2,
            hidden_dim=2,
            targets_per_step=2,
        )
        model = Model(cfg, seed=0)
        for entry in model.tape.entries.values():
            entry.value[...] = 0.0
        b = model.tape.value("proj.b")
        b[4] = 5.0  # relation block always predicts 4
        b[6 + 5] = 5.0  # head block always predicts 5
        # rows: (rel, head) targets per token
        pairs = [
            ([4, 5], [4, 5, 4, 4]),  # heads: hit, miss; joints: hit, miss
            ([5], [5, 5]),  # head hit, relation miss -> uas-only credit
        ]
        batch_stats = dp_proxy_metrics(model, pairs, batch_size=2)
        assert batch_stats["uas_proxy"] == pytest.approx(2 / 3)
        assert batch_stats["las_proxy"] == pytest.approx(1 / 3)
        assert batch_stats["las_proxy"] <= batch_stats["uas_proxy"]


class TestLoadTask:
    def test_toy(self):
        cfg = toy_cfg(T=3)
        pairs, src, tgt = load_task(cfg)
        assert len(pairs) == 4
        assert len(src) == 6 and len(tgt) == 6

    def test_corpus_tasks_need_a_path(self):
        cfg = validate(dataclasses.replace(apply_preset("lm"), data_path=""))
        with pytest.raises(ValueError, match="requires data_path"):
            load_task(cfg)


class TestTransfer:
    def test_transfer_preserves_function_and_optimizer_state(self):
        cfg4 = toy_cfg(cell="elstm", T=4, epochs=6, input_mode="input-only")
        pairs4, src, tgt = detect_a_task(4)
        from elstm_lab.train import build_model

        model4 = build_model(cfg4, src, tgt)
        train_model(model4, pairs4, cfg4)
        before = dataset_metrics(model4, pairs4, cfg4.batch_size)

        cfg8 = toy_cfg(cell="elstm", T=8, epochs=1, input_mode="input-only")
        model8 = transfer_toy_model(model4, cfg8, src, tgt)
        # same function on the old inputs (scale rows tile cyclically)
        after = dataset_metrics(model8, pairs4, cfg4.batch_size)
        assert after == before
        s4 = model4.tape.value("cell.s")
        s8 = model8.tape.value("cell.s")
        assert s8.shape[0] == 8
        assert np.array_equal(s8, np.tile(s4, (2, 1)))
        for name, entry in model4.tape.entries.items():
            dst = model8.tape.entries[name]
            if entry.value.shape == dst.value.shape:
                assert np.array_equal(entry.value, dst.value), name
                assert np.array_equal(entry.accum, dst.accum), name
        a4 = model4.tape.entries["cell.s"].accum
        a8 = model8.tape.entries["cell.s"].accum
        assert np.array_equal(a8, np.tile(a4, (2, 1)))

    def test_growth_runs_stage_list(self):
        metrics, model = run_toy_growth("elstm", seed=0, stages=[(2, 4), (5, 4)])
        assert len(metrics) == 2
        assert model.config.scale_period == 5
        assert model.tape.value("cell.s").shape == (5, 1)
        assert all(math.isfinite(m.loss) for m in metrics)


class TestSweep:
    def test_rows_sorted_and_complete(self):
        rows = toy_sweep(2, 3, cells=["lstm", "srn"], seeds=[1, 0], epochs=2)
        assert [(r[0], r[1], r[2]) for r in rows] == [
            (2, "lstm", 0),
            (2, "lstm", 1),
            (2, "srn", 0),
            (2, "srn", 1),
            (3, "lstm", 0),
            (3, "lstm", 1),
            (3, "srn", 0),
            (3, "srn", 1),
        ]
        csv_text = sweep_csv(rows)
        assert csv_text.startswith(SWEEP_HEADER + "\n")
        assert len(csv_text.strip().split("\n")) == 9

    def test_parallel_matches_serial(self, monkeypatch):
        serial = toy_sweep(2, 2, cells=["lstm"], seeds=[0, 1], epochs=2)
        monkeypatch.setenv("ELSTM_LAB_THREADS", "2")
        parallel = toy_sweep(2, 2, cells=["lstm"], seeds=[0, 1], epochs=2)
        assert parallel == serial

    def test_bad_range(self):
        with pytest.raises(ValueError, match="exceeds"):
            toy_sweep(5, 4, cells=["lstm"], seeds=[0], epochs=1)
