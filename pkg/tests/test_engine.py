import json
import os

import numpy as np
import pytest
import torch

from cpmask.engine import (
    TrainState,
    configure_threads,
    finetune_fewshot,
    jitter_box,
    load_checkpoint,
    lr_at,
    save_checkpoint,
    select_fewshot,
    supervision_filter,
    train,
    train_step
)
from cpmask.exceptions import CheckpointError, ConfigError, DatasetError, NonFiniteLossError
from cpmask.maskops import Box
from cpmask.shapesdata import SceneSample


def params_of(state):
    return {n: p.detach().clone() for n, p in state.net.named_parameters()}


def novel_counts(dataset):
    train_set = dataset.subset("train")
    return {cat: len([i for i in train_set.instances() if i.category_id == cat]) for cat in train_set.category_ids("novel")}


class TestSchedule:
    def test_warmup(self, tiny_config):
        assert lr_at(tiny_config, 0) == pytest.approx(0.005 * 0.1)
        assert lr_at(tiny_config, 1) == pytest.approx(0.005 * 0.1)
        assert lr_at(tiny_config, 2) == pytest.approx(0.005)
        assert lr_at(tiny_config, 5) == pytest.approx(0.005)

    def test_jitter(self, rng):
        box = Box(10, 12, 20, 16)
        assert jitter_box(box, rng, 0.0, 64, 64) is box
        for _ in range(200):
            j = jitter_box(box, rng, 0.1, 64, 64)
            assert abs(j.x - box.x) <= 2.0 + 1e-9 and abs(j.x2 - box.x2) <= 2.0 + 1e-9
            assert abs(j.y - box.y) <= 1.6 + 1e-9 and abs(j.y2 - box.y2) <= 1.6 + 1e-9

    def test_jitter_clipped(self, rng):
        for _ in range(100):
            j = jitter_box(Box(0, 0, 64, 64), rng, 0.2, 64, 64)
            assert j.x >= 0 and j.y >= 0 and j.x2 <= 64 and j.y2 <= 64

    def test_supervision_filter(self, dataset):
        base = dataset.category_ids("base")
        novel = dataset.category_ids("novel")
        assert supervision_filter(dataset, "full")(novel[0], 1)
        partial = supervision_filter(dataset, "partial")
        assert partial(base[0], 1) and not partial(novel[0], 1)
        fewshot = supervision_filter(dataset, "fewshot", [7])
        assert fewshot(novel[0], 7) and not fewshot(novel[0], 8)

    def test_supervision_filter_base_limit(self, dataset):
        base = dataset.category_ids("base")
        limited = supervision_filter(dataset, "partial", base_categories=1)
        assert limited(base[0], 1)
        assert not any(limited(cat, 1) for cat in base[1:])
        assert not limited(dataset.category_ids("novel")[0], 1)
        with pytest.raises(ConfigError, match="base_categories"):
            supervision_filter(dataset, "partial", base_categories=len(base) + 1)


class TestTrainStep:
    def test_unsupervised_batch_leaves_params(self, tiny_config, dataset):
        state = TrainState.create(tiny_config.replace(supervision_mode="full"))
        batch = list(dataset.subset("train"))[:2]
        train_step(state, batch, lambda cat, ann: True, 0.005, 0.0)
        assert state.momentum_buffers()

        before = params_of(state)
        report = train_step(state, batch, lambda cat, ann: False, 0.005, 0.0)
        assert report.objective is None and report.total == 0.0
        for name, p in state.net.named_parameters():
            assert torch.equal(p, before[name]), name

    def test_novel_instances_add_no_gradient(self, tiny_config, dataset):
        train_set = dataset.subset("train")
        base_ids = set(train_set.category_ids("base"))
        scene = next(s for s in train_set if any(i.category_id in base_ids for i in s.instances))
        base_only = [i for i in scene.instances if i.category_id in base_ids]
        novel = train_set.instances("novel")[:2]
        assert novel

        def scene_with(instances):
            return SceneSample(image_id=scene.image_id, image=scene.image, instances=instances, background=scene.background, subset=scene.subset)

        state = TrainState.create(tiny_config)
        partial = supervision_filter(train_set, "partial")

        mixed = train_step(state, [scene_with(novel[:1] + base_only + novel[1:])], partial, 0.0, 0.0)
        mixed_grads = {n: p.grad.clone() for n, p in state.net.named_parameters() if p.grad is not None}
        clean = train_step(state, [scene_with(base_only)], partial, 0.0, 0.0)
        clean_grads = {n: p.grad.clone() for n, p in state.net.named_parameters() if p.grad is not None}

        assert mixed.n_rois_mask == clean.n_rois_mask == len(base_only)
        assert mixed.total == pytest.approx(clean.total)
        assert set(mixed_grads) == set(clean_grads) and mixed_grads
        for name, grad in mixed_grads.items():
            assert torch.equal(grad, clean_grads[name]), name

    def test_zero_lr(self, tiny_config, dataset):
        state = TrainState.create(tiny_config.replace(lr=0.0))
        before = params_of(state)
        train_step(state, list(dataset.subset("train"))[:2], lambda cat, ann: True, 0.0, 0.05)
        for name, p in state.net.named_parameters():
            assert torch.equal(p, before[name]), name

    def test_update_moves_params(self, tiny_config, dataset):
        state = TrainState.create(tiny_config)
        before = params_of(state)
        report = train_step(state, list(dataset.subset("train"))[:2], lambda cat, ann: True, 0.005, 0.0)
        assert report.n_rois_mask > 0
        assert not torch.equal(state.net.predictor.weight, before["predictor.weight"])
        assert not torch.equal(state.net.backbone.blocks[-1][0].weight, before["backbone.blocks.3.0.weight"])


class TestTrain:
    def test_deterministic(self, tiny_config, dataset):
        a = train(tiny_config, dataset)
        b = train(tiny_config, dataset)
        assert a.losses() == b.losses()
        for (name, p), q in zip(a.net.named_parameters(), b.net.parameters()):
            assert torch.equal(p, q), name

    def test_log_file(self, tiny_config, dataset, tmp_path):
        log = tmp_path / "train_log.jsonl"
        state = train(tiny_config, dataset, log_path=str(log))
        lines = [json.loads(line) for line in log.read_text().splitlines()]
        assert len(lines) == 6 == state.iteration
        assert [rec["iter"] for rec in lines] == list(range(6))
        assert set(lines[0]) == {"iter", "boundary", "affinity", "segment", "total", "lr", "wall_ms", "n_rois_affinity"}
        assert lines[0]["lr"] == pytest.approx(0.0005) and lines[-1]["lr"] == pytest.approx(0.005)
        assert all(np.isfinite(rec["total"]) for rec in lines)

    def test_resume_matches_continuous(self, tiny_config, dataset, tmp_path):
        config = tiny_config.replace(total_iters=100)
        continuous = train(config, dataset)

        first = train(config, dataset, iterations=50)
        path = str(tmp_path / "checkpoint.bin")
        save_checkpoint(first, path)
        resumed = train(config, dataset, state=load_checkpoint(path))

        assert first.iteration == 50
        assert resumed.iteration == continuous.iteration == 100
        np.testing.assert_allclose(resumed.losses(), continuous.losses()[50:], rtol=1e-6)
        for (name, p), q in zip(resumed.net.named_parameters(), continuous.net.parameters()):
            torch.testing.assert_close(p, q, rtol=1e-6, atol=1e-7, msg=name)

    def test_empty_train_split(self, tiny_config, dataset):
        with pytest.raises(DatasetError):
            train(tiny_config, dataset.subset("val"))

    def test_nonfinite_dump(self, tiny_config, dataset, tmp_path):
        state = TrainState.create(tiny_config.replace(supervision_mode="full"))
        with torch.no_grad():
            state.net.predictor.bias.fill_(float("nan"))
        with pytest.raises(NonFiniteLossError) as err:
            train(state.config, dataset, state=state, iterations=2, dump_dir=str(tmp_path))
        assert err.value.iteration == 0
        assert os.path.isfile(tmp_path / "nonfinite_iter0.bin")


class TestCheckpoint:
    def test_roundtrip(self, tiny_config, dataset, tmp_path):
        state = train(tiny_config, dataset, iterations=2)
        path = str(tmp_path / "checkpoint.bin")
        save_checkpoint(state, path)
        loaded = load_checkpoint(path)
        assert loaded.iteration == 2
        assert loaded.config == state.config
        assert loaded.running == pytest.approx(state.running)
        assert loaded.rng.bit_generator.state == state.rng.bit_generator.state
        for (name, p), q in zip(loaded.net.named_parameters(), state.net.parameters()):
            assert torch.equal(p, q), name
        assert set(loaded.momentum_buffers()) == set(state.momentum_buffers())

    def test_truncated(self, tiny_config, tmp_path):
        path = tmp_path / "checkpoint.bin"
        save_checkpoint(TrainState.create(tiny_config), str(path))
        data = path.read_bytes()
        path.write_bytes(data[:-10])
        with pytest.raises(CheckpointError):
            load_checkpoint(str(path))

    def test_architecture_mismatch(self, tiny_config, tmp_path):
        path = str(tmp_path / "checkpoint.bin")
        save_checkpoint(TrainState.create(tiny_config), path)
        with pytest.raises(CheckpointError):
            load_checkpoint(path, tiny_config.replace(channels=16))

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointError):
            load_checkpoint(str(tmp_path / "nope.bin"))


class TestFewShot:
    def test_selection_count(self, dataset):
        counts = novel_counts(dataset)
        shots = min(counts.values())
        assert shots >= 1
        chosen = select_fewshot(dataset.subset("train"), shots, seed=4)
        assert len(chosen) == shots * len(counts)
        novel = {i.annotation_id: i.category_id for i in dataset.subset("train").instances("novel")}
        assert chosen <= set(novel)
        for cat in counts:
            assert sum(1 for a in chosen if novel[a] == cat) == shots

    def test_selection_seeded(self, dataset):
        train_set = dataset.subset("train")
        assert select_fewshot(train_set, 1, seed=11) == select_fewshot(train_set, 1, seed=11)

    def test_too_few(self, dataset):
        with pytest.raises(DatasetError):
            select_fewshot(dataset.subset("train"), max(novel_counts(dataset).values()) + 1, seed=0)

    def test_zero_shots(self, dataset):
        with pytest.raises(ConfigError):
            select_fewshot(dataset.subset("train"), 0, seed=0)

    def test_finetune(self, tiny_config, dataset):
        state = train(tiny_config, dataset, iterations=2)
        state = finetune_fewshot(state, dataset, 1)
        assert state.iteration == 2 + tiny_config.finetune_iters
        assert state.config.supervision_mode == "fewshot"
        assert len(state.supervised_ids) == 3
        assert state.history[-1]["lr"] == pytest.approx(tiny_config.finetune_lr)


class TestThreads:
    def test_unset(self, monkeypatch):
        monkeypatch.delenv("CPMASK_THREADS", raising=False)
        assert configure_threads() is None

    def test_applied(self, monkeypatch):
        current = torch.get_num_threads()
        monkeypatch.setenv("CPMASK_THREADS", "1")
        try:
            assert configure_threads() == 1
            assert torch.get_num_threads() == 1
        finally:
            torch.set_num_threads(current)

    @pytest.mark.parametrize("value", ["0", "two"])
    def test_invalid(self, monkeypatch, value):
        monkeypatch.setenv("CPMASK_THREADS", value)
        with pytest.raises(ConfigError):
            configure_threads()
