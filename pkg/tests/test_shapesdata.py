import json
import math
import os
import shutil

import numpy as np
import pytest

from collections import Counter

from cpmask.exceptions import AnnotationValidationError, DatasetError, GeometryError, MalformedAnnotationError
from cpmask.maskops import Box, mask_iou
from cpmask.shapesdata import ShapeSpec, generate_dataset, load_dataset, rasterize_shape, sample_scene
from cpmask.shapesdata.generate import category_table
from cpmask.shapesdata.registry import shapes, textures


def spec(category, scale, rotation=0.0, center=(48.0, 48.0)):
    return ShapeSpec(
        category=category,
        center=list(center),
        scale=scale,
        rotation=rotation,
        texture="stripes",
        texture_params={"period": 6.0, "angle": 0.0, "contrast": 0.3},
        base_color=[0.5, 0.5, 0.5]
    )


class TestRasterize:
    def test_square_area(self):
        assert rasterize_shape(spec("square", 20), 96, 96).sum() == 400

    @pytest.mark.parametrize("r", [8, 11.5, 20])
    def test_circle_area(self, r):
        area = rasterize_shape(spec("circle", r), 96, 96).sum()
        assert abs(area - math.pi * r * r) <= 0.05 * math.pi * r * r

    @pytest.mark.parametrize("category, turn", [("square", math.pi / 2), ("pentagon", 2 * math.pi / 5), ("ellipse", math.pi), ("star", 4 * math.pi / 5)])
    def test_symmetric_rotation(self, category, turn):
        base = rasterize_shape(spec(category, 16, 0.3), 96, 96)
        np.testing.assert_array_equal(rasterize_shape(spec(category, 16, 0.3 + turn), 96, 96), base)

    def test_every_category_draws(self):
        for name in shapes():
            mask = rasterize_shape(spec(name, 12, 0.7), 96, 96)
            assert mask.any()
            box = Box.from_mask(mask)
            assert box.x >= 2 and box.y >= 2 and box.x2 <= 94 and box.y2 <= 94

    def test_out_of_bounds(self):
        with pytest.raises(GeometryError):
            rasterize_shape(spec("circle", 10, center=(5.0, 48.0)), 96, 96)

    def test_min_scale(self):
        with pytest.raises(GeometryError):
            spec("circle", 7.5)


class TestScenes:
    def test_scene_invariants(self):
        cats = [(1, "square"), (2, "circle"), (3, "triangle"), (4, "pentagon"), (5, "star"), (6, "ellipse")]
        for seed in range(30):
            scene = sample_scene(np.random.default_rng(seed), cats, 96, 96)
            assert 1 <= len(scene.instances) <= 3
            assert scene.image.shape == (96, 96, 3) and scene.image.dtype == np.uint8
            for i, inst in enumerate(scene.instances):
                assert inst.mask.any()
                assert Box.from_mask(inst.mask) == inst.box
                for other in scene.instances[i + 1:]:
                    assert mask_iou(inst.mask, other.mask) <= 0.2

    def test_textures_shared_across_splits(self):
        cats = [(1, "square"), (2, "circle"), (3, "triangle"), (4, "pentagon"), (5, "star"), (6, "ellipse")]
        kinds = {"base": Counter(), "novel": Counter()}
        for seed in range(2000):
            for inst in sample_scene(np.random.default_rng([99, seed]), cats, 40, 40).instances:
                kinds["base" if inst.category_id <= 3 else "novel"][inst.spec.texture] += 1
        names = sorted(textures().keys())
        p = np.array([kinds["base"][k] for k in names], float)
        q = np.array([kinds["novel"][k] for k in names], float)
        assert 0.5 * np.abs(p / p.sum() - q / q.sum()).sum() <= 0.05

    @pytest.mark.slow
    def test_category_histogram(self):
        cats = [(1, "square"), (2, "circle"), (3, "triangle"), (4, "pentagon"), (5, "star"), (6, "ellipse")]
        counts = Counter()
        for seed in range(1000):
            counts.update(i.category_id for i in sample_scene(np.random.default_rng([7, seed]), cats, 96, 96).instances)
        expected = sum(counts.values()) / len(cats)
        for cat, _ in cats:
            assert abs(counts[cat] - expected) <= 0.2 * expected


class TestCategoryTable:
    def test_ids(self):
        table = category_table(["square"], ["star", "circle"])
        assert [(c["id"], c["name"], c["split"]) for c in table] == [(1, "square", "base"), (2, "star", "novel"), (3, "circle", "novel")]

    @pytest.mark.parametrize("base, novel", [([], ["star"]), (["star"], []), (["star"], ["star"]), (["hexagon"], ["star"])])
    def test_invalid(self, base, novel):
        with pytest.raises(DatasetError):
            category_table(base, novel)


class TestGenerateLoad:
    def test_counts(self, dataset_dir, dataset):
        with open(os.path.join(dataset_dir, "annotations.json")) as f:
            data = json.load(f)
        assert len(data["images"]) == 24
        per_image = Counter(a["image_id"] for a in data["annotations"])
        assert all(1 <= per_image[img["id"]] <= 3 for img in data["images"])
        assert len(dataset) == 24
        assert len(dataset.subset("train")) == 16 and len(dataset.subset("val")) == 8
        assert sum(len(s.instances) for s in dataset) == len(data["annotations"])
        assert sorted({i.category_id for s in dataset for i in s.instances}) == sorted({a["category_id"] for a in data["annotations"]})
        with open(os.path.join(dataset_dir, "manifest.json")) as f:
            manifest = json.load(f)
        assert manifest["seed"] == 3 and manifest["counts"]["train"] == 16
        assert manifest["splits"] == {"base": ["square", "circle", "triangle"], "novel": ["pentagon", "star", "ellipse"]}

    def test_loaded_masks_match_specs(self, dataset):
        sample = dataset[0]
        assert sample.image_float().shape == (3, 64, 64)
        for inst in sample.instances:
            assert inst.spec is not None
            assert not (inst.mask & ~rasterize_shape(inst.spec, 64, 64)).any()

    def test_deterministic(self, tmp_path):
        for name in ("a", "b"):
            generate_dataset(seed=11, n_train=5, n_val=2, height=64, width=64, out_dir=str(tmp_path / name))
        for fname in ("annotations.json", "manifest.json", os.path.join("images", "000003.png")):
            assert (tmp_path / "a" / fname).read_bytes() == (tmp_path / "b" / fname).read_bytes()

    def test_threaded_matches_serial(self, tmp_path):
        generate_dataset(seed=5, n_train=6, n_val=0, height=48, width=48, out_dir=str(tmp_path / "serial"), workers=1)
        generate_dataset(seed=5, n_train=6, n_val=0, height=48, width=48, out_dir=str(tmp_path / "threaded"), workers=4)
        assert (tmp_path / "serial" / "annotations.json").read_bytes() == (tmp_path / "threaded" / "annotations.json").read_bytes()

    def _corrupt(self, dataset_dir, tmp_path, edit):
        root = tmp_path / "corrupt"
        shutil.copytree(dataset_dir, root)
        path = root / "annotations.json"
        data = json.loads(path.read_text())
        edit(data["annotations"][0])
        path.write_text(json.dumps(data))
        return str(root), data["annotations"][0]

    def test_count_mismatch(self, dataset_dir, tmp_path):
        def edit(ann):
            ann["segmentation"]["counts"][-1] += 3
        root, ann = self._corrupt(dataset_dir, tmp_path, edit)
        with pytest.raises(MalformedAnnotationError, match=f"annotation {ann['id']}"):
            load_dataset(root)

    def test_box_mismatch(self, dataset_dir, tmp_path):
        def edit(ann):
            ann["bbox"][0] += 2.5
        root, ann = self._corrupt(dataset_dir, tmp_path, edit)
        with pytest.raises(AnnotationValidationError, match=f"image {ann['image_id']}"):
            load_dataset(root)

    def test_box_within_tolerance(self, dataset_dir, tmp_path):
        def edit(ann):
            ann["bbox"][0] += 0.75
        root, _ = self._corrupt(dataset_dir, tmp_path, edit)
        assert len(load_dataset(root)) == 24

    def test_missing_annotations(self, tmp_path):
        with pytest.raises(DatasetError):
            load_dataset(str(tmp_path))

    def test_unknown_image_id(self, dataset):
        with pytest.raises(DatasetError):
            dataset.by_id(10 ** 6)
