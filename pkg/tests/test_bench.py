import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np

from pygeofuse.bench import (
    DihedralTransform,
    WeatherCondition,
    apply_transform,
    apply_weather,
    auxiliary_raster,
    export_dataset,
    generate_scene,
    invert_transform,
    load_dataset,
    random_shift_crop,
    read_image,
    render_views,
    synchronized_augment,
    write_image,
)
from pygeofuse.bench.dataset import MANIFEST_NAME
from pygeofuse.bench.scenes import mask_iou, roadmap_road_mask, satellite_road_mask
from pygeofuse.errors import ConfigurationError, DataError
from pygeofuse.utils import read_manifest


class TestWeather(unittest.TestCase):
    def setUp(self):
        self.image = np.random.default_rng(0).uniform(size=(24, 24, 3))

    def test_ten_conditions(self):
        self.assertEqual(len(WeatherCondition), 10)
        self.assertIs(WeatherCondition.parse("Fog+Rain"), WeatherCondition.FOG_RAIN)
        self.assertIs(WeatherCondition.parse("over_exposed"), WeatherCondition.OVER_EXPOSED)
        with self.assertRaises(DataError):
            WeatherCondition.parse("Hail")

    def test_normal_is_identity(self):
        np.testing.assert_array_equal(apply_weather(self.image, WeatherCondition.NORMAL, 1.0, 3), self.image)

    def test_zero_severity(self):
        for condition in WeatherCondition:
            np.testing.assert_array_equal(apply_weather(self.image, condition, 0.0, 3), self.image)

    def test_fog_is_monotone(self):
        out = apply_weather(self.image, WeatherCondition.FOG, 1.0, 3)
        self.assertTrue(np.all(out >= self.image))

    def test_range_shape_and_determinism(self):
        for condition in WeatherCondition:
            out = apply_weather(self.image, condition, 0.8, 11)
            self.assertEqual(out.shape, self.image.shape)
            self.assertTrue(out.min() >= 0.0 and out.max() <= 1.0)
            np.testing.assert_array_equal(out, apply_weather(self.image, condition, 0.8, 11))

    def test_seeded_overlays_differ(self):
        a = apply_weather(self.image, WeatherCondition.RAIN, 1.0, 1)
        b = apply_weather(self.image, WeatherCondition.RAIN, 1.0, 2)
        self.assertFalse(np.array_equal(a, b))

    def test_severity_range(self):
        for severity in (-0.1, 1.5):
            with self.assertRaises(ConfigurationError):
                apply_weather(self.image, WeatherCondition.FOG, severity, 0)


class TestScenes(unittest.TestCase):
    def test_determinism(self):
        self.assertEqual(generate_scene(5, 42), generate_scene(5, 42))
        views_a = render_views(generate_scene(5, 42), 32, view_seed=3)
        views_b = render_views(generate_scene(5, 42), 32, view_seed=3)
        for a, b in zip(views_a, views_b):
            np.testing.assert_array_equal(a, b)

    def test_distinct_road_graphs(self):
        roads = [generate_scene(class_id, 0).roads for class_id in range(32)]
        self.assertEqual(len(set(roads)), 32)

    def test_geometry_in_unit_square(self):
        for class_id in range(16):
            scene = generate_scene(class_id, 7)
            self.assertGreaterEqual(len(scene.roads), 2)
            self.assertGreaterEqual(len(scene.buildings), 1)
            for road in scene.roads:
                for x, y in road:
                    self.assertTrue(0.0 <= x <= 1.0 and 0.0 <= y <= 1.0)
            for b in scene.buildings:
                self.assertTrue(0.0 <= b.x0 <= b.x1 <= 1.0 and 0.0 <= b.y0 <= b.y1 <= 1.0)

    def test_roadmap_ignores_buildings(self):
        scene = generate_scene(3, 9)
        _, roadmap, _ = render_views(scene, 48)
        _, bare, _ = render_views(scene.without_buildings(), 48)
        np.testing.assert_array_equal(roadmap, bare)

    def test_alignment(self):
        for class_id in range(4):
            satellite, roadmap, drone = render_views(generate_scene(class_id, 1), 64)
            self.assertEqual(satellite.shape, (64, 64, 3))
            self.assertEqual(drone.shape, (64, 64, 3))
            self.assertGreaterEqual(mask_iou(satellite_road_mask(satellite), roadmap_road_mask(roadmap)), 0.9)

    def test_auxiliary_modalities(self):
        satellite, roadmap, _ = render_views(generate_scene(0, 0), 32)
        self.assertIs(auxiliary_raster("roadmap", satellite, roadmap), roadmap)
        np.testing.assert_array_equal(auxiliary_raster("blank", satellite, roadmap), np.ones((32, 32, 3)))
        pseudo = auxiliary_raster("pseudo", satellite, roadmap)
        self.assertEqual(pseudo.shape, (32, 32, 3))
        np.testing.assert_array_equal(pseudo[..., 0], pseudo[..., 2])
        with self.assertRaises(ConfigurationError):
            auxiliary_raster("lidar", satellite, roadmap)


class TestAugment(unittest.TestCase):
    def setUp(self):
        satellite, roadmap, _ = render_views(generate_scene(2, 5), 32)
        self.satellite, self.roadmap = satellite, roadmap

    def test_identity_transform(self):
        sat, road = synchronized_augment(self.satellite, self.roadmap, 0, transform=DihedralTransform())
        np.testing.assert_array_equal(sat, self.satellite)
        np.testing.assert_array_equal(road, self.roadmap)

    def test_inverse(self):
        for flip in (False, True):
            for turns in range(4):
                transform = DihedralTransform(flip, turns)
                sat, road = synchronized_augment(self.satellite, self.roadmap, 0, transform=transform)
                np.testing.assert_array_equal(invert_transform(sat, transform), self.satellite)
                np.testing.assert_array_equal(invert_transform(road, transform), self.roadmap)

    def test_same_transform_for_both(self):
        for seed in range(8):
            sat, road = synchronized_augment(self.satellite, self.roadmap, seed)
            before = mask_iou(satellite_road_mask(self.satellite), roadmap_road_mask(self.roadmap))
            after = mask_iou(satellite_road_mask(sat), roadmap_road_mask(road))
            self.assertEqual(before, after)

    def test_flip_then_rotate(self):
        image = np.arange(12.0).reshape(2, 2, 3)
        out = apply_transform(image, DihedralTransform(True, 1))
        np.testing.assert_array_equal(out, np.rot90(image[:, ::-1], 1, axes=(0, 1)))

    def test_size_mismatch(self):
        with self.assertRaises(DataError):
            synchronized_augment(self.satellite, self.roadmap[:16], 0)

    def test_shift_crop(self):
        out = random_shift_crop(self.satellite, 4)
        self.assertEqual(out.shape, self.satellite.shape)
        np.testing.assert_array_equal(out, random_shift_crop(self.satellite, 4))
        np.testing.assert_array_equal(random_shift_crop(self.satellite, 4, max_shift=0), self.satellite)


class TestDataset(unittest.TestCase):
    def setUp(self):
        self.tmp_dir = Path(tempfile.mkdtemp())

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def test_export_then_load(self):
        rows = export_dataset(self.tmp_dir, num_classes=4, image_size=32, seed=0, train_drones=2, test_drones=1)
        train = load_dataset(self.tmp_dir, "train")
        test = load_dataset(self.tmp_dir, "test")

        self.assertEqual(train.classes, ["0000", "0001", "0002", "0003"])
        self.assertEqual(train.count("drone"), 8)
        self.assertEqual(train.count("satellite"), 4)
        self.assertEqual(train.count("roadmap"), 4)
        self.assertEqual(test.count("drone"), 4)

        manifest = read_manifest(self.tmp_dir / MANIFEST_NAME)
        self.assertEqual(list(manifest.itertuples(index=False, name=None)), rows)
        indexed = {(c, v, p) for c, v, p in train.relative_rows() + test.relative_rows()}
        self.assertEqual(indexed, {(c, v, p) for c, v, _, p in rows})

    def test_test_drones_differ_from_train(self):
        export_dataset(self.tmp_dir, num_classes=1, image_size=32, seed=0, train_drones=1, test_drones=1)
        train = read_image(load_dataset(self.tmp_dir, "train").paths("drone", "0000")[0])
        test = read_image(load_dataset(self.tmp_dir, "test").paths("drone", "0000")[0])
        self.assertFalse(np.array_equal(train, test))

    def test_missing_roadmap(self):
        export_dataset(self.tmp_dir, num_classes=2, image_size=32, seed=0, train_drones=1, test_drones=1)
        shutil.rmtree(self.tmp_dir / "train" / "roadmap" / "0001")
        with self.assertRaises(DataError) as ctx:
            load_dataset(self.tmp_dir, "train")
        self.assertIn("0001", str(ctx.exception))

    def test_empty_split(self):
        (self.tmp_dir / "train").mkdir()
        with self.assertRaises(DataError):
            load_dataset(self.tmp_dir, "train")
        with self.assertRaises(DataError):
            load_dataset(self.tmp_dir, "test")

    def test_image_round_trip(self):
        pixels = np.random.default_rng(0).integers(0, 256, size=(8, 8, 3)) / 255.0
        write_image(self.tmp_dir / "a.png", pixels)
        np.testing.assert_array_equal(read_image(self.tmp_dir / "a.png"), pixels)


if __name__ == "__main__":
    unittest.main()
