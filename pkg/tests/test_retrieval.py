import json
import shutil
import tempfile
import unittest
from pathlib import Path

import numpy as np

from pygeofuse.bench import WeatherCondition, export_dataset, load_dataset, write_image
from pygeofuse.errors import ConfigurationError, ContractError, GeoFuseWarning
from pygeofuse.nn import Tensor
from pygeofuse.retrieval import (
    ConditionMetrics,
    RetrievalReport,
    average_precision,
    evaluate_conditions,
    mean_average_precision,
    parse_directions,
    rank_all,
    rank_gallery,
    read_report_csv,
    recall_at_k,
    summary_table,
    write_report_csv,
    write_report_json,
)


def _loop_recall(rankings, relevance, k):
    hits, counted = 0, 0
    for q in range(len(rankings)):
        if not any(relevance[q]):
            continue
        counted += 1
        for g in list(rankings[q])[:k]:
            if relevance[q][g]:
                hits += 1
                break
    return hits / counted if counted else 0.0


def _loop_ap(ranking, relevant):
    total = sum(1 for flag in relevant if flag)
    found, score = 0, 0.0
    for position in range(len(ranking)):
        if relevant[ranking[position]]:
            found += 1
            score += found / (position + 1)
    return score / total


class TestRanking(unittest.TestCase):
    def test_query_in_gallery_ranks_first(self):
        rng = np.random.default_rng(0)
        gallery = rng.normal(size=(6, 4))
        self.assertEqual(rank_gallery(gallery[3], gallery)[0], 3)

    def test_ties_keep_gallery_order(self):
        gallery = np.array([[0.0, 1.0], [1.0, 0.0], [1.0, 0.0]])
        np.testing.assert_array_equal(rank_gallery(np.array([1.0, 0.0]), gallery), [1, 2, 0])

    def test_euclidean_matches_cosine(self):
        rng = np.random.default_rng(1)
        for _ in range(50):
            gallery = rng.normal(size=(8, 5))
            gallery /= np.linalg.norm(gallery, axis=1, keepdims=True)
            query = rng.normal(size=5)
            query /= np.linalg.norm(query)
            np.testing.assert_array_equal(rank_gallery(query, gallery), np.argsort(-(gallery @ query), kind="stable"))

    def test_accepts_tensors(self):
        gallery = [Tensor([1.0, 0.0]), Tensor([0.0, 1.0])]
        np.testing.assert_array_equal(rank_gallery(Tensor([0.0, 1.0]), gallery), [1, 0])

    def test_empty_gallery(self):
        with self.assertRaises(ContractError):
            rank_gallery(np.ones(3), np.zeros((0, 3)))


class TestMetrics(unittest.TestCase):
    def test_average_precision_hand_values(self):
        self.assertAlmostEqual(average_precision(np.arange(3), np.array([1, 0, 1])), 5 / 6, delta=1e-15)
        self.assertEqual(average_precision(np.arange(4), np.array([1, 1, 0, 0])), 1.0)
        for rank in range(1, 6):
            relevance = np.zeros(5, dtype=bool)
            relevance[rank - 1] = True
            self.assertAlmostEqual(average_precision(np.arange(5), relevance), 1 / rank, delta=1e-15)

    def test_no_relevant_item(self):
        self.assertIsNone(average_precision(np.arange(3), np.zeros(3)))
        with self.assertWarns(GeoFuseWarning):
            mean, skipped = mean_average_precision(np.array([[0, 1], [1, 0]]), np.array([[1, 0], [0, 0]]))
        self.assertEqual((mean, skipped), (1.0, 1))

    def test_recall_hand_values(self):
        rankings = np.array([[2, 0, 1, 3, 4, 5]])
        relevance = np.array([[False, True, False, False, False, False]])
        self.assertEqual(recall_at_k(rankings, relevance, 1), 0.0)
        self.assertEqual(recall_at_k(rankings, relevance, 5), 1.0)
        perfect = np.array([[0, 1], [1, 0]])
        self.assertEqual(recall_at_k(perfect, np.eye(2, dtype=bool), 1), 1.0)

    def test_k_is_clamped(self):
        rankings, relevance = np.array([[1, 0]]), np.array([[True, False]])
        with self.assertWarns(GeoFuseWarning):
            self.assertEqual(recall_at_k(rankings, relevance, 10), 1.0)
        with self.assertRaises(ContractError):
            recall_at_k(rankings, relevance, 0)

    def test_loop_oracles(self):
        rng = np.random.default_rng(3)
        for _ in range(1000):
            queries, gallery = int(rng.integers(1, 6)), int(rng.integers(1, 12))
            rankings = np.stack([rng.permutation(gallery) for _ in range(queries)])
            relevance = rng.random((queries, gallery)) < 0.3
            relevance[np.arange(queries), rng.integers(0, gallery, size=queries)] = True
            for k in (1, 5, 10):
                k = min(k, gallery)
                self.assertEqual(recall_at_k(rankings, relevance, k), _loop_recall(rankings, relevance, k))
            for q in range(queries):
                self.assertEqual(average_precision(rankings[q], relevance[q]), _loop_ap(rankings[q], relevance[q]))

    def test_gallery_permutation(self):
        rng = np.random.default_rng(4)
        queries, gallery = rng.normal(size=(5, 3)), rng.normal(size=(7, 3))
        relevance = np.zeros((5, 7), dtype=bool)
        relevance[np.arange(5), [0, 3, 6, 2, 2]] = True
        perm = rng.permutation(7)
        base = rank_all(queries, gallery)
        moved = rank_all(queries, gallery[perm])
        for k in (1, 5):
            self.assertEqual(recall_at_k(base, relevance, k), recall_at_k(moved, relevance[:, perm], k))
        self.assertEqual(mean_average_precision(base, relevance), mean_average_precision(moved, relevance[:, perm]))


class TestReport(unittest.TestCase):
    def _report(self):
        rng = np.random.default_rng(5)
        report = RetrievalReport("drone->satellite")
        for condition in WeatherCondition:
            r1, r5, r10 = np.sort(rng.random(3))
            report.conditions[condition.value] = ConditionMetrics(r1, r5, r10, rng.random(), queries=4, gallery=2)
        return report

    def test_mean_row(self):
        report = self._report()
        rows = report.rows()
        self.assertEqual(len(rows), 11)
        self.assertEqual(rows[-1][1], "Mean")
        for column in range(2, 6):
            expected = np.mean([row[column] for row in rows[:-1]])
            self.assertAlmostEqual(rows[-1][column], expected, delta=1e-12)

    def test_json_and_csv(self):
        report = self._report()
        with tempfile.TemporaryDirectory() as tmp_dir:
            tmp_path = Path(tmp_dir)
            write_report_json([report], tmp_path / "report.json")
            write_report_csv([report], tmp_path / "report.csv")
            loaded = json.loads((tmp_path / "report.json").read_text())
            frame = read_report_csv(tmp_path / "report.csv")
        self.assertEqual(loaded[0]["direction"], "drone->satellite")
        self.assertEqual(set(loaded[0]["conditions"]["Fog"]), {"r1", "r5", "r10", "ap"})
        self.assertEqual(list(frame.columns), ["direction", "condition", "r1", "r5", "r10", "ap"])
        self.assertEqual(len(frame), 11)
        self.assertIn("drone->satellite", summary_table([report]))

    def test_directions(self):
        self.assertEqual(parse_directions("both"), ["d2s", "s2d"])
        self.assertEqual(parse_directions("s2d"), ["s2d"])
        with self.assertRaises(ConfigurationError):
            parse_directions("up")


class _ColourModel:
    """Features are the normalized mean colour of an image."""

    @staticmethod
    def image_feature(image):
        mean = image.mean(axis=(0, 1))
        return Tensor(mean / np.linalg.norm(mean))

    def fused_feature(self, satellite, auxiliary):
        return self.image_feature(satellite)


class TestEvaluateConditions(unittest.TestCase):
    def setUp(self):
        self.tmp_dir = Path(tempfile.mkdtemp())
        colours = {"a": (0.8, 0.0, 0.0), "b": (0.0, 0.8, 0.0), "c": (0.0, 0.0, 0.8)}
        for class_id, colour in colours.items():
            raster = np.broadcast_to(np.array(colour), (8, 8, 3))
            for view, count in (("drone", 2), ("satellite", 1), ("roadmap", 1)):
                for k in range(count):
                    write_image(self.tmp_dir / "test" / view / class_id / f"{k:03d}.png", raster)
        self.dataset = load_dataset(self.tmp_dir, "test")

    def tearDown(self):
        shutil.rmtree(self.tmp_dir, ignore_errors=True)

    def test_self_retrieval(self):
        with self.assertWarns(GeoFuseWarning):
            reports = evaluate_conditions(_ColourModel(), self.dataset, conditions=[WeatherCondition.NORMAL])
        self.assertEqual([r.direction for r in reports], ["drone->satellite", "satellite->drone"])
        d2s, s2d = (r.conditions["Normal"] for r in reports)
        self.assertEqual((d2s.r1, d2s.ap, d2s.queries, d2s.gallery), (1.0, 1.0, 6, 3))
        self.assertEqual((s2d.r1, s2d.ap, s2d.queries, s2d.gallery), (1.0, 1.0, 3, 6))

    def test_single_direction(self):
        with self.assertWarns(GeoFuseWarning):
            reports = evaluate_conditions(_ColourModel(), self.dataset, directions="d2s",
                                          conditions=[WeatherCondition.NORMAL, WeatherCondition.FOG])
        self.assertEqual(len(reports), 1)
        self.assertEqual(list(reports[0].conditions), ["Normal", "Fog"])


class _RandomEmbeddingModel:
    """Seeded unit vectors that ignore the image."""

    def __init__(self, seed, width=16):
        self._rng = np.random.default_rng(seed)
        self._width = width

    def image_feature(self, image):
        v = self._rng.normal(size=self._width)
        return Tensor(v / np.linalg.norm(v))

    def fused_feature(self, satellite, auxiliary):
        return self.image_feature(satellite)


class TestChanceLevel(unittest.TestCase):
    @classmethod
    def setUpClass(cls):
        cls.tmp_dir = Path(tempfile.mkdtemp())
        export_dataset(cls.tmp_dir, num_classes=32, image_size=16, seed=0, train_drones=1, test_drones=4)
        cls.dataset = load_dataset(cls.tmp_dir, "test")

    @classmethod
    def tearDownClass(cls):
        shutil.rmtree(cls.tmp_dir, ignore_errors=True)

    def test_uninformed_model_is_near_chance(self):
        chance = 1 / 32
        r1 = []
        for seed in range(5):
            report, = evaluate_conditions(_RandomEmbeddingModel(seed), self.dataset, directions="d2s",
                                          conditions=[WeatherCondition.NORMAL])
            metrics = report.conditions["Normal"]
            self.assertEqual((metrics.queries, metrics.gallery), (128, 32))
            r1.append(metrics.r1)
        self.assertGreater(np.mean(r1), chance / 3)
        self.assertLess(np.mean(r1), 3 * chance)


if __name__ == "__main__":
    unittest.main()
