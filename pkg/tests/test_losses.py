import math
import unittest

import numpy as np

from pygeofuse.errors import ConfigurationError, DataError, DimensionError, GeoFuseWarning
from pygeofuse.nn import ClassifierHead, GeoFuseModel, ModelConfig, Tensor, backward, build_anchor_set, total_loss
from pygeofuse.nn.losses import (
    CLAMP_MIN,
    ItmHead,
    class_contrastive_loss,
    cross_entropy,
    hardest_negatives,
    image_text_losses,
    instance_ce_loss,
    positive_mask,
    similarity_matrices,
    similarity_to_anchors,
)
from pygeofuse.nn.gradcheck import run_gradcheck_suite
from pygeofuse.nn.tensor import l2_normalize

TAU = 0.07


def _unit_rows(rng, rows, width):
    x = rng.normal(size=(rows, width))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def _loop_contrastive(s, m):
    """Plain-loop evaluation of the clamped class contrastive term."""
    total = 0.0
    for i in range(len(s)):
        numerator, denominator = 0.0, 0.0
        for c in range(len(s[i])):
            numerator += math.exp(s[i][c]) * m[i][c]
            denominator += math.exp(s[i][c])
        total += math.log(max(numerator, CLAMP_MIN) / max(denominator, CLAMP_MIN))
    return -total / len(s)


def _tiny_model(classes=2):
    return GeoFuseModel(ModelConfig(
        num_classes=classes, image_size=8, patch_size=4, d_model=8, depth=1, heads=2, channel_heads=2,
    ))


class TestSimilarity(unittest.TestCase):
    def test_values(self):
        f = np.array([[1.0, 0.0]])
        sims = similarity_matrices(Tensor(f), Tensor([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]),
                                   Tensor([[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]), TAU)
        np.testing.assert_allclose(sims.s_sat.data[0], [1 / TAU, 0.0, -1 / TAU], atol=1e-12)
        self.assertAlmostEqual(sims.s_fused.data[0, 0], 14.2857142857, places=9)

    def test_tau_must_be_positive(self):
        for tau in (0.0, -0.5):
            with self.assertRaises(ConfigurationError):
                similarity_matrices(Tensor(np.eye(2)), Tensor(np.eye(2)), Tensor(np.eye(2)), tau)


class TestPositiveMask(unittest.TestCase):
    def test_aligned(self):
        mask = positive_mask(["a", "b", "c"], ["a", "b", "c"])
        np.testing.assert_array_equal(mask.matrix, np.eye(3))

    def test_single_class(self):
        mask = positive_mask(["0", "0", "0"], ["0", "1", "2"])
        np.testing.assert_array_equal(mask.matrix[:, 0], np.ones(3))
        np.testing.assert_array_equal(mask.matrix[:, 1:], np.zeros((3, 2)))

    def test_permutation(self):
        mask = positive_mask(["0", "2", "1"], ["0", "1", "2"])
        np.testing.assert_array_equal(mask.matrix, [[1, 0, 0], [0, 0, 1], [0, 1, 0]])

    def test_unknown_label(self):
        with self.assertRaises(DataError) as ctx:
            positive_mask(["0", "7"], ["0", "1"])
        self.assertIn("7", str(ctx.exception))


class TestClassContrastive(unittest.TestCase):
    def test_single_class(self):
        rng = np.random.default_rng(0)
        sims = similarity_matrices(Tensor(_unit_rows(rng, 4, 3)), Tensor(_unit_rows(rng, 1, 3)),
                                   Tensor(_unit_rows(rng, 1, 3)), TAU)
        terms = class_contrastive_loss(sims, positive_mask(["x"] * 4, ["x"]))
        self.assertEqual(terms.total.item(), 0.0)

    def test_two_class_scalar(self):
        sims = similarity_matrices(Tensor([[1.0, 0.0]]), Tensor(np.eye(2)), Tensor(np.eye(2)), TAU)
        terms = class_contrastive_loss(sims, positive_mask(["0"], ["0", "1"]))
        expected = math.log1p(math.exp(-1 / TAU))
        self.assertAlmostEqual(terms.sat.item(), expected, delta=1e-12)
        self.assertAlmostEqual(terms.fused.item(), expected, delta=1e-12)
        self.assertAlmostEqual(terms.total.item(), 2 * expected, delta=1e-12)
        self.assertAlmostEqual(expected, 6.25e-7, delta=1e-9)

    def test_empty_mask_is_finite(self):
        sims = similarity_matrices(Tensor([[1.0, 0.0]]), Tensor(np.eye(2)), Tensor(np.eye(2)), TAU)
        mask = positive_mask(["0"], ["0", "1"])
        mask.matrix[...] = 0.0
        terms = class_contrastive_loss(sims, mask)
        denominator = math.exp(1 / TAU) + 1.0
        self.assertTrue(np.isfinite(terms.total.item()))
        self.assertAlmostEqual(terms.sat.item(), -math.log(CLAMP_MIN / denominator), places=9)

    def test_matches_loop_oracle(self):
        rng = np.random.default_rng(2024)
        for instance in range(1000):
            b, c, d = int(rng.integers(1, 9)), int(rng.integers(1, 6)), int(rng.integers(1, 5))
            classes = [str(k) for k in range(c)]
            labels = [classes[int(k)] for k in rng.integers(0, c, size=b)]
            sims = similarity_matrices(Tensor(_unit_rows(rng, b, d)), Tensor(_unit_rows(rng, c, d)),
                                       Tensor(_unit_rows(rng, c, d)), TAU)
            mask = positive_mask(labels, classes)
            if instance % 4 == 0:
                # rows without a positive hit the numerator clamp
                mask.matrix[rng.integers(0, b)] = 0.0
            terms = class_contrastive_loss(sims, mask)
            self.assertLess(abs(terms.sat.item() - _loop_contrastive(sims.s_sat.data, mask.matrix)), 1e-10)
            self.assertLess(abs(terms.fused.item() - _loop_contrastive(sims.s_fused.data, mask.matrix)), 1e-10)
            self.assertGreaterEqual(terms.total.item(), 0.0)

    def test_class_permutation(self):
        rng = np.random.default_rng(8)
        drone, sat, fused = _unit_rows(rng, 5, 4), _unit_rows(rng, 3, 4), _unit_rows(rng, 3, 4)
        labels, classes = ["0", "2", "1", "1", "0"], ["0", "1", "2"]
        perm = [2, 0, 1]
        base = class_contrastive_loss(similarity_matrices(Tensor(drone), Tensor(sat), Tensor(fused), TAU),
                                      positive_mask(labels, classes)).total.item()
        permuted = class_contrastive_loss(
            similarity_matrices(Tensor(drone), Tensor(sat[perm]), Tensor(fused[perm]), TAU),
            positive_mask(labels, [classes[k] for k in perm]),
        ).total.item()
        self.assertAlmostEqual(base, permuted, delta=1e-12)

    def test_shape_mismatch(self):
        sims = similarity_matrices(Tensor(np.eye(2)), Tensor(np.eye(2)), Tensor(np.eye(2)), TAU)
        with self.assertRaises(DimensionError):
            class_contrastive_loss(sims, positive_mask(["0"], ["0", "1"]))


class TestInstanceCrossEntropy(unittest.TestCase):
    def test_uniform_logits(self):
        head = ClassifierHead(4, 5, np.random.default_rng(0))
        head.classifier.weight.data[...] = 0.0
        head.classifier.bias.data[...] = 0.0
        feats = Tensor(np.random.default_rng(1).normal(size=(3, 4)))
        loss = instance_ce_loss(feats, feats, feats, np.array([0, 3, 4]), head)
        self.assertAlmostEqual(loss.item(), 3 * math.log(5), delta=1e-12)

    def test_two_class_oracle(self):
        logits = np.array([[0.3, -1.2]])
        expected = -math.log(math.exp(0.3) / (math.exp(0.3) + math.exp(-1.2)))
        self.assertAlmostEqual(cross_entropy(Tensor(logits), np.array([0])).item(), expected, delta=1e-14)

    def test_confident_logits(self):
        self.assertLess(cross_entropy(Tensor([[40.0, 0.0, 0.0]]), np.array([0])).item(), 1e-15)

    def test_label_out_of_range(self):
        with self.assertRaises(DataError):
            cross_entropy(Tensor(np.zeros((2, 3))), np.array([0, 3]))

    def test_head_is_shared(self):
        rng = np.random.default_rng(3)
        head = ClassifierHead(4, 3, rng)
        feats = [Tensor(rng.normal(size=(2, 4))) for _ in range(3)]
        labels = np.array([0, 2])
        params = dict(head.named_parameters())
        self.assertEqual(sorted(params), ["bottleneck.bias", "bottleneck.weight", "classifier.bias", "classifier.weight"])
        for feat in feats:
            head.zero_grad()
            grads = backward(cross_entropy(head.logits(feat), labels), params)
            self.assertGreater(np.abs(grads["classifier.weight"].data).max(), 0.0)
        combined = instance_ce_loss(feats[0], feats[1], feats[2], labels, head).item()
        separate = sum(cross_entropy(head.logits(f), labels).item() for f in feats)
        self.assertAlmostEqual(combined, separate, delta=1e-12)


class TestImageText(unittest.TestCase):
    def test_orthogonal_pairs(self):
        feats = Tensor(np.eye(3, 4))
        terms = image_text_losses(feats, feats, [0, 1, 2], None, TAU)
        expected = math.log1p(2 * math.exp(-1 / TAU))
        self.assertAlmostEqual(terms.itc.item(), expected, delta=1e-12)
        self.assertTrue(terms.itc_defined)
        self.assertEqual(terms.itm.item(), 0.0)

    def test_half_probability_matcher(self):
        rng = np.random.default_rng(6)
        itm = ItmHead(4, rng)
        itm.fc_out.weight.data[...] = 0.0
        itm.fc_out.bias.data[...] = 0.0
        drone = l2_normalize(Tensor(rng.normal(size=(3, 4))))
        text = l2_normalize(Tensor(rng.normal(size=(3, 4))))
        terms = image_text_losses(drone, text, [0, 1, 2], itm, TAU)
        self.assertAlmostEqual(terms.itm.item(), math.log(2.0), delta=1e-14)
        self.assertAlmostEqual(terms.total.item(), terms.itc.item() + terms.itm.item(), delta=1e-14)

    def test_single_item_batch(self):
        feats = Tensor(np.array([[1.0, 0.0]]))
        with self.assertWarns(GeoFuseWarning):
            terms = image_text_losses(feats, feats, [0], None, TAU)
        self.assertEqual(terms.itc.item(), 0.0)
        self.assertFalse(terms.itc_defined)

    def test_hardest_negative_skips_same_condition(self):
        drone = np.array([[1.0, 0.0], [0.0, 1.0], [0.8, 0.6]])
        text = drone.copy()
        # items 0 and 2 share a condition, so item 0 cannot pick caption 2
        pairs = hardest_negatives(drone, text, ["Fog", "Rain", "Fog"])
        self.assertEqual(pairs, [(0, 1), (1, 2), (2, 1)])


class TestTotalLoss(unittest.TestCase):
    def test_arithmetic(self):
        self.assertAlmostEqual(total_loss(1.0, 2.0, 3.0, 0.10).item(), 3.3, delta=1e-12)
        self.assertEqual(total_loss(1.0, 2.0, 3.0, 0.0).item(), 3.0)

    def test_linearity_in_lambda(self):
        for lam in (0.05, 0.10, 0.15):
            delta = total_loss(0.7, 1.9, 2.3, lam).item() - total_loss(0.7, 1.9, 2.3, 0.0).item()
            self.assertAlmostEqual(delta, lam * 2.3, delta=1e-12)

    def test_negative_lambda(self):
        with self.assertRaises(ConfigurationError):
            total_loss(1.0, 1.0, 1.0, -0.1)

    def test_losses_suite_passes(self):
        rows = run_gradcheck_suite("losses", tol=1e-4)
        self.assertTrue(all(row.passed for row in rows), rows)


class TestAnchorSet(unittest.TestCase):
    def setUp(self):
        rng = np.random.default_rng(12)
        self.model = _tiny_model()
        self.images = {c: (rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))) for c in ("a", "b")}

    def test_single_pair(self):
        anchors = build_anchor_set([(c, [s], [r]) for c, (s, r) in self.images.items()], self.model)
        self.assertEqual(anchors.classes, ["a", "b"])
        for row, (satellite, roadmap) in enumerate(self.images.values()):
            np.testing.assert_allclose(anchors.sat_anchor[row], self.model.image_feature(satellite).data, atol=1e-12)
            np.testing.assert_allclose(
                anchors.fused_anchor[row], self.model.fused_feature(satellite, roadmap).data, atol=1e-12
            )
        np.testing.assert_allclose(np.linalg.norm(anchors.sat_anchor, axis=1), np.ones(2), atol=1e-10)

    def test_duplicate_images(self):
        once = build_anchor_set([(c, [s], [r]) for c, (s, r) in self.images.items()], self.model)
        twice = build_anchor_set([(c, [s, s], [r, r]) for c, (s, r) in self.images.items()], self.model)
        np.testing.assert_allclose(twice.sat_anchor, once.sat_anchor, atol=1e-12)
        np.testing.assert_allclose(twice.fused_anchor, once.fused_anchor, atol=1e-12)

    def test_mean_of_bottleneck_features(self):
        satellite, roadmap = self.images["a"]
        other, _ = self.images["b"]
        anchors = build_anchor_set([("a", [satellite, other], [roadmap])], self.model)
        features = [self.model.head.features(self.model.encode(img)[1]).data for img in (satellite, other)]
        mean = (features[0] + features[1]) / 2
        np.testing.assert_allclose(anchors.sat_anchor[0], mean / np.linalg.norm(mean), atol=1e-12)

    def test_missing_satellite(self):
        with self.assertRaises(ConfigurationError):
            build_anchor_set([("a", [], [self.images["a"][1]])], self.model)

    def test_similarity_to_anchors(self):
        anchors = build_anchor_set([(c, [s], [r]) for c, (s, r) in self.images.items()], self.model)
        drones = Tensor(_unit_rows(np.random.default_rng(3), 3, anchors.sat_anchor.shape[1]))
        sims = similarity_to_anchors(drones, anchors, TAU)
        self.assertEqual(sims.s_sat.shape, (3, 2))
        np.testing.assert_allclose(sims.s_sat.data, drones.data @ anchors.sat_anchor.T / TAU, atol=1e-10)
        np.testing.assert_allclose(sims.s_fused.data, drones.data @ anchors.fused_anchor.T / TAU, atol=1e-10)


if __name__ == "__main__":
    unittest.main()
