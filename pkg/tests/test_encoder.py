import unittest

import numpy as np

from pygeofuse.bench import WeatherCondition
from pygeofuse.errors import ConfigurationError, DataError
from pygeofuse.nn import ClassifierHead, EncoderConfig, GeoFuseModel, ModelConfig, WeatherCaption, encode_caption, encode_image
from pygeofuse.nn.encoder import CAPTION_TEMPLATES, CaptionEncoder, ImageEncoder, encode_tokens, patch_embed, patchify
from pygeofuse.nn.gradcheck import run_gradcheck_suite


class TestPatches(unittest.TestCase):
    def setUp(self):
        self.config = EncoderConfig(image_size=8, patch_size=4, d_model=8, depth=1, heads=2)
        self.params = ImageEncoder(self.config, np.random.default_rng(0))

    def test_token_count(self):
        self.assertEqual(EncoderConfig().num_tokens, 36)
        self.assertEqual(self.config.num_tokens, 4)
        tokens = patch_embed(np.zeros((8, 8, 3)), self.config, self.params)
        self.assertEqual(tokens.shape, (4, 8))

    def test_patch_order(self):
        image = np.zeros((8, 8, 3))
        image[0:4, 4:8] = 1.0
        rows = patchify(image, self.config)
        np.testing.assert_array_equal(rows.sum(axis=1), [0.0, 48.0, 0.0, 0.0])

    def test_zero_image(self):
        self.params.patch_proj.bias.data[...] = 0.0
        tokens = patch_embed(np.zeros((8, 8, 3)), self.config, self.params)
        np.testing.assert_array_equal(tokens.data, self.params.pos_embed.data)

    def test_locality(self):
        rng = np.random.default_rng(1)
        a = rng.uniform(size=(8, 8, 3))
        b = a.copy()
        b[4:8, 0:4] = rng.uniform(size=(4, 4, 3))
        diff = np.abs(patch_embed(a, self.config, self.params).data - patch_embed(b, self.config, self.params).data)
        changed = diff.max(axis=1) > 0
        np.testing.assert_array_equal(changed, [False, False, True, False])

    def test_wrong_size(self):
        with self.assertRaises(DataError):
            patchify(np.zeros((9, 8, 3)), self.config)
        with self.assertRaises(DataError):
            patchify(np.zeros((8, 8)), self.config)

    def test_size_not_multiple(self):
        with self.assertRaises(ConfigurationError):
            EncoderConfig(image_size=10, patch_size=4)


class TestEncodeImage(unittest.TestCase):
    def test_depth_zero(self):
        config = EncoderConfig(image_size=8, patch_size=4, d_model=8, depth=0, heads=2)
        params = ImageEncoder(config, np.random.default_rng(2))
        image = np.random.default_rng(3).uniform(size=(8, 8, 3))
        tokens, _ = encode_tokens(image, config, params)
        np.testing.assert_array_equal(tokens.data, patch_embed(image, config, params).data)

    def test_feature_norm_and_determinism(self):
        config = EncoderConfig(image_size=8, patch_size=4, d_model=8, depth=2, heads=2)
        rng = np.random.default_rng(4)
        params, head = ImageEncoder(config, rng), ClassifierHead(8, 3, rng)
        image = rng.uniform(size=(8, 8, 3))
        tokens, feature = encode_image(image, config, params, head)
        self.assertEqual(tokens.shape, (4, 8))
        self.assertAlmostEqual(float(np.linalg.norm(feature.data)), 1.0, delta=1e-10)
        again = encode_image(image, config, params, head)[1]
        np.testing.assert_array_equal(feature.data, again.data)

    def test_shared_encoder(self):
        model = GeoFuseModel(ModelConfig(num_classes=2, image_size=8, patch_size=4, d_model=8, depth=1,
                                         heads=2, channel_heads=2))
        rng = np.random.default_rng(5)
        satellite, roadmap = rng.uniform(size=(8, 8, 3)), rng.uniform(size=(8, 8, 3))
        before = [model.encode(view)[1].data for view in (satellite, roadmap)]
        model.encoder.pos_embed.data += 0.5
        after = [model.encode(view)[1].data for view in (satellite, roadmap)]
        for old, new in zip(before, after):
            self.assertGreater(np.abs(new - old).max(), 0.0)
        names = [name for name, _ in model.named_parameters() if name.startswith("encoder.")]
        self.assertEqual(len(names), len(set(names)))

    def test_encoder_suite_passes(self):
        rows = run_gradcheck_suite("encoder", tol=1e-4)
        self.assertEqual([row.operation for row in rows], ["encode_image", "encode_caption"])
        self.assertTrue(all(row.passed for row in rows), rows)


class TestCaptions(unittest.TestCase):
    def setUp(self):
        self.params = CaptionEncoder(8, np.random.default_rng(6))

    def test_text(self):
        caption = WeatherCaption(WeatherCondition.FOG_RAIN, 0)
        self.assertEqual(caption.text(), "a drone photo of a campus building taken in fog and rain")
        self.assertEqual(len(CAPTION_TEMPLATES), 3)

    def test_rows(self):
        rows = {self.params.row(WeatherCaption(c, t)) for c in WeatherCondition for t in range(3)}
        self.assertEqual(rows, set(range(30)))

    def test_same_caption_twice(self):
        caption = WeatherCaption(WeatherCondition.SNOW, 2)
        np.testing.assert_array_equal(encode_caption(caption, self.params).data,
                                      encode_caption(caption, self.params).data)

    def test_distinct_conditions(self):
        embeddings = [encode_caption(WeatherCaption(c, 0), self.params).data for c in WeatherCondition]
        for i in range(len(embeddings)):
            self.assertAlmostEqual(float(np.linalg.norm(embeddings[i])), 1.0, delta=1e-10)
            for j in range(i + 1, len(embeddings)):
                self.assertFalse(np.array_equal(embeddings[i], embeddings[j]))

    def test_unknown_caption(self):
        with self.assertRaises(DataError):
            self.params.row(WeatherCaption("Hail", 0))
        with self.assertRaises(DataError):
            self.params.row(WeatherCaption(WeatherCondition.FOG, 3))


if __name__ == "__main__":
    unittest.main()
