"""Tests for the config file."""
from unittest import TestCase, main

from pydantic import ValidationError

from vocalfold.config import CONFIG_FILE_NAME, VocalfoldConfig
from vocalfold.pca import ReductionMode
from vocalfold.util import EncodingError, TempDir


class ConfigTests(TestCase):
    """Tests for parsing config files."""

    def test_defaults(self):
        """The defaults match the documented pipeline settings."""
        config = VocalfoldConfig()
        self.assertEqual((config.frames.frame_len, config.frames.hop), (256, 128))
        self.assertEqual(config.train.learning_rate, 0.05)
        self.assertEqual(config.train.epochs, 2000)
        self.assertEqual(config.train.hidden, 5)
        self.assertEqual(config.evaluation.folds, 10)
        self.assertEqual(config.evaluation.k_features, 36)
        self.assertEqual(config.evaluation.mode, ReductionMode.project)
        self.assertEqual(config.synth.sample_rate, 24000)
        self.assertEqual(config.project.parallel, 1)

    def test_from_file(self):
        """Config files can be given directly or by their folder."""
        with TempDir() as folder:
            path = folder / CONFIG_FILE_NAME
            path.write_text(
                "[train]\nepochs = 300\nhidden = 7\n\n[evaluation]\nmode = \"select\"\nk_features = 20\n"
                "\n[synth.pathological]\njitter_pct = 3.0\nshimmer_pct = 9.0\nnoise_level = 0.1\n"
            )
            for source in (path, folder):
                config = VocalfoldConfig.from_file(source)
                self.assertEqual(config.train.epochs, 300)
                self.assertEqual(config.train.hidden, 7)
                self.assertEqual(config.train.learning_rate, 0.05)
                self.assertEqual(config.evaluation.mode, ReductionMode.select)
                self.assertEqual(config.evaluation.k_features, 20)
                self.assertEqual(config.synth.pathological.jitter_pct, 3)
            self.assertEqual(VocalfoldConfig.load(path), config)

    def test_missing_file(self):
        with TempDir() as folder:
            with self.assertRaises(EncodingError):
                VocalfoldConfig.from_file(folder)
            with self.assertRaises(EncodingError):
                VocalfoldConfig.from_file(folder / "other.toml")

    def test_malformed_file(self):
        with TempDir() as folder:
            path = folder / CONFIG_FILE_NAME
            path.write_text("[train\nepochs = 3\n")
            with self.assertRaises(EncodingError):
                VocalfoldConfig.from_file(path)

    def test_invalid_values(self):
        """Unknown keys and out of range values are rejected."""
        with TempDir() as folder:
            path = folder / CONFIG_FILE_NAME
            for text in (
                "[train]\nmomentum = 0.9\n",
                "[evaluation]\nk_features = 200\n",
                "[evaluation]\nfolds = 1\n",
                "[frames]\nframe_len = 256\nhop = 0\n",
                "[project]\nparallel = 0\n",
            ):
                with self.subTest(text=text):
                    path.write_text(text)
                    with self.assertRaises(ValidationError):
                        VocalfoldConfig.from_file(path)


if __name__ == "__main__":
    main()
