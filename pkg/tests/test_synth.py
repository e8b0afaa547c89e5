"""Tests for the synthetic vowel generator."""
import tomllib
from unittest import TestCase, main

import numpy as np
from pydantic import ValidationError

from vocalfold.features import Label, read_manifest
from vocalfold.signal_io import AudioSignal, read_wav
from vocalfold.synth import PEAK, SynthConfig, VoiceProfile, synth_dataset, synth_voice
from vocalfold.util import SynthError, TempDir


def periodicity(signal: AudioSignal) -> float:
    """Largest normalized autocorrelation at lags of plausible pitch periods."""
    x = signal.samples - signal.samples.mean()
    n = x.size
    spectrum = np.fft.rfft(x, 2 * n)
    autocorrelation = np.fft.irfft(np.abs(spectrum) ** 2)[:n]
    low, high = signal.sample_rate // 200, signal.sample_rate // 80
    return float(np.max(autocorrelation[low : high + 1]) / autocorrelation[0])


class VoiceTests(TestCase):
    """Tests for single recordings."""

    def test_shape(self):
        """Recordings have the configured length and are peak normalized."""
        signal = synth_voice(SynthConfig(duration=0.5), pathological=True, seed=3)
        self.assertEqual(signal.sample_rate, 24000)
        self.assertEqual(len(signal), 12000)
        self.assertAlmostEqual(float(np.max(np.abs(signal.samples))), PEAK, places=12)

    def test_deterministic(self):
        cfg = SynthConfig(duration=0.2)
        for pathological in (False, True):
            first = synth_voice(cfg, pathological, seed=8)
            second = synth_voice(cfg, pathological, seed=8)
            np.testing.assert_array_equal(first.samples, second.samples)
        self.assertFalse(np.array_equal(synth_voice(cfg, seed=1).samples, synth_voice(cfg, seed=2).samples))

    def test_default_seed(self):
        cfg = SynthConfig(duration=0.1, seed=5)
        np.testing.assert_array_equal(synth_voice(cfg).samples, synth_voice(cfg, seed=5).samples)

    def test_regular_voice_is_periodic(self):
        """Without perturbations the voice repeats every pitch period."""
        cfg = SynthConfig(
            duration=0.5,
            f0_range=(150, 150),
            healthy=VoiceProfile(jitter_pct=0, shimmer_pct=0, noise_level=0),
        )
        x = synth_voice(cfg, seed=0).samples
        np.testing.assert_allclose(x[1200:-160], x[1360:], atol=1e-6)

    def test_pathological_voices_are_less_periodic(self):
        """Jitter, shimmer and noise lower the periodicity."""
        cfg = SynthConfig(duration=0.5)
        healthy = np.array([periodicity(synth_voice(cfg, False, seed)) for seed in range(20)])
        pathological = np.array([periodicity(synth_voice(cfg, True, seed)) for seed in range(20)])
        self.assertLess(pathological.mean(), healthy.mean())
        self.assertGreaterEqual(np.sum(pathological < healthy), 18)

    def test_invalid_config(self):
        with self.assertRaises(ValidationError):
            SynthConfig(f0_range=(180, 100))
        with self.assertRaises(ValidationError):
            SynthConfig(sample_rate=4000, formants=[(2440, 120)])
        with self.assertRaises(ValidationError):
            SynthConfig(duration=0)
        with self.assertRaises(ValidationError):
            VoiceProfile(jitter_pct=-1, shimmer_pct=0, noise_level=0)


class DatasetTests(TestCase):
    """Tests for writing a labeled set of recordings."""

    cfg = SynthConfig(duration=0.1)

    def test_files(self):
        """The dataset consists of the recordings, a manifest and a settings record."""
        with TempDir() as folder:
            result = synth_dataset(folder / "data", 3, 2, self.cfg, seed=4, parallel=2)
            ids = ["path_000", "path_001", "path_002", "healthy_000", "healthy_001"]
            self.assertEqual([e.id for e in result.entries], ids)
            for entry in result.entries:
                signal = read_wav(entry.path)
                self.assertEqual(len(signal), 2400)
                self.assertEqual(signal.sample_rate, 24000)
            self.assertEqual(read_manifest(result.manifest), result.entries)
            self.assertEqual([e.label for e in result.entries], [Label.pathological] * 3 + [Label.healthy] * 2)
            record = tomllib.loads(result.record.read_text())
            self.assertEqual((record["seed"], record["n_path"], record["n_healthy"]), (4, 3, 2))
            self.assertEqual(SynthConfig.model_validate(record["synth"]), self.cfg)

    def test_reproducible(self):
        """The same seed produces identical files."""
        with TempDir() as folder:
            first = synth_dataset(folder / "a", 2, 2, self.cfg, seed=9)
            second = synth_dataset(folder / "b", 2, 2, self.cfg, seed=9, parallel=3)
            for a, b in zip(first.entries, second.entries, strict=True):
                self.assertEqual(a.path.read_bytes(), b.path.read_bytes())
            self.assertEqual(first.manifest.read_text(), second.manifest.read_text())
            other = synth_dataset(folder / "c", 2, 2, self.cfg, seed=10)
            self.assertNotEqual(first.entries[0].path.read_bytes(), other.entries[0].path.read_bytes())

    def test_single_class(self):
        with TempDir() as folder:
            result = synth_dataset(folder, 0, 1, self.cfg)
            self.assertEqual([e.id for e in result.entries], ["healthy_000"])
            self.assertEqual(len(result.manifest.read_text().splitlines()), 2)

    def test_invalid_arguments(self):
        with TempDir() as folder:
            with self.assertRaises(SynthError):
                synth_dataset(folder, -1, 2, self.cfg)
            with self.assertRaises(SynthError):
                synth_dataset(folder, 1, 1, self.cfg, seed=-3)
            blocker = folder / "file"
            blocker.write_text("")
            with self.assertRaises(SynthError):
                synth_dataset(blocker / "data", 1, 1, self.cfg)


if __name__ == "__main__":
    main()
