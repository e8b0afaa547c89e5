"""Synthetic sustained /a/ vowels of healthy and pathological voices.

A jittered and shimmered impulse train plus white noise is passed through a cascade of formant resonators. Both
classes share the vocal tract; they only differ in how irregular the source is.
"""
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Self

import numpy as np
from anyio import CapacityLimiter, create_task_group, run as run_async
from anyio.to_thread import run_sync
from numpy.typing import NDArray
from pydantic import Field, model_validator
from scipy.signal import lfilter
from tomlkit import comment, document, dumps as dumps_toml, nl as toml_newline

from vocalfold.features import Label, ManifestEntry, write_manifest
from vocalfold.signal_io import AudioSignal, write_wav
from vocalfold.util import BaseModel, EmptyUi, ProgressUi, SynthError

__all__ = (
    "HEALTHY",
    "PATHOLOGICAL",
    "SynthConfig",
    "SynthResult",
    "VoiceProfile",
    "synth_dataset",
    "synth_voice",
)

PREROLL = 0.05
"""Seconds of excitation synthesized and discarded before the returned signal starts."""
PEAK = 0.9
MANIFEST_NAME = "manifest.csv"
RECORD_NAME = "synth.toml"


class VoiceProfile(BaseModel):
    """Irregularity of the glottal source."""

    jitter_pct: float = Field(ge=0, allow_inf_nan=False)
    """Maximal relative deviation of each period's f0, in percent."""
    shimmer_pct: float = Field(ge=0, allow_inf_nan=False)
    """Maximal relative deviation of each pulse's amplitude, in percent."""
    noise_level: float = Field(ge=0, allow_inf_nan=False)
    """Standard deviation of the white noise added to the source."""


HEALTHY = VoiceProfile(jitter_pct=0.3, shimmer_pct=1, noise_level=0.005)
PATHOLOGICAL = VoiceProfile(jitter_pct=2.5, shimmer_pct=8, noise_level=0.05)


class SynthConfig(BaseModel):
    """Parameters of the vowel generator."""

    sample_rate: int = Field(default=24000, gt=0)
    """Sampling frequency of the generated files in Hz."""
    duration: float = Field(default=1.0, gt=0, allow_inf_nan=False)
    """Length of every recording in seconds."""
    f0_range: tuple[float, float] = (100, 180)
    """Interval the fundamental frequency of each recording is drawn from."""
    formants: list[tuple[float, float]] = [(730, 90), (1090, 110), (2440, 120)]
    """Center frequency and bandwidth of every formant, both in Hz."""
    healthy: VoiceProfile = HEALTHY
    pathological: VoiceProfile = PATHOLOGICAL
    seed: int = 0
    """Seed used when no other one is given."""

    @model_validator(mode="after")
    def check_frequencies(self) -> Self:
        """Validates that every frequency is positive and below the Nyquist frequency."""
        nyquist = self.sample_rate / 2
        low, high = self.f0_range
        if not 0 < low <= high < nyquist:
            raise ValueError(f"The f0 range must satisfy 0 < low <= high < {nyquist}, got {self.f0_range}.")
        for center, bandwidth in self.formants:
            if not 0 < center < nyquist or bandwidth <= 0:
                raise ValueError(f"The formant ({center}, {bandwidth}) is not a valid resonance below {nyquist} Hz.")
        if round(self.duration * self.sample_rate) < 1:
            raise ValueError("The duration is shorter than one sample.")
        return self


def _glottal_source(n: int, f0: float, profile: VoiceProfile, sample_rate: int, rng: np.random.Generator) -> NDArray:
    jitter = profile.jitter_pct / 100
    shimmer = profile.shimmer_pct / 100
    shortest = max(1, int(sample_rate / (f0 * (1 + jitter))))
    count = n // shortest + 1
    periods = np.maximum(1, np.rint(sample_rate / (f0 * (1 + jitter * rng.uniform(-1, 1, count))))).astype(np.int64)
    amplitudes = 1 + shimmer * rng.uniform(-1, 1, count)
    positions = np.concatenate([[0], np.cumsum(periods)[:-1]])
    keep = positions < n
    source = np.zeros(n)
    source[positions[keep]] = amplitudes[keep]
    return source + profile.noise_level * rng.standard_normal(n)


def _resonate(x: NDArray, center: float, bandwidth: float, sample_rate: int) -> NDArray:
    """Second order resonator with unit gain at 0 Hz."""
    r = np.exp(-np.pi * bandwidth / sample_rate)
    theta = 2 * np.pi * center / sample_rate
    a = [1.0, -2 * r * np.cos(theta), r * r]
    return lfilter([sum(a)], a, x)


def synth_voice(cfg: SynthConfig | None = None, pathological: bool = False, seed: int | None = None) -> AudioSignal:
    """Generates one sustained vowel.

    The same config, class and seed always produce the same samples.

    Args:
        cfg: Generator parameters.
        pathological: Whether to use the pathological instead of the healthy voice profile.
        seed: Seed of this recording, `cfg.seed` if omitted.
    """
    cfg = cfg or SynthConfig()
    profile = cfg.pathological if pathological else cfg.healthy
    rng = np.random.default_rng(cfg.seed if seed is None else seed)
    f0 = rng.uniform(*cfg.f0_range)
    skip = round(PREROLL * cfg.sample_rate)
    length = round(cfg.duration * cfg.sample_rate)

    signal = _glottal_source(skip + length, f0, profile, cfg.sample_rate, rng)
    for center, bandwidth in cfg.formants:
        signal = _resonate(signal, center, bandwidth, cfg.sample_rate)
    signal = signal[skip:]
    peak = np.max(np.abs(signal))
    if not np.isfinite(peak) or peak == 0:
        raise SynthError("The synthesized vowel is silent or unstable.", detail=f"peak amplitude {peak}")
    return AudioSignal(PEAK * signal / peak, cfg.sample_rate)


@dataclass
class SynthResult:
    """Files written by :func:`synth_dataset`."""

    entries: list[ManifestEntry]
    manifest: Path
    record: Path


def _write_record(path: Path, cfg: SynthConfig, seed: int, n_path: int, n_healthy: int) -> None:
    doc = document()
    doc.add(comment("Settings the synthetic recordings in this folder were generated with"))
    doc.add(toml_newline())
    doc.add("seed", seed)
    doc.add("n_path", n_path)
    doc.add("n_healthy", n_healthy)
    doc.add(toml_newline())
    settings = cfg.model_dump(mode="json")
    # plain keys have to precede the subtables
    doc.add("synth", dict(sorted(settings.items(), key=lambda item: isinstance(item[1], dict))))
    path.write_text(dumps_toml(doc))


async def _write_all(
    jobs: Sequence[tuple[ManifestEntry, int]], cfg: SynthConfig, parallel: int, ui: ProgressUi
) -> list[OSError]:
    limiter = CapacityLimiter(parallel)
    errors: list[OSError] = []

    def generate(entry: ManifestEntry, seed: int) -> None:
        write_wav(entry.path, synth_voice(cfg, entry.label == Label.pathological, seed))

    async def worker(entry: ManifestEntry, seed: int) -> None:
        try:
            await run_sync(generate, entry, seed, limiter=limiter)
        except OSError as e:
            errors.append(e)
        ui.advance("synth")

    async with create_task_group() as tg:
        for entry, seed in jobs:
            tg.start_soon(worker, entry, seed)
    return errors


def synth_dataset(
    out_dir: Path,
    n_path: int = 75,
    n_healthy: int = 55,
    cfg: SynthConfig | None = None,
    seed: int | None = None,
    *,
    parallel: int = 1,
    ui: ProgressUi | None = None,
) -> SynthResult:
    """Writes a labeled set of synthetic recordings.

    Creates `path_000.wav`, ... and `healthy_000.wav`, ... in `out_dir` together with a `manifest.csv` listing them
    and a `synth.toml` recording how they were made. The seed of every file is derived from the master seed, so
    rerunning with the same arguments reproduces the files byte for byte.

    Raises:
        SynthError: If a count is negative or the output folder cannot be written to.
    """
    cfg = cfg or SynthConfig()
    seed = cfg.seed if seed is None else seed
    ui = ui or EmptyUi()
    if n_path < 0 or n_healthy < 0:
        raise SynthError(f"Sample counts cannot be negative, got {n_path} pathological and {n_healthy} healthy.")
    if seed < 0:
        raise SynthError(f"The master seed must not be negative, got {seed}.")
    total = n_path + n_healthy
    seeds = [int(s) for s in np.random.SeedSequence(seed).generate_state(total)] if total else []
    entries = [
        ManifestEntry(f"path_{i:03d}", out_dir / f"path_{i:03d}.wav", Label.pathological) for i in range(n_path)
    ]
    entries += [
        ManifestEntry(f"healthy_{i:03d}", out_dir / f"healthy_{i:03d}.wav", Label.healthy) for i in range(n_healthy)
    ]

    try:
        out_dir.mkdir(parents=True, exist_ok=True)
        ui.start_task("synth", total)
        errors = run_async(_write_all, list(zip(entries, seeds, strict=True)), cfg, parallel, ui)
        ui.finish_task("synth")
        if errors:
            raise errors[0]
        manifest = out_dir / MANIFEST_NAME
        write_manifest(manifest, entries)
        record = out_dir / RECORD_NAME
        _write_record(record, cfg, seed, n_path, n_healthy)
    except OSError as e:
        raise SynthError(f"Cannot write the synthetic dataset to '{out_dir}'.", detail=str(e)) from e
    return SynthResult(entries, manifest, record)
