"""Assembly of the 139 dimensional feature vectors and of labeled datasets.

A vector holds, in this order, the 13 averaged MFCCs, the energies of the 63 wavelet packet nodes and the Shannon
entropies of the same nodes. Nodes are reported 1-based in breadth first order, so `energy_1` is the energy of the
(truncated) signal itself.
"""
import csv
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from enum import IntEnum
from functools import cached_property
from pathlib import Path
from typing import Self

import numpy as np
from anyio import CapacityLimiter, create_task_group, run as run_async
from anyio.to_thread import run_sync
from numpy.typing import ArrayLike, NDArray

from vocalfold.signal_io import AudioSignal, FrameConfig, read_wav
from vocalfold.spectral import NUM_CEPSTRA, mfcc_average
from vocalfold.util import EmptyUi, EncodingError, ExceptionInfo, ExtractionError, FeatureError, ProgressUi
from vocalfold.wavelet import DEPTH, tree_energies, tree_entropies, wp_decompose

__all__ = (
    "FEATURE_NAMES",
    "NUM_FEATURES",
    "ExtractionResult",
    "FeatureVector",
    "Label",
    "LabeledDataset",
    "ManifestEntry",
    "extract_dataset",
    "extract_features",
    "read_feature_csv",
    "read_manifest",
    "write_feature_csv",
    "write_manifest",
)

NUM_NODES = 2 ** (DEPTH + 1) - 1
NUM_FEATURES = NUM_CEPSTRA + 2 * NUM_NODES
MFCC_SLICE = slice(0, NUM_CEPSTRA)
ENERGY_SLICE = slice(NUM_CEPSTRA, NUM_CEPSTRA + NUM_NODES)
ENTROPY_SLICE = slice(NUM_CEPSTRA + NUM_NODES, NUM_FEATURES)
FEATURE_NAMES: tuple[str, ...] = (
    *(f"mfcc_{i}" for i in range(1, NUM_CEPSTRA + 1)),
    *(f"energy_{i}" for i in range(1, NUM_NODES + 1)),
    *(f"entropy_{i}" for i in range(1, NUM_NODES + 1)),
)


class Label(IntEnum):
    """Class of a recording."""

    healthy = 0
    pathological = 1


@dataclass(frozen=True, eq=False)
class FeatureVector:
    """The ordered feature vector `[MFCC | energy | entropy]` of one recording."""

    values: NDArray[np.float64]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (NUM_FEATURES,):
            raise FeatureError(f"A feature vector has {NUM_FEATURES} entries, got shape {values.shape}.")
        if not np.all(np.isfinite(values)):
            bad = [FEATURE_NAMES[i] for i in np.flatnonzero(~np.isfinite(values))]
            raise FeatureError("Feature vectors must be finite.", detail=bad)
        if np.any(values[ENERGY_SLICE] < 0):
            raise FeatureError("Wavelet packet energies cannot be negative.")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def mfcc(self) -> NDArray[np.float64]:
        """The 13 averaged cepstral coefficients."""
        return self.values[MFCC_SLICE]

    @property
    def energy(self) -> NDArray[np.float64]:
        """Energies of nodes 1..63."""
        return self.values[ENERGY_SLICE]

    @property
    def entropy(self) -> NDArray[np.float64]:
        """Shannon entropies of nodes 1..63."""
        return self.values[ENTROPY_SLICE]


def extract_features(signal: AudioSignal, frames: FrameConfig | None = None) -> FeatureVector:
    """Computes the feature vector of a recording.

    Raises:
        SignalError: If the signal is shorter than one MFCC frame.
        SpectralError: If the sample rate is too low for the mel filterbank.
        WaveletError: If fewer than 32 samples remain after truncation.
    """
    frames = frames or FrameConfig()
    mfcc = mfcc_average(signal, frames.frame_len, frames.hop)
    tree = wp_decompose(signal, DEPTH)
    return FeatureVector(np.concatenate([mfcc.coeffs, tree_energies(tree), tree_entropies(tree)]))


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    """Feature vectors together with their labels and sample identifiers."""

    vectors: tuple[FeatureVector, ...]
    labels: tuple[Label, ...]
    ids: tuple[str, ...]

    def __post_init__(self) -> None:
        if not len(self.vectors) == len(self.labels) == len(self.ids):
            raise FeatureError(
                "Vectors, labels and ids of a dataset must have equal lengths.",
                detail=f"{len(self.vectors)} vectors, {len(self.labels)} labels, {len(self.ids)} ids",
            )
        object.__setattr__(self, "labels", tuple(Label(label) for label in self.labels))

    @classmethod
    def from_arrays(cls, features: ArrayLike, labels: Iterable[int], ids: Iterable[str] | None = None) -> Self:
        """Builds a dataset from a sample by feature matrix."""
        matrix = np.asarray(features, dtype=np.float64)
        labels = tuple(Label(label) for label in labels)
        ids = tuple(ids) if ids is not None else tuple(f"sample_{i:03d}" for i in range(len(labels)))
        return cls(tuple(FeatureVector(row) for row in matrix), labels, ids)

    def __len__(self) -> int:
        return len(self.vectors)

    @cached_property
    def features(self) -> NDArray[np.float64]:
        """Sample by feature matrix."""
        if not self.vectors:
            return np.empty((0, NUM_FEATURES))
        matrix = np.stack([v.values for v in self.vectors])
        matrix.flags.writeable = False
        return matrix

    @cached_property
    def targets(self) -> NDArray[np.int64]:
        """Labels as an integer array."""
        return np.array([int(label) for label in self.labels], dtype=np.int64)

    def class_counts(self) -> dict[Label, int]:
        """Number of samples of each class."""
        return {label: self.labels.count(label) for label in Label}

    def require_both_classes(self, what: str = "The dataset") -> None:
        """Raises a FeatureError unless both classes are present."""
        missing = [label.name for label, count in self.class_counts().items() if count == 0]
        if missing:
            raise FeatureError(f"{what} contains no {' or '.join(missing)} samples.")

    def subset(self, indices: Sequence[int] | NDArray[np.intp]) -> Self:
        """The samples at the given positions, in that order."""
        return type(self)(
            tuple(self.vectors[i] for i in indices),
            tuple(self.labels[i] for i in indices),
            tuple(self.ids[i] for i in indices),
        )


@dataclass(frozen=True)
class ManifestEntry:
    """A labeled audio file."""

    id: str
    path: Path
    label: Label


def read_manifest(path: Path) -> list[ManifestEntry]:
    """Parses an `id,path,label` manifest; relative paths are resolved against the manifest's folder."""
    if not path.is_file():
        raise EncodingError(f"The manifest '{path}' does not exist.")
    entries: list[ManifestEntry] = []
    with path.open(newline="") as file:
        reader = csv.DictReader(file)
        if reader.fieldnames is None or list(reader.fieldnames) != ["id", "path", "label"]:
            raise EncodingError(f"The manifest '{path}' must have the header 'id,path,label'.")
        for line, row in enumerate(reader, start=2):
            try:
                label = Label(int(row["label"]))
            except (TypeError, ValueError) as e:
                raise EncodingError(f"Line {line} of '{path}' has an invalid label.", detail=str(e)) from e
            file_path = Path(row["path"])
            if not file_path.is_absolute():
                file_path = path.parent / file_path
            entries.append(ManifestEntry(row["id"], file_path, label))
    return entries


def write_manifest(path: Path, entries: Iterable[ManifestEntry]) -> None:
    """Writes an `id,path,label` manifest, storing paths relative to its folder where possible."""
    with path.open("w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["id", "path", "label"])
        for entry in entries:
            file_path = entry.path
            if file_path.is_relative_to(path.parent):
                file_path = file_path.relative_to(path.parent)
            writer.writerow([entry.id, file_path.as_posix(), int(entry.label)])


def write_feature_csv(path: Path, dataset: LabeledDataset) -> None:
    """Writes one row per sample, all values with 17 significant digits."""
    with path.open("w", newline="") as file:
        writer = csv.writer(file)
        writer.writerow(["id", "label", *FEATURE_NAMES])
        for vector, label, sample_id in zip(dataset.vectors, dataset.labels, dataset.ids, strict=True):
            writer.writerow([sample_id, int(label), *(f"{v:.17g}" for v in vector.values)])


def read_feature_csv(path: Path) -> LabeledDataset:
    """Reads a feature CSV written by :func:`write_feature_csv`."""
    if not path.is_file():
        raise EncodingError(f"The feature file '{path}' does not exist.")
    vectors: list[FeatureVector] = []
    labels: list[Label] = []
    ids: list[str] = []
    with path.open(newline="") as file:
        reader = csv.reader(file)
        header = next(reader, None)
        if header != ["id", "label", *FEATURE_NAMES]:
            raise EncodingError(f"'{path}' does not have the feature CSV header.")
        for line, row in enumerate(reader, start=2):
            if len(row) != NUM_FEATURES + 2:
                raise EncodingError(f"Line {line} of '{path}' has {len(row)} fields, expected {NUM_FEATURES + 2}.")
            try:
                labels.append(Label(int(row[1])))
                vectors.append(FeatureVector(np.array([float(v) for v in row[2:]])))
            except (ValueError, FeatureError) as e:
                raise EncodingError(f"Line {line} of '{path}' is not a valid sample.", detail=str(e)) from e
            ids.append(row[0])
    return LabeledDataset(tuple(vectors), tuple(labels), tuple(ids))


@dataclass
class ExtractionResult:
    """Features of every file that could be processed, and the errors of those that could not."""

    dataset: LabeledDataset
    excluded: dict[str, ExceptionInfo] = field(default_factory=dict)


def _extract_entry(entry: ManifestEntry, frames: FrameConfig) -> FeatureVector:
    return extract_features(read_wav(entry.path), frames)


async def _extract_all(
    entries: Sequence[ManifestEntry],
    frames: FrameConfig,
    parallel: int,
    ui: ProgressUi,
) -> list[FeatureVector | ExceptionInfo]:
    results: list[FeatureVector | ExceptionInfo] = [ExceptionInfo(type="", message="")] * len(entries)
    limiter = CapacityLimiter(parallel)

    async def worker(index: int) -> None:
        try:
            results[index] = await run_sync(_extract_entry, entries[index], frames, limiter=limiter)
        except Exception as e:
            results[index] = ExceptionInfo.from_exception(e)
        ui.advance("extract")

    async with create_task_group() as tg:
        for index in range(len(entries)):
            tg.start_soon(worker, index)
    return results


def extract_dataset(
    entries: Sequence[ManifestEntry],
    frames: FrameConfig | None = None,
    *,
    parallel: int = 1,
    ui: ProgressUi | None = None,
) -> ExtractionResult:
    """Extracts the features of every listed file.

    Files are processed by up to `parallel` worker threads; the dataset keeps the order of `entries` regardless.
    Files that fail are left out of the dataset and reported in :attr:`ExtractionResult.excluded`.

    Raises:
        ExtractionError: If no file could be processed.
    """
    frames = frames or FrameConfig()
    ui = ui or EmptyUi()
    ui.start_task("extract", len(entries))
    results = run_async(_extract_all, entries, frames, parallel, ui)
    ui.finish_task("extract")

    vectors: list[FeatureVector] = []
    labels: list[Label] = []
    ids: list[str] = []
    excluded: dict[str, ExceptionInfo] = {}
    for entry, result in zip(entries, results, strict=True):
        if isinstance(result, ExceptionInfo):
            excluded[entry.id] = result
        else:
            vectors.append(result)
            labels.append(entry.label)
            ids.append(entry.id)
    if not vectors:
        raise ExtractionError(
            f"None of the {len(entries)} files could be processed.",
            detail=[f"{name}: {info.message}" for name, info in excluded.items()],
        )
    return ExtractionResult(LabeledDataset(tuple(vectors), tuple(labels), tuple(ids)), excluded)
