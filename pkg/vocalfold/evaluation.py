"""Stratified k-fold cross-validation of the whole reduction and classification pipeline, and parameter sweeps.

Every fold fits its own PCA on its training part only, so held-out samples never influence the model that
classifies them.
"""
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Self

import numpy as np
from anyio import CapacityLimiter, create_task_group, run as run_async
from anyio.to_thread import run_sync
from numpy.typing import ArrayLike, NDArray
from pydantic import Field, model_validator

from vocalfold.ann import MlpModel, TrainConfig, init_mlp, predict_proba, train
from vocalfold.features import ENERGY_SLICE, ENTROPY_SLICE, MFCC_SLICE, NUM_FEATURES, LabeledDataset
from vocalfold.pca import PcaModel, ReductionMode, fit_pca, reduce, select_features_by_loadings
from vocalfold.util import BaseModel, EmptyUi, EvaluationError, FeatureError, ProgressUi

__all__ = (
    "EvalReport",
    "Experiment",
    "FeatureSweep",
    "FoldResult",
    "FoldSplit",
    "SelectedFeatures",
    "SweepRow",
    "cross_validate",
    "fit_fold",
    "kfold_split",
    "sweep_features",
    "sweep_hidden",
    "write_plot_data",
    "write_sweep_csv",
)


@dataclass(frozen=True, eq=False)
class FoldSplit:
    """Assignment of every sample to one of `k` folds."""

    k: int
    assignments: NDArray[np.intp]

    def __post_init__(self) -> None:
        assignments = np.array(self.assignments, dtype=np.intp)
        if self.k < 1 or assignments.ndim != 1 or np.any((assignments < 0) | (assignments >= self.k)):
            raise EvaluationError(f"Fold assignments must be integers in [0, {self.k}).")
        assignments.flags.writeable = False
        object.__setattr__(self, "assignments", assignments)

    @property
    def n(self) -> int:
        """Number of samples."""
        return self.assignments.size

    def sizes(self) -> list[int]:
        """Number of samples in every fold."""
        return np.bincount(self.assignments, minlength=self.k).tolist()

    def test_indices(self, fold: int) -> NDArray[np.intp]:
        """Samples held out in the given fold, in ascending order."""
        return np.flatnonzero(self.assignments == fold)

    def train_indices(self, fold: int) -> NDArray[np.intp]:
        """Samples used for training in the given fold, in ascending order."""
        return np.flatnonzero(self.assignments != fold)


def kfold_split(n: int, k: int = 10, seed: int = 0, labels: ArrayLike | None = None) -> FoldSplit:
    """Shuffles the samples and deals them into `k` folds in turn.

    If labels are given, each class is shuffled and dealt separately, continuing where the previous class stopped.
    Fold sizes then differ by at most one, and so do the sizes of every class across folds.

    Raises:
        EvaluationError: If `k` is not between 1 and `n`.
    """
    if not 1 <= k <= n:
        raise EvaluationError(f"Cannot split {n} samples into {k} folds.")
    rng = np.random.default_rng(seed)
    groups: list[NDArray[np.intp]]
    if labels is None:
        groups = [np.arange(n)]
    else:
        y = np.asarray(labels)
        if y.shape != (n,):
            raise EvaluationError(f"Got {y.size} labels for {n} samples.")
        groups = [np.flatnonzero(y == value) for value in np.unique(y)]
    assignments = np.empty(n, dtype=np.intp)
    offset = 0
    for group in groups:
        order = rng.permutation(group)
        assignments[order] = (offset + np.arange(order.size)) % k
        offset += order.size
    return FoldSplit(k, assignments)


def _ratio(numerator: int, denominator: int) -> float:
    return numerator / denominator if denominator else 0.0


class EvalReport(BaseModel):
    """Pooled results of a cross-validation run."""

    accuracy: float = Field(ge=0, le=1)
    confusion: list[list[int]]
    """Counts `[[TN, FP], [FN, TP]]`, rows being the true and columns the predicted class."""
    sensitivity: float = Field(ge=0, le=1)
    """Fraction of pathological samples classified as pathological."""
    specificity: float = Field(ge=0, le=1)
    """Fraction of healthy samples classified as healthy."""
    per_fold: list[float]
    """Accuracy on each held-out fold."""

    @model_validator(mode="after")
    def check_confusion(self) -> Self:
        """Validates the shape of the confusion matrix."""
        if len(self.confusion) != 2 or any(len(row) != 2 or min(row) < 0 for row in self.confusion):
            raise ValueError("The confusion matrix must be a 2 by 2 matrix of counts.")
        return self

    @property
    def total(self) -> int:
        """Number of classified samples."""
        return sum(map(sum, self.confusion))

    @classmethod
    def from_predictions(cls, targets: ArrayLike, predictions: ArrayLike, per_fold: Iterable[float] = ()) -> Self:
        """Builds the report from true and predicted labels."""
        t = np.asarray(targets, dtype=np.int64)
        p = np.asarray(predictions, dtype=np.int64)
        confusion = np.zeros((2, 2), dtype=np.int64)
        np.add.at(confusion, (t, p), 1)
        (tn, fp), (fn, tp) = confusion.tolist()
        return cls(
            accuracy=_ratio(tn + tp, tn + fp + fn + tp),
            confusion=confusion.tolist(),
            sensitivity=_ratio(tp, tp + fn),
            specificity=_ratio(tn, tn + fp),
            per_fold=list(per_fold),
        )


@dataclass(frozen=True, eq=False)
class FoldResult:
    """Everything fitted in one fold and its predictions for the held-out samples."""

    fold: int
    pca: PcaModel
    mlp: MlpModel
    test_indices: NDArray[np.intp]
    probabilities: NDArray[np.float64]

    @property
    def predictions(self) -> NDArray[np.int64]:
        """Predicted labels of the held-out samples."""
        return (self.probabilities > 0.5).astype(np.int64)


def _check_feature_count(k_features: int, dim: int) -> None:
    if not 1 <= k_features <= dim:
        raise EvaluationError(f"The reduced vector length must be between 1 and {dim}, got {k_features}.")


def _fold_training_data(dataset: LabeledDataset, split: FoldSplit, fold: int) -> LabeledDataset:
    if split.n != len(dataset):
        raise EvaluationError(f"The fold split covers {split.n} samples but the dataset has {len(dataset)}.")
    if not 0 <= fold < split.k:
        raise EvaluationError(f"There is no fold {fold} in a {split.k}-fold split.")
    training = dataset.subset(split.train_indices(fold))
    try:
        training.require_both_classes(f"The training part of fold {fold}")
    except FeatureError as e:
        raise EvaluationError(e.message) from e
    return training


def fit_fold(
    dataset: LabeledDataset,
    split: FoldSplit,
    fold: int,
    k_features: int,
    hidden: int,
    cfg: TrainConfig | None = None,
    *,
    mode: ReductionMode = ReductionMode.project,
    full_pca: PcaModel | None = None,
) -> FoldResult:
    """Fits the reduction and the network on the training part of a fold and classifies its held-out part.

    The network of fold `i` is initialized with seed `cfg.seed + i`.

    Args:
        dataset: All samples.
        split: The fold assignment.
        fold: Index of the held-out fold.
        k_features: Length of the reduced vectors.
        hidden: Number of hidden units.
        cfg: Training parameters, its `hidden` field is overridden.
        mode: How vectors are reduced.
        full_pca: A full rank PCA of the fold's training part, fitted if not given.

    Raises:
        EvaluationError: If the training part lacks a class or `k_features` is out of range.
    """
    cfg = cfg or TrainConfig()
    dim = dataset.features.shape[1] if len(dataset) else NUM_FEATURES
    _check_feature_count(k_features, dim)
    training = _fold_training_data(dataset, split, fold)
    full = full_pca or fit_pca(training.features, dim)
    pca = full.truncated(k_features, mode)
    fold_cfg = cfg.model_copy(update={"seed": cfg.seed + fold, "hidden": hidden})
    mlp = train(init_mlp(k_features, fold_cfg), reduce(pca, training.features), training.targets, fold_cfg)
    test = split.test_indices(fold)
    probabilities = predict_proba(mlp, reduce(pca, dataset.features[test])) if test.size else np.empty(0)
    return FoldResult(fold, pca, mlp, test, probabilities)


@dataclass
class Experiment:
    """A cross-validation setup that can be evaluated for many parameter choices.

    The fold split and the full rank PCA of every fold's training part are computed once and shared by all runs, so
    runs only differ in the parameters passed to :meth:`run`.
    """

    dataset: LabeledDataset
    cfg: TrainConfig = field(default_factory=TrainConfig)
    folds: int = 10
    seed: int = 0
    mode: ReductionMode = ReductionMode.project
    parallel: int = 1
    ui: ProgressUi = field(default_factory=EmptyUi)

    @cached_property
    def split(self) -> FoldSplit:
        """The stratified fold assignment."""
        self.dataset.require_both_classes()
        return kfold_split(len(self.dataset), self.folds, self.seed, self.dataset.targets)

    @cached_property
    def fold_pcas(self) -> list[PcaModel]:
        """Full rank PCA of the training part of every fold."""
        dim = self.dataset.features.shape[1]
        return [
            fit_pca(_fold_training_data(self.dataset, self.split, fold).features, dim) for fold in range(self.folds)
        ]

    def fit_folds(self, k_features: int, hidden: int) -> list[FoldResult]:
        """Runs every fold, up to `parallel` of them at once; results are in fold order."""
        _check_feature_count(k_features, self.dataset.features.shape[1])
        split, pcas = self.split, self.fold_pcas
        results: list[FoldResult | None] = [None] * self.folds
        errors: dict[int, Exception] = {}

        async def worker(fold: int, limiter: CapacityLimiter) -> None:
            try:
                results[fold] = await run_sync(
                    lambda: fit_fold(
                        self.dataset, split, fold, k_features, hidden, self.cfg, mode=self.mode, full_pca=pcas[fold]
                    ),
                    limiter=limiter,
                )
            except Exception as e:
                errors[fold] = e
            self.ui.advance("folds")

        async def run_all() -> None:
            limiter = CapacityLimiter(self.parallel)
            async with create_task_group() as tg:
                for fold in range(self.folds):
                    tg.start_soon(worker, fold, limiter)

        self.ui.start_task("folds", self.folds)
        run_async(run_all)
        self.ui.finish_task("folds")
        if errors:
            raise errors[min(errors)]
        return [result for result in results if result is not None]

    def run(self, k_features: int, hidden: int) -> EvalReport:
        """Cross-validates the pipeline with the given reduced length and hidden layer size."""
        fold_results = self.fit_folds(k_features, hidden)
        predictions = np.empty(len(self.dataset), dtype=np.int64)
        per_fold: list[float] = []
        for result in fold_results:
            predictions[result.test_indices] = result.predictions
            truth = self.dataset.targets[result.test_indices]
            per_fold.append(float(np.mean(result.predictions == truth)) if truth.size else 0.0)
        return EvalReport.from_predictions(self.dataset.targets, predictions, per_fold)


def cross_validate(
    dataset: LabeledDataset,
    k_features: int,
    hidden: int,
    cfg: TrainConfig | None = None,
    *,
    folds: int = 10,
    seed: int = 0,
    mode: ReductionMode = ReductionMode.project,
    parallel: int = 1,
    ui: ProgressUi | None = None,
) -> EvalReport:
    """Estimates the accuracy of the pipeline by stratified k-fold cross-validation.

    Raises:
        FeatureError: If the dataset lacks a class.
        EvaluationError: If there are more folds than samples, a training part lacks a class, or `k_features` is
            out of range.
    """
    experiment = Experiment(dataset, cfg or TrainConfig(), folds, seed, mode, parallel, ui or EmptyUi())
    return experiment.run(k_features, hidden)


class SweepRow(BaseModel):
    """Cross-validation result for one parameter value."""

    param: int
    accuracy: float
    sensitivity: float
    specificity: float

    @classmethod
    def from_report(cls, param: int, report: EvalReport) -> Self:
        """Extracts the summary statistics of a report."""
        return cls(
            param=param, accuracy=report.accuracy, sensitivity=report.sensitivity, specificity=report.specificity
        )


def _ranges(indices: Iterable[int]) -> str:
    """Formats sorted integers as `1-8, 10-13`."""
    values = sorted(indices)
    parts: list[str] = []
    start = prev = None
    for v in values:
        if prev is not None and v == prev + 1:
            prev = v
            continue
        if start is not None:
            parts.append(f"{start}-{prev}" if start != prev else f"{start}")
        start = prev = v
    if start is not None:
        parts.append(f"{start}-{prev}" if start != prev else f"{start}")
    return ", ".join(parts)


class SelectedFeatures(BaseModel):
    """Original features chosen by their PCA loadings, numbered from 1 within their block."""

    mfcc: list[int] = Field(default_factory=list)
    """Indices of the selected cepstral coefficients."""
    energy: list[int] = Field(default_factory=list)
    """Packet tree nodes whose energy was selected."""
    entropy: list[int] = Field(default_factory=list)
    """Packet tree nodes whose entropy was selected."""

    @classmethod
    def from_indices(cls, indices: Iterable[int]) -> Self:
        """Sorts 0-based positions in the feature vector into the three blocks."""
        blocks: dict[str, list[int]] = {"mfcc": [], "energy": [], "entropy": []}
        for index in sorted(int(i) for i in indices):
            for name, block in (("mfcc", MFCC_SLICE), ("energy", ENERGY_SLICE), ("entropy", ENTROPY_SLICE)):
                if block.start <= index < block.stop:
                    blocks[name].append(index - block.start + 1)
        return cls(**blocks)

    @property
    def count(self) -> int:
        """Total number of selected features."""
        return len(self.mfcc) + len(self.energy) + len(self.entropy)

    def describe(self) -> str:
        """A one line summary like `MFCC coefficients 1-8, 10-13; energy at nodes 1-3; entropy at nodes 5`."""
        parts = []
        if self.mfcc:
            parts.append(f"MFCC coefficients {_ranges(self.mfcc)}")
        if self.energy:
            parts.append(f"energy at nodes {_ranges(self.energy)}")
        if self.entropy:
            parts.append(f"entropy at nodes {_ranges(self.entropy)}")
        return "; ".join(parts)


class FeatureSweep(BaseModel):
    """Result of :func:`sweep_features`."""

    rows: list[SweepRow]
    best_count: int
    """Reduced length with the highest accuracy, the smallest one among ties."""
    selected: SelectedFeatures
    """Features a PCA of the whole dataset selects at the best length."""


def sweep_hidden(
    dataset: LabeledDataset,
    k_features: int,
    hidden_values: Sequence[int],
    cfg: TrainConfig | None = None,
    *,
    folds: int = 10,
    seed: int = 0,
    mode: ReductionMode = ReductionMode.project,
    parallel: int = 1,
    ui: ProgressUi | None = None,
) -> list[SweepRow]:
    """Cross-validates every hidden layer size with the same folds and seeds."""
    if not hidden_values:
        raise EvaluationError("The list of hidden layer sizes is empty.")
    experiment = Experiment(dataset, cfg or TrainConfig(), folds, seed, mode, parallel, ui or EmptyUi())
    return [SweepRow.from_report(h, experiment.run(k_features, h)) for h in hidden_values]


def sweep_features(
    dataset: LabeledDataset,
    feature_counts: Sequence[int],
    hidden: int = 5,
    cfg: TrainConfig | None = None,
    *,
    folds: int = 10,
    seed: int = 0,
    mode: ReductionMode = ReductionMode.project,
    parallel: int = 1,
    ui: ProgressUi | None = None,
) -> FeatureSweep:
    """Cross-validates every reduced vector length with the same folds and seeds.

    Also reports which original features a PCA of the whole dataset ranks highest at the best length.
    """
    if not feature_counts:
        raise EvaluationError("The list of feature counts is empty.")
    dim = dataset.features.shape[1] if len(dataset) else NUM_FEATURES
    for count in feature_counts:
        _check_feature_count(count, dim)
    experiment = Experiment(dataset, cfg or TrainConfig(), folds, seed, mode, parallel, ui or EmptyUi())
    rows = [SweepRow.from_report(count, experiment.run(count, hidden)) for count in feature_counts]
    best = max(rows, key=lambda row: (row.accuracy, -row.param))
    selected = select_features_by_loadings(fit_pca(dataset, best.param), best.param)
    return FeatureSweep(rows=rows, best_count=best.param, selected=SelectedFeatures.from_indices(selected))


def write_sweep_csv(path: Path, rows: Iterable[SweepRow]) -> None:
    """Writes the `param,accuracy,sensitivity,specificity` table."""
    lines = ["param,accuracy,sensitivity,specificity"]
    lines += [f"{r.param},{r.accuracy:.17g},{r.sensitivity:.17g},{r.specificity:.17g}" for r in rows]
    path.write_text("\n".join(lines) + "\n")


def write_plot_data(path: Path, rows: Iterable[SweepRow], param_name: str = "param") -> None:
    """Writes a two column whitespace separated file gnuplot can plot directly."""
    lines = [f"# {param_name} accuracy"]
    lines += [f"{r.param} {r.accuracy:.17g}" for r in rows]
    path.write_text("\n".join(lines) + "\n")
