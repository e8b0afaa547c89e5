"""The model file bundling a fitted reduction and a trained network.

The file is line based text. Its first line is `VPMODEL 1`, every other line starts with a keyword followed by
whitespace separated values, floats written with 17 significant digits so that loading restores them exactly::

    VPMODEL 1
    pca <mode> <d> <k>
    mean <d values>
    scale <d values>
    variance <total variance>
    eigenvalues <k values>
    component <d values>        (k lines)
    mlp <d_in> <h>
    w1 <d_in values>            (h lines)
    b1 <h values>
    w2 <h values>
    b2 <value>
"""
from collections.abc import Iterator
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.typing import ArrayLike, NDArray

from vocalfold.ann import MlpModel, forward
from vocalfold.features import FeatureVector
from vocalfold.pca import PcaModel, ReductionMode, reduce
from vocalfold.util import AnnError, EncodingError, PcaError

__all__ = ("MAGIC", "PipelineModel", "load_model", "save_model")

MAGIC = "VPMODEL 1"


@dataclass(frozen=True, eq=False)
class PipelineModel:
    """A feature reduction followed by the network classifying its output."""

    pca: PcaModel
    mlp: MlpModel

    def __post_init__(self) -> None:
        if self.pca.k != self.mlp.d:
            raise EncodingError(
                f"The reduction produces {self.pca.k} values but the network expects {self.mlp.d}."
            )

    def reduce(self, vector: FeatureVector | ArrayLike) -> NDArray[np.float64]:
        """The network input for a feature vector."""
        return reduce(self.pca, vector)

    def predict_proba(self, vector: FeatureVector | ArrayLike) -> float:
        """Probability that the recording the vector was extracted from is pathological."""
        return forward(self.mlp, self.reduce(vector))


def _values(values: ArrayLike) -> str:
    return " ".join(f"{v:.17g}" for v in np.asarray(values, dtype=np.float64).reshape(-1))


def _lines(model: PipelineModel) -> Iterator[str]:
    pca, mlp = model.pca, model.mlp
    yield MAGIC
    yield f"pca {pca.mode} {pca.dim} {pca.k}"
    yield f"mean {_values(pca.mean)}"
    yield f"scale {_values(pca.scale)}"
    yield f"variance {pca.total_variance:.17g}"
    yield f"eigenvalues {_values(pca.eigenvalues)}"
    for row in pca.components:
        yield f"component {_values(row)}"
    yield f"mlp {mlp.d} {mlp.h}"
    for row in mlp.w1:
        yield f"w1 {_values(row)}"
    yield f"b1 {_values(mlp.b1)}"
    yield f"w2 {_values(mlp.w2)}"
    yield f"b2 {mlp.b2:.17g}"


def save_model(path: Path, model: PipelineModel) -> None:
    """Writes the model file."""
    path.write_text("\n".join(_lines(model)) + "\n")


class _Reader:
    """Walks through the lines of a model file, checking keywords and field counts."""

    def __init__(self, path: Path, text: str) -> None:
        self.path = path
        self.lines = [(i, line.split()) for i, line in enumerate(text.splitlines(), start=1) if line.strip()]
        self.pos = 0

    def error(self, message: str, line: int | None = None) -> EncodingError:
        where = f"line {line} of " if line is not None else ""
        return EncodingError(f"Invalid model file: {where}'{self.path}': {message}")

    def fields(self, keyword: str, count: int) -> tuple[int, list[str]]:
        if self.pos >= len(self.lines):
            raise self.error(f"expected a '{keyword}' line but the file ended.")
        line, tokens = self.lines[self.pos]
        self.pos += 1
        if tokens[0] != keyword:
            raise self.error(f"expected '{keyword}', found '{tokens[0]}'.", line)
        if len(tokens) - 1 != count:
            raise self.error(f"'{keyword}' needs {count} values, found {len(tokens) - 1}.", line)
        return line, tokens[1:]

    def floats(self, keyword: str, count: int) -> NDArray[np.float64]:
        line, tokens = self.fields(keyword, count)
        try:
            values = np.array([float(token) for token in tokens])
        except ValueError as e:
            raise self.error(f"'{keyword}' holds a value that is not a number.", line) from e
        if not np.all(np.isfinite(values)):
            raise self.error(f"'{keyword}' holds a non-finite value.", line)
        return values

    def ints(self, tokens: list[str], line: int) -> list[int]:
        try:
            values = [int(token) for token in tokens]
        except ValueError as e:
            raise self.error("dimensions must be integers.", line) from e
        if any(v < 1 for v in values):
            raise self.error("dimensions must be positive.", line)
        return values

    def finish(self) -> None:
        if self.pos != len(self.lines):
            line, tokens = self.lines[self.pos]
            raise self.error(f"unexpected '{tokens[0]}' after the end of the model.", line)


def load_model(path: Path) -> PipelineModel:
    """Reads a model file written by :func:`save_model`.

    Raises:
        EncodingError: If the file is missing, has the wrong version, or any block is malformed.
    """
    if not path.is_file():
        raise EncodingError(f"The model file '{path}' does not exist.")
    text = path.read_text()
    first = text.splitlines()[0].strip() if text else ""
    if first != MAGIC:
        raise EncodingError(f"'{path}' is not a model file of version 1.", detail=f"first line is '{first}'")
    reader = _Reader(path, text)
    reader.pos = 1

    line, (mode_name, *dims) = reader.fields("pca", 3)
    try:
        mode = ReductionMode(mode_name)
    except ValueError as e:
        raise reader.error(f"unknown reduction mode '{mode_name}'.", line) from e
    d, k = reader.ints(dims, line)
    mean = reader.floats("mean", d)
    scale = reader.floats("scale", d)
    (variance,) = reader.floats("variance", 1)
    eigenvalues = reader.floats("eigenvalues", k)
    components = np.stack([reader.floats("component", d) for _ in range(k)])

    line, dims = reader.fields("mlp", 2)
    d_in, h = reader.ints(dims, line)
    w1 = np.stack([reader.floats("w1", d_in) for _ in range(h)])
    b1 = reader.floats("b1", h)
    w2 = reader.floats("w2", h)
    (b2,) = reader.floats("b2", 1)
    reader.finish()

    try:
        pca = PcaModel(mean, scale, components, eigenvalues, float(variance), mode)
        mlp = MlpModel(w1, b1, w2, float(b2))
    except (PcaError, AnnError) as e:
        raise EncodingError(f"The model stored in '{path}' is inconsistent.", detail=e.message) from e
    return PipelineModel(pca, mlp)
