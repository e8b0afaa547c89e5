"""Principal component analysis of feature matrices.

The covariance eigenproblem is solved by a parallel-ordered cyclic Jacobi method: every sweep visits all index pairs
in rounds of disjoint pairs, and all rotations of a round are applied at once.
"""
from dataclasses import dataclass
from enum import StrEnum
from typing import Self

import numpy as np
from numpy.typing import ArrayLike, NDArray

from vocalfold.features import FeatureVector, LabeledDataset
from vocalfold.util import PcaError

__all__ = (
    "PcaModel",
    "ReductionMode",
    "fit_pca",
    "jacobi_eigh",
    "reduce",
    "select_features_by_loadings",
    "transform",
)

JACOBI_TOLERANCE = 1e-12
MAX_SWEEPS = 100


class ReductionMode(StrEnum):
    """How a fitted model shortens feature vectors."""

    project = "project"
    """Coordinates along the leading principal components."""
    select = "select"
    """Standardized values of the original features with the largest loadings."""


def _round_robin(n: int) -> list[tuple[NDArray[np.intp], NDArray[np.intp]]]:
    """Rounds of disjoint `(p, q)` pairs, `p < q`, that together contain every pair of `range(n)` exactly once."""
    m = n + n % 2
    players = list(range(m))
    rounds: list[tuple[NDArray[np.intp], NDArray[np.intp]]] = []
    for _ in range(m - 1):
        pairs = [(players[i], players[m - 1 - i]) for i in range(m // 2)]
        # index n is a bye when n is odd
        pairs = [(min(a, b), max(a, b)) for a, b in pairs if a < n and b < n]
        if pairs:
            p, q = zip(*pairs, strict=True)
            rounds.append((np.array(p, dtype=np.intp), np.array(q, dtype=np.intp)))
        players = [players[0], players[-1], *players[1:-1]]
    return rounds


def _off_diagonal_norm(a: NDArray[np.float64]) -> float:
    return float(np.sqrt(2 * np.sum(np.triu(a, 1) ** 2)))


def jacobi_eigh(matrix: ArrayLike) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigendecomposition of a real symmetric matrix.

    Returns:
        The eigenvalues in descending order and a matrix whose columns are the corresponding orthonormal eigenvectors.

    Raises:
        PcaError: If the matrix is not square, symmetric and finite, or the iteration does not converge.
    """
    a = np.array(matrix, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise PcaError(f"Only square matrices can be diagonalized, got shape {a.shape}.")
    if not np.all(np.isfinite(a)):
        raise PcaError("The matrix contains non-finite entries.")
    n = a.shape[0]
    norm = float(np.linalg.norm(a))
    if np.max(np.abs(a - a.T), initial=0.0) > 1e-12 * max(1.0, norm):
        raise PcaError("Jacobi rotations need a symmetric matrix.")
    a = (a + a.T) / 2
    v = np.eye(n)
    threshold = JACOBI_TOLERANCE * max(1.0, norm)
    rounds = _round_robin(n)

    for _ in range(MAX_SWEEPS):
        if _off_diagonal_norm(a) < threshold:
            break
        for p, q in rounds:
            apq = a[p, q]
            rotate = apq != 0
            theta = np.divide(a[q, q] - a[p, p], 2 * apq, out=np.zeros_like(apq), where=rotate)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(rotate, t, 0.0)
            c = 1 / np.sqrt(t * t + 1)
            s = t * c

            col_p, col_q = a[:, p].copy(), a[:, q].copy()
            a[:, p] = c * col_p - s * col_q
            a[:, q] = s * col_p + c * col_q
            row_p, row_q = a[p, :].copy(), a[q, :].copy()
            a[p, :] = c[:, None] * row_p - s[:, None] * row_q
            a[q, :] = s[:, None] * row_p + c[:, None] * row_q
            a[p, q] = 0.0
            a[q, p] = 0.0
            vec_p, vec_q = v[:, p].copy(), v[:, q].copy()
            v[:, p] = c * vec_p - s * vec_q
            v[:, q] = s * vec_p + c * vec_q
    else:
        if _off_diagonal_norm(a) >= threshold:
            raise PcaError(
                f"The Jacobi iteration did not converge within {MAX_SWEEPS} sweeps.",
                detail=f"off-diagonal norm {_off_diagonal_norm(a):.3e}, threshold {threshold:.3e}",
            )

    eigenvalues = np.diag(a).copy()
    order = np.argsort(-eigenvalues, kind="stable")
    return eigenvalues[order], v[:, order]


@dataclass(frozen=True, eq=False)
class PcaModel:
    """A fitted principal component analysis.

    Inputs are standardized as `(x - mean) / scale` and then projected onto the rows of `components`.
    """

    mean: NDArray[np.float64]
    scale: NDArray[np.float64]
    components: NDArray[np.float64]
    """Matrix with one orthonormal row per component."""
    eigenvalues: NDArray[np.float64]
    total_variance: float
    """Sum of all eigenvalues of the fitted covariance, including those of dropped components."""
    mode: ReductionMode = ReductionMode.project

    def __post_init__(self) -> None:
        d = self.mean.shape[0] if self.mean.ndim == 1 else -1
        k = self.eigenvalues.shape[0] if self.eigenvalues.ndim == 1 else -1
        if d < 1 or self.scale.shape != (d,) or k < 1 or k > d or self.components.shape != (k, d):
            raise PcaError(
                "The parts of the PCA model have inconsistent shapes.",
                detail=f"mean {self.mean.shape}, scale {self.scale.shape}, components {self.components.shape}, "
                f"eigenvalues {self.eigenvalues.shape}",
            )
        if not np.all(self.scale > 0):
            raise PcaError("Standardization scales must be positive.")
        if np.any(np.diff(self.eigenvalues) > 0) or np.any(self.eigenvalues < 0):
            raise PcaError("Eigenvalues must be non-negative and sorted in descending order.")
        object.__setattr__(self, "mode", ReductionMode(self.mode))

    @property
    def dim(self) -> int:
        """Length of the input vectors."""
        return self.mean.size

    @property
    def k(self) -> int:
        """Number of retained components."""
        return self.eigenvalues.size

    @property
    def explained_variance_ratio(self) -> NDArray[np.float64]:
        """Fraction of the total variance each retained component accounts for."""
        if self.total_variance <= 0:
            return np.zeros_like(self.eigenvalues)
        return self.eigenvalues / self.total_variance

    def standardized(self, data: ArrayLike) -> NDArray[np.float64]:
        """Centers and scales a vector, or every row of a matrix."""
        x = _as_matrix(data, self.dim)
        return (x - self.mean) / self.scale

    def truncated(self, k: int, mode: ReductionMode | None = None) -> Self:
        """The same analysis keeping only the first `k` components."""
        if not 1 <= k <= self.k:
            raise PcaError(f"Cannot keep {k} of {self.k} components.")
        return type(self)(
            self.mean,
            self.scale,
            self.components[:k],
            self.eigenvalues[:k],
            self.total_variance,
            self.mode if mode is None else mode,
        )


def _as_matrix(data: ArrayLike | FeatureVector, dim: int) -> NDArray[np.float64]:
    x = data.values if isinstance(data, FeatureVector) else np.asarray(data, dtype=np.float64)
    if x.shape[-1:] != (dim,) or x.ndim > 2:
        raise PcaError(f"Expected vectors of length {dim}, got an array of shape {x.shape}.")
    return x


def fit_pca(
    data: LabeledDataset | ArrayLike,
    k: int,
    *,
    standardize: bool = True,
    mode: ReductionMode = ReductionMode.project,
) -> PcaModel:
    """Fits a PCA on the rows of `data` and keeps the `k` leading components.

    Every feature is z-scored first unless `standardize` is false. Constant features keep a scale of 1, their
    standardized values are always 0. Components are signed so that their largest magnitude entry is positive.
    Components beyond the rank of the data have eigenvalue 0.

    Raises:
        PcaError: If there are fewer than two samples or `k` is not between 1 and the number of features.
    """
    x = data.features if isinstance(data, LabeledDataset) else np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise PcaError(f"PCA needs a sample by feature matrix, got shape {x.shape}.")
    n, d = x.shape
    if n < 2:
        raise PcaError(f"PCA needs at least 2 samples, got {n}.")
    if not 1 <= k <= d:
        raise PcaError(f"The number of components must be between 1 and {d}, got {k}.")
    if not np.all(np.isfinite(x)):
        raise PcaError("The data contains non-finite values.")

    constant = np.all(x == x[0], axis=0)
    mean = np.where(constant, x[0], x.mean(axis=0))
    if standardize:
        scale = np.where(constant, 1.0, x.std(axis=0, ddof=1))
    else:
        scale = np.ones(d)
    z = (x - mean) / scale
    z[:, constant] = 0.0
    covariance = z.T @ z / (n - 1)

    eigenvalues, vectors = jacobi_eigh(covariance)
    # round-off can push zero eigenvalues slightly below 0
    eigenvalues = np.maximum(eigenvalues, 0.0)
    components = vectors.T.copy()
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.where(components[np.arange(d), pivots] < 0, -1.0, 1.0)
    components *= signs[:, None]
    full = PcaModel(mean, scale, components, eigenvalues, float(eigenvalues.sum()), mode)
    return full.truncated(k)


def transform(model: PcaModel, v: FeatureVector | ArrayLike) -> NDArray[np.float64]:
    """Coordinates of a vector (or of every row of a matrix) along the model's components."""
    return model.standardized(_as_matrix(v, model.dim)) @ model.components.T


def select_features_by_loadings(model: PcaModel, m: int) -> NDArray[np.intp]:
    """Indices of the `m` original features with the largest variance-weighted squared loadings.

    Feature `j` scores `sum_i eigenvalue_i * components[i, j]**2`; equal scores are ordered by index.
    """
    if not 1 <= m <= model.dim:
        raise PcaError(f"Can select between 1 and {model.dim} features, got {m}.")
    scores = model.eigenvalues @ model.components**2
    order = np.lexsort((np.arange(model.dim), -scores))
    return order[:m]


def reduce(model: PcaModel, data: FeatureVector | ArrayLike) -> NDArray[np.float64]:
    """Shortens vectors to `model.k` entries according to the model's reduction mode."""
    match model.mode:
        case ReductionMode.project:
            return transform(model, data)
        case ReductionMode.select:
            return model.standardized(_as_matrix(data, model.dim))[..., select_features_by_loadings(model, model.k)]
