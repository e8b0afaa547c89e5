"""Wavelet packet decomposition with the 20 tap Daubechies filters of order ten.

Every node of the packet tree is split into a lowpass and a highpass child by circular convolution followed by dyadic
downsampling. The periodic boundary keeps each split orthonormal: node lengths halve exactly, the energy of every
full tree level equals the energy of the signal, and :func:`wp_reconstruct` inverts :func:`wp_decompose` exactly.

Nodes are numbered breadth first, node `(level, position)` having index `2**level - 1 + position`. Child `2p` of a
node is its lowpass band and child `2p + 1` its highpass band.
"""
from collections.abc import Iterator, Sequence
from dataclasses import dataclass
from functools import cache

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import xlogy

from vocalfold.signal_io import AudioSignal
from vocalfold.util import WaveletError

__all__ = (
    "DEPTH",
    "WaveletFilterPair",
    "WpNode",
    "WpTree",
    "db10_filters",
    "node_energy",
    "node_shannon_entropy",
    "tree_energies",
    "tree_entropies",
    "wp_decompose",
    "wp_reconstruct",
    "wp_step",
)

DEPTH = 5
FILTER_TOLERANCE = 1e-10

# scaling filter of the order ten Daubechies wavelet, in the usual published order
_DB10_LOWPASS = (
    0.026670057900950818,
    0.18817680007762133,
    0.5272011889309198,
    0.6884590394525921,
    0.2811723436604265,
    -0.24984642432648865,
    -0.19594627437659665,
    0.12736934033574265,
    0.09305736460380659,
    -0.07139414716586077,
    -0.02945753682194567,
    0.03321267405893324,
    0.0036065535669883944,
    -0.010733175482979604,
    0.0013953517469940798,
    0.00199240529499085,
    -0.0006858566950046825,
    -0.0001164668549943862,
    9.358867000108985e-05,
    -1.326420300235487e-05,
)


@dataclass(frozen=True, eq=False)
class WaveletFilterPair:
    """Analysis filters of an orthonormal two channel filter bank."""

    lowpass: NDArray[np.float64]
    highpass: NDArray[np.float64]

    @classmethod
    def from_lowpass(cls, lowpass: Sequence[float]) -> "WaveletFilterPair":
        """Builds the pair using the quadrature mirror relation `g[i] = (-1)^i h[L-1-i]`."""
        h = np.array(lowpass, dtype=np.float64)
        signs = np.where(np.arange(h.size) % 2 == 0, 1.0, -1.0)
        return cls(h, signs * h[::-1])

    @property
    def taps(self) -> int:
        """Number of filter coefficients."""
        return self.lowpass.size

    def validate(self, tolerance: float = FILTER_TOLERANCE) -> None:
        """Checks the normalization, orthonormality and mirror identities of the pair.

        Raises:
            WaveletError: If any identity is violated by more than `tolerance`.
        """
        h, g = self.lowpass, self.highpass
        n = h.size
        mirror = np.where(np.arange(n) % 2 == 0, 1.0, -1.0) * h[::-1]
        checks = {
            "lowpass sum equals sqrt(2)": abs(h.sum() - np.sqrt(2)),
            "lowpass energy equals 1": abs(np.dot(h, h) - 1),
            "highpass is the quadrature mirror": float(np.max(np.abs(g - mirror))),
            "highpass sum equals 0": abs(g.sum()),
            "lowpass is orthogonal to its even shifts": max(
                (abs(float(np.dot(h[: n - 2 * m], h[2 * m :]))) for m in range(1, n // 2)), default=0.0
            ),
        }
        failed = [f"{name} (off by {err:.3e})" for name, err in checks.items() if not err <= tolerance]
        if failed:
            raise WaveletError("The wavelet filter pair violates its defining identities.", detail=failed)


@cache
def db10_filters() -> WaveletFilterPair:
    """The order ten Daubechies lowpass filter and its quadrature mirror highpass."""
    pair = WaveletFilterPair.from_lowpass(_DB10_LOWPASS)
    pair.validate()
    return pair


# checked once on import
db10_filters()


@cache
def _step_indices(n: int, taps: int) -> NDArray[np.intp]:
    return (2 * np.arange(n // 2)[:, None] + np.arange(taps)[None, :]) % n


def wp_step(coeffs: ArrayLike, filt: ArrayLike) -> NDArray[np.float64]:
    """One analysis step: `y[k] = sum_i filt[i] * x[(2k + i) mod n]` for `k < n/2`.

    Works along the last axis, leading axes are a batch.

    Raises:
        WaveletError: If the length is odd or zero.
    """
    x = np.asarray(coeffs, dtype=np.float64)
    f = np.asarray(filt, dtype=np.float64)
    n = x.shape[-1]
    if n < 2 or n % 2:
        raise WaveletError(f"Wavelet packet steps need an even, nonzero length, got {n}.")
    return x[..., _step_indices(n, f.size)] @ f


def _synthesis_step(
    low: NDArray[np.float64], high: NDArray[np.float64], filters: WaveletFilterPair
) -> NDArray[np.float64]:
    """Adjoint of the two analysis steps, which is their inverse since the filter bank is orthonormal."""
    n = 2 * low.size
    idx = _step_indices(n, filters.taps).ravel()
    contributions = (low[:, None] * filters.lowpass + high[:, None] * filters.highpass).ravel()
    return np.bincount(idx, weights=contributions, minlength=n)


@dataclass(frozen=True, eq=False)
class WpNode:
    """A single sub-band of the packet tree."""

    level: int
    position: int
    coeffs: NDArray[np.float64]

    @property
    def index(self) -> int:
        """Breadth first index of the node, 0 for the root."""
        return 2**self.level - 1 + self.position


@dataclass(frozen=True, eq=False)
class WpTree:
    """Complete wavelet packet tree of a signal down to `depth`."""

    nodes: tuple[WpNode, ...]
    depth: int

    def __post_init__(self) -> None:
        if self.depth < 0 or len(self.nodes) != 2 ** (self.depth + 1) - 1:
            raise WaveletError(
                f"A packet tree of depth {self.depth} needs {2 ** (self.depth + 1) - 1} nodes, got {len(self.nodes)}."
            )
        root_len = self.nodes[0].coeffs.size
        for k, node in enumerate(self.nodes):
            if node.index != k or not 0 <= node.position < 2**node.level:
                raise WaveletError(f"Node ({node.level}, {node.position}) is stored at index {k}.")
            if node.coeffs.shape != (root_len >> node.level,):
                raise WaveletError(
                    f"Node ({node.level}, {node.position}) holds {node.coeffs.size} coefficients, "
                    f"expected {root_len >> node.level}."
                )

    def __len__(self) -> int:
        return len(self.nodes)

    def __iter__(self) -> Iterator[WpNode]:
        return iter(self.nodes)

    def node(self, level: int, position: int) -> WpNode:
        """The node at the given level and position."""
        if not (0 <= level <= self.depth and 0 <= position < 2**level):
            raise WaveletError(f"There is no node ({level}, {position}) in a tree of depth {self.depth}.")
        return self.nodes[2**level - 1 + position]

    def level(self, level: int) -> list[WpNode]:
        """All nodes of a level, ordered by position."""
        return [self.node(level, p) for p in range(2**level)]

    @property
    def leaves(self) -> list[WpNode]:
        """The nodes of the deepest level."""
        return self.level(self.depth)

    def with_leaves(self, leaves: ArrayLike) -> "WpTree":
        """A copy of the tree whose deepest level holds the given rows instead."""
        rows = np.asarray(leaves, dtype=np.float64)
        current = self.leaves
        if rows.shape != (len(current), current[0].coeffs.size):
            raise WaveletError(f"Expected leaves of shape {(len(current), current[0].coeffs.size)}, got {rows.shape}.")
        replaced = tuple(WpNode(self.depth, p, rows[p].copy()) for p in range(len(current)))
        return WpTree(self.nodes[: -len(current)] + replaced, self.depth)


def wp_decompose(signal: AudioSignal | ArrayLike, depth: int = DEPTH) -> WpTree:
    """Full packet tree of the signal.

    The signal is truncated to the largest multiple of `2**depth` first.

    Raises:
        WaveletError: If fewer than `2**depth` samples remain.
    """
    x = signal.samples if isinstance(signal, AudioSignal) else np.asarray(signal, dtype=np.float64).reshape(-1)
    block = 2**depth
    usable = x.size - x.size % block
    if usable < block:
        raise WaveletError(f"A depth {depth} decomposition needs at least {block} samples, got {x.size}.")
    filters = db10_filters()
    current = x[:usable].astype(np.float64).reshape(1, usable)
    nodes = [WpNode(0, 0, current[0])]
    for level in range(1, depth + 1):
        low = wp_step(current, filters.lowpass)
        high = wp_step(current, filters.highpass)
        current = np.stack([low, high], axis=1).reshape(2**level, -1)
        nodes.extend(WpNode(level, p, row) for p, row in enumerate(current))
    return WpTree(tuple(nodes), depth)


def wp_reconstruct(tree: WpTree) -> NDArray[np.float64]:
    """Rebuilds the (truncated) signal from the deepest level of the tree alone."""
    filters = db10_filters()
    current = [node.coeffs for node in tree.leaves]
    while len(current) > 1:
        current = [_synthesis_step(current[2 * p], current[2 * p + 1], filters) for p in range(len(current) // 2)]
    return current[0]


def node_energy(node: WpNode | ArrayLike) -> float:
    """Sum of the squared coefficients."""
    c = node.coeffs if isinstance(node, WpNode) else np.asarray(node, dtype=np.float64)
    return float(np.dot(c, c))


def node_shannon_entropy(node: WpNode | ArrayLike) -> float:
    """Non-normalized Shannon entropy `-sum c^2 ln c^2`, with `0 ln 0 = 0`."""
    c = node.coeffs if isinstance(node, WpNode) else np.asarray(node, dtype=np.float64)
    p = c * c
    return float(-np.sum(xlogy(p, p)))


def tree_energies(tree: WpTree) -> NDArray[np.float64]:
    """Energy of every node in index order."""
    return np.array([node_energy(node) for node in tree])


def tree_entropies(tree: WpTree) -> NDArray[np.float64]:
    """Shannon entropy of every node in index order."""
    return np.array([node_shannon_entropy(node) for node in tree])
