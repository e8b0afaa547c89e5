"""Mel-frequency cepstral coefficients.

The filterbank follows the Auditory Toolbox layout: 13 filters whose centers are spaced linearly 133.33 Hz apart,
followed by 27 filters spaced logarithmically by a factor of 1.0711703. Each triangular filter has unit area, its
edges being the centers of its neighbours. Power spectra of Hamming windowed frames are integrated by the filters,
the log energies are turned into cepstra by an orthonormal DCT-II, and the first 13 coefficients are kept.
"""
from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.fft import dct

from vocalfold.signal_io import AudioSignal, Frame, frame_matrix, hamming_window
from vocalfold.util import SpectralError

__all__ = (
    "MelFilterbank",
    "MfccVector",
    "build_mel_filterbank",
    "fft",
    "fft_magnitude",
    "mfcc_average",
    "mfcc_frame",
    "mfcc_frames",
    "next_power_of_two",
)

NUM_LINEAR = 13
NUM_LOG = 27
NUM_FILTERS = NUM_LINEAR + NUM_LOG
LINEAR_SPACING = 133.33
LOG_FACTOR = 1.0711703
NUM_CEPSTRA = 13
LOG_FLOOR = 1e-10


def _is_power_of_two(n: int) -> bool:
    return n >= 1 and n & (n - 1) == 0


def next_power_of_two(n: int) -> int:
    """Smallest power of two that is at least `n`."""
    return 1 << max(n - 1, 0).bit_length()


def _bit_reversal(n: int) -> NDArray[np.intp]:
    bits = n.bit_length() - 1
    idx = np.arange(n)
    rev = np.zeros(n, dtype=np.intp)
    for b in range(bits):
        rev |= ((idx >> b) & 1) << (bits - 1 - b)
    return rev


def fft(x: ArrayLike) -> NDArray[np.complex128]:
    """Iterative radix-2 decimation-in-time FFT along the last axis.

    Leading axes are treated as a batch.

    Raises:
        SpectralError: If the transform length is not a power of two.
    """
    data = np.asarray(x, dtype=np.complex128)
    n = data.shape[-1]
    if not _is_power_of_two(n):
        raise SpectralError(f"The FFT length must be a power of two, got {n}.")
    batch = data.shape[:-1]
    out = data[..., _bit_reversal(n)]
    size = 2
    while size <= n:
        half = size // 2
        twiddle = np.exp(-2j * np.pi * np.arange(half) / size)
        blocks = out.reshape(*batch, n // size, size)
        even = blocks[..., :half]
        odd = blocks[..., half:] * twiddle
        out = np.concatenate([even + odd, even - odd], axis=-1).reshape(*batch, n)
        size *= 2
    return out


def fft_magnitude(frame: ArrayLike, fft_size: int) -> NDArray[np.float64]:
    """Magnitudes of the DFT bins 0..fft_size/2 of a zero-padded frame (or of every row of a matrix of frames)."""
    data = np.asarray(frame, dtype=np.float64)
    if not _is_power_of_two(fft_size):
        raise SpectralError(f"The FFT size must be a power of two, got {fft_size}.")
    if data.shape[-1] > fft_size:
        raise SpectralError(f"A frame of length {data.shape[-1]} does not fit into an FFT of size {fft_size}.")
    padding = [(0, 0)] * (data.ndim - 1) + [(0, fft_size - data.shape[-1])]
    spectrum = fft(np.pad(data, padding))
    return np.abs(spectrum[..., : fft_size // 2 + 1])


@dataclass(frozen=True, eq=False)
class MelFilterbank:
    """Triangular filters sampled at the bins of a real FFT."""

    center_freqs: NDArray[np.float64]
    filter_weights: NDArray[np.float64]
    """Matrix with one row per filter and one column per FFT bin."""
    fft_size: int
    sample_rate: int

    @property
    def num_filters(self) -> int:
        """Number of filters in the bank."""
        return self.center_freqs.size

    @property
    def bin_freqs(self) -> NDArray[np.float64]:
        """Frequency in Hz of every FFT bin the filters are sampled at."""
        return np.arange(self.fft_size // 2 + 1) * self.sample_rate / self.fft_size

    def apply(self, power: NDArray[np.float64]) -> NDArray[np.float64]:
        """Integrates power spectra (bins along the last axis) with every filter."""
        return power @ self.filter_weights.T


def filterbank_edges() -> NDArray[np.float64]:
    """The 42 edge frequencies f_c(0) = 0, the 40 center frequencies, and the extrapolated f_c(41)."""
    linear = LINEAR_SPACING * np.arange(1, NUM_LINEAR + 1)
    log = linear[-1] * LOG_FACTOR ** np.arange(1, NUM_LOG + 2)
    return np.concatenate([[0.0], linear, log])


def build_mel_filterbank(sample_rate: int, fft_size: int) -> MelFilterbank:
    """Builds the 40 filter bank for the given sampling rate and FFT size.

    Raises:
        SpectralError: If the top filter's upper edge is not below the Nyquist frequency, the FFT size is not a power
            of two, or the FFT is too coarse to place a bin inside every filter.
    """
    if not _is_power_of_two(fft_size):
        raise SpectralError(f"The FFT size must be a power of two, got {fft_size}.")
    edges = filterbank_edges()
    if not edges[-1] < sample_rate / 2:
        raise SpectralError(
            f"A sample rate of {sample_rate} Hz is too low for the filterbank.",
            detail=f"the top filter reaches {edges[-1]:.1f} Hz, the Nyquist frequency is {sample_rate / 2:.1f} Hz",
        )
    lower, center, upper = edges[:-2, None], edges[1:-1, None], edges[2:, None]
    freqs = np.arange(fft_size // 2 + 1)[None, :] * sample_rate / fft_size
    rising = (freqs - lower) / (center - lower)
    falling = (upper - freqs) / (upper - center)
    weights = 2 / (upper - lower) * np.clip(np.minimum(rising, falling), 0, None)
    if not np.all(weights.max(axis=1) > 0):
        empty = int(np.argmin(weights.max(axis=1))) + 1
        raise SpectralError(
            f"An FFT of size {fft_size} at {sample_rate} Hz leaves filter {empty} without any bin.",
        )
    return MelFilterbank(center[:, 0].copy(), weights, fft_size, sample_rate)


@dataclass(frozen=True, eq=False)
class MfccVector:
    """Cepstral coefficients c0..c12."""

    coeffs: NDArray[np.float64]

    def __post_init__(self) -> None:
        if self.coeffs.shape != (NUM_CEPSTRA,) or not np.all(np.isfinite(self.coeffs)):
            raise SpectralError(f"An MFCC vector holds exactly {NUM_CEPSTRA} finite values.")


def _cepstra(frames: NDArray[np.float64], fb: MelFilterbank) -> NDArray[np.float64]:
    windowed = frames * hamming_window(frames.shape[-1])
    power = fft_magnitude(windowed, fb.fft_size) ** 2
    energies = fb.apply(power)
    log_energies = np.log(np.maximum(energies, LOG_FLOOR))
    return dct(log_energies, type=2, norm="ortho", axis=-1)[..., :NUM_CEPSTRA]


def mfcc_frame(frame: Frame | ArrayLike, fb: MelFilterbank) -> MfccVector:
    """Cepstral coefficients of a single frame, which gets Hamming windowed first."""
    samples = frame.samples if isinstance(frame, Frame) else np.asarray(frame, dtype=np.float64)
    return MfccVector(_cepstra(samples, fb))


def _filterbank_for(signal: AudioSignal, frame_len: int) -> MelFilterbank:
    return build_mel_filterbank(signal.sample_rate, next_power_of_two(frame_len))


def mfcc_frames(
    signal: AudioSignal, frame_len: int = 256, hop: int = 128, fb: MelFilterbank | None = None
) -> NDArray[np.float64]:
    """Cepstral coefficients of every frame, one row per frame.

    If no filterbank is given one is built for the signal's rate and the smallest power of two FFT holding a frame.
    """
    if fb is None:
        fb = _filterbank_for(signal, frame_len)
    elif fb.sample_rate != signal.sample_rate:
        raise SpectralError(
            f"The filterbank was built for {fb.sample_rate} Hz but the signal is sampled at {signal.sample_rate} Hz."
        )
    return _cepstra(frame_matrix(signal, frame_len, hop), fb)


def mfcc_average(
    signal: AudioSignal, frame_len: int = 256, hop: int = 128, fb: MelFilterbank | None = None
) -> MfccVector:
    """Per coefficient mean of the frame cepstra over the whole signal.

    Raises:
        SignalError: If the signal is shorter than one frame.
    """
    return MfccVector(mfcc_frames(signal, frame_len, hop, fb).mean(axis=0))
