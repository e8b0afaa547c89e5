"""Reading and writing PCM WAV files and the short-time analysis primitives built on top of them.

Samples are held as float64 numpy arrays scaled to [-1, 1]. Only uncompressed integer PCM (format tag 1) at 8, 16 or
24 bits is understood; multichannel files are averaged down to mono.
"""
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from numpy.typing import ArrayLike, NDArray
from pydantic import Field

from vocalfold.util import (
    AudioFileNotFound,
    BaseModel,
    EmptyAudioData,
    MalformedHeader,
    SignalError,
    UnsupportedEncoding,
)

__all__ = (
    "AudioSignal",
    "Frame",
    "FrameConfig",
    "frame_matrix",
    "frame_signal",
    "hamming_window",
    "read_wav",
    "write_wav",
)

WAVE_FORMAT_PCM = 1
SUPPORTED_BITS = (8, 16, 24)


@dataclass(frozen=True, eq=False)
class AudioSignal:
    """A mono recording."""

    samples: NDArray[np.float64]
    """Real amplitudes, nominally in [-1, 1]."""
    sample_rate: int
    """Sampling frequency in Hz."""

    def __init__(self, samples: ArrayLike, sample_rate: int) -> None:
        data = np.array(samples, dtype=np.float64).reshape(-1)
        if data.size == 0:
            raise SignalError("An audio signal needs at least one sample.")
        if not np.all(np.isfinite(data)):
            raise SignalError("Audio samples must be finite.")
        if sample_rate <= 0:
            raise SignalError(f"The sample rate must be positive, got {sample_rate}.")
        data.flags.writeable = False
        object.__setattr__(self, "samples", data)
        object.__setattr__(self, "sample_rate", int(sample_rate))

    def __len__(self) -> int:
        return self.samples.size

    @property
    def duration(self) -> float:
        """Length of the signal in seconds."""
        return self.samples.size / self.sample_rate


@dataclass(frozen=True, eq=False)
class Frame:
    """A fixed length excerpt of a signal."""

    samples: NDArray[np.float64]
    start_index: int
    """Offset of the first sample in the source signal."""


class FrameConfig(BaseModel):
    """Short-time analysis parameters of the MFCC stage."""

    frame_len: int = Field(default=256, ge=1)
    """Number of samples per frame."""
    hop: int = Field(default=128, ge=1)
    """Offset between the starts of consecutive frames."""


def _read_chunks(data: bytes, path: Path) -> dict[bytes, bytes]:
    if len(data) < 12 or data[:4] != b"RIFF" or data[8:12] != b"WAVE":
        raise MalformedHeader(f"'{path}' is not a RIFF/WAVE file.")
    chunks: dict[bytes, bytes] = {}
    pos = 12
    while pos + 8 <= len(data):
        chunk_id = data[pos : pos + 4]
        (size,) = struct.unpack_from("<I", data, pos + 4)
        body = data[pos + 8 : pos + 8 + size]
        if len(body) != size:
            raise MalformedHeader(
                f"The '{chunk_id.decode('latin-1')}' chunk of '{path}' is truncated.",
                detail=f"header announces {size} bytes, {len(body)} present",
            )
        chunks.setdefault(chunk_id, body)
        # chunks are word aligned
        pos += 8 + size + (size & 1)
    return chunks


def read_wav(path: Path | str) -> AudioSignal:
    """Reads a PCM WAV file.

    Integer samples are divided by 2^(bits-1), so a 16 bit value of 16384 becomes 0.5. 8 bit files are unsigned and
    are centered on 128 first.

    Raises:
        AudioFileNotFound: If there is no file at `path`.
        UnsupportedEncoding: If the file is not integer PCM with 8, 16 or 24 bits per sample.
        MalformedHeader: If the RIFF structure or the format chunk is inconsistent.
        EmptyAudioData: If the data chunk is empty.
    """
    path = Path(path)
    if not path.is_file():
        raise AudioFileNotFound(f"The audio file '{path}' does not exist.")
    chunks = _read_chunks(path.read_bytes(), path)
    if b"fmt " not in chunks:
        raise MalformedHeader(f"'{path}' has no format chunk.")
    if b"data" not in chunks:
        raise MalformedHeader(f"'{path}' has no data chunk.")
    fmt = chunks[b"fmt "]
    if len(fmt) < 16:
        raise MalformedHeader(f"The format chunk of '{path}' is too short.")
    audio_format, channels, sample_rate, byte_rate, block_align, bits = struct.unpack_from("<HHIIHH", fmt)
    if audio_format != WAVE_FORMAT_PCM:
        raise UnsupportedEncoding(
            f"'{path}' is not integer PCM encoded.", detail=f"format tag {audio_format:#06x}"
        )
    if bits not in SUPPORTED_BITS:
        raise UnsupportedEncoding(f"'{path}' uses {bits} bits per sample, only 8, 16 and 24 are supported.")
    width = bits // 8
    if channels == 0 or sample_rate == 0 or block_align != channels * width or byte_rate != sample_rate * block_align:
        raise MalformedHeader(
            f"The format chunk of '{path}' is inconsistent.",
            detail=f"channels={channels}, rate={sample_rate}, byte_rate={byte_rate}, block_align={block_align}",
        )
    raw = chunks[b"data"]
    if len(raw) == 0:
        raise EmptyAudioData(f"The data chunk of '{path}' is empty.")
    if len(raw) % block_align:
        raise MalformedHeader(
            f"The data chunk of '{path}' does not hold a whole number of frames.",
            detail=f"{len(raw)} bytes with {block_align} bytes per frame",
        )

    match bits:
        case 8:
            ints = np.frombuffer(raw, dtype=np.uint8).astype(np.int32) - 128
        case 16:
            ints = np.frombuffer(raw, dtype="<i2").astype(np.int32)
        case _:
            triples = np.frombuffer(raw, dtype=np.uint8).reshape(-1, 3).astype(np.int32)
            ints = triples[:, 0] | (triples[:, 1] << 8) | (triples[:, 2] << 16)
            ints = np.where(ints >= 1 << 23, ints - (1 << 24), ints)
    samples = ints.reshape(-1, channels).astype(np.float64) / float(1 << (bits - 1))
    return AudioSignal(samples.mean(axis=1), sample_rate)


def write_wav(path: Path | str, signal: AudioSignal, bits: int = 16) -> None:
    """Writes a mono PCM WAV file.

    Samples are scaled by 2^(bits-1), rounded and clipped to the integer range, which makes :func:`read_wav` reproduce
    them within one quantization step.
    """
    if bits not in SUPPORTED_BITS:
        raise UnsupportedEncoding(f"Cannot write {bits} bit audio, only 8, 16 and 24 are supported.")
    full_scale = 1 << (bits - 1)
    ints = np.clip(np.round(signal.samples * full_scale), -full_scale, full_scale - 1).astype(np.int32)
    match bits:
        case 8:
            raw = (ints + 128).astype(np.uint8).tobytes()
        case 16:
            raw = ints.astype("<i2").tobytes()
        case _:
            unsigned = ints & 0xFFFFFF
            raw = np.stack([unsigned & 0xFF, (unsigned >> 8) & 0xFF, unsigned >> 16], axis=1).astype(np.uint8).tobytes()
    width = bits // 8
    fmt = struct.pack("<HHIIHH", WAVE_FORMAT_PCM, 1, signal.sample_rate, signal.sample_rate * width, width, bits)
    pad = b"\x00" if len(raw) & 1 else b""
    body = b"WAVE" + b"fmt " + struct.pack("<I", len(fmt)) + fmt + b"data" + struct.pack("<I", len(raw)) + raw + pad
    Path(path).write_bytes(b"RIFF" + struct.pack("<I", len(body)) + body)


def _check_framing(length: int, frame_len: int, hop: int) -> None:
    if frame_len < 1:
        raise SignalError(f"The frame length must be positive, got {frame_len}.")
    if hop < 1:
        raise SignalError(f"The hop size must be positive, got {hop}.")
    if frame_len > length:
        raise SignalError(f"The frame length {frame_len} exceeds the signal length {length}.")


def frame_matrix(signal: AudioSignal, frame_len: int, hop: int) -> NDArray[np.float64]:
    """All complete frames of the signal as the rows of a read-only matrix.

    Row `i` starts at sample `i * hop`; a trailing partial frame is dropped.
    """
    _check_framing(len(signal), frame_len, hop)
    return sliding_window_view(signal.samples, frame_len)[::hop]


def frame_signal(signal: AudioSignal, frame_len: int, hop: int) -> list[Frame]:
    """Cuts a signal into frames at offsets 0, hop, 2*hop, ...

    There are `(N - frame_len) // hop + 1` frames for a signal of length `N`.

    Raises:
        SignalError: If the frame is longer than the signal or either size is not positive.
    """
    rows = frame_matrix(signal, frame_len, hop)
    return [Frame(row, i * hop) for i, row in enumerate(rows)]


def hamming_window(n: int) -> NDArray[np.float64]:
    """Hamming weights `0.54 - 0.46 cos(2 pi k / (n - 1))`; a single point window is `[1.0]`."""
    if n < 1:
        raise SignalError(f"The window length must be positive, got {n}.")
    if n == 1:
        return np.ones(1)
    k = np.arange(n)
    return 0.54 - 0.46 * np.cos(2 * np.pi * k / (n - 1))
