"""Waveform values, 16-bit PCM WAV I/O, and max-norm perturbation arithmetic.

Audio is represented as float64 samples in [-1, 1].  A perturbation is a
direction vector together with a magnitude; the realized perturbation is the
direction rescaled to unit max-norm times the magnitude, so the magnitude is
literally the max-norm of the added signal (before clipping).
"""

import logging
import wave
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

PCM_SCALE = 32768  # 16-bit full scale: read divides, write multiplies (saturating)
EXPECTED_SAMPLE_RATE = 16_000


class WavFormatError(Exception):
    """Base class for WAV files this library cannot consume."""


class MalformedWavError(WavFormatError):
    """File is not a parseable RIFF/WAVE container."""


class UnsupportedEncodingError(WavFormatError):
    """WAV payload is not 16-bit linear PCM."""


class MultiChannelError(WavFormatError):
    """WAV has more than one channel."""


def _as_readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class Waveform:
    """Mono audio clip.  Samples are clipped into [-1, 1] on construction."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        if samples.ndim != 1 or samples.size < 1:
            raise ValueError("waveform needs at least one sample")
        if not np.all(np.isfinite(samples)):
            raise ValueError("waveform samples must be finite")
        if self.sample_rate <= 0:
            raise ValueError("sample rate must be positive")
        object.__setattr__(self, "samples", _as_readonly(np.clip(samples, -1.0, 1.0)))

    def __len__(self) -> int:
        return self.samples.size

    def with_samples(self, samples: np.ndarray) -> "Waveform":
        return Waveform(samples, self.sample_rate)


@dataclass(frozen=True)
class Direction:
    """Perturbation direction.  Must be finite and not identically zero."""

    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 1 or values.size < 1:
            raise ValueError("direction must be a non-empty vector")
        if not np.all(np.isfinite(values)):
            raise ValueError("direction entries must be finite")
        if not np.any(values):
            raise ValueError("direction must not be the zero vector")
        object.__setattr__(self, "values", _as_readonly(values))

    def __len__(self) -> int:
        return self.values.size

    def unit(self) -> np.ndarray:
        """Direction rescaled to unit max-norm."""
        return self.values / linf_norm(self.values)


@dataclass(frozen=True)
class Perturbation:
    direction: Direction
    magnitude: float

    def __post_init__(self):
        if self.magnitude <= 0:
            raise ValueError("magnitude must be positive")

    def realize(self) -> np.ndarray:
        """The added signal before clipping; its max-norm equals ``magnitude``."""
        return self.magnitude * self.direction.unit()


def linf_norm(vector: np.ndarray) -> float:
    """Max absolute entry of a vector."""
    vector = np.asarray(vector, dtype=np.float64)
    if vector.size == 0:
        raise ValueError("norm of an empty vector is undefined")
    return float(np.max(np.abs(vector)))


def apply_perturbation(x: Waveform, theta: Direction, magnitude: float) -> Waveform:
    """Add ``magnitude * theta / max|theta|`` to ``x`` and clip to [-1, 1].

    Invariant under positive rescaling of ``theta``; ``x`` is left untouched.
    """
    if magnitude <= 0:
        raise ValueError("magnitude must be positive")
    if len(theta) != len(x):
        raise ValueError(
            f"direction length {len(theta)} does not match waveform length {len(x)}"
        )
    return x.with_samples(x.samples + magnitude * theta.unit())


def perturbed_samples(x: Waveform, unit_direction: np.ndarray, magnitude: float) -> Waveform:
    """Fast path for search loops: ``unit_direction`` must already be unit max-norm."""
    return x.with_samples(x.samples + magnitude * unit_direction)


def read_wav(path) -> Waveform:
    """Read a 16-bit PCM mono WAV file, scaling samples by 1/32768."""
    try:
        with wave.open(str(path), "rb") as wf:
            n_channels = wf.getnchannels()
            sample_width = wf.getsampwidth()
            sample_rate = wf.getframerate()
            n_frames = wf.getnframes()
            payload = wf.readframes(n_frames)
    except wave.Error as exc:
        raise MalformedWavError(f"{path}: {exc}") from exc
    except EOFError as exc:
        raise MalformedWavError(f"{path}: truncated file") from exc
    if n_channels != 1:
        raise MultiChannelError(f"{path}: {n_channels} channels, expected mono")
    if sample_width != 2:
        raise UnsupportedEncodingError(
            f"{path}: {8 * sample_width}-bit samples, expected 16-bit PCM"
        )
    if sample_rate != EXPECTED_SAMPLE_RATE:
        logger.warning("%s: sample rate %d Hz (16 kHz expected)", path, sample_rate)
    pcm = np.frombuffer(payload, dtype="<i2")
    return Waveform(pcm.astype(np.float64) / PCM_SCALE, sample_rate)


def write_wav(path, waveform: Waveform) -> None:
    """Write a 16-bit PCM mono WAV file; +1.0 saturates at code 32767."""
    pcm = np.clip(np.rint(waveform.samples * PCM_SCALE), -32768, 32767).astype("<i2")
    with wave.open(str(path), "wb") as wf:
        wf.setnchannels(1)
        wf.setsampwidth(2)
        wf.setframerate(waveform.sample_rate)
        wf.writeframes(pcm.tobytes())
