"""Synthetic baseband I/Q payload generation and channel impairment.

Streams run at 2160 samples per millisecond so that a 1 ms window holds
exactly 2160 samples (the tensor-export geometry). One constellation symbol
is mapped per sample; there is no pulse shaping or OFDM structure, since
embedding and detection operate on sample magnitudes only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

SAMPLES_PER_MS = 2160
HEADROOM_LIMIT = 1.5

_QPSK = np.array([1 + 1j, -1 + 1j, -1 - 1j, 1 - 1j]) / math.sqrt(2.0)
_QAM16 = np.array(
    [complex(i, q) for i in (-3, -1, 1, 3) for q in (-3, -1, 1, 3)]
) / math.sqrt(10.0)

CONSTELLATIONS = {"qpsk": _QPSK, "16qam": _QAM16}


@dataclass
class IqStream:
    """Complex baseband samples at a fixed per-millisecond rate."""

    samples: np.ndarray
    sample_rate: int = SAMPLES_PER_MS  # samples per millisecond
    origin_ms: float = 0.0

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.complex128)
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")

    def __len__(self) -> int:
        return len(self.samples)

    @property
    def duration_ms(self) -> float:
        return len(self.samples) / self.sample_rate

    def magnitudes(self) -> np.ndarray:
        return np.abs(self.samples)

    def copy(self) -> "IqStream":
        return IqStream(self.samples.copy(), self.sample_rate, self.origin_ms)

    def validate_headroom(self, limit: float = HEADROOM_LIMIT) -> None:
        """Check the normalized-magnitude bound.

        Applied to generated payloads and embedded streams; channel output is
        exempt because additive noise is unbounded.
        """
        if len(self.samples):
            peak = float(np.max(np.abs(self.samples)))
            if peak > limit:
                raise ValueError(f"sample magnitude {peak:.4f} exceeds headroom {limit}")


@dataclass(frozen=True)
class ChannelConfig:
    """AWGN + static phase offset + integer timing jitter.

    ``snr_db=math.inf`` is the documented no-noise sentinel; it serializes to
    JSON null. NaN and -inf are rejected.
    """

    snr_db: float = math.inf
    phase_offset_rad: float = 0.0
    timing_jitter_samples: int = 0
    seed: int = 0

    def __post_init__(self):
        if math.isnan(self.snr_db) or self.snr_db == -math.inf:
            raise ValueError(f"snr_db must be a real value or +inf, got {self.snr_db}")
        if self.timing_jitter_samples < 0:
            raise ValueError("timing_jitter_samples must be >= 0")

    @property
    def noiseless(self) -> bool:
        return math.isinf(self.snr_db)

    def to_dict(self) -> dict:
        return {
            "snr_db": None if self.noiseless else self.snr_db,
            "phase_offset_rad": self.phase_offset_rad,
            "timing_jitter_samples": self.timing_jitter_samples,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ChannelConfig":
        snr = d.get("snr_db")
        return cls(
            snr_db=math.inf if snr is None else float(snr),
            phase_offset_rad=float(d.get("phase_offset_rad", 0.0)),
            timing_jitter_samples=int(d.get("timing_jitter_samples", 0)),
            seed=int(d.get("seed", 0)),
        )


def generate_payload(duration_ms: float, mod_order: str,
                     rng: np.random.Generator,
                     sample_rate: int = SAMPLES_PER_MS,
                     origin_ms: float = 0.0) -> IqStream:
    """Unit-average-power constellation payload, one symbol per sample."""
    if duration_ms <= 0:
        raise ValueError("duration_ms must be positive")
    key = mod_order.lower()
    if key not in CONSTELLATIONS:
        raise ValueError(f"mod_order must be one of {sorted(CONSTELLATIONS)}, got {mod_order!r}")
    const = CONSTELLATIONS[key]
    n = int(round(duration_ms * sample_rate))
    symbols = const[rng.integers(0, len(const), n)]
    stream = IqStream(symbols, sample_rate, origin_ms)
    stream.validate_headroom()
    return stream


def apply_channel(stream: IqStream, cfg: ChannelConfig,
                  rng: np.random.Generator) -> IqStream:
    """Rotate, shift by a uniform integer jitter, then add complex AWGN.

    Noise variance is set from the mean power of the input stream so that
    signal power over noise power equals 10^(snr_db/10). A positive jitter
    delays the stream; vacated edge samples are zero-filled. Draw order is
    jitter first, then noise.
    """
    if len(stream) == 0:
        raise ValueError("stream must be nonempty")
    x = stream.samples
    if cfg.phase_offset_rad != 0.0:
        x = x * np.exp(1j * cfg.phase_offset_rad)
    if cfg.timing_jitter_samples > 0:
        shift = int(rng.integers(-cfg.timing_jitter_samples, cfg.timing_jitter_samples + 1))
        x = shift_stream(x, shift)
    if not cfg.noiseless:
        power = float(np.mean(np.abs(stream.samples) ** 2))
        noise_var = power / (10.0 ** (cfg.snr_db / 10.0))
        sigma = math.sqrt(noise_var / 2.0)
        n = len(x)
        x = x + rng.normal(0.0, sigma, n) + 1j * rng.normal(0.0, sigma, n)
    elif x is stream.samples:
        x = x.copy()
    return IqStream(x, stream.sample_rate, stream.origin_ms)


def shift_stream(samples: np.ndarray, shift: int) -> np.ndarray:
    """Shift by an integer number of samples, zero-filling vacated edges."""
    out = np.zeros_like(samples)
    if shift == 0:
        out[:] = samples
    elif shift > 0:
        out[shift:] = samples[:-shift]
    else:
        out[:shift] = samples[-shift:]
    return out
