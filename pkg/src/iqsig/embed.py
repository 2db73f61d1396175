"""Steganographic embedding of sampled signatures into I/Q streams.

A transmission slot opens every ``period_ms``. At each slot a Bernoulli
gate decides whether to transmit; when it fires, a freshly sampled
signature is written value-by-value onto consecutive samples, replacing
each target sample's magnitude while preserving its phase.

Stealth mode maps each value toward the local signal level:

    mapped = local_rms * (1 + strength * (value - midrange))

where the local RMS is taken over the ``rms_window`` samples immediately
before the slot's first embedded sample. Anchoring the window at the slot
start keeps it clear of the slot's own embedded samples and lets the
receiver recompute the identical RMS, which makes the mapping exactly
invertible on a clean channel.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import gmm as gmm_mod
from .baseband import IqStream
from .gmm import GaussianMixture


class ScheduleTooDense(ValueError):
    """Signature elements do not fit inside one schedule period."""


@dataclass(frozen=True)
class StealthConfig:
    strength: float = 1.0
    rms_window: int = 256

    def __post_init__(self):
        if not 0.0 < self.strength <= 1.0:
            raise ValueError(f"strength must be in (0, 1], got {self.strength}")
        if self.rms_window < 16:
            raise ValueError(f"rms_window must be >= 16, got {self.rms_window}")

    def to_dict(self) -> dict:
        return {"strength": self.strength, "rms_window": self.rms_window}

    @classmethod
    def from_dict(cls, d: dict) -> "StealthConfig":
        return cls(strength=float(d["strength"]), rms_window=int(d["rms_window"]))


@dataclass(frozen=True)
class EmbedSchedule:
    """Where and when signature elements are placed."""

    period_ms: float
    n_el: int
    start_offset_samples: int = 256
    gating_prob: float = 0.75
    stealth: StealthConfig | None = None
    seed: int = 0

    def __post_init__(self):
        if self.period_ms <= 0:
            raise ValueError("period_ms must be positive")
        if self.n_el < 1:
            raise ValueError("n_el must be >= 1")
        if self.start_offset_samples < 0:
            raise ValueError("start_offset_samples must be >= 0")
        if not 0.0 <= self.gating_prob <= 1.0:
            raise ValueError(f"gating_prob must be in [0, 1], got {self.gating_prob}")
        if self.stealth is not None and self.start_offset_samples < self.stealth.rms_window:
            raise ValueError(
                "stealth mode needs start_offset_samples >= rms_window so the "
                "causal RMS window precedes the first embedded sample"
            )

    def period_samples(self, sample_rate: int) -> int:
        return int(round(self.period_ms * sample_rate))

    def to_dict(self) -> dict:
        return {
            "period_ms": self.period_ms,
            "n_el": self.n_el,
            "start_offset_samples": self.start_offset_samples,
            "gating_prob": self.gating_prob,
            "stealth": self.stealth.to_dict() if self.stealth else None,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedSchedule":
        st = d.get("stealth")
        return cls(
            period_ms=float(d["period_ms"]),
            n_el=int(d["n_el"]),
            start_offset_samples=int(d.get("start_offset_samples", 256)),
            gating_prob=float(d.get("gating_prob", 0.75)),
            stealth=StealthConfig.from_dict(st) if st else None,
            seed=int(d.get("seed", 0)),
        )


@dataclass(frozen=True)
class Signature:
    """One sampled signature instance, the unit of transmission."""

    values: np.ndarray
    source_id: str
    issued_at_ms: float

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))


@dataclass
class SlotSummary:
    """Ground truth for one scheduled slot. ``gated`` means the Bernoulli
    gate suppressed the slot (nothing transmitted)."""

    slot_index: int
    time_ms: float
    gated: bool
    sample_indices: np.ndarray | None = None
    values: np.ndarray | None = None
    signature_id: str | None = None
    local_rms: float | None = None

    def to_dict(self) -> dict:
        return {
            "slot_index": self.slot_index,
            "time_ms": self.time_ms,
            "gated": self.gated,
            "sample_indices": None if self.sample_indices is None else
                [int(i) for i in self.sample_indices],
            "values": None if self.values is None else [float(v) for v in self.values],
            "signature_id": self.signature_id,
            "local_rms": self.local_rms,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SlotSummary":
        return cls(
            slot_index=int(d["slot_index"]),
            time_ms=float(d["time_ms"]),
            gated=bool(d["gated"]),
            sample_indices=None if d.get("sample_indices") is None else
                np.asarray(d["sample_indices"], dtype=np.int64),
            values=None if d.get("values") is None else
                np.asarray(d["values"], dtype=np.float64),
            signature_id=d.get("signature_id"),
            local_rms=d.get("local_rms"),
        )


@dataclass
class EmbedRecord:
    """Per-slot ground truth for an embedding run, including gated-off slots."""

    source_id: str
    schedule: EmbedSchedule
    slots: list[SlotSummary] = field(default_factory=list)

    @property
    def transmitted(self) -> list[SlotSummary]:
        return [s for s in self.slots if not s.gated]

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "schedule": self.schedule.to_dict(),
            "slots": [s.to_dict() for s in self.slots],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "EmbedRecord":
        return cls(
            source_id=str(d["source_id"]),
            schedule=EmbedSchedule.from_dict(d["schedule"]),
            slots=[SlotSummary.from_dict(s) for s in d["slots"]],
        )


def stealth_map(sig_value, local_rms: float, cfg: StealthConfig,
                amplitude_range: tuple[float, float]):
    """Blend a signature value toward the local signal level.

    Returns ``local_rms * (1 + strength * (sig_value - midrange))`` with
    midrange the center of the amplitude range. At the midrange the output
    equals the local RMS exactly.
    """
    if local_rms <= 0:
        raise ValueError("local_rms must be positive")
    midrange = 0.5 * (amplitude_range[0] + amplitude_range[1])
    return local_rms * (1.0 + cfg.strength * (np.asarray(sig_value, dtype=np.float64) - midrange))


def stealth_unmap(observed_mag, local_rms: float, cfg: StealthConfig,
                  amplitude_range: tuple[float, float]):
    """Exact algebraic inverse of :func:`stealth_map` for the same local RMS."""
    if local_rms <= 0:
        raise ValueError("local_rms must be positive")
    midrange = 0.5 * (amplitude_range[0] + amplitude_range[1])
    return midrange + (np.asarray(observed_mag, dtype=np.float64) / local_rms - 1.0) / cfg.strength


def causal_rms(samples: np.ndarray, position: int, window: int) -> float:
    """RMS of the ``window`` samples immediately before ``position``
    (clamped at the stream head)."""
    lo = max(0, position - window)
    if position <= lo:
        raise ValueError("no samples available before embedding position")
    seg = samples[lo:position]
    return float(np.sqrt(np.mean(seg.real ** 2 + seg.imag ** 2)))


def slot_starts(stream_len: int, sched: EmbedSchedule, sample_rate: int) -> list[int]:
    """First-sample indices of every slot that fits in the stream."""
    period = sched.period_samples(sample_rate)
    if sched.n_el > period:
        raise ScheduleTooDense(
            f"n_el={sched.n_el} exceeds period of {period} samples"
        )
    return list(range(sched.start_offset_samples, stream_len - sched.n_el + 1, period))


def embed(stream: IqStream, gmm: GaussianMixture, sched: EmbedSchedule,
          rng: np.random.Generator) -> tuple[IqStream, EmbedRecord]:
    """Embed freshly sampled signatures into a copy of the stream.

    At each slot (with probability ``gating_prob``) the next ``n_el``
    samples get their magnitudes replaced by the sampled values (or their
    stealth mapping); phases are preserved, zero-magnitude samples take
    phase 0. Samples outside transmitted slots are bit-identical to the
    input. The returned record logs every slot, gated or not.
    """
    starts = slot_starts(len(stream), sched, stream.sample_rate)
    if not starts:
        raise ValueError(
            f"stream of {len(stream)} samples too short for one transmission "
            f"(needs start_offset + n_el = {sched.start_offset_samples + sched.n_el})"
        )
    out = stream.samples.copy()
    record = EmbedRecord(source_id=gmm.id, schedule=sched)
    for slot_index, start in enumerate(starts):
        time_ms = stream.origin_ms + start / stream.sample_rate
        if not rng.random() < sched.gating_prob:
            record.slots.append(SlotSummary(slot_index, time_ms, gated=True))
            continue
        values = gmm_mod.sample(gmm, sched.n_el, rng)
        local_rms = None
        if sched.stealth is not None:
            local_rms = causal_rms(out, start, sched.stealth.rms_window)
            mags = stealth_map(values, local_rms, sched.stealth, gmm.amplitude_range)
        else:
            mags = values
        idx = np.arange(start, start + sched.n_el)
        seg = out[idx]
        seg_abs = np.abs(seg)
        phases = np.where(seg_abs > 0, seg / np.where(seg_abs > 0, seg_abs, 1.0), 1.0 + 0j)
        out[idx] = mags * phases
        record.slots.append(SlotSummary(
            slot_index, time_ms, gated=False,
            sample_indices=idx, values=values, signature_id=gmm.id,
            local_rms=local_rms,
        ))
    result = IqStream(out, stream.sample_rate, stream.origin_ms)
    result.validate_headroom()
    return result, record


def make_signature(gmm: GaussianMixture, n_el: int, rng: np.random.Generator,
                   issued_at_ms: float = 0.0) -> Signature:
    """Sample one standalone signature instance."""
    return Signature(gmm_mod.sample(gmm, n_el, rng), gmm.id, issued_at_ms)
