"""Experiment orchestration: dataset presets, capture synthesis, stream
mirroring, evaluation runs, and covertness analysis.

Per-window random streams are derived from (seed, window index, stage), so
results do not depend on generation order or worker count. Presets 1-5 fix
the signature size / transmission period matrix; every preset uses one
transmission per window with the capture window spanning a full period.
"""

from __future__ import annotations

import itertools
import json
import math
import zlib
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import capture as capture_mod
from . import gmm as gmm_mod
from .baseband import SAMPLES_PER_MS, ChannelConfig, IqStream, apply_channel, generate_payload
from .detector import (VERDICT_NO_SIGNATURE, DetectorConfig, LabeledWindow,
                       detect_window, energy_cdf, evaluate)
from .embed import EmbedRecord, EmbedSchedule, StealthConfig, embed
from .gmm import GaussianMixture, GenerationConfig
from .metrics import MetricsBundle, config_digest

# Signature size and transmission period matrix exercised by `bench`.
PRESETS = {
    "1": {"n_el": 10, "period_ms": 1.0},
    "2": {"n_el": 20, "period_ms": 1.0},
    "3": {"n_el": 50, "period_ms": 1.0},
    "4": {"n_el": 20, "period_ms": 20.0},
    "5": {"n_el": 50, "period_ms": 20.0},
}

# Carrier metadata recorded in manifests; streams themselves are synthesized
# at SAMPLES_PER_MS regardless.
RF_BANDWIDTH_MHZ = 40.0


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    """One dataset/evaluation scenario."""

    preset: str = "3"
    n_signatures: int = 5
    n_el: int | None = None          # resolved from preset when None
    period_ms: float | None = None
    stealth: bool = False
    stealth_strength: float = 1.0
    stealth_rms_window: int = 256
    snr_db: float = 20.0             # math.inf disables noise
    phase_offset_rad: float = 0.0
    timing_jitter_samples: int = 0
    windows_per_class: int = 100
    mod_order: str = "16qam"
    gating_prob: float = 1.0
    start_offset_samples: int = 256
    ks_epsilon: float = 0.2
    max_components: int = 5
    amplitude_range: tuple[float, float] = (0.5, 1.0)
    std_range: tuple[float, float] = (0.01, 0.05)
    seed: int = 42

    def __post_init__(self):
        if self.preset not in PRESETS and self.preset != "custom":
            raise ConfigError(f"preset must be one of {sorted(PRESETS)} or 'custom', "
                              f"got {self.preset!r}")
        if self.preset == "custom" and (self.n_el is None or self.period_ms is None):
            raise ConfigError("custom preset requires explicit n_el and period_ms")
        if self.windows_per_class < 1:
            raise ConfigError("windows_per_class must be >= 1")
        if self.n_signatures < 1:
            raise ConfigError("n_signatures must be >= 1")

    def resolved(self) -> "ExperimentConfig":
        """Fill n_el/period_ms from the preset when not set explicitly."""
        if self.n_el is not None and self.period_ms is not None:
            return self
        base = PRESETS.get(self.preset, {})
        return replace(
            self,
            n_el=self.n_el if self.n_el is not None else base["n_el"],
            period_ms=self.period_ms if self.period_ms is not None else base["period_ms"],
        )

    @property
    def window_ms(self) -> float:
        cfg = self.resolved()
        return cfg.period_ms

    def generation_config(self) -> GenerationConfig:
        return GenerationConfig(
            n_signatures=self.n_signatures,
            ks_epsilon=self.ks_epsilon,
            max_components=self.max_components,
            amplitude_range=self.amplitude_range,
            std_range=self.std_range,
            seed=self.seed,
        )

    def schedule(self) -> EmbedSchedule:
        cfg = self.resolved()
        stealth = None
        if cfg.stealth:
            stealth = StealthConfig(cfg.stealth_strength, cfg.stealth_rms_window)
        return EmbedSchedule(
            period_ms=cfg.period_ms,
            n_el=cfg.n_el,
            start_offset_samples=cfg.start_offset_samples,
            gating_prob=cfg.gating_prob,
            stealth=stealth,
            seed=cfg.seed,
        )

    def channel_config(self) -> ChannelConfig:
        return ChannelConfig(
            snr_db=self.snr_db,
            phase_offset_rad=self.phase_offset_rad,
            timing_jitter_samples=self.timing_jitter_samples,
            seed=self.seed,
        )

    def radial_noise_std(self) -> float:
        """Std of the magnitude perturbation AWGN adds on a unit-power stream."""
        if math.isinf(self.snr_db):
            return 0.0
        return math.sqrt(10.0 ** (-self.snr_db / 10.0) / 2.0)

    def to_dict(self) -> dict:
        cfg = self.resolved()
        return {
            "preset": cfg.preset,
            "n_signatures": cfg.n_signatures,
            "n_el": cfg.n_el,
            "period_ms": cfg.period_ms,
            "stealth": cfg.stealth,
            "stealth_strength": cfg.stealth_strength,
            "stealth_rms_window": cfg.stealth_rms_window,
            "snr_db": None if math.isinf(cfg.snr_db) else cfg.snr_db,
            "phase_offset_rad": cfg.phase_offset_rad,
            "timing_jitter_samples": cfg.timing_jitter_samples,
            "windows_per_class": cfg.windows_per_class,
            "mod_order": cfg.mod_order,
            "gating_prob": cfg.gating_prob,
            "start_offset_samples": cfg.start_offset_samples,
            "ks_epsilon": cfg.ks_epsilon,
            "max_components": cfg.max_components,
            "amplitude_range": list(cfg.amplitude_range),
            "std_range": list(cfg.std_range),
            "seed": cfg.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(d)
        if "snr_db" in kwargs:
            kwargs["snr_db"] = math.inf if kwargs["snr_db"] is None else float(kwargs["snr_db"])
        for key in ("amplitude_range", "std_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


# ---------------------------------------------------------------------------
# Stream mirroring
# ---------------------------------------------------------------------------

class MirrorBranch:
    """One consumer's view of a mirrored stream: an iterator of sample
    chunks that can also be collected back into an IqStream."""

    def __init__(self, chunks, sample_rate: int, origin_ms: float):
        self._chunks = chunks
        self.sample_rate = sample_rate
        self.origin_ms = origin_ms

    def __iter__(self):
        return self._chunks

    def collect(self) -> IqStream:
        parts = list(self._chunks)
        if parts:
            samples = np.concatenate(parts)
        else:
            samples = np.empty(0, dtype=np.complex128)
        return IqStream(samples, self.sample_rate, self.origin_ms)

    def checksum(self) -> int:
        crc = 0
        for chunk in self._chunks:
            crc = zlib.crc32(np.ascontiguousarray(chunk).tobytes(), crc)
        return crc


def mirror(stream: IqStream, chunk_size: int = 4096) -> tuple[MirrorBranch, MirrorBranch]:
    """Tee a stream into two independent consumers.

    Each branch observes the full sample sequence in order; consuming one
    branch neither blocks nor mutates the other (chunks are buffered until
    both sides have passed them).
    """
    def chunk_iter():
        for i in range(0, len(stream.samples), chunk_size):
            yield stream.samples[i:i + chunk_size]

    a, b = itertools.tee(chunk_iter())
    return (MirrorBranch(a, stream.sample_rate, stream.origin_ms),
            MirrorBranch(b, stream.sample_rate, stream.origin_ms))


# ---------------------------------------------------------------------------
# Window synthesis
# ---------------------------------------------------------------------------

def _window_rng(seed: int, window_index: int, stage: int) -> np.random.Generator:
    return np.random.default_rng([seed, window_index, stage])


def build_signature_set(cfg: ExperimentConfig) -> list[GaussianMixture]:
    return gmm_mod.generate_signature_set(cfg.generation_config())


def synth_window(cfg: ExperimentConfig, mixtures: list[GaussianMixture],
                 class_index: int, window_index: int
                 ) -> tuple[IqStream, EmbedRecord | None, str]:
    """Synthesize one labeled window.

    ``class_index`` in [0, n_signatures) embeds that signature;
    ``class_index == n_signatures`` is the no-signature class. The label is
    read back from the embedding ground truth, so gated-off slots label the
    window honestly as carrying nothing.
    """
    cfg = cfg.resolved()
    payload = generate_payload(cfg.period_ms, cfg.mod_order,
                               _window_rng(cfg.seed, window_index, 0))
    record = None
    label = VERDICT_NO_SIGNATURE
    stream = payload
    if class_index < len(mixtures):
        stream, record = embed(payload, mixtures[class_index], cfg.schedule(),
                               _window_rng(cfg.seed, window_index, 1))
        if record.transmitted:
            label = record.source_id
    noisy = apply_channel(stream, cfg.channel_config(),
                          _window_rng(cfg.seed, window_index, 2))
    return noisy, record, label


def iter_windows(cfg: ExperimentConfig, mixtures: list[GaussianMixture]):
    """Yield (LabeledWindow, EmbedRecord or None) for the whole dataset:
    windows_per_class windows for each signature and for the no-signature
    class, in window-index order."""
    cfg = cfg.resolved()
    n_classes = len(mixtures) + 1
    window_index = 0
    for class_index in range(n_classes):
        for _ in range(cfg.windows_per_class):
            stream, record, label = synth_window(cfg, mixtures, class_index, window_index)
            yield LabeledWindow(f"w{window_index:06d}", stream, label), record
            window_index += 1


def detector_config_for(cfg: ExperimentConfig, mixtures: list[GaussianMixture],
                        **overrides) -> DetectorConfig:
    cfg = cfg.resolved()
    kwargs = dict(
        enrolled=tuple(mixtures),
        schedule=cfg.schedule(),
        noise_std=cfg.radial_noise_std(),
        jitter_search=max(cfg.timing_jitter_samples, 0) + 2 if cfg.timing_jitter_samples else 0,
    )
    kwargs.update(overrides)
    return DetectorConfig(**kwargs)


# ---------------------------------------------------------------------------
# Dataset files
# ---------------------------------------------------------------------------

def run_dataset(cfg: ExperimentConfig, out_dir,
                mixtures: list[GaussianMixture] | None = None) -> dict:
    """Write the dataset to disk: capture files with ground-truth sidecars,
    the signature set, and a manifest. Deterministic per config+seed."""
    cfg = cfg.resolved()
    out = Path(out_dir)
    captures = out / "captures"
    captures.mkdir(parents=True, exist_ok=True)
    if mixtures is None:
        mixtures = build_signature_set(cfg)
    gmm_mod.save_signature_set(out / "sigset.json", mixtures, cfg.generation_config())
    entries = []
    for lw, record in iter_windows(cfg, mixtures):
        name = f"{lw.window_id}_{lw.label}.vphy"
        sidecar = {
            "window_id": lw.window_id,
            "label": lw.label,
            "channel": cfg.channel_config().to_dict(),
            "embedding": record.to_dict() if record else None,
        }
        capture_mod.write_capture(captures / name, lw.stream, sidecar=sidecar)
        entries.append({"file": f"captures/{name}", "window_id": lw.window_id,
                        "label": lw.label})
    manifest = {
        "experiment": cfg.to_dict(),
        "rf_bandwidth_mhz": RF_BANDWIDTH_MHZ,
        "samples_per_ms": SAMPLES_PER_MS,
        "transmissions_per_window": 1,
        "class_names": [m.id for m in mixtures] + [VERDICT_NO_SIGNATURE],
        "windows": entries,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return manifest


def load_dataset(dataset_dir):
    """Load a dataset directory; returns (manifest, mixtures, windows)."""
    root = Path(dataset_dir)
    manifest = json.loads((root / "manifest.json").read_text())
    mixtures, _ = gmm_mod.load_signature_set(root / "sigset.json")
    windows = []
    for entry in manifest["windows"]:
        stream, _sidecar = capture_mod.read_capture(root / entry["file"])
        windows.append(LabeledWindow(entry["window_id"], stream, entry["label"]))
    return manifest, mixtures, windows


# ---------------------------------------------------------------------------
# Evaluation runs
# ---------------------------------------------------------------------------

def run_eval(cfg: ExperimentConfig, out_dir=None,
             mixtures: list[GaussianMixture] | None = None,
             detector_overrides: dict | None = None,
             use_mirror: bool = True) -> MetricsBundle:
    """Generate (in memory) and evaluate one scenario end to end.

    Each window is duplicated through the mirror tee; the detector consumes
    one branch while the other is checksummed, standing in for the main
    receive chain. Writes metrics.json, confusion.csv, and energy_cdf.csv
    when ``out_dir`` is given.
    """
    cfg = cfg.resolved()
    if mixtures is None:
        mixtures = build_signature_set(cfg)
    det_cfg = detector_config_for(cfg, mixtures, **(detector_overrides or {}))

    def mirrored_windows():
        for lw, _record in iter_windows(cfg, mixtures):
            if use_mirror:
                branch_a, branch_b = mirror(lw.stream)
                branch_b.checksum()
                yield LabeledWindow(lw.window_id, branch_a.collect(), lw.label)
            else:
                yield lw

    bundle = evaluate(mirrored_windows(), det_cfg)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        bundle.save_json(out / "metrics.json")
        bundle.save_confusion_csv(out / "confusion.csv")
        _write_energy_cdf_csv(cfg, mixtures, out / "energy_cdf.csv")
    return bundle


def _write_energy_cdf_csv(cfg: ExperimentConfig, mixtures, path,
                          n_points: int = 201, windows_per_case: int = 20) -> None:
    """Energy quantile tables for baseline vs. each embedded class."""
    cases = _covertness_streams(cfg, mixtures, windows_per_case)
    levels = np.linspace(0.0, 1.0, n_points)
    columns = {}
    for name, stream in cases.items():
        columns[name] = np.quantile(stream.magnitudes() ** 2, levels)
    with open(path, "w", newline="") as f:
        f.write("probability," + ",".join(columns) + "\n")
        for i, level in enumerate(levels):
            f.write(f"{level:.6f}," + ",".join(f"{columns[c][i]:.8f}" for c in columns) + "\n")


def _covertness_streams(cfg: ExperimentConfig, mixtures,
                        n_windows: int) -> dict[str, IqStream]:
    """Concatenated baseline / embedded streams sharing the same payload."""
    cfg = cfg.resolved()
    sched_plain = replace(cfg.schedule(), gating_prob=1.0, stealth=None)
    sched_stealth = replace(
        cfg.schedule(), gating_prob=1.0,
        stealth=StealthConfig(cfg.stealth_strength, cfg.stealth_rms_window))
    mix = mixtures[0]
    base_parts, plain_parts, stealth_parts = [], [], []
    for w in range(n_windows):
        payload = generate_payload(cfg.period_ms, cfg.mod_order,
                                   _window_rng(cfg.seed, w, 10))
        plain, _ = embed(payload, mix, sched_plain, _window_rng(cfg.seed, w, 11))
        stealth, _ = embed(payload, mix, sched_stealth, _window_rng(cfg.seed, w, 11))
        base_parts.append(payload.samples)
        plain_parts.append(plain.samples)
        stealth_parts.append(stealth.samples)
    return {
        "baseline": IqStream(np.concatenate(base_parts)),
        "embedded": IqStream(np.concatenate(plain_parts)),
        "stealth": IqStream(np.concatenate(stealth_parts)),
    }


def covertness_report(cfg: ExperimentConfig,
                      mixtures: list[GaussianMixture] | None = None,
                      n_windows: int = 50, out_dir=None) -> dict:
    """Compare per-sample energy distributions of embedded streams against
    the unembedded baseline via the two-sample KS statistic."""
    cfg = cfg.resolved()
    if mixtures is None:
        mixtures = build_signature_set(cfg)
    cases = _covertness_streams(cfg, mixtures, n_windows)
    base_energy = cases["baseline"].magnitudes() ** 2
    ks_plain = gmm_mod.ks_two_sample(cases["embedded"].magnitudes() ** 2, base_energy)
    ks_stealth = gmm_mod.ks_two_sample(cases["stealth"].magnitudes() ** 2, base_energy)
    report = {
        "experiment": cfg.to_dict(),
        "windows": n_windows,
        "ks_embedded_vs_baseline": ks_plain,
        "ks_stealth_vs_baseline": ks_stealth,
        "stealth_improves": ks_stealth < ks_plain,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "covertness.json").write_text(json.dumps(report, indent=2))
        _write_energy_cdf_csv(cfg, mixtures, out / "energy_cdf.csv",
                              windows_per_case=n_windows)
    return report


def run_bench(base_cfg: ExperimentConfig, presets: list[str] | None = None,
              out_dir=None) -> list[dict]:
    """Run the evaluation matrix over the presets and summarize per row."""
    rows = []
    for preset in presets or sorted(PRESETS):
        cfg = replace(base_cfg, preset=preset, n_el=None, period_ms=None).resolved()
        mixtures = build_signature_set(cfg)
        bundle = run_eval(cfg, mixtures=mixtures)
        rows.append({
            "preset": preset,
            "n_el": cfg.n_el,
            "period_ms": cfg.period_ms,
            "stealth": cfg.stealth,
            "accuracy": bundle.accuracy,
            "f1_macro": bundle.f1_macro,
            "latency_ms": bundle.latency_ms,
            "config_digest": bundle.config_digest,
        })
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "bench.json").write_text(json.dumps(rows, indent=2))
    return rows


def format_bench_table(rows: list[dict]) -> str:
    header = f"{'preset':>6} {'n_el':>5} {'t_ms':>6} {'stealth':>7} {'accuracy':>9} {'F1':>6} {'total_ms':>9}"
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r['preset']:>6} {r['n_el']:>5} {r['period_ms']:>6.1f} "
            f"{str(r['stealth']):>7} {100 * r['accuracy']:>8.2f}% {r['f1_macro']:>6.3f} "
            f"{r['latency_ms']['total']:>9.3f}"
        )
    return "\n".join(lines)
