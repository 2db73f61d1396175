"""Command-line interface.

Subcommands: gen-sigs, embed, detect, dataset, export-tensors, bench,
covertness. Global options --seed/--config/--out apply to every
subcommand; settings resolve as flags > config file > defaults.

Exit codes: 0 success, 2 configuration error, 3 signature-set generation
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import capture as capture_mod
from . import gmm as gmm_mod
from . import harness, tensors
from .baseband import ChannelConfig, apply_channel, generate_payload
from .detector import DetectorConfig, detect_window
from .embed import EmbedSchedule, StealthConfig, embed
from .gmm import AttemptsExhausted
from .harness import ConfigError, ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_GENERATION = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="iqsig",
        description="Physical-layer signature embedding and detection simulator",
    )
    parser.add_argument("--seed", type=int, default=None, help="global RNG seed")
    parser.add_argument("--config", type=Path, default=None,
                        help="JSON file with experiment settings")
    parser.add_argument("--out", type=Path, default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-sigs", help="generate a KS-separated signature set")
    p.add_argument("--n", type=int, default=None, help="number of signatures")
    p.add_argument("--epsilon", type=float, default=None, help="minimum pairwise KS distance")
    p.add_argument("--max-components", type=int, default=None)
    p.add_argument("--max-attempts", type=int, default=None)

    p = sub.add_parser("embed", help="embed signatures into a synthetic payload capture")
    p.add_argument("--sigset", type=Path, required=True)
    p.add_argument("--sig-id", type=str, default=None, help="signature to embed (default: first)")
    p.add_argument("--duration-ms", type=float, default=10.0)
    p.add_argument("--mod", choices=("qpsk", "16qam"), default=None)
    p.add_argument("--n-el", type=int, default=None)
    p.add_argument("--period-ms", type=float, default=None)
    p.add_argument("--gating-prob", type=float, default=None)
    p.add_argument("--stealth", action="store_true")
    p.add_argument("--stealth-strength", type=float, default=None)
    p.add_argument("--snr-db", type=float, default=None,
                   help="channel SNR in dB (default 20; pass inf for a clean channel)")
    p.add_argument("--name", type=str, default="capture", help="output file stem")

    p = sub.add_parser("detect", help="run the detector over a capture file")
    p.add_argument("--sigset", type=Path, required=True)
    p.add_argument("--capture", type=Path, required=True, nargs="+")
    p.add_argument("--method", choices=("loglik", "ks"), default="loglik")
    p.add_argument("--noise-std", type=float, default=None,
                   help="radial magnitude noise for the detector model "
                        "(default: derived from the sidecar channel)")

    p = sub.add_parser("dataset", help="synthesize a labeled capture dataset")
    p.add_argument("--preset", type=str, default=None, choices=sorted(harness.PRESETS) + ["custom"])
    p.add_argument("--windows-per-class", type=int, default=None)
    p.add_argument("--n-el", type=int, default=None)
    p.add_argument("--period-ms", type=float, default=None)
    p.add_argument("--stealth", action="store_true")
    p.add_argument("--snr-db", type=float, default=None)
    p.add_argument("--mod", choices=("qpsk", "16qam"), default=None)

    p = sub.add_parser("export-tensors", help="export a dataset in the (N,60,36,2) layout")
    p.add_argument("--dataset", type=Path, required=True)

    p = sub.add_parser("bench", help="run the preset evaluation matrix")
    p.add_argument("--presets", type=str, default=None,
                   help="comma-separated preset ids (default: all)")
    p.add_argument("--windows-per-class", type=int, default=None)
    p.add_argument("--stealth", action="store_true")
    p.add_argument("--snr-db", type=float, default=None)

    p = sub.add_parser("covertness", help="energy-CDF analysis: baseline vs embedded vs stealth")
    p.add_argument("--preset", type=str, default=None)
    p.add_argument("--windows", type=int, default=50)
    p.add_argument("--stealth-strength", type=float, default=None)

    return parser


def _experiment_config(args, flag_map: dict) -> ExperimentConfig:
    """Resolve an ExperimentConfig: defaults < --config file < explicit flags."""
    settings: dict = {}
    if args.config is not None:
        try:
            settings.update(json.loads(Path(args.config).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config file {args.config}: {exc}") from exc
    if args.seed is not None:
        settings["seed"] = args.seed
    for key, value in flag_map.items():
        if value is not None and value is not False:
            settings[key] = value
    return ExperimentConfig.from_dict(settings)


def _out_dir(args, default: str) -> Path:
    out = args.out if args.out is not None else Path(default)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _cmd_gen_sigs(args) -> int:
    cfg = _experiment_config(args, {
        "n_signatures": args.n,
        "ks_epsilon": args.epsilon,
        "max_components": args.max_components,
    })
    gen_cfg = cfg.generation_config()
    if args.max_attempts is not None:
        gen_cfg = replace(gen_cfg, max_attempts=args.max_attempts)
    mixtures = gmm_mod.generate_signature_set(gen_cfg)
    out = _out_dir(args, "out")
    path = out / "sigset.json"
    gmm_mod.save_signature_set(path, mixtures, gen_cfg)
    mat = gmm_mod.pairwise_ks_matrix(mixtures)
    print(f"wrote {len(mixtures)} signatures to {path}")
    if len(mixtures) > 1:
        off_diag = mat[np.triu_indices(len(mixtures), k=1)]
        print(f"pairwise KS distances: min={off_diag.min():.3f} max={off_diag.max():.3f}")
    return EXIT_OK


def _cmd_embed(args) -> int:
    mixtures, _ = gmm_mod.load_signature_set(args.sigset)
    by_id = {m.id: m for m in mixtures}
    sig_id = args.sig_id or mixtures[0].id
    if sig_id not in by_id:
        raise ConfigError(f"signature id {sig_id!r} not in {sorted(by_id)}")
    cfg = _experiment_config(args, {
        "mod_order": args.mod,
        "n_el": args.n_el,
        "period_ms": args.period_ms,
        "gating_prob": args.gating_prob,
        "stealth": args.stealth,
        "stealth_strength": args.stealth_strength,
        "snr_db": args.snr_db,
    })
    cfg = cfg.resolved()
    rng = np.random.default_rng(cfg.seed)
    payload = generate_payload(args.duration_ms, cfg.mod_order, rng)
    stream, record = embed(payload, by_id[sig_id], cfg.schedule(), rng)
    noisy = apply_channel(stream, cfg.channel_config(), rng)
    out = _out_dir(args, "out")
    path = out / f"{args.name}.vphy"
    capture_mod.write_capture(path, noisy, sidecar={
        "label": sig_id if record.transmitted else "no_signature",
        "channel": cfg.channel_config().to_dict(),
        "embedding": record.to_dict(),
    })
    print(f"wrote {path} ({len(noisy)} samples, "
          f"{len(record.transmitted)}/{len(record.slots)} slots transmitted)")
    return EXIT_OK


def _cmd_detect(args) -> int:
    mixtures, _ = gmm_mod.load_signature_set(args.sigset)
    for cap_path in args.capture:
        stream, sidecar = capture_mod.read_capture(cap_path)
        if not sidecar or "embedding" not in sidecar or sidecar["embedding"] is None:
            raise ConfigError(
                f"{cap_path}: sidecar with the embedding schedule is required for detection")
        schedule = EmbedSchedule.from_dict(sidecar["embedding"]["schedule"])
        channel = ChannelConfig.from_dict(sidecar.get("channel", {}))
        if args.noise_std is not None:
            noise_std = args.noise_std
        elif channel.noiseless:
            noise_std = 0.0
        else:
            noise_std = math.sqrt(10.0 ** (-channel.snr_db / 10.0) / 2.0)
        det_cfg = DetectorConfig(
            enrolled=tuple(mixtures), schedule=schedule, noise_std=noise_std,
            jitter_search=channel.timing_jitter_samples + 2
            if channel.timing_jitter_samples else 0,
            method=args.method,
        )
        report = detect_window(stream, det_cfg, window_id=Path(cap_path).stem)
        print(json.dumps(report.to_dict(), indent=2))
    return EXIT_OK


def _cmd_dataset(args) -> int:
    cfg = _experiment_config(args, {
        "preset": args.preset,
        "windows_per_class": args.windows_per_class,
        "n_el": args.n_el,
        "period_ms": args.period_ms,
        "stealth": args.stealth,
        "snr_db": args.snr_db,
        "mod_order": args.mod,
    })
    out = _out_dir(args, "dataset")
    manifest = harness.run_dataset(cfg, out)
    print(f"wrote {len(manifest['windows'])} windows to {out}")
    return EXIT_OK


def _cmd_export_tensors(args) -> int:
    manifest, _mixtures, windows = harness.load_dataset(args.dataset)
    out = _out_dir(args, "tensors")
    tmanifest = tensors.export_tensors(windows, out, manifest["class_names"])
    print(f"exported tensor shape {tmanifest['shape']} to {out}")
    return EXIT_OK


def _cmd_bench(args) -> int:
    cfg = _experiment_config(args, {
        "windows_per_class": args.windows_per_class,
        "stealth": args.stealth,
        "snr_db": args.snr_db,
    })
    presets = args.presets.split(",") if args.presets else None
    out = _out_dir(args, "bench")
    rows = harness.run_bench(cfg, presets, out)
    print(harness.format_bench_table(rows))
    print(f"wrote {out / 'bench.json'}")
    return EXIT_OK


def _cmd_covertness(args) -> int:
    cfg = _experiment_config(args, {
        "preset": args.preset,
        "stealth_strength": args.stealth_strength,
    })
    out = _out_dir(args, "covertness")
    report = harness.covertness_report(cfg, n_windows=args.windows, out_dir=out)
    print(f"energy-CDF KS vs baseline: embedded={report['ks_embedded_vs_baseline']:.4f} "
          f"stealth={report['ks_stealth_vs_baseline']:.4f}")
    print(f"wrote {out / 'covertness.json'}")
    return EXIT_OK


_COMMANDS = {
    "gen-sigs": _cmd_gen_sigs,
    "embed": _cmd_embed,
    "detect": _cmd_detect,
    "dataset": _cmd_dataset,
    "export-tensors": _cmd_export_tensors,
    "bench": _cmd_bench,
    "covertness": _cmd_covertness,
}


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except AttemptsExhausted as exc:
        print(f"generation failed: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (ConfigError, ValueError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
