"""Classification metrics and report serialization.

The confusion matrix is square over all declared classes (enrolled ids,
``no_signature``, ``unknown``); ``unknown`` never appears as a true label,
so its row stays zero and overall accuracy equals trace/total exactly.
Macro F1 averages over the classes that can occur as true labels.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .detector import VERDICT_UNKNOWN


def config_digest(obj) -> str:
    """sha256 of the canonical JSON form of a config-like object."""
    if hasattr(obj, "to_dict"):
        obj = obj.to_dict()
    text = json.dumps(obj, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def confusion_matrix(true_labels, predicted, classes: list[str]) -> np.ndarray:
    index = {c: i for i, c in enumerate(classes)}
    mat = np.zeros((len(classes), len(classes)), dtype=np.int64)
    for t, p in zip(true_labels, predicted):
        mat[index[t], index[p]] += 1
    return mat


def per_class_stats(mat: np.ndarray, classes: list[str]) -> dict[str, dict[str, float]]:
    out = {}
    for i, name in enumerate(classes):
        tp = float(mat[i, i])
        fp = float(mat[:, i].sum() - tp)
        fn = float(mat[i, :].sum() - tp)
        precision = tp / (tp + fp) if tp + fp > 0 else 0.0
        recall = tp / (tp + fn) if tp + fn > 0 else 0.0
        f1 = 2 * precision * recall / (precision + recall) if precision + recall > 0 else 0.0
        out[name] = {
            "precision": precision,
            "recall": recall,
            "f1": f1,
            "support": int(mat[i, :].sum()),
        }
    return out


@dataclass
class MetricsBundle:
    """Aggregated evaluation results for one detector run."""

    class_names: list[str]
    confusion: np.ndarray
    accuracy: float
    f1_macro: float
    per_class: dict[str, dict[str, float]]
    latency_ms: dict[str, float]
    replay_flags: int
    n_windows: int
    config_digest: str
    reports: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "config_digest": self.config_digest,
            "n_windows": self.n_windows,
            "class_names": self.class_names,
            "confusion_matrix": self.confusion.tolist(),
            "accuracy": self.accuracy,
            "f1_macro": self.f1_macro,
            "per_class_precision_recall": self.per_class,
            "replay_flags": self.replay_flags,
            "latency_ms": {
                "capture": self.latency_ms["capture"],
                "processing": self.latency_ms["processing"],
                "classification": self.latency_ms["classification"],
                "total": self.latency_ms["total"],
            },
        }

    def save_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2))

    def save_confusion_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(["true\\predicted"] + self.class_names)
            for name, row in zip(self.class_names, self.confusion):
                writer.writerow([name] + [int(v) for v in row])

    def summary_lines(self) -> list[str]:
        lines = [
            f"windows: {self.n_windows}",
            f"accuracy: {100.0 * self.accuracy:.2f}%",
            f"macro F1: {self.f1_macro:.4f}",
            f"replay flags: {self.replay_flags}",
            "latency (mean per window): "
            + ", ".join(f"{k}={v:.3f} ms" for k, v in self.latency_ms.items()),
        ]
        return lines


def build_bundle(true_labels, predicted, classes: list[str],
                 latency_ms: dict[str, float], replay_flags: int,
                 detector_cfg=None) -> MetricsBundle:
    mat = confusion_matrix(true_labels, predicted, classes)
    total = int(mat.sum())
    accuracy = float(np.trace(mat)) / total if total else 0.0
    stats = per_class_stats(mat, classes)
    scored = [c for c in classes if c != VERDICT_UNKNOWN]
    f1_macro = float(np.mean([stats[c]["f1"] for c in scored])) if scored else 0.0
    digest = ""
    if detector_cfg is not None:
        digest = config_digest({
            "enrolled": [m.id for m in detector_cfg.enrolled],
            "schedule": detector_cfg.schedule.to_dict(),
            "loglik_floor": detector_cfg.loglik_floor,
            "ks_reject": detector_cfg.ks_reject,
            "margin": detector_cfg.margin,
            "replay_horizon": detector_cfg.replay_horizon,
            "quantization": detector_cfg.quantization,
            "jitter_search": detector_cfg.jitter_search,
            "noise_std": detector_cfg.noise_std,
            "method": detector_cfg.method,
        })
    return MetricsBundle(
        class_names=list(classes),
        confusion=mat,
        accuracy=accuracy,
        f1_macro=f1_macro,
        per_class=stats,
        latency_ms=dict(latency_ms),
        replay_flags=replay_flags,
        n_windows=len(true_labels),
        config_digest=digest,
    )
