"""Tensor export of windows in the (N, 60, 36, 2) training layout.

Each 1 ms slice of 2160 samples becomes one example of 60 groups x 36
samples x 2 (I, Q) float32, row-major, so group ``g`` index ``s`` holds
original sample ``36*g + s``. Multi-millisecond windows export one example
per millisecond; the examples share a group id so they can be regrouped.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .detector import LabeledWindow

GROUPS = 60
GROUP_LEN = 36
SAMPLES_PER_EXAMPLE = GROUPS * GROUP_LEN  # 2160 = one millisecond

TENSOR_FILE = "tensors.bin"
LABELS_FILE = "labels.bin"
GROUPS_FILE = "groups.bin"
MANIFEST_FILE = "tensor_manifest.json"


class ShapeMismatch(ValueError):
    """Window length is not a whole number of 2160-sample milliseconds."""


def window_to_examples(samples: np.ndarray) -> np.ndarray:
    """Reshape a window into per-millisecond (60, 36, 2) float32 examples."""
    n = len(samples)
    if n == 0 or n % SAMPLES_PER_EXAMPLE != 0:
        raise ShapeMismatch(
            f"window of {n} samples is not a multiple of {SAMPLES_PER_EXAMPLE}"
        )
    n_ms = n // SAMPLES_PER_EXAMPLE
    out = np.empty((n_ms, GROUPS, GROUP_LEN, 2), dtype="<f4")
    shaped = samples.reshape(n_ms, GROUPS, GROUP_LEN)
    out[..., 0] = shaped.real
    out[..., 1] = shaped.imag
    return out


def export_tensors(windows: list[LabeledWindow], out_dir,
                   class_names: list[str] | None = None) -> dict:
    """Write tensors.bin / labels.bin / groups.bin plus a manifest.

    Labels are int32 class indices (one per example); groups are int32 ids
    tying the examples of one source window together.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if class_names is None:
        class_names = sorted({w.label for w in windows})
    class_index = {name: i for i, name in enumerate(class_names)}

    blocks: list[np.ndarray] = []
    labels: list[int] = []
    groups: list[int] = []
    for group_id, w in enumerate(windows):
        if w.label not in class_index:
            raise ValueError(f"window label {w.label!r} missing from class names")
        examples = window_to_examples(w.stream.samples)
        blocks.append(examples)
        labels.extend([class_index[w.label]] * len(examples))
        groups.extend([group_id] * len(examples))

    tensor = np.concatenate(blocks) if blocks else np.empty((0, GROUPS, GROUP_LEN, 2), "<f4")
    tensor.tofile(out / TENSOR_FILE)
    np.asarray(labels, dtype="<i4").tofile(out / LABELS_FILE)
    np.asarray(groups, dtype="<i4").tofile(out / GROUPS_FILE)
    manifest = {
        "shape": [int(tensor.shape[0]), GROUPS, GROUP_LEN, 2],
        "dtype": "float32",
        "byte_order": "little",
        "labels_dtype": "int32",
        "groups_dtype": "int32",
        "class_names": list(class_names),
        "examples_per_window_ms": 1,
        "files": {"tensors": TENSOR_FILE, "labels": LABELS_FILE, "groups": GROUPS_FILE},
    }
    (out / MANIFEST_FILE).write_text(json.dumps(manifest, indent=2))
    return manifest


def read_tensors(tensor_dir) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict]:
    """Read back an export: (tensor, labels, groups, manifest)."""
    root = Path(tensor_dir)
    manifest = json.loads((root / MANIFEST_FILE).read_text())
    shape = tuple(manifest["shape"])
    tensor = np.fromfile(root / manifest["files"]["tensors"], dtype="<f4").reshape(shape)
    labels = np.fromfile(root / manifest["files"]["labels"], dtype="<i4")
    groups = np.fromfile(root / manifest["files"]["groups"], dtype="<i4")
    return tensor, labels, groups, manifest
