"""Gaussian mixture signature distributions.

Each transmitter secret is a one-dimensional Gaussian mixture over a
normalized amplitude range. This module provides density/CDF evaluation,
truncated sampling, the Kolmogorov-Smirnov distance between mixtures, and
rejection-based generation of signature sets whose members are pairwise
separated by a minimum KS distance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import kernels

KS_GRID_POINTS = 10_001
# Consecutive full rejection rounds tolerated while truncating draws to the
# amplitude range before sampling is declared pathological.
_MAX_REJECTION_ROUNDS = 1_000


class AttemptsExhausted(RuntimeError):
    """Signature-set generation ran out of candidate attempts."""


class SamplingError(RuntimeError):
    """Truncated sampling kept rejecting draws (std too large for the range)."""


@dataclass(frozen=True)
class GaussianComponent:
    """One weighted Gaussian in a mixture."""

    weight: float
    mean: float
    std: float

    def __post_init__(self):
        if not 0.0 < self.weight <= 1.0:
            raise ValueError(f"component weight must be in (0, 1], got {self.weight}")
        if not self.std > 0.0:
            raise ValueError(f"component std must be positive, got {self.std}")


@dataclass(frozen=True)
class GaussianMixture:
    """A signature distribution: weighted Gaussians over an amplitude range.

    Invariants enforced at construction: weights sum to one (1e-9), the
    amplitude range satisfies 0 < low < high <= 1, and every component mean
    lies inside the range.
    """

    components: tuple[GaussianComponent, ...]
    amplitude_range: tuple[float, float] = (0.5, 1.0)
    id: str = ""

    def __post_init__(self):
        if not self.components:
            raise ValueError("mixture needs at least one component")
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "amplitude_range", tuple(float(v) for v in self.amplitude_range))
        lo, hi = self.amplitude_range
        if not (0.0 < lo < hi <= 1.0):
            raise ValueError(f"amplitude range must satisfy 0 < low < high <= 1, got {lo}, {hi}")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"component weights must sum to 1, got {total}")
        for c in self.components:
            if not lo <= c.mean <= hi:
                raise ValueError(f"component mean {c.mean} outside amplitude range [{lo}, {hi}]")

    @cached_property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.components])

    @cached_property
    def means(self) -> np.ndarray:
        return np.array([c.mean for c in self.components])

    @cached_property
    def stds(self) -> np.ndarray:
        return np.array([c.std for c in self.components])

    @property
    def max_std(self) -> float:
        return float(self.stds.max())


@dataclass(frozen=True)
class GenerationConfig:
    """Parameters for rejection-based signature-set generation."""

    n_signatures: int
    ks_epsilon: float
    max_components: int = 5
    amplitude_range: tuple[float, float] = (0.5, 1.0)
    std_range: tuple[float, float] = (0.01, 0.05)
    max_attempts: int = 10_000
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "amplitude_range", tuple(float(v) for v in self.amplitude_range))
        object.__setattr__(self, "std_range", tuple(float(v) for v in self.std_range))
        if self.n_signatures < 1:
            raise ValueError("n_signatures must be >= 1")
        if not 0.0 < self.ks_epsilon < 1.0:
            raise ValueError(f"ks_epsilon must be in (0, 1), got {self.ks_epsilon}")
        if self.max_components < 1:
            raise ValueError("max_components must be >= 1")
        if self.max_attempts < self.n_signatures:
            raise ValueError("max_attempts must be >= n_signatures")
        if not 0.0 < self.std_range[0] <= self.std_range[1]:
            raise ValueError(f"bad std_range {self.std_range}")

    def to_dict(self) -> dict:
        return {
            "n_signatures": self.n_signatures,
            "ks_epsilon": self.ks_epsilon,
            "max_components": self.max_components,
            "amplitude_range": list(self.amplitude_range),
            "std_range": list(self.std_range),
            "max_attempts": self.max_attempts,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GenerationConfig":
        return cls(
            n_signatures=int(d["n_signatures"]),
            ks_epsilon=float(d["ks_epsilon"]),
            max_components=int(d.get("max_components", 5)),
            amplitude_range=tuple(d.get("amplitude_range", (0.5, 1.0))),
            std_range=tuple(d.get("std_range", (0.01, 0.05))),
            max_attempts=int(d.get("max_attempts", 10_000)),
            seed=int(d.get("seed", 0)),
        )


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.atleast_1d(np.asarray(x, dtype=np.float64))
    return np.ascontiguousarray(arr), np.isscalar(x) or np.ndim(x) == 0


def pdf(gmm: GaussianMixture, x):
    """Mixture probability density at ``x`` (scalar or array).

    Defined on all reals: the weighted sum of the component Gaussian
    densities, without truncation to the amplitude range.
    """
    arr, scalar = _as_array(x)
    out = kernels.mixture_pdf(arr, gmm.weights, gmm.means, gmm.stds)
    return float(out[0]) if scalar else out


def cdf(gmm: GaussianMixture, x):
    """Mixture cumulative distribution at ``x`` (scalar or array)."""
    arr, scalar = _as_array(x)
    out = kernels.mixture_cdf(arr, gmm.weights, gmm.means, gmm.stds)
    return float(out[0]) if scalar else out


def evaluation_grid(a: GaussianMixture, b: GaussianMixture,
                    n_points: int = KS_GRID_POINTS) -> np.ndarray:
    """Dense grid covering both mixtures' mass: range padded by 6 max stds."""
    smax = max(a.max_std, b.max_std)
    lo = min(a.amplitude_range[0], b.amplitude_range[0]) - 6.0 * smax
    hi = max(a.amplitude_range[1], b.amplitude_range[1]) + 6.0 * smax
    return np.linspace(lo, hi, n_points)


def ks_distance(a: GaussianMixture, b: GaussianMixture,
                n_points: int = KS_GRID_POINTS) -> float:
    """Kolmogorov-Smirnov distance between two mixtures.

    Supremum of the absolute CDF difference over a fixed dense grid
    (deterministic, no sampling noise). Symmetric, in [0, 1], and zero
    exactly when the CDFs coincide on the grid.
    """
    grid = evaluation_grid(a, b, n_points)
    return kernels.ks_grid_stat(grid, a.weights, a.means, a.stds,
                                b.weights, b.means, b.stds)


def ks_two_sample(a_values: np.ndarray, b_values: np.ndarray) -> float:
    """Two-sample KS statistic between empirical distributions."""
    a = np.sort(np.asarray(a_values, dtype=np.float64))
    b = np.sort(np.asarray(b_values, dtype=np.float64))
    if a.size == 0 or b.size == 0:
        raise ValueError("ks_two_sample needs nonempty samples")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def sample(gmm: GaussianMixture, n: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``n`` values from the mixture truncated to its amplitude range.

    Rejection sampling: a draw outside the range is redone (component choice
    included), so the result follows the mixture restricted to the range
    rather than a clamped version with boundary spikes.

    Raises SamplingError when some position still has no accepted draw after
    1,000 rejection rounds, which signals a pathological std/range combination.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    lo, hi = gmm.amplitude_range
    cum = np.cumsum(gmm.weights)
    out = np.empty(n)
    pending = np.arange(n)
    for _ in range(_MAX_REJECTION_ROUNDS):
        k = pending.size
        if k == 0:
            return out
        comp = np.searchsorted(cum, rng.random(k), side="right")
        comp = np.minimum(comp, len(cum) - 1)
        draws = rng.normal(gmm.means[comp], gmm.stds[comp])
        ok = (draws >= lo) & (draws <= hi)
        out[pending[ok]] = draws[ok]
        pending = pending[~ok]
    raise SamplingError(
        f"rejection sampling did not converge for {pending.size} of {n} values; "
        f"component stds are likely too large for range [{lo}, {hi}]"
    )


def random_mixture(cfg: GenerationConfig, rng: np.random.Generator, id: str = "") -> GaussianMixture:
    """Draw one candidate mixture: component count uniform in [1, max_components],
    means uniform in the amplitude range, stds uniform in the std range, and
    weights from normalized independent uniforms."""
    k = int(rng.integers(1, cfg.max_components + 1))
    means = rng.uniform(cfg.amplitude_range[0], cfg.amplitude_range[1], k)
    stds = rng.uniform(cfg.std_range[0], cfg.std_range[1], k)
    raw = rng.uniform(0.0, 1.0, k)
    weights = raw / raw.sum()
    # Renormalize in float to absorb rounding drift below the 1e-9 invariant.
    weights[-1] = 1.0 - weights[:-1].sum()
    comps = tuple(GaussianComponent(float(w), float(m), float(s))
                  for w, m, s in zip(weights, means, stds))
    return GaussianMixture(comps, cfg.amplitude_range, id=id)


def generate_signature_set(cfg: GenerationConfig) -> list[GaussianMixture]:
    """Generate ``n_signatures`` mixtures, each accepted only if its KS
    distance to every previously accepted mixture exceeds ``ks_epsilon``.

    Deterministic for a given seed. Raises AttemptsExhausted once
    ``max_attempts`` candidates have been drawn without completing the set.
    """
    rng = np.random.default_rng(cfg.seed)
    accepted: list[GaussianMixture] = []
    attempts = 0
    while len(accepted) < cfg.n_signatures:
        if attempts >= cfg.max_attempts:
            raise AttemptsExhausted(
                f"generated {len(accepted)}/{cfg.n_signatures} signatures in "
                f"{attempts} attempts; ks_epsilon={cfg.ks_epsilon} is likely too "
                f"large for range {cfg.amplitude_range}"
            )
        attempts += 1
        cand = random_mixture(cfg, rng, id=f"sig{len(accepted) + 1}")
        if all(ks_distance(cand, prev) > cfg.ks_epsilon for prev in accepted):
            accepted.append(cand)
    return accepted


def pairwise_ks_matrix(mixtures: list[GaussianMixture]) -> np.ndarray:
    """Full symmetric KS-distance matrix (zero diagonal)."""
    n = len(mixtures)
    mat = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            mat[i, j] = mat[j, i] = ks_distance(mixtures[i], mixtures[j])
    return mat


# ---------------------------------------------------------------------------
# Signature-set JSON interchange (the shared secret between both sides)
# ---------------------------------------------------------------------------

def mixture_to_dict(gmm: GaussianMixture) -> dict:
    return {
        "id": gmm.id,
        "components": [
            {"weight": c.weight, "mean": c.mean, "std": c.std} for c in gmm.components
        ],
        "amplitude_range": list(gmm.amplitude_range),
    }


def mixture_from_dict(d: dict) -> GaussianMixture:
    comps = tuple(
        GaussianComponent(float(c["weight"]), float(c["mean"]), float(c["std"]))
        for c in d["components"]
    )
    return GaussianMixture(comps, tuple(d["amplitude_range"]), id=str(d.get("id", "")))


def save_signature_set(path, mixtures: list[GaussianMixture],
                       config: GenerationConfig | None = None) -> None:
    doc = {"signatures": [mixture_to_dict(m) for m in mixtures]}
    if config is not None:
        doc["generation_config"] = config.to_dict()
    Path(path).write_text(json.dumps(doc, indent=2))


def load_signature_set(path) -> tuple[list[GaussianMixture], GenerationConfig | None]:
    doc = json.loads(Path(path).read_text())
    mixtures = [mixture_from_dict(d) for d in doc["signatures"]]
    cfg = doc.get("generation_config")
    return mixtures, (GenerationConfig.from_dict(cfg) if cfg else None)
